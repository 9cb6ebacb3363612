"""Walk through the four-skill simulated study: 241 registered functions,
skills a1=(f1,f2), a2=(f2,f4,f5), a3=(f3,f4,f6), a4=(f3,f4,f5,f6), and a bug
planted in f2. Every skill that calls f2 fails; the testing loop has to find
out *which* function is to blame by choosing informative skills.

Run:  python demos/fig3_localization.py
"""
from blamebox import built_in_scenario, run_scenario

scenario = built_in_scenario("fig3", seed=1)
print(f"scenario {scenario.name}: {len(scenario.functions)} functions, "
      f"bug in {scenario.buggy}, {scenario.db_size} stored executions per skill")

result = run_scenario(scenario)

print("\nstep  skill  outcome  p(f1)    p(f2)    best-gain")
for step in result.trace.steps:
    gains = {s: g.gain for s, g in step.gains.items()}
    best = max(gains.values())
    p = step.posterior
    print(f"{step.step:4d}  {step.chosen:5s}  {'ok' if step.success else 'FAIL':7s}"
          f"  {p[0]:.5f}  {p[1]:.5f}  {best:+.4f}")

print("\nexpected information gain at the first planning round:")
for skill, est in result.trace.steps[0].gains.items():
    used = dict(scenario.skills)[skill]
    print(f"  {skill} {used}: {est.gain:.3f} +- {est.stderr:.3f} nats")

print(f"\nconverged: {result.trace.converged} after {len(result.trace.steps)} executions")
print("top blamed functions:")
for name, p in result.top(4):
    print(f"  {name:6s} {p:.6f}")
print(f"candidate set: {result.candidates}")

# the planted bug is recovered with near-certainty, everything else is cleared
assert result.top(1)[0][0] == "f2" and result.posterior_of("f2") > 0.95
others = [result.posterior_of(n) for n in result.registry.names if n not in ("f1", "f2")]
print(f"largest posterior outside {{f1, f2}}: {max(others):.2e}")
