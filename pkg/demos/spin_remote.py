"""Spin measurements in one region fix the spin orientation in others.

Two internal states share one phase variable.  After measuring transverse
spins in region D, the posterior predicts the preferred axis in regions D'
and D'' that were never touched; equal wavefunctions there give the same
axis.  The counts table shows why the first result is a coin toss while
later ones are strongly correlated.
"""
from fockphase import AnglePolicy, CondensateSpec, RegionLayout, run_region_experiment
from fockphase.spin import count_probability, wallis_reference

print("equal-axis count probabilities, P = 4")
for k in range(5):
    print(f"  {k} up, {4 - k} down: {count_probability(k, 4 - k):.4f}")
print(f"one sequence of ++ : {wallis_reference(2, 0):.4f}  (independent coins would give 0.25)")

layout = RegionLayout.normalized({"D": (4, 1, 1), "D'": (2, 1, 1j), "D''": (2, 1, 1j)})
spec = CondensateSpec(500, 500)
for P in (0, 5, 40):
    run = run_region_experiment(3, P, AnglePolicy(), layout, spec)
    d1, d2 = run.predictions["D'"], run.predictions["D''"]
    print(f"P={P:2d}  D': axis {d1.theta_star:.3f} confidence {d1.confidence:.3f}"
          f"  D'': axis {d2.theta_star:.3f} confidence {d2.confidence:.3f}")
