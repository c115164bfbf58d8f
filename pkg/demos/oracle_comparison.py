"""How good is the phase-integral description at finite atom number?

The exact Fock-state probability of a detection record uses falling
factorials of the populations; the phase integral replaces them by powers.
Their ratio drifts from 1 like P^2/N, and for one atom per mode the
approximation predicts a result that cannot happen.
"""
import numpy as np

from fockphase import CondensateSpec, DetectionEvent, exact_sequence_probability
from fockphase.spin import count_probability

rng = np.random.default_rng(0)
events = [DetectionEvent("position", u=u) for u in rng.uniform(0, 2 * np.pi, 10)]
print("     N   exact / phase-integral - 1")
for N in (100, 1000, 10000, 100000):
    spec = CondensateSpec(N // 2, N // 2, k_b=(1, 0, 0))
    fa = exact_sequence_probability(events, spec, "falling").value
    pw = exact_sequence_probability(events, spec, "power").value
    print(f"{N:7d}   {fa / pw - 1: .3e}")

one = CondensateSpec(1, 1, spinful=True)
pm = [DetectionEvent("spin", theta=0.0, eta=1), DetectionEvent("spin", theta=0.0, eta=-1)]
print(f"one atom per mode, +- on the same axis: exact {exact_sequence_probability(pm, one).value:.1e},"
      f" phase integral {count_probability(1, 1):.3f}")
