"""Watch a relative phase appear in two Fock-state condensates.

Before any detection the phase density is flat.  Each detected atom lands
where the current phase makes interference likely, and the density narrows
roughly like 1/sqrt(P).  A second run with another seed settles on an
unrelated phase.
"""
import numpy as np

from fockphase import CondensateSpec, EventFactorModel, PhaseDistribution, circular_stats, sample_record

spec = CondensateSpec(5000, 5000, k_b=(1, 0, 0))
model = EventFactorModel.from_spec(spec)
prior = PhaseDistribution.uniform(4096)

for seed in (1, 2):
    rec = sample_record(seed, 200, None, prior, model, spec=spec)
    print(f"seed {seed}")
    print("    P    mean     std   std*sqrt(P)")
    for P in (1, 5, 20, 50, 100, 200):
        s = circular_stats(rec.snapshots[P - 1])
        print(f"  {P:3d}  {s.mean:6.3f}  {s.std:6.3f}  {s.std * np.sqrt(P):6.3f}")
