"""Three condensates: pairwise phases lock, and so does their sum.

Detections from three overlapping condensates build a posterior over two
independent phases.  The third relative phase is fixed by the other two,
so its spread shrinks along with theirs.
"""
from fockphase import CondensateSpec, EventFactorModel, PhaseDistribution, circular_stats, sample_record

spec = CondensateSpec(1000, 1000, n_c=1000, k_b=(1, 0, 0), k_c=(0, 1, 0))
model = EventFactorModel.from_spec(spec)
rec = sample_record(5, 200, None, PhaseDistribution.uniform(128, 2), model, spec=spec)
print("    P   std(ab)  std(bc)  std(ab+bc)")
for P in (1, 10, 50, 200):
    d = rec.snapshots[P - 1]
    a, b, c = (circular_stats(d, combo).std for combo in ((1, 0), (0, 1), (1, 1)))
    print(f"  {P:3d}   {a:6.3f}   {b:6.3f}   {c:6.3f}")
