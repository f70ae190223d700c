"""Why three single-gate germs are not enough, and what a greedy search picks.

    python3 demos/germ_design.py
"""

from gstkit.design import (
    amplificationally_complete,
    candidate_germs,
    default_germs,
    gauge_tangent_basis,
    gram_matrix,
    numerical_rank,
    select_germs,
    stacked_jacobian,
)
from gstkit.gateset import ideal_gateset
from gstkit.sequences import format_sequence, seq

target = ideal_gateset()
gauge = gauge_tangent_basis(target)
print(f"gauge rank (gates only): {gauge.rank}, non-gauge directions: {gauge.complement.shape[1]}")

_, sv = gram_matrix(target)
print(f"fiducial Gram matrix rank: {numerical_rank(sv)}")

for name, germs in (("Gi, Gx, Gy", [seq("Gi"), seq("Gx"), seq("Gy")]), ("default 11", default_germs())):
    ac = amplificationally_complete(stacked_jacobian(target, germs), gauge)
    print(f"{name:>10s}: amplified {ac.rank}/{ac.dimension}, complete = {ac.complete}")

res = select_germs(candidate_germs(max_length=4), target)
print(f"greedy search over words up to length 4: {len(res.germs)} germs, score {res.score:.2f}")
print("  " + ", ".join(format_sequence(g) for g in res.germs))
