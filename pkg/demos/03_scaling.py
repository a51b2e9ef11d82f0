"""
How the running time grows
==========================

Median runtime of the lazy pipeline on refinements of the solid torus and
a log-log fit against the number of tetrahedra.  Each refinement has 8x
more tetrahedra than the one before.
"""

import sys

from dsforge.cli import bench

top = int(sys.argv[1]) if len(sys.argv) > 1 else 4
rep = bench("solid-torus-in-box", list(range(1, top + 1)), repeats=3)

print(f"{'refine':>6} {'tets':>9} {'cells':>9} {'median s':>9} {'fallback':>8}")
for row in rep["runs"]:
    print(f"{row['refinement']:>6} {row['tetrahedra']:>9} {row['cells']:>9} "
          f"{row['median_s']:>9.4f} {row['fallback_solves']:>8}")
if "exponent" in rep:
    print(f"fitted exponent: {rep['exponent']:.3f}")
