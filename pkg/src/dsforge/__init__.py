"""Lazy first-cohomology generators of the insulating region of tetrahedral meshes.

Typical use::

    from dsforge import generate_canonical, CellComplex, split_regions, run_ds

    mesh = generate_canonical("solid-torus-in-box", 2)
    K = CellComplex.from_mesh(mesh)
    split = split_regions(K, {1})
    lazy = run_ds(K, split)
"""

from .basis import (BasisSelection, DualCycle, LinkingMatrix, change_of_basis, compute_linking_matrix,
                    eulerian_cycles, gauss_linking_number, linking_number, order_thinned_cells,
                    surface_cycle)
from .complex import (CellComplex, Chain, Cochain, DualComplex, Subcomplex, build_complex, build_dual,
                      check_invariants, pairing)
from .ds import (LazyGeneratorSet, ThinnedCurrentSet, extend_to_cocycle, plan_extension, run_ds,
                 thin_currents)
from .errors import *  # noqa: F401,F403
from .meshio import MeshFile, RegionSplit, generate_canonical, parse_mesh, split_regions, write_mesh
from .snf import HomologyBasis, SnfDecomposition, betti_numbers, homology, snf, verify_span
from .surface import (SurfaceComponent, SurfaceGeneratorSet, TreeCotree, build_tree_cotree,
                      close_generators, component_from_triangles, extract_components)

__version__ = "0.1.0"
