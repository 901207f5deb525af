"""limsup-lab: desk-scale experiments on limsup sets.

Geometry primitives, the (generalized) singular value function, Hausdorff
content bounds, greedy Vitali coverings, nested Cantor constructions with
mass distributions, local-dimension certification, and an exact-rational
counterexample family.
"""

__version__ = "0.1.0"

from .geom import (
    AxisCube,
    Ball,
    CubeUnion,
    Ellipsoid,
    contains,
    disjoint,
    scale_ball,
    shape_from_json,
    shape_to_json,
    subdivide,
    volume,
)
from .cover import CoverParams, greedy_vitali, kappa2_default, validate_cover
from .content import (
    AnisotropyVector,
    DiscreteMeasure,
    SmoothedShape,
    content_dp,
    falconer_svf,
    kappa1_budget,
    phi_lower_lp,
    phi_of_shape,
    sandwich_check,
    smooth_to_cubes,
    wwx_bound,
)
from .families import (
    ConcentricRule,
    CuspRule,
    DustRule,
    EllipsoidRule,
    FamilySpec,
    ShapePair,
    attach_shapes,
    gen_balls,
    verify_full_measure,
)
from .cantor import (
    ConstructionParams,
    ConstructionTree,
    DirichletSource,
    ExplicitPairsSource,
    RandomCoverSource,
    build,
    c_constants,
    measure_of_ball,
    validate_tree,
)
from .dimest import box_counting, case_split, mdp_lower_bound, verify_case_bounds
from .cex import (
    build_cex,
    kappa_estimate,
    kappa_lower_bound,
    level_measure,
    n_of_a,
    verify_empty_limsup,
)

__all__ = [name for name in dir() if not name.startswith("_")]
