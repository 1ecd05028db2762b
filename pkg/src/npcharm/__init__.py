"""Numerical toolkit for NPC-space geometry, isometry decay analysis, and
discrete equivariant harmonic sections on the half-cylinder."""

__version__ = "0.1.0"

from .errors import (
    ConvergenceError,
    DomainError,
    FitError,
    InvalidPoint,
    IoError,
    NpcharmError,
    UnsupportedSpace,
    UsageError,
)
from .spaces import (
    ComparisonReport,
    Euclidean,
    EuclideanPoint,
    H2Point,
    Hyperbolic2,
    MetricTree,
    SpdManifold,
    barycenter,
    check_cat_kappa,
    check_npc_inequality,
    distance,
    interp,
    point_from_json,
    point_to_json,
    random_point,
)
from .spd import (
    GroupElement,
    SpdPoint,
    TangentVector,
    group_action,
    spd_distance,
    spd_exp,
    spd_interp,
    spd_log,
    sym_eig,
)
from .tree import TreePoint, tree_from_json, tree_to_json
from .isometries import (
    DecayFit,
    IsometryDescriptor,
    RigidMotion,
    Sl2Isometry,
    TorusMap,
    TreeIsometry,
    almost_flat_torus_map,
    classify_isometry,
    decay_ray,
    fit_exponential_decay,
    flat_torus_map,
    iwasawa,
    measure_displacement,
    min_energy_constant,
    translation_length,
    translation_length_lower_bound,
)
from .cylinder import (
    CylinderGrid,
    CylinderSection,
    EnergyProfile,
    SolveParams,
    calculus_weight_check,
    chord_loop,
    discrete_energy,
    energy_growth_profile,
    prototype_section,
    relax_dirichlet,
    singular_set_flags,
    solve_punctured_disk,
    sublog_growth_check,
    theta_energy_function,
    uniqueness_probe,
)
from .bochner import (
    PolyGenerator,
    ResidualReport,
    TestMap,
    check_commutation,
    check_form4,
    fd_forms,
    hermitian_negativity_probe,
    siu_residual_flat,
)
