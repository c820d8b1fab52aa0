"""Exact chain complexes of presheaves of modules on finite spaces."""

from .chain import (
    ChainMap,
    ComplexError,
    PComplex,
    classify,
    cokernel_complex,
    cone,
    cone_data,
    constant_chains,
    direct_sum_complex,
    disk,
    hofib,
    hofib_data,
    homology,
    homology_map,
    homotopy_classes,
    is_presheaf_quasi_iso,
    is_stalkwise_iso,
    mapping_complex,
    null_homotopy,
    sheafify_complex,
    shift,
    simplicial_chains,
    simplicial_tensor,
    single,
    sphere,
    stalk_homology,
    tensor_maps,
    tensor_total,
    unit_complex,
    unit_interval,
    zero_complex,
)
from .linalg import GF, QQ, ZZ, FPModule, ModHom, Ring, smith_form, snf
from .model import (
    cofibrant_replacement,
    cylinder,
    factor_cof_acyclicfib,
    gen_cof,
    generators,
    has_rlp,
    is_acyclic_fibration,
    is_fibration,
    pushout_product,
    solve_lift,
    square_for,
)
from .presheaf import (
    Presheaf,
    PresheafHom,
    constant_presheaf,
    free_presheaf,
    is_sheaf,
    sheafify,
    stalk,
    tensor,
)
from .site import INF, NEG_INF, FinSpace, SiteError, Stratification, discrete, sierpinski, three_point
from .tstruct import (
    RefinedDFunction,
    TStructure,
    TStructureError,
    factor_t,
    heart_project,
    in_D_geq,
    in_D_geq0,
    in_D_leq,
    in_D_leq0,
    is_co_n_equivalence,
    is_n_equivalence,
    orthogonality_group,
    perverse_tstructure,
    truncate,
)

__version__ = "0.1.0"

__all__ = [
    "ChainMap",
    "classify",
    "cofibrant_replacement",
    "cokernel_complex",
    "ComplexError",
    "cone",
    "cone_data",
    "constant_chains",
    "constant_presheaf",
    "cylinder",
    "direct_sum_complex",
    "discrete",
    "disk",
    "factor_cof_acyclicfib",
    "factor_t",
    "FinSpace",
    "FPModule",
    "free_presheaf",
    "gen_cof",
    "generators",
    "GF",
    "has_rlp",
    "heart_project",
    "hofib",
    "hofib_data",
    "homology",
    "homology_map",
    "homotopy_classes",
    "in_D_geq",
    "in_D_geq0",
    "in_D_leq",
    "in_D_leq0",
    "INF",
    "is_acyclic_fibration",
    "is_co_n_equivalence",
    "is_fibration",
    "is_n_equivalence",
    "is_presheaf_quasi_iso",
    "is_sheaf",
    "is_stalkwise_iso",
    "mapping_complex",
    "ModHom",
    "NEG_INF",
    "null_homotopy",
    "orthogonality_group",
    "PComplex",
    "perverse_tstructure",
    "Presheaf",
    "PresheafHom",
    "pushout_product",
    "QQ",
    "RefinedDFunction",
    "Ring",
    "sheafify",
    "sheafify_complex",
    "shift",
    "sierpinski",
    "simplicial_chains",
    "simplicial_tensor",
    "single",
    "SiteError",
    "smith_form",
    "snf",
    "solve_lift",
    "sphere",
    "square_for",
    "stalk",
    "stalk_homology",
    "Stratification",
    "tensor",
    "tensor_maps",
    "tensor_total",
    "three_point",
    "truncate",
    "TStructure",
    "TStructureError",
    "unit_complex",
    "unit_interval",
    "zero_complex",
    "ZZ",
]
