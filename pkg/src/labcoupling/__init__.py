"""Lie algebra bundles over discretised manifolds and couplings with the tangent bundle."""

__version__ = "0.1.0"

from .algebra import (  # noqa: E402
    LieAlgebra,
    ad,
    bracket,
    derivation_space,
    exp_derivation,
    inner_test,
    is_automorphism,
    same_inner_coset,
    validate_algebra,
)
from .bundle import (  # noqa: E402
    LieAlgebraBundle,
    LieConnection,
    check_bundle,
    curvature,
    global_connection_from_locals,
    holonomy_variation_check,
    parallel_transport,
    transport_composition_check,
)
from .coupling import (  # noqa: E402
    CouplingSettings,
    Verdict,
    build_coupling,
    build_transport_charts,
    coupling_exists,
    delta_continuity_test,
)

__all__ = [
    "LieAlgebra",
    "LieAlgebraBundle",
    "LieConnection",
    "CouplingSettings",
    "Verdict",
    "ad",
    "bracket",
    "build_coupling",
    "build_transport_charts",
    "check_bundle",
    "coupling_exists",
    "curvature",
    "delta_continuity_test",
    "derivation_space",
    "exp_derivation",
    "global_connection_from_locals",
    "holonomy_variation_check",
    "inner_test",
    "is_automorphism",
    "parallel_transport",
    "same_inner_coset",
    "transport_composition_check",
    "validate_algebra",
]
