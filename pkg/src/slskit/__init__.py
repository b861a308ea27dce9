"""Synthesis, realization and verification of localized FIR controllers.

The package is organised around the closed-loop response of a
discrete-time LTI network: ``plant`` describes the system and its
interconnection graph, ``response`` holds FIR response quadruples and
their achievability algebra, ``slc`` expresses structural constraints
(FIR horizon, locality, communication delay, arbitrary patterns),
``synth`` solves the constrained H2 design, and ``controller`` turns
responses into runnable controller realizations with simulation-based
internal-stability verification.  ``cli`` exposes the same pipeline as
the ``slskit`` command.
"""

from .plant import (
    InterconnectionGraph,
    PlantModel,
    build_chain,
    hop_distances,
    spectral_radius,
)
from .response import (
    Fir,
    ObservabilityWitness,
    SystemResponse,
    compose_output_feedback,
    is_t_step_controllable,
    is_t_step_observable,
    of_residual,
    sf_residual,
    zi_minus,
)
from .slc import (
    SlcSet,
    SupportMask,
    delay_mask,
    delay_slc,
    fir_slc,
    intersect,
    is_qi,
    locality_mask,
    locality_slc,
    pattern_slc,
    positivity_check,
)
from .synth import (
    ColumnStatus,
    EqLsSolution,
    SynthesisProblem,
    SynthesisResult,
    centralized_baseline,
    h2_cost,
    solve_eq_ls,
    synthesize_of_h2,
    synthesize_sf_h2,
)
from .controller import (
    AltStructureReport,
    ControllerRealization,
    Perturbations,
    SimTrace,
    StabilityReport,
    compare_alt_structures,
    predicted_maps,
    realize,
    robustness_h2,
    simulate,
    verify_internal_stability,
)

__version__ = "0.1.0"

__all__ = [
    "InterconnectionGraph",
    "PlantModel",
    "build_chain",
    "hop_distances",
    "spectral_radius",
    "Fir",
    "ObservabilityWitness",
    "SystemResponse",
    "compose_output_feedback",
    "is_t_step_controllable",
    "is_t_step_observable",
    "of_residual",
    "sf_residual",
    "zi_minus",
    "SlcSet",
    "SupportMask",
    "delay_mask",
    "delay_slc",
    "fir_slc",
    "intersect",
    "is_qi",
    "locality_mask",
    "locality_slc",
    "pattern_slc",
    "positivity_check",
    "ColumnStatus",
    "EqLsSolution",
    "SynthesisProblem",
    "SynthesisResult",
    "centralized_baseline",
    "h2_cost",
    "solve_eq_ls",
    "synthesize_of_h2",
    "synthesize_sf_h2",
    "AltStructureReport",
    "ControllerRealization",
    "Perturbations",
    "SimTrace",
    "StabilityReport",
    "compare_alt_structures",
    "predicted_maps",
    "realize",
    "robustness_h2",
    "simulate",
    "verify_internal_stability",
    "__version__",
]
