"""Direct process tomography from weak pointer correlations, with exact oracles."""

from .numkit import ContractViolation, ShapeError, kron, partial_trace
from .pointers import (
    PointerConstants,
    PointerSpec,
    custom_pointer,
    gaussian_pointer,
    pointer_constants,
    qubit_pointer,
    tilted_qubit_pointer,
)
from .process import (
    BasisQuartet,
    ChiTensor,
    DegenerateOverlapError,
    KrausChannel,
    apply_chi,
    apply_kraus,
    chi_distance,
    chi_from_channel,
    chi_matrix_elements,
    default_bases,
    standard_channel,
    x_value_analytic,
)
from .robustness import error_accumulation
from .strong import reconstruct_strong, solve_x_strong
from .variants import (
    MultiPartiteSpec,
    ancilla_input,
    reconstruct_ancilla,
    reconstruct_multiparticle,
    reconstruct_qubit_sigma_x,
    x_from_r4_only,
)
from .weak import (
    ReconstructionReport,
    RValueRecord,
    Setting,
    chi_entry,
    reconstruct,
    simulate_parallel_setup,
    simulate_run_exact,
    simulate_run_perturbative,
    simulate_run_sampled,
    x_from_r,
)

__version__ = "0.1.0"
