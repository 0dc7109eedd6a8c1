"""Block-multiplier symmetrization: statistics, remainders, verification.

The package links the expected gauge of the largest absolute column mean of
a dependent panel to the same gauge of its block-multiplier counterpart,
with remainders built from Gaussian-comparison Kolmogorov distances and
truncation tail bounds, and verifies the resulting inequality chains by
Monte Carlo and exact enumeration.
"""

from .blocking import (
    BlockScheme,
    MultiplierSpec,
    block_sums,
    draw_multipliers,
    expand_multipliers,
    make_blocks,
    max_abs_mean,
    multiplier_max_abs_mean,
)
from .gaussian import (
    GaussianModel,
    RhoEstimate,
    estimate_gaussian_model,
    estimate_rhos,
    kolmogorov_distance,
    sample_gaussian_max,
)
from .processes import (
    DgpSpec,
    PanelSample,
    generate,
    independent_copy,
    theoretical_longrun_cov,
    write_panel_csv,
)
from .psi import (
    CustomPsi,
    PsiSpec,
    psi_deriv,
    psi_eval,
    psi_inverse,
    psi_moment_norm,
)
from .remainders import (
    TailParams,
    combined_remainder,
    concentration_general,
    concentration_lq,
    concentration_subexp,
    optimal_truncation,
    remainder_R1,
    remainder_R2,
    remainder_Rn,
    subexp_total_bound,
)
from .verify import (
    ExpectationEstimate,
    VerificationReport,
    exact_enumeration,
    mc_expect_psi_max,
    theorem1_bound,
    verify_independence_reduction,
    verify_prop1,
    verify_prop2,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
