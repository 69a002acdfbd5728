"""q-zeta values for q > 1.

Single, double, star, circ and Mordell-Tornheim q-zeta sums with rigorous
error bounds, their analytic continuation, and an identity verifier.
"""

from .expansion import (
    LimitOrder,
    circ_expansion,
    iterated_limit_probe,
    limit_q_to_1,
    limit_table,
    pole_classify,
    zeta00_closed,
    zeta2_q_expansion,
    zeta_q_expansion_single,
)
from .identities import (
    IdentityInstance,
    Variant,
    Verdict,
    VerificationReport,
    audit_parity,
    catalog,
    diag_reduction_check,
    partial_fraction_check,
    verify,
    verify_suite,
)
from .kernels import backend_name
from .qnum import DomainError, PrecisionCtx, QBase, ValueWithError, q_number
from .series import (
    circ_q,
    circ_star_q,
    diag_zeta_q,
    index_weighted_zeta_q,
    mt_q,
    naive_oracle,
    zeta2_q,
    zeta2_star_q,
    zeta_q,
)

__version__ = "0.1.0"
