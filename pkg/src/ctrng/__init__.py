"""Device-independent randomness certification for CHSH experiments with
bounded cross-talk between the two measurement devices."""

from .bell import CHSH, Behavior, BellExpression, Scenario, delta_from_chi, signaling_delta
from .bounds import bound_shifted, bound_signaling, closed_form_chsh_zero, sdp_p_star
from .lp import p_star_lp

__all__ = [
    "CHSH",
    "Behavior",
    "BellExpression",
    "Scenario",
    "bound_shifted",
    "bound_signaling",
    "closed_form_chsh_zero",
    "delta_from_chi",
    "p_star_lp",
    "sdp_p_star",
    "signaling_delta",
]

__version__ = "0.1.0"
