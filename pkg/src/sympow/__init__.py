"""Symmetric power L-functions of elliptic curves over Q.

Local Euler factors and conductors at every prime, the global
functional-equation data of L(Sym^m E, s), and central/edge values and
derivatives computed from a two-sum inverse Mellin formula.
"""

from .curves import CMCurveError, CurveError, EllipticCurve, SingularCurveError, WeierstrassModel, parse_curve
from .engine import (
    Engine,
    EvalRequest,
    SpecialValueResult,
    bloch_kato,
    check_fe,
    lambda_value,
    order_of_vanishing,
    sign_experimental,
)
from .local import InertiaGroup, beta, euler_factor, local_data
from .lseries import GlobalLData, global_conductor, global_ldata, sign_theoretical

__version__ = "0.1.0"

__all__ = [
    "CMCurveError",
    "CurveError",
    "EllipticCurve",
    "Engine",
    "EvalRequest",
    "GlobalLData",
    "InertiaGroup",
    "SingularCurveError",
    "SpecialValueResult",
    "WeierstrassModel",
    "beta",
    "bloch_kato",
    "check_fe",
    "euler_factor",
    "global_conductor",
    "global_ldata",
    "lambda_value",
    "local_data",
    "order_of_vanishing",
    "parse_curve",
    "sign_experimental",
    "sign_theoretical",
]
