"""Special functions used for closed-form moment and rate constants."""

import numpy as np
from scipy import special as sp


def hurwitz_zeta(s: float, q: float) -> float:
    """Hurwitz zeta function zeta(s, q) for s > 1, q > 0."""
    if not s > 1:
        raise ValueError(f"hurwitz_zeta requires s > 1, got s={s}")
    if not q > 0:
        raise ValueError(f"hurwitz_zeta requires q > 0, got q={q}")
    return float(sp.zeta(s, q))


def digamma(x: float) -> float:
    """Logarithmic derivative of the gamma function, for x > 0."""
    if not x > 0:
        raise ValueError(f"digamma requires x > 0, got x={x}")
    return float(sp.digamma(x))


def trigamma(x: float) -> float:
    """Derivative of digamma, for x > 0."""
    if not x > 0:
        raise ValueError(f"trigamma requires x > 0, got x={x}")
    return float(sp.polygamma(1, x))


def log_beta(a: float, b: float) -> float:
    """log B(a, b) for a, b > 0."""
    if not (a > 0 and b > 0):
        raise ValueError(f"log_beta requires a, b > 0, got a={a}, b={b}")
    return float(sp.betaln(a, b))


def log_binom(m: int, k) -> "np.ndarray | float":
    """log C(m, k), valid for large m (never forms the binomial directly)."""
    k = np.asarray(k, dtype=float)
    out = sp.gammaln(m + 1) - sp.gammaln(k + 1) - sp.gammaln(m - k + 1)
    return out if out.ndim else float(out)
