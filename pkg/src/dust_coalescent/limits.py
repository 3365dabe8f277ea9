"""Regime classification, centering/scaling constants and reference laws
for the limit-theorem verification harness."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn

from .measures import (
    BetaFamily,
    GammaPhi,
    Lebesgue,
    LogSingular,
    MeasureError,
    MomentSet,
)


@dataclass(frozen=True)
class LimitRegime:
    """One limit regime tag with its parameters."""

    tag: str
    params: tuple = ()  # (name, value) pairs

    _TAGS = {"NormalTau", "StableTau", "CompoundPoissonCollisions",
             "SlowVarCollisions", "RegVarCollisions"}

    def __post_init__(self):
        if self.tag not in self._TAGS:
            raise ValueError(f"unknown regime tag {self.tag!r}")
        p = dict(self.params)
        if "beta" in p and not 1 < p["beta"] < 2:
            raise ValueError("stable index beta must lie in (1, 2)")
        if "gamma" in p:
            if p["gamma"] == 1:
                raise ValueError("gamma = 1 is out of scope")
            if not 0 < p["gamma"] < 1:
                raise ValueError("regular-variation index gamma must lie in (0, 1)")

    def param(self, name):
        return dict(self.params)[name]


@dataclass(frozen=True)
class NormConstants:
    """Affine normalization (x - b_n)/a_n with a reference distribution."""

    regime: str
    n: float
    a_n: float
    b_n: float
    reference: str

    def __post_init__(self):
        if not self.a_n > 0:
            raise ValueError("scaling a_n must be positive")

    def to_json(self) -> str:
        return json.dumps(
            {"regime": self.regime, "n": self.n, "a_n": self.a_n,
             "b_n": self.b_n, "reference": self.reference},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "NormConstants":
        return cls(**json.loads(text))


def tau_normal_constants(moments: MomentSet, n: float) -> NormConstants:
    """b_n = log n / m, a_n = sqrt(s^2 log n / m^3), reference N(0,1)."""
    m, s2 = moments.m, moments.s2
    if not (math.isfinite(m) and math.isfinite(s2)):
        raise MeasureError("normal absorption-time limit needs finite m and s^2")
    ln = math.log(n)
    return NormConstants(
        regime="NormalTau", n=n,
        a_n=math.sqrt(s2 * ln / m ** 3), b_n=ln / m,
        reference="normal",
    )


# named slowly varying functions, kept declarative for configs
def slowly_varying(name: str, **params):
    """Named slowly varying handles: const, log-power, iterated-log,
    exp-log-power (exp(log^p z) with p < 1)."""
    if name == "const":
        c = params.get("c", 1.0)
        return lambda z: c
    if name == "log-power":
        p = params["p"]
        return lambda z: math.log(z) ** p if z > 1 else 1.0
    if name == "iterated-log":
        return lambda z: math.log(math.log(z)) if z > math.e else 1.0
    if name == "exp-log-power":
        p = params["p"]
        if not p < 1:
            raise ValueError("exp-log-power needs p < 1 to stay slowly varying")
        return lambda z: math.exp(math.log(z) ** p) if z > 1 else 1.0
    raise ValueError(f"unknown slowly varying handle {name!r}")


def solve_cn(k: float, L, beta: float) -> float:
    """c with k L(c) / c^beta = 1, by bisection; L slowly varying."""
    if not 1 < beta < 2:
        raise ValueError("beta must lie in (1, 2)")

    def f(c):
        return k * L(c) / c ** beta - 1.0

    lo, hi = 1e-8, 2.0
    while f(hi) > 0:
        hi *= 2.0
        if hi > 1e200:
            raise MeasureError(f"c_n bisection bracket failed: f({hi:g}) still positive")
    if f(lo) < 0:
        raise MeasureError(f"c_n bisection bracket failed on [{lo:g}, {hi:g}]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    c = 0.5 * (lo + hi)
    if abs(k * L(c) / c ** beta - 1.0) > 1e-10:
        raise MeasureError(f"c_n residual too large at c={c:g}")
    return c


def tau_stable_constants(beta: float, L, m: float, n: float) -> NormConstants:
    """b_n = log n / m, a_n = m^(-(beta+1)/beta) c_(floor(log n)),
    c_k solved from k L(c)/c^beta = 1."""
    if not math.isfinite(m):
        raise MeasureError("stable absorption-time limit needs finite m")
    k = math.floor(math.log(n))
    c = solve_cn(k, L, beta)
    return NormConstants(
        regime="StableTau", n=n,
        a_n=m ** (-(beta + 1.0) / beta) * c, b_n=math.log(n) / m,
        reference=f"stable:beta={beta}",
    )


def _int_phi_over_z(phi, n: float, power: int) -> float:
    """int_0^n Phi(z)^power / z dz; log substitution on [1, n]."""
    head, err = integrate.quad(
        lambda z: phi(z) ** power / z if z > 0 else 0.0, 0.0, 1.0,
        epsabs=1e-12, epsrel=1e-10, limit=200,
    )
    tail, err2 = integrate.quad(
        lambda u: phi(math.exp(u)) ** power, 0.0, math.log(n),
        epsabs=1e-12, epsrel=1e-10, limit=200,
    )
    return head + tail


def collisions_slowvar_constants(phi, moments: MomentSet, n: float) -> NormConstants:
    """b_n = (1/m) int_0^n Phi(z)/z dz,
    a_n = sqrt((s^2/m^3) int_0^n Phi(z)^2/z dz), reference N(0,1)."""
    m, s2 = moments.m, moments.s2
    if not (math.isfinite(m) and math.isfinite(s2)):
        raise MeasureError("slow-variation collision limit needs finite m and s^2")
    i1 = _int_phi_over_z(phi, n, 1)
    i2 = _int_phi_over_z(phi, n, 2)
    return NormConstants(
        regime="SlowVarCollisions", n=n,
        a_n=math.sqrt(s2 / m ** 3 * i2), b_n=i1 / m,
        reference="normal",
    )


def collisions_regvar_scale(gamma: float, ell, n: float) -> float:
    """a_n = Gamma(2 - gamma) n^gamma ell(n); no centering in this regime."""
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    return float(gamma_fn(2.0 - gamma)) * n ** gamma * ell(n)


def regvar_beta_prefactor(a: float, b: float) -> float:
    """Limit constant Gamma(a+b) / ((2-a) Gamma(b)) for 1 < a < 2."""
    if not 1 < a < 2:
        raise ValueError("needs 1 < a < 2")
    return float(gamma_fn(a + b) / ((2.0 - a) * gamma_fn(b)))


def stable_cf(beta: float, z) -> complex:
    """exp{-|z|^beta Gamma(1-beta) (cos(pi beta/2) + i sin(pi beta/2) sgn z)}."""
    if not 1 < beta < 2:
        raise ValueError("beta must lie in (1, 2)")
    z = np.asarray(z, dtype=float)
    g = float(gamma_fn(1.0 - beta))
    mod = np.abs(z) ** beta * g
    out = np.exp(-mod * (math.cos(math.pi * beta / 2)
                         + 1j * math.sin(math.pi * beta / 2) * np.sign(z)))
    return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class RegimePair:
    """Regimes for the absorption time and the collision count; either
    side is None when the family leaves it undetermined."""

    tau: "LimitRegime | None"
    collisions: "LimitRegime | None"


def classify(spec) -> RegimePair:
    """Deterministic regime map for the supported families."""
    if isinstance(spec, Lebesgue):
        return RegimePair(LimitRegime("NormalTau"),
                          LimitRegime("CompoundPoissonCollisions"))
    if isinstance(spec, BetaFamily):
        tau = LimitRegime("NormalTau")
        if spec.a > 2:
            return RegimePair(tau, LimitRegime("CompoundPoissonCollisions"))
        if abs(spec.a - 2.0) < 1e-12:
            return RegimePair(tau, LimitRegime("SlowVarCollisions"))
        return RegimePair(
            tau, LimitRegime("RegVarCollisions", params=(("gamma", 2.0 - spec.a),))
        )
    if isinstance(spec, LogSingular):
        if 2 < spec.d < 3 and spec.d < spec.a < spec.d + 1:
            return RegimePair(
                LimitRegime("StableTau", params=(("beta", spec.d - 1.0),)), None
            )
        if spec.d > 3:
            return RegimePair(LimitRegime("NormalTau"), None)
    if isinstance(spec, GammaPhi):
        return RegimePair(LimitRegime("NormalTau"),
                          LimitRegime("SlowVarCollisions"))
    raise MeasureError(f"manual regime required for {type(spec).__name__}")
