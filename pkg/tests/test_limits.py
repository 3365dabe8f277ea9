import math

import numpy as np
import pytest

from dust_coalescent.limits import (
    LimitRegime,
    NormConstants,
    _int_phi_over_z,
    classify,
    collisions_regvar_scale,
    collisions_slowvar_constants,
    regvar_beta_prefactor,
    slowly_varying,
    solve_cn,
    stable_cf,
    tau_normal_constants,
    tau_stable_constants,
)
from dust_coalescent.measures import (
    BetaFamily,
    GammaPhi,
    Lebesgue,
    LogSingular,
    MeasureError,
    MomentSet,
)

LEB = Lebesgue()


# ---------------------------------------------------------------------------
# regimes and constants containers


def test_regime_validation():
    with pytest.raises(ValueError):
        LimitRegime("NoSuchRegime")
    with pytest.raises(ValueError):
        LimitRegime("StableTau", params=(("beta", 2.5),))
    with pytest.raises(ValueError):
        LimitRegime("RegVarCollisions", params=(("gamma", 1.0),))
    reg = LimitRegime("RegVarCollisions", params=(("gamma", 0.5),))
    assert reg.param("gamma") == 0.5


def test_norm_constants_json_roundtrip():
    nc = NormConstants(regime="NormalTau", n=1e4, a_n=2.5, b_n=9.2,
                       reference="normal")
    assert NormConstants.from_json(nc.to_json()) == nc
    with pytest.raises(ValueError):
        NormConstants(regime="NormalTau", n=10, a_n=0.0, b_n=0.0,
                      reference="normal")


# ---------------------------------------------------------------------------
# absorption-time constants


def test_tau_normal_constants_values():
    mom = LEB.moments()   # m = 1, s2 = 2
    nc = tau_normal_constants(mom, math.e)
    assert nc.b_n == pytest.approx(1.0)
    assert nc.a_n == pytest.approx(math.sqrt(2.0))
    assert nc.reference == "normal"


def test_tau_normal_scaling_increases():
    mom = LEB.moments()
    a = [tau_normal_constants(mom, n).a_n for n in (10, 100, 1e4, 1e8)]
    assert all(x < y for x, y in zip(a, a[1:]))


def test_tau_normal_requires_finite_moments():
    with pytest.raises(MeasureError):
        tau_normal_constants(MomentSet(m=math.inf, s2=1.0, theta=1.0, mu1=0.5), 10)
    with pytest.raises(MeasureError):
        tau_normal_constants(MomentSet(m=1.0, s2=math.inf, theta=1.0, mu1=0.5), 10)


def test_solve_cn_power_law():
    # constant L gives c = k^(1/beta) exactly
    L = slowly_varying("const")
    assert solve_cn(100.0, L, 1.4) == pytest.approx(100.0 ** (1.0 / 1.4), rel=1e-9)
    assert solve_cn(100.0, L, 1.4) == pytest.approx(26.826957952797272, rel=1e-8)
    with pytest.raises(ValueError):
        solve_cn(10.0, L, 2.5)


def test_solve_cn_bracket_failure():
    with pytest.raises(MeasureError):
        solve_cn(1e-12, slowly_varying("const"), 1.4)


def test_tau_stable_constants():
    L = slowly_varying("const")
    nc = tau_stable_constants(1.4, L, m=2.0, n=1e4)
    k = math.floor(math.log(1e4))
    assert nc.b_n == pytest.approx(math.log(1e4) / 2.0)
    assert nc.a_n == pytest.approx(2.0 ** (-2.4 / 1.4) * k ** (1.0 / 1.4))
    assert nc.reference == "stable:beta=1.4"
    with pytest.raises(MeasureError):
        tau_stable_constants(1.4, L, m=math.inf, n=1e4)


# ---------------------------------------------------------------------------
# collision-count constants


def test_int_phi_over_z_bounded_case():
    # Phi(z) = z/(z+1): int_0^n Phi(z)/z dz = log(n+1)
    for n in (10.0, 1e3, 1e6):
        got = _int_phi_over_z(LEB.laplace_exponent, n, 1)
        assert got == pytest.approx(math.log(n + 1.0), rel=1e-8)


@pytest.mark.parametrize("alpha", [1.0, 2.5])
def test_slowvar_gamma_example(alpha):
    # gamma subordinator with unit rate parameter: the leading terms are
    # b_n ~ log^2(n)/2 and a_n ~ sqrt(log^3(n)/3), independent of alpha
    spec = GammaPhi(alpha, 1.0)
    n = 1e6
    nc = collisions_slowvar_constants(spec.laplace_exponent, spec.moments(), n)
    assert nc.b_n == pytest.approx(math.log(n) ** 2 / 2.0, rel=0.02)
    assert nc.a_n == pytest.approx(math.sqrt(math.log(n) ** 3 / 3.0), rel=0.02)


def test_slowvar_requires_finite_moments():
    with pytest.raises(MeasureError):
        collisions_slowvar_constants(
            LEB.laplace_exponent,
            MomentSet(m=math.inf, s2=1.0, theta=1.0, mu1=0.5), 10,
        )


def test_regvar_scale():
    ell = slowly_varying("const")
    assert collisions_regvar_scale(0.5, ell, 100.0) == pytest.approx(
        5.0 * math.sqrt(math.pi)
    )
    assert collisions_regvar_scale(0.3, ell, 1.0) == pytest.approx(
        float(math.gamma(1.7))
    )
    with pytest.raises(ValueError):
        collisions_regvar_scale(1.5, ell, 10.0)


def test_regvar_beta_prefactor():
    assert regvar_beta_prefactor(1.5, 1.0) == pytest.approx(
        math.gamma(2.5) / (0.5 * math.gamma(1.0))
    )
    with pytest.raises(ValueError):
        regvar_beta_prefactor(2.5, 1.0)


# ---------------------------------------------------------------------------
# stable characteristic function


def test_stable_cf_properties():
    assert stable_cf(1.4, 0.0) == pytest.approx(1.0)
    zs = np.array([-2.0, -0.5, 0.25, 1.0, 3.0])
    vals = stable_cf(1.4, zs)
    assert np.all(np.abs(vals) <= 1.0 + 1e-12)
    assert np.allclose(stable_cf(1.4, -zs), np.conj(vals))
    with pytest.raises(ValueError):
        stable_cf(2.0, 1.0)


# ---------------------------------------------------------------------------
# regime classification


def test_classify_map():
    pair = classify(LEB)
    assert pair.tau.tag == "NormalTau"
    assert pair.collisions.tag == "CompoundPoissonCollisions"

    pair = classify(BetaFamily.make(2.5, 1.0))
    assert pair.collisions.tag == "CompoundPoissonCollisions"

    pair = classify(BetaFamily.make(2.0, 1.0))
    assert pair.collisions.tag == "SlowVarCollisions"

    pair = classify(BetaFamily.make(1.5, 1.0))
    assert pair.collisions.tag == "RegVarCollisions"
    assert pair.collisions.param("gamma") == pytest.approx(0.5)

    pair = classify(LogSingular(a=2.9, d=2.4))
    assert pair.tau.tag == "StableTau"
    assert pair.tau.param("beta") == pytest.approx(1.4)
    assert pair.collisions is None

    pair = classify(LogSingular(a=4.0, d=3.5))
    assert pair.tau.tag == "NormalTau"

    pair = classify(GammaPhi(1.0, 1.0))
    assert pair.collisions.tag == "SlowVarCollisions"


def test_classify_boundary_declines():
    # a = d + 1 sits on the regime boundary and has no automatic mapping
    with pytest.raises(MeasureError):
        classify(LogSingular(a=3.4, d=2.4))


# ---------------------------------------------------------------------------
# slowly varying handles


def test_slowly_varying_handles():
    assert slowly_varying("const", c=3.0)(10.0) == 3.0
    assert slowly_varying("log-power", p=2.0)(math.e ** 3) == pytest.approx(9.0)
    assert slowly_varying("iterated-log")(math.exp(math.e)) == pytest.approx(1.0)
    assert slowly_varying("exp-log-power", p=0.5)(math.e) == pytest.approx(math.e)
    with pytest.raises(ValueError):
        slowly_varying("exp-log-power", p=1.5)
    with pytest.raises(ValueError):
        slowly_varying("no-such-handle")
