"""Subordinator coupling objects: compound Poisson paths, first passage,
regenerative compositions, the occupancy scheme, exponential functionals
and the secondary-cluster chain V.

Infinite measures are never path-sampled; their statistics go through the
embedded dust chain or through the Laplace exponent directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .measures import GammaPhi, MeasureError, MeasureSpec, rate_table


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _require_finite(spec: MeasureSpec) -> float:
    if isinstance(spec, GammaPhi) or not spec.is_finite:
        raise MeasureError("compound Poisson requires finite measure")
    return spec.total_mass()


def jump_sampler(spec: MeasureSpec, points: int = 2048):
    """Sampler for x with law nu / nu((0,1]), nu finite.

    Uses the family's exact inverse CDF when available, otherwise an
    inverse-CDF monotone spline built from the tail on a log-spaced grid.
    """
    mass = _require_finite(spec)
    try:
        spec.sample_x(np.random.default_rng(0), 1)
        return lambda rng, size: spec.sample_x(rng, size)
    except MeasureError:
        pass
    from scipy.interpolate import PchipInterpolator

    # dense near both endpoints: log-spaced up to 1/2, mirrored beyond
    lo_half = np.geomspace(1e-14, 0.5, points, endpoint=False)
    hi_half = 1.0 - np.geomspace(1e-14, 0.5, points)[::-1]
    xs = np.concatenate([lo_half, hi_half])
    cdf = np.array([mass - spec.nu_tail(x) for x in xs]) / mass
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    inv = PchipInterpolator(cdf[keep], xs[keep], extrapolate=False)
    lo, hi = cdf[keep][0], cdf[keep][-1]

    def draw(rng, size):
        return np.asarray(inv(np.clip(rng.random(size), lo, hi)), dtype=float)

    return draw


@dataclass
class SubordinatorPath:
    """Compound Poisson jump record; S_t is the cumsum of jumps up to t."""

    times: np.ndarray       # increasing jump epochs
    jumps: np.ndarray       # jump sizes, -log(1-x)
    rate: float             # nu((0,1])

    def __post_init__(self):
        assert np.all(np.diff(self.times) >= 0)
        assert np.all(self.jumps > 0)

    @property
    def values(self) -> np.ndarray:
        """S at each jump epoch."""
        return np.cumsum(self.jumps)

    def to_csv(self, fh):
        fh.write("t,jump\n")
        for t, j in zip(self.times, self.jumps):
            fh.write(f"{t!r},{j!r}\n")


def sample_cpp_path(spec: MeasureSpec, seed, level: float | None = None,
                    horizon: float | None = None) -> SubordinatorPath:
    """Compound Poisson path run until S exceeds ``level`` or time passes
    ``horizon`` (whichever is given; level wins if both)."""
    if level is None and horizon is None:
        raise ValueError("need a stopping level or horizon")
    mass = _require_finite(spec)
    rng = _as_rng(seed)
    draw = jump_sampler(spec)
    times, jumps = [], []
    t, s = 0.0, 0.0
    while True:
        t += rng.exponential(1.0 / mass)
        if level is None and t > horizon:
            break
        j = -math.log1p(-float(draw(rng, 1)[0]))
        times.append(t)
        jumps.append(j)
        s += j
        if level is not None and s > level:
            break
        if level is None and horizon is not None and t > horizon:
            break
    return SubordinatorPath(times=np.array(times), jumps=np.array(jumps), rate=mass)


@dataclass(frozen=True)
class FirstPassage:
    T: float            # inf{t : S_t > s}
    overshoot: float    # S_T - s


def first_passage(spec: MeasureSpec, s: float, seed) -> FirstPassage:
    """First passage of the compound Poisson path through level s >= 0."""
    if s < 0:
        raise ValueError("level must be >= 0")
    mass = _require_finite(spec)
    rng = _as_rng(seed)
    draw = jump_sampler(spec)
    t, val = 0.0, 0.0
    while True:
        t += rng.exponential(1.0 / mass)
        val += -math.log1p(-float(draw(rng, 1)[0]))
        if val > s:
            return FirstPassage(T=t, overshoot=val - s)


def sample_s1(spec, rng: np.random.Generator, size: int) -> np.ndarray:
    """Unit-time marginal S_1: compound Poisson sum, or the gamma marginal."""
    if isinstance(spec, GammaPhi):
        return spec.sample_s1(rng, size)
    mass = _require_finite(spec)
    draw = jump_sampler(spec)
    counts = rng.poisson(mass, size)
    out = np.zeros(size)
    total = int(counts.sum())
    if total:
        logs = -np.log1p(-draw(rng, total))
        offs = np.concatenate([[0], np.cumsum(counts)])
        for i in range(size):
            out[i] = logs[offs[i]:offs[i + 1]].sum()
    return out


def renewal_count(spec, s: float, seed) -> int:
    """Number of random-walk points S_0=0, S_1, S_2, ... lying in [0, s]."""
    if s < 0:
        raise ValueError("level must be >= 0")
    rng = _as_rng(seed)
    count = 1
    total = 0.0
    while True:
        total += float(sample_s1(spec, rng, 1)[0])
        if total > s:
            return count
        count += 1


def regenerative_composition(spec: MeasureSpec, n: int, seed) -> dict:
    """K_r of the ordered partition from n exponential marks.

    Marks in the same jump interval (S_{t-}, S_t] form one part; K_r[r]
    counts parts of size r.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    _require_finite(spec)
    rng = _as_rng(seed)
    draw = jump_sampler(spec)
    marks = np.sort(rng.exponential(1.0, n))
    K_r: dict[int, int] = {}
    idx = 0
    s = 0.0
    while idx < n:
        s += -math.log1p(-float(draw(rng, 1)[0]))
        hi = int(np.searchsorted(marks, s, side="right"))
        if hi > idx:
            r = hi - idx
            K_r[r] = K_r.get(r, 0) + 1
            idx = hi
    return K_r


@dataclass
class OccupancyFrequencies:
    """Stick-breaking box frequencies P_k = W_1...W_{k-1}(1-W_k)."""

    probs: np.ndarray
    remainder: float

    def __post_init__(self):
        assert np.all(self.probs >= 0)
        assert abs(self.probs.sum() + self.remainder - 1.0) < 1e-9


K_MAX = 10 ** 6


def occupancy_frequencies(spec: MeasureSpec, rng, eps: float) -> OccupancyFrequencies:
    """Sample frequencies until the unbroken remainder drops below eps."""
    mass = _require_finite(spec)
    if abs(mass - 1.0) > 1e-9:
        raise MeasureError("occupancy scheme requires a probability measure")
    draw = jump_sampler(spec)
    chunks = []
    log_rem = 0.0
    while True:
        x = np.clip(draw(rng, 256), 1e-300, 1.0 - 1e-16)
        logw = np.log1p(-x)
        # P_k = exp(log_rem + sum of earlier logw in chunk) * x_k
        pref = log_rem + np.concatenate([[0.0], np.cumsum(logw[:-1])])
        chunks.append(np.exp(pref) * x)
        log_rem += logw.sum()
        if math.exp(log_rem) < eps:
            break
        if sum(c.size for c in chunks) >= K_MAX:
            raise MeasureError(
                f"occupancy truncation did not reach remainder {eps:g} "
                f"within {K_MAX} sticks"
            )
    return OccupancyFrequencies(probs=np.concatenate(chunks), remainder=math.exp(log_rem))


def occupancy_sample(spec: MeasureSpec, n: int, seed) -> dict:
    """Throw n balls into the stick-breaking boxes; K_r[r] = #boxes with r balls."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _as_rng(seed)
    freq = occupancy_frequencies(spec, rng, eps=1e-12 / n)
    p = np.concatenate([freq.probs, [freq.remainder]])
    counts = rng.multinomial(n, p / p.sum())
    K_r: dict[int, int] = {}
    for c in counts[:-1]:
        if c > 0:
            K_r[int(c)] = K_r.get(int(c), 0) + 1
    # remainder mass is below 1e-12/n; a ball there is a vanishing-probability
    # event, counted as one extra singleton box per ball
    for _ in range(int(counts[-1])):
        K_r[1] = K_r.get(1, 0) + 1
    return K_r


def occupancy_expected(p, n: int, r: int) -> float:
    """Expected number of boxes holding exactly r of n balls,
    C(n,r) sum_j p_j^r (1-p_j)^(n-r), in log space."""
    if not 0 <= r <= n:
        raise ValueError("need 0 <= r <= n")
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or p.sum() > 1 + 1e-9:
        raise ValueError("p must be a (sub)probability vector")
    logc = gammaln(n + 1) - gammaln(r + 1) - gammaln(n - r + 1)
    acc = 0.0
    for pj in p:
        if pj <= 0.0:
            continue
        if pj >= 1.0:
            acc += 1.0 if r == n else 0.0
            continue
        acc += math.exp(logc + r * math.log(pj) + (n - r) * math.log1p(-pj))
    return acc


def exp_functional_required_horizon(spec, gamma: float, eps: float) -> float:
    """Smallest T with truncation bias e^(-T Phi(gamma))/Phi(gamma) below
    eps relative to E I = 1/Phi(gamma)."""
    phig = spec.laplace_exponent(gamma)
    if phig <= 0:
        raise MeasureError("exponential functional needs Phi(gamma) > 0")
    return math.log(1.0 / eps) / phig


def exp_functional_sample(spec, gamma: float, seed, horizon: float | None = None,
                          eps: float = 1e-4, size: int = 1,
                          dt: float = 0.02) -> np.ndarray:
    """Samples of I = integral of exp(-gamma S_t) dt, truncated at the horizon.

    Finite measures integrate exactly between jumps.  GammaPhi paths have
    infinite activity and are discretized on a grid of step dt with
    trapezoidal integration.
    """
    if gamma <= 0:
        raise MeasureError("gamma must be positive")
    T_req = exp_functional_required_horizon(spec, gamma, eps)
    if horizon is None:
        horizon = T_req
    elif horizon < T_req:
        raise MeasureError(
            f"horizon {horizon:g} too small for bias {eps:g}; need T >= {T_req:g}"
        )
    rng = _as_rng(seed)
    if isinstance(spec, GammaPhi):
        steps = int(math.ceil(horizon / dt))
        out = np.empty(size)
        batch = max(1, int(2e7) // max(steps, 1))
        done = 0
        while done < size:
            b = min(batch, size - done)
            incr = spec.sample_s1(rng, (b, steps), dt=dt)
            s = np.cumsum(incr, axis=1)
            e = np.exp(-gamma * s)
            left = np.concatenate([np.ones((b, 1)), e[:, :-1]], axis=1)
            out[done:done + b] = dt * 0.5 * (left + e).sum(axis=1)
            done += b
        return out
    mass = _require_finite(spec)
    draw = jump_sampler(spec)
    out = np.empty(size)
    for i in range(size):
        out[i] = _exp_functional_one(mass, draw, gamma, horizon, rng)
    return out


def _exp_functional_one(mass, draw, gamma, horizon, rng):
    t, s, acc = 0.0, 0.0, 0.0
    while t < horizon:
        hold = rng.exponential(1.0 / mass)
        seg = min(hold, horizon - t)
        acc += seg * math.exp(-gamma * s)
        t += hold
        if t < horizon:
            s += -math.log1p(-float(draw(rng, 1)[0]))
    return acc


def exp_functional_moment(spec, gamma: float, k: int) -> float:
    """E I^k = k! / prod_{i=1..k} Phi(gamma i)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    prod = 1.0
    for i in range(1, k + 1):
        phi = spec.laplace_exponent(gamma * i)
        if phi == 0.0:
            raise MeasureError(f"Phi({gamma * i:g}) = 0; moment undefined")
        prod *= phi
    return math.factorial(k) / prod


V_STATE_CAP = 10 ** 4


@dataclass
class VTrajectory:
    """Secondary-cluster count: event times and post-event values."""

    times: np.ndarray
    states: np.ndarray
    horizon: float

    def occupation(self, burn_in: float = 0.0) -> np.ndarray:
        """Occupation-time distribution over states on (burn_in, horizon]."""
        t = np.concatenate([self.times, [self.horizon]])
        mass = np.zeros(int(self.states.max()) + 1)
        for i in range(len(self.states)):
            lo = max(float(t[i]), burn_in)
            hi = min(float(t[i + 1]), self.horizon)
            if hi > lo:
                mass[int(self.states[i])] += hi - lo
        return mass / mass.sum()

    def occupation_csv(self, fh, burn_in: float = 0.0):
        occ = self.occupation(burn_in)
        fh.write("m,mass\n")
        for m, w in enumerate(occ):
            fh.write(f"{m},{float(w)!r}\n")


def v_chain_simulate(spec: MeasureSpec, horizon: float, seed) -> VTrajectory:
    """Secondary-cluster chain: from m, jump to m - k + 1 at rate phi_{m,k}
    for k = 0 and 2 <= k <= m; V_0 = 0."""
    mass = _require_finite(spec)
    rng = _as_rng(seed)
    table = rate_table(spec)
    times = [0.0]
    states = [0]
    t, m = 0.0, 0
    while True:
        if m == 0:
            rates = np.array([mass])
            ks = np.array([0])
        else:
            row = table.row(m)
            birth = max(mass - row.sum(), 0.0)
            rates = np.concatenate([[birth], row[1:]])
            ks = np.concatenate([[0], np.arange(2, m + 1)])
        total = rates.sum()
        t += rng.exponential(1.0 / total)
        if t > horizon:
            break
        k = int(ks[rng.choice(len(ks), p=rates / total)])
        m = m - k + 1
        if m > V_STATE_CAP:
            raise MeasureError(f"V-chain state exceeded cap {V_STATE_CAP}")
        times.append(t)
        states.append(m)
    return VTrajectory(times=np.array(times), states=np.array(states), horizon=horizon)


def v_stationary_solve(spec: MeasureSpec, M: int):
    """Stationary law from the balance equation
    pi_m = sum_{k>=0} pi_{m+k-1} phi_{m+k-1,k}, pi_0 = 0, sum pi = 1,
    truncated at M.  Returns (pi, residual)."""
    if M < 10:
        raise ValueError("truncation M must be >= 10")
    mass = _require_finite(spec)
    table = rate_table(spec)
    # coefficient of pi_j in the equation for pi_m is phi_{j, j-m+1}, j >= m-1
    A = np.zeros((M, M))
    for j in range(1, M + 1):
        row = table.row(j)                    # phi_{j,k}, k=1..j
        birth = max(mass - row.sum(), 0.0)    # phi_{j,0}
        if j + 1 <= M:
            A[j, j - 1] += birth              # k=0 feeds equation m=j+1
        for k in range(1, j + 1):
            m = j - k + 1                     # k>=1 feeds equation m=j-k+1
            if 1 <= m <= M:
                A[m - 1, j - 1] += row[k - 1]
    system = np.vstack([A - np.eye(M), np.ones((1, M))])
    rhs = np.zeros(M + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    if not np.all(np.isfinite(pi)):
        raise MeasureError("singular truncated balance system")
    residual = float(np.max(np.abs(A @ pi - pi)))
    if residual > 1e-3:
        raise MeasureError(f"balance solve residual {residual:g} too large; raise M")
    return pi, residual
