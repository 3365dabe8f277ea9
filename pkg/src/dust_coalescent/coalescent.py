"""Exchangeability-lumped simulation of the finite coalescent.

The partition-valued process is never materialized: the rates depend on a
cluster only through its primary/secondary status, so the pair
(p, s) = (#primary, #secondary) is Markov and statistically exact for all
recorded statistics.  The number of primary participants of a merge is a
hypergeometric draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .measures import MeasureSpec, rate_table
from .special import log_binom


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class LumpedState:
    p: int      # primary (never-collided singleton) clusters
    s: int      # secondary clusters
    t: float    # elapsed time


@dataclass
class RunStats:
    """Per-run record of one finite-n coalescent trajectory."""

    n: int
    seed: object
    tau: float          # absorption time, first t with p + s = 1
    tau_star: float     # dust extinction time, first t with p = 0
    X: int              # collisions
    X_star: int         # collisions taking >= 2 primary clusters
    K: int              # decrements of the dust chain
    K_r: dict           # decrement-size counts, r -> count
    D: int              # collisions taking <= 1 primary cluster
    R: int              # clusters alive at tau_star

    @property
    def K1(self) -> int:
        return self.K_r.get(1, 0)

    def check_identities(self):
        assert self.X_star == self.K - self.K1
        assert self.X == self.X_star + self.D
        assert sum(r * c for r, c in self.K_r.items()) == (self.n if self.n > 1 else 0)
        assert self.tau_star <= self.tau + 1e-12
        assert self.R >= 1

    CSV_HEADER = "n,seed,tau,tau_star,X,X_star,K,K1,D,R,K_r"

    def csv_row(self) -> str:
        kr = ";".join(f"{r}:{c}" for r, c in sorted(self.K_r.items()))
        return (
            f"{self.n},{self.seed},{self.tau!r},{self.tau_star!r},"
            f"{self.X},{self.X_star},{self.K},{self.K1},{self.D},{self.R},{kr}"
        )


def simulate_full(spec: MeasureSpec, n: int, seed) -> RunStats:
    """One trajectory of the n-coalescent, with all counters.

    From m = p + s clusters, a k-merge fires at total rate phi_{m,k}
    (k >= 2) and each primary singleton turns secondary at rate
    lambda_{m,1}.  n = 1 starts absorbed at t = 0.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n == 1:
        return RunStats(n=1, seed=seed, tau=0.0, tau_star=0.0, X=0, X_star=0,
                        K=0, K_r={}, D=0, R=1)
    rng = _as_rng(seed)
    table = rate_table(spec)
    p, s = n, 0
    t = 0.0
    X = X_star = K = D = 0
    K_r: dict[int, int] = {}
    tau_star = None
    R = None
    while p + s > 1:
        m = p + s
        assert not (m == 1 and p == 1)
        lam1 = table.lambda1(m)
        merge = table.merge_rate(m)
        total = merge + p * lam1
        t += rng.exponential(1.0 / total)
        if rng.random() * total < p * lam1:
            # primary singleton turns secondary; N* decrements by 1
            p -= 1
            s += 1
            K += 1
            K_r[1] = K_r.get(1, 0) + 1
        else:
            k = table.sample_decrement(m, rng, min_k=2)
            j = int(rng.hypergeometric(p, m - p, k)) if p > 0 else 0
            p -= j
            s = s - (k - j) + 1
            X += 1
            if j >= 2:
                X_star += 1
            if j >= 1:
                K += 1
                K_r[j] = K_r.get(j, 0) + 1
            if j <= 1:
                D += 1
        if p == 0 and tau_star is None:
            tau_star = t
            R = s
    assert tau_star is not None
    return RunStats(n=n, seed=seed, tau=t, tau_star=tau_star, X=X,
                    X_star=X_star, K=K, K_r=K_r, D=D, R=R)


@dataclass
class DustRun:
    """Trajectory of the dust chain N*_n alone."""

    n: int
    K_r: dict
    tau_star: float
    states: list = field(default_factory=list)   # visited states, n first


def simulate_dust_chain(spec: MeasureSpec, n: int, seed) -> DustRun:
    """The dust chain: from m, jump to m - k at rate phi_{m,k}, absorb at 0."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = _as_rng(seed)
    table = rate_table(spec)
    m = n
    t = 0.0
    K_r: dict[int, int] = {}
    states = [n]
    while m > 0:
        t += rng.exponential(1.0 / table.Phi(m))
        k = table.sample_decrement(m, rng, min_k=1)
        K_r[k] = K_r.get(k, 0) + 1
        m -= k
        states.append(m)
    return DustRun(n=n, K_r=K_r, tau_star=t, states=states)


def decrement_distribution(spec: MeasureSpec, m: int) -> np.ndarray:
    """phi_{m,k} / Phi(m) over k = 1..m."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return rate_table(spec).decrement_probs(m)


def visit_probabilities(spec: MeasureSpec, n: int) -> np.ndarray:
    """g_{n,k}, k = 0..n: probability that the dust chain ever visits k.

    Backward recursion g_{n,n} = 1,
    g_{n,k} = sum_{j>k} g_{n,j} phi_{j,j-k} / Phi(j).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    table = rate_table(spec)
    g = np.zeros(n + 1)
    g[n] = 1.0
    rows = {j: table.row(j) for j in range(1, n + 1)}
    phis = {j: rows[j].sum() for j in range(1, n + 1)}
    for k in range(n - 1, -1, -1):
        acc = 0.0
        for j in range(k + 1, n + 1):
            acc += g[j] * rows[j][j - k - 1] / phis[j]
        g[k] = acc
    return g


def g_closed_beta(alpha: float, n: int, k: int) -> float:
    """Closed-form visit probability for nu(dx) = x^(-alpha-1)(1-x)^(alpha-1) dx.

    g_{n,k} = (alpha)_k (alpha)_(n-k) / (alpha)_n * C(n,k), computed in
    log space with rising factorials as gamma ratios.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    from scipy.special import gammaln

    def log_rising(x, j):
        return gammaln(x + j) - gammaln(x)

    logg = (
        log_rising(alpha, k)
        + log_rising(alpha, n - k)
        - log_rising(alpha, n)
        + float(log_binom(n, k))
    )
    return float(math.exp(logg))


@dataclass
class RecursionProblem:
    """Linear recursion a_n = r_n + sum_k p_{n,k} a_k with a_0 given.

    rows[n] holds the probability row (p_{n,0}, ..., p_{n,n}); rows are
    indexed from 1.  psi, when given, is the comparison sequence of the
    boundedness lemma.
    """

    rows: list          # rows[i] is the row for n = i + 1
    r: np.ndarray       # forcing, r[i] for n = i + 1
    a0: float = 0.0
    psi: np.ndarray | None = None

    def __post_init__(self):
        for i, row in enumerate(self.rows):
            row = np.asarray(row, dtype=float)
            n = i + 1
            if row.size != n + 1:
                raise ValueError(f"row for n={n} must have length {n + 1}")
            if abs(row.sum() - 1.0) > 1e-9:
                raise ValueError(f"row for n={n} is not a probability distribution")
            self.rows[i] = row


@dataclass
class RecursionSolution:
    a: np.ndarray               # a_0..a_nmax
    comparison: np.ndarray | None   # partial sums of r_k psi_k / k, when psi given


def solve_recursion(problem: RecursionProblem, n_max: int) -> RecursionSolution:
    """Solve a_n = (r_n + sum_{k<n} p_{n,k} a_k) / (1 - p_{n,n})."""
    if n_max > len(problem.rows):
        raise ValueError("not enough rows for requested n_max")
    a = np.zeros(n_max + 1)
    a[0] = problem.a0
    for n in range(1, n_max + 1):
        row = problem.rows[n - 1]
        if row[n] >= 1.0 - 1e-14:
            raise ValueError(f"degenerate row at n={n}: p_nn = {row[n]}")
        a[n] = (problem.r[n - 1] + row[:n] @ a[:n]) / (1.0 - row[n])
    comparison = None
    if problem.psi is not None:
        ks = np.arange(1, n_max + 1, dtype=float)
        comparison = np.cumsum(problem.r[:n_max] * problem.psi[:n_max] / ks)
    return RecursionSolution(a=a, comparison=comparison)


def dust_decrement_problem(spec: MeasureSpec, n_max: int, r: np.ndarray,
                           a0: float = 0.0) -> RecursionProblem:
    """Recursion problem whose rows are the dust-chain first-jump laws.

    Row n has p_{n,k} = phi_{n,n-k} / Phi(n) for 0 <= k <= n - 1 and
    p_{n,n} = 0; with forcing r the solution is sum_k g_{n,k} r_k.
    """
    table = rate_table(spec)
    rows = []
    psi = np.empty(n_max)
    for n in range(1, n_max + 1):
        phirow = table.row(n)
        Phi = phirow.sum()
        row = np.zeros(n + 1)
        row[:n] = phirow[::-1] / Phi   # p_{n,k} = phi_{n,n-k}/Phi(n)
        rows.append(row)
        psi[n - 1] = Phi
    return RecursionProblem(rows=rows, r=np.asarray(r, dtype=float), a0=a0, psi=psi)


def replicate_stats(spec: MeasureSpec, n: int, replicates: int, seed: int,
                    jobs: int = 1) -> list[RunStats]:
    """Independent simulate_full replicates with spawned RNG streams."""
    streams = np.random.SeedSequence(seed).spawn(replicates)
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        chunks = np.array_split(np.arange(replicates), jobs)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = [
                pool.submit(_run_chunk, spec, n, seed, chunk.tolist())
                for chunk in chunks
            ]
            out: list[RunStats] = []
            for f in futs:
                out.extend(f.result())
        out.sort(key=lambda rs: rs.seed)
        return out
    return [
        _run_one(spec, n, seed, i, streams[i]) for i in range(replicates)
    ]


def _run_one(spec, n, seed, index, stream):
    rs = simulate_full(spec, n, np.random.default_rng(stream))
    rs.seed = f"{seed}.{index}"
    return rs


def _run_chunk(spec, n, seed, indices):
    streams = np.random.SeedSequence(seed).spawn(max(indices) + 1)
    return [_run_one(spec, n, seed, i, streams[i]) for i in indices]
