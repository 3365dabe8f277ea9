"""Statistics for comparing empirical samples to reference laws and to
each other; every result can serialize to a JSON verdict record."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps


@dataclass
class Sample:
    """A batch of replicate statistics at one model size."""

    values: np.ndarray
    n: int                  # model size the values were simulated at
    seed: object = None     # seed lineage for reproduction
    label: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.size == 0:
            raise ValueError("sample must be nonempty")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sample contains non-finite values")

    @property
    def count(self) -> int:
        return self.values.size


def ks_distance(sample, reference) -> float:
    """Sup-norm distance of the empirical CDF to a CDF callable, or to a
    second sample (pooled evaluation points)."""
    x = np.sort(np.asarray(sample, dtype=float))
    if x.size == 0:
        raise ValueError("empty sample")
    if callable(reference):
        F = np.asarray(reference(x), dtype=float)
        N = x.size
        up = np.arange(1, N + 1) / N - F
        dn = F - np.arange(0, N) / N
        return float(max(up.max(), dn.max()))
    y = np.asarray(reference, dtype=float)
    if y.size == 0:
        raise ValueError("empty reference sample")
    return float(sps.ks_2samp(x, y, method="asymp").statistic)


def empirical_cf(sample, z_grid) -> np.ndarray:
    """(1/N) sum exp(i z x_j) on the given grid of z values."""
    x = np.asarray(sample, dtype=float)
    z = np.asarray(z_grid, dtype=float)
    return np.exp(1j * np.outer(z, x)).mean(axis=1)


@dataclass(frozen=True)
class MomentCI:
    estimate: float
    lo: float
    hi: float

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi


_Z99 = 2.5758293035489004   # two-sided 99% normal quantile


def moment_ci(sample, k: int) -> MomentCI:
    """k-th raw moment with a normal-approximation 99% CI."""
    x = np.asarray(sample, dtype=float)
    if x.size < 30:
        raise ValueError("moment_ci needs at least 30 observations")
    xk = x ** k
    est = float(xk.mean())
    sd = float(xk.std(ddof=1))
    half = _Z99 * sd / math.sqrt(x.size)
    return MomentCI(estimate=est, lo=est - half, hi=est + half)


def _align(h1, h2):
    """Two histograms (dict key->weight or arrays) on a common support."""
    if isinstance(h1, dict) or isinstance(h2, dict):
        keys = sorted(set(h1) | set(h2))
        a = np.array([h1.get(k, 0.0) for k in keys], dtype=float)
        b = np.array([h2.get(k, 0.0) for k in keys], dtype=float)
        return a, b
    a = np.asarray(h1, dtype=float)
    b = np.asarray(h2, dtype=float)
    size = max(a.size, b.size)
    a = np.pad(a, (0, size - a.size))
    b = np.pad(b, (0, size - b.size))
    return a, b


def tv_distance(hist1, hist2) -> float:
    """Total-variation distance between two histograms, normalized first."""
    a, b = _align(hist1, hist2)
    if a.sum() <= 0 or b.sum() <= 0:
        raise ValueError("empty histogram")
    return float(0.5 * np.abs(a / a.sum() - b / b.sum()).sum())


def _pool_small(observed, expected, min_expected=5.0):
    """Merge cells until every expected count reaches the floor."""
    obs, exp = [], []
    co = ce = 0.0
    for o, e in zip(observed, expected):
        co += o
        ce += e
        if ce >= min_expected:
            obs.append(co)
            exp.append(ce)
            co = ce = 0.0
    if ce > 0:
        if exp:
            obs[-1] += co
            exp[-1] += ce
        else:
            obs.append(co)
            exp.append(ce)
    return np.array(obs), np.array(exp)


def chi_square(observed, expected) -> float:
    """Goodness-of-fit p-value; cells with expected < 5 are pooled."""
    o, e = _align(observed, expected)
    if o.sum() <= 0 or e.sum() <= 0:
        raise ValueError("empty histogram")
    e = e * (o.sum() / e.sum())
    o, e = _pool_small(o, e)
    if o.size < 2:
        return 1.0
    stat = float(((o - e) ** 2 / e).sum())
    return float(sps.chi2.sf(stat, df=o.size - 1))


def chi_square_two_sample(counts1, counts2) -> float:
    """Homogeneity p-value for two count histograms over the same support."""
    a, b = _align(counts1, counts2)
    pooled = a + b
    keep = pooled > 0
    a, b, pooled = a[keep], b[keep], pooled[keep]
    ea = pooled * (a.sum() / pooled.sum())
    eb = pooled * (b.sum() / pooled.sum())
    (a, ea), (b, eb) = _pool_pair(a, ea, b, eb)
    if a.size < 2:
        return 1.0
    stat = float(((a - ea) ** 2 / ea).sum() + ((b - eb) ** 2 / eb).sum())
    return float(sps.chi2.sf(stat, df=a.size - 1))


def _pool_pair(o1, e1, o2, e2, min_expected=5.0):
    """Pool the same cells in both histograms so every expected count in
    either reaches the floor."""
    out1o, out1e, out2o, out2e = [], [], [], []
    c1o = c1e = c2o = c2e = 0.0
    for i in range(o1.size):
        c1o += o1[i]; c1e += e1[i]; c2o += o2[i]; c2e += e2[i]
        if c1e >= min_expected and c2e >= min_expected:
            out1o.append(c1o); out1e.append(c1e)
            out2o.append(c2o); out2e.append(c2e)
            c1o = c1e = c2o = c2e = 0.0
    if c1e > 0 and out1e:
        out1o[-1] += c1o; out1e[-1] += c1e
        out2o[-1] += c2o; out2e[-1] += c2e
    elif c1e > 0:
        out1o.append(c1o); out1e.append(c1e)
        out2o.append(c2o); out2e.append(c2e)
    return (np.array(out1o), np.array(out1e)), (np.array(out2o), np.array(out2e))


def verdict_record(test: str, statistic: float, threshold: float, passed: bool) -> str:
    """JSON verdict record for one check."""
    return json.dumps(
        {"test": test, "statistic": statistic, "threshold": threshold,
         "pass": bool(passed)},
        sort_keys=True,
    )
