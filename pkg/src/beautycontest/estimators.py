"""Statistics over replicas and trajectories.

Histograms with exact merge semantics, the leftmost-removal fraction, raw
moments with standard errors, and the symmetric-Beta Kolmogorov-Smirnov
fit used to summarize limit distributions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class EstimatorError(ValueError):
    pass


# ---------------------------------------------------------------------------
# histograms


@dataclass
class Histogram:
    """Fixed-width bin counts over [lo, hi] with underflow/overflow tallies.

    Samples equal to ``hi`` land in the last bin; anything beyond the
    interval is tallied separately so that ``total`` is lossless.
    """

    lo: float
    hi: float
    counts: np.ndarray
    underflow: int = 0
    overflow: int = 0

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 1 or self.counts.size < 1:
            raise EstimatorError("counts must be a non-empty 1-d array")
        if not (self.hi > self.lo):
            raise EstimatorError("need hi > lo")

    @classmethod
    def empty(cls, lo: float = 0.0, hi: float = 1.0, bins: int = 200) -> "Histogram":
        return cls(lo=lo, hi=hi, counts=np.zeros(bins, dtype=np.int64))

    @classmethod
    def from_samples(cls, samples, lo: float = 0.0, hi: float = 1.0, bins: int = 200) -> "Histogram":
        h = cls.empty(lo, hi, bins)
        h.add(samples)
        return h

    @property
    def bins(self) -> int:
        return int(self.counts.size)

    @property
    def bin_width(self) -> float:
        return (self.hi - self.lo) / self.counts.size

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.underflow + self.overflow

    def bin_edges(self) -> np.ndarray:
        return self.lo + self.bin_width * np.arange(self.counts.size + 1)

    def add(self, samples) -> None:
        s = np.asarray(samples, dtype=float).ravel()
        if s.size == 0:
            return
        under = s < self.lo
        over = s > self.hi
        mid = ~under & ~over
        idx = np.floor((s[mid] - self.lo) / self.bin_width).astype(np.int64)
        np.minimum(idx, self.counts.size - 1, out=idx)
        self.counts += np.bincount(idx, minlength=self.counts.size).astype(np.int64)
        self.underflow += int(under.sum())
        self.overflow += int(over.sum())

    def merge(self, other: "Histogram") -> "Histogram":
        """Lossless merge of identically binned histograms."""
        if (self.lo, self.hi, self.bins) != (other.lo, other.hi, other.bins):
            raise EstimatorError("can only merge identically binned histograms")
        return Histogram(
            lo=self.lo,
            hi=self.hi,
            counts=self.counts + other.counts,
            underflow=self.underflow + other.underflow,
            overflow=self.overflow + other.overflow,
        )

    def density(self) -> np.ndarray:
        """Bin heights normalized so the in-range area integrates to 1."""
        n = self.counts.sum()
        if n == 0:
            return np.zeros_like(self.counts, dtype=float)
        return self.counts / (n * self.bin_width)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Histogram):
            return NotImplemented
        return (
            self.lo == other.lo
            and self.hi == other.hi
            and self.underflow == other.underflow
            and self.overflow == other.overflow
            and np.array_equal(self.counts, other.counts)
        )

    def to_csv(self, path, comments: list[str] | None = None) -> None:
        """Write ``bin_left,bin_right,count`` rows; under/overflow rows carry
        -inf/inf bounds.  ``comments`` become leading ``#`` lines."""
        edges = [float(v) for v in self.bin_edges()]
        with open(path, "w") as fh:
            for line in comments or []:
                fh.write(f"# {line}\n")
            fh.write("bin_left,bin_right,count\n")
            fh.write(f"-inf,{float(self.lo)!r},{self.underflow}\n")
            for i in range(self.counts.size):
                fh.write(f"{edges[i]!r},{edges[i + 1]!r},{int(self.counts[i])}\n")
            fh.write(f"{float(self.hi)!r},inf,{self.overflow}\n")

    @classmethod
    def from_csv(cls, path) -> "Histogram":
        lefts, rights, counts = [], [], []
        under = over = 0
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#") or line.startswith("bin_left"):
                    continue
                left_s, right_s, count_s = line.split(",")
                if left_s == "-inf":
                    under = int(count_s)
                elif right_s == "inf":
                    over = int(count_s)
                else:
                    lefts.append(float(left_s))
                    rights.append(float(right_s))
                    counts.append(int(count_s))
        if not counts:
            raise EstimatorError(f"no bin rows found in {path}")
        return cls(lo=lefts[0], hi=rights[-1], counts=np.array(counts, dtype=np.int64),
                   underflow=under, overflow=over)


def merge_histograms(histograms) -> Histogram:
    histograms = list(histograms)
    if not histograms:
        raise EstimatorError("nothing to merge")
    out = histograms[0]
    for h in histograms[1:]:
        out = out.merge(h)
    return out


# ---------------------------------------------------------------------------
# leftmost-removal fraction


def pi_fraction(outcomes) -> float:
    """Fraction of steps whose removed extreme lay left of the full mean.

    Takes a d=1 naive-mode trace of step outcomes; every outcome must carry
    ``removed_on_left``.
    """
    flags = []
    for o in outcomes:
        left = o.removed_on_left
        if left is None:
            raise EstimatorError("trace lacks removed_on_left; run naive mode in d=1")
        flags.append(bool(left))
    if not flags:
        raise EstimatorError("empty trace")
    return float(np.mean(flags))


# ---------------------------------------------------------------------------
# symmetric Beta CDF (regularized incomplete beta via continued fraction)

_TINY = 1e-300


def _betacf(a: float, b: float, x: np.ndarray) -> np.ndarray:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    np.copyto(d, _TINY, where=np.abs(d) < _TINY)
    d = 1.0 / d
    h = d.copy()
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        np.copyto(d, _TINY, where=np.abs(d) < _TINY)
        c = 1.0 + aa / c
        np.copyto(c, _TINY, where=np.abs(c) < _TINY)
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        np.copyto(d, _TINY, where=np.abs(d) < _TINY)
        c = 1.0 + aa / c
        np.copyto(c, _TINY, where=np.abs(c) < _TINY)
        d = 1.0 / d
        delta = d * c
        h *= delta
        if np.all(np.abs(delta - 1.0) < 1e-15):
            break
    return h


def beta_cdf(x, beta: float):
    """CDF of the symmetric Beta(beta, beta) distribution.

    Evaluates the regularized incomplete beta I_x(beta, beta) by continued
    fraction on x <= 1/2 and reflects through I_x = 1 - I_{1-x} otherwise;
    absolute error is comfortably below 1e-10 on the fit bracket.
    """
    if beta <= 0:
        raise EstimatorError("beta must be positive")
    a = float(beta)
    x_in = np.asarray(x, dtype=float)
    scalar = x_in.ndim == 0
    xf = np.atleast_1d(x_in).astype(float).ravel()
    out = np.empty_like(xf)

    low = np.clip(np.where(xf <= 0.5, xf, 1.0 - xf), 0.0, 0.5)
    val = np.zeros_like(low)
    interior = low > 0.0
    if np.any(interior):
        y = low[interior]
        ln_beta = 2.0 * math.lgamma(a) - math.lgamma(2.0 * a)
        front = np.exp(a * np.log(y) + a * np.log1p(-y) - math.log(a) - ln_beta)
        val[interior] = front * _betacf(a, a, y)
    out = np.where(xf <= 0.5, val, 1.0 - val)
    out[xf <= 0.0] = 0.0
    out[xf >= 1.0] = 1.0
    out[xf == 0.5] = 0.5
    if scalar:
        return float(out[0])
    return out.reshape(x_in.shape)


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov distance and the symmetric-Beta fit


def ks_distance(samples, cdf) -> float:
    """One-sample KS distance between an empirical sample and a CDF callable."""
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    n = s.size
    if n == 0:
        raise EstimatorError("need at least one sample")
    c = np.asarray(cdf(s), dtype=float)
    i = np.arange(1, n + 1, dtype=float)
    return float(np.max(np.maximum(np.abs(i / n - c), np.abs(c - (i - 1) / n))))


@dataclass(frozen=True)
class KsFitResult:
    beta_star: float
    kappa: float
    n_samples: int


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def fit_beta_symmetric(samples, bracket=(0.5, 5.0), beta_tol: float = 1e-4) -> KsFitResult:
    """Minimize the KS distance to Beta(b, b) over b by golden section.

    The objective is empirically unimodal on the default bracket; the final
    KS value is re-evaluated on the full sample at the minimizer.
    """
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    if s.size == 0:
        raise EstimatorError("need at least one sample")
    if s[0] < 0.0 or s[-1] > 1.0:
        raise EstimatorError("samples must lie in [0, 1]")

    n = s.size
    i = np.arange(1, n + 1, dtype=float)
    lo_cdf = (i - 1) / n
    hi_cdf = i / n

    def objective(b: float) -> float:
        c = beta_cdf(s, b)
        return float(np.max(np.maximum(np.abs(hi_cdf - c), np.abs(c - lo_cdf))))

    a, b = float(bracket[0]), float(bracket[1])
    c_pt = b - _INVPHI * (b - a)
    d_pt = a + _INVPHI * (b - a)
    fc = objective(c_pt)
    fd = objective(d_pt)
    while b - a > beta_tol:
        if fc < fd:
            b, d_pt, fd = d_pt, c_pt, fc
            c_pt = b - _INVPHI * (b - a)
            fc = objective(c_pt)
        else:
            a, c_pt, fc = c_pt, d_pt, fd
            d_pt = a + _INVPHI * (b - a)
            fd = objective(d_pt)
    beta_star = 0.5 * (a + b)
    return KsFitResult(beta_star=beta_star, kappa=objective(beta_star), n_samples=n)


# ---------------------------------------------------------------------------
# empirical moments


@dataclass(frozen=True)
class EmpiricalMoments:
    """Raw moments 1..k_max with leave-one-out (jackknife) standard errors."""

    values: np.ndarray
    standard_errors: np.ndarray
    n_samples: int

    @property
    def k_max(self) -> int:
        return self.values.size

    def value(self, k: int) -> float:
        return float(self.values[k - 1])

    def se(self, k: int) -> float:
        return float(self.standard_errors[k - 1])


def empirical_moments(samples, k_max: int) -> EmpiricalMoments:
    if k_max < 1:
        raise EstimatorError("k_max must be >= 1")
    s = np.asarray(samples, dtype=float).ravel()
    n = s.size
    if n == 0:
        raise EstimatorError("need at least one sample")
    values = np.empty(k_max)
    ses = np.empty(k_max)
    powers = np.ones_like(s)
    for k in range(1, k_max + 1):
        powers = powers * s
        m = powers.mean()
        values[k - 1] = m
        if n > 1:
            # jackknife variance of the mean reduces to sum((x-m)^2)/(n(n-1))
            ses[k - 1] = math.sqrt(float(((powers - m) ** 2).sum()) / (n * (n - 1)))
        else:
            ses[k - 1] = 0.0
    return EmpiricalMoments(values=values, standard_errors=ses, n_samples=n)
