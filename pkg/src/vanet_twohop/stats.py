"""Empirical PMFs, the Gaussian approximation check and Poissonness diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy import stats as sps


@dataclass(frozen=True)
class Pmf:
    support: tuple
    masses: tuple
    sample_size: int

    def __post_init__(self):
        if any(m < 0 for m in self.masses):
            raise ValueError("masses must be non-negative")
        if abs(math.fsum(self.masses) - 1.0) > 1e-12:
            raise ValueError("masses must sum to 1")

    @property
    def mean(self) -> float:
        return math.fsum(k * m for k, m in zip(self.support, self.masses))

    @property
    def variance(self) -> float:
        """Population (ddof=0) variance."""
        mu = self.mean
        return math.fsum(m * (k - mu) ** 2 for k, m in zip(self.support, self.masses))

    def to_dict(self) -> dict:
        return {"support": list(self.support), "masses": list(self.masses),
                "sample_size": self.sample_size}


@dataclass(frozen=True)
class GaussianFit:
    mean: float
    std_dev: float

    def __post_init__(self):
        if not self.std_dev > 0:
            raise ValueError("std_dev must be positive")

    def pdf(self, x):
        return np.exp(-0.5 * ((np.asarray(x) - self.mean) / self.std_dev) ** 2) / (
            self.std_dev * math.sqrt(2.0 * math.pi))


@dataclass(frozen=True)
class N2Statistics:
    """Aggregated two-hop counts of one experiment.

    ``variance`` is the unbiased sample variance; ``std_error`` the standard
    error of the mean.
    """

    pmf: Pmf
    mean: float
    variance: float
    runs: int
    counts: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def from_counts(cls, counts) -> "N2Statistics":
        counts = np.asarray(counts, dtype=np.int64)
        pmf = pmf_from_counts(counts)
        var = float(counts.var(ddof=1)) if counts.size > 1 else 0.0
        return cls(pmf, float(counts.mean()), var, int(counts.size), counts)

    @property
    def std_error(self) -> float:
        return math.sqrt(self.variance / self.runs)

    def z_score(self, reference: float) -> float:
        if self.std_error == 0:
            return 0.0 if self.mean == reference else math.copysign(math.inf, self.mean - reference)
        return (self.mean - reference) / self.std_error

    def to_dict(self) -> dict:
        return {"runs": self.runs, "mean": self.mean, "variance": self.variance,
                "std_error": self.std_error, "pmf": self.pmf.to_dict()}


def pmf_from_counts(counts) -> Pmf:
    counts = np.asarray(counts)
    if counts.size == 0:
        raise ValueError("cannot build a PMF from an empty sample")
    if np.any(counts < 0) or np.any(counts != np.round(counts)):
        raise ValueError("counts must be non-negative integers")
    values, freq = np.unique(counts.astype(np.int64), return_counts=True)
    masses = freq / counts.size
    return Pmf(tuple(int(v) for v in values), tuple(float(m) for m in masses), int(counts.size))


def gaussian_cdf(x):
    """Standard normal CDF."""
    out = special.ndtr(x)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class NormalApproxResult:
    ks: float
    ks_corrected: float
    critical_value: float
    significance: float
    sample_size: int

    @property
    def passed(self) -> bool:
        return self.ks_corrected <= self.critical_value


def ks_critical_value(n: int, significance: float) -> float:
    return float(sps.kstwo.ppf(1.0 - significance, n))


def normal_approx_test(counts, fit: GaussianFit, significance: float = 0.05) -> NormalApproxResult:
    """Compare a count sample with ``N(fit.mean, fit.std_dev^2)``.

    ``ks`` is the plain sup distance between the empirical CDF and the fitted
    normal CDF. ``ks_corrected`` uses the mid-probability empirical CDF
    ``F(k-) + p(k)/2`` on the integer lattice, which removes the half-jump
    any continuous law incurs against a lattice distribution; it drives
    ``passed``.
    """
    x = np.sort(np.asarray(counts, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    if x[0] == x[-1]:
        raise ValueError("degenerate sample: zero variance")

    values, freq = np.unique(x, return_counts=True)
    right = np.cumsum(freq) / n
    left = right - freq / n
    phi = special.ndtr((values - fit.mean) / fit.std_dev)
    ks = float(max(np.max(np.abs(right - phi)), np.max(np.abs(left - phi))))

    lattice = np.arange(math.floor(x[0]), math.ceil(x[-1]) + 1, dtype=float)
    below = np.searchsorted(x, lattice, side="left") / n
    upto = np.searchsorted(x, lattice, side="right") / n
    mid = 0.5 * (below + upto)
    phi_lat = special.ndtr((lattice - fit.mean) / fit.std_dev)
    ks_corrected = float(np.max(np.abs(mid - phi_lat)))

    return NormalApproxResult(ks, ks_corrected, ks_critical_value(n, significance),
                              significance, n)


@dataclass(frozen=True)
class DispersionResult:
    dispersion: float
    chi_square: float
    dof: int
    p_value: float

    def rejects(self, significance: float = 0.01) -> bool:
        return self.p_value < significance


def _poisson_bins(mean: float, n: int, min_expected: float = 5.0):
    """Upper edges of contiguous bins with at least ``min_expected`` counts each."""
    dist = sps.poisson(mean)
    edges = []
    acc = 0.0
    k = 0
    while True:
        acc += n * dist.pmf(k)
        tail = n * dist.sf(k)
        if acc >= min_expected and tail >= min_expected:
            edges.append(k)
            acc = 0.0
        elif tail < min_expected:
            break
        k += 1
    return edges


def poisson_dispersion_test(counts, mean: float | None = None) -> DispersionResult:
    """Index of dispersion and a chi-square goodness-of-fit against Poisson.

    The reference law is Poisson(``mean``) when given, else Poisson(sample
    mean) with one degree of freedom charged for the estimate. Bins are merged
    so that every expected frequency is at least 5; the last bin is the tail.
    """
    x = np.asarray(counts, dtype=np.int64)
    if x.size == 0:
        raise ValueError("empty sample")
    sample_mean = float(x.mean())
    if sample_mean <= 0:
        raise ValueError("zero mean: Poisson dispersion undefined")
    dispersion = float(x.var(ddof=1)) / sample_mean if x.size > 1 else math.nan
    lam = sample_mean if mean is None else float(mean)
    n = x.size

    edges = _poisson_bins(lam, n)
    if not edges:
        return DispersionResult(dispersion, 0.0, 0, 1.0)
    dist = sps.poisson(lam)
    cdf_edges = dist.cdf(edges)
    probs = np.diff(np.concatenate([[0.0], cdf_edges, [1.0]]))
    bins = np.searchsorted(edges, x, side="left")
    observed = np.bincount(bins, minlength=len(edges) + 1)
    expected = n * probs
    ddof = 1 if mean is None else 0
    chi2 = float(np.sum((observed - expected) ** 2 / expected))
    dof = len(expected) - 1 - ddof
    p = float(sps.chi2.sf(chi2, dof)) if dof > 0 else 1.0
    return DispersionResult(dispersion, chi2, dof, p)
