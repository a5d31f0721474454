"""Closed forms for two-hop connectivity in the 1D Rayleigh-fading random connection model.

All mean-value results assume the connection function ``H(r) = exp(-beta r^2)``.
Models with ``beta != 1`` are reduced to ``beta == 1`` by rescaling the line
(``y = sqrt(beta) x``), which maps intensity ``rho`` to ``rho / sqrt(beta)``
and leaves every vertex and path count unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from scipy import integrate

SQRT_PI_2 = math.sqrt(math.pi / 2.0)
SQRT_2PI = math.sqrt(2.0 * math.pi)
UNIT_ROUNDOFF = 2.0 ** -53

SERIES = "series"
QUADRATURE = "quadrature"
DENSE_ASYMPTOTIC = "dense_asymptotic"

DEFAULT_RTOL = 1e-9
QUAD_EPSILON = 1e-12
# Gaussian tails beyond this half-width are below 1e-17 of the integrand's mass.
MIN_QUAD_HALF_WIDTH = 9.0
MAX_SERIES_TERMS = 2000


class PrecisionExhausted(ArithmeticError):
    """The alternating series cannot be certified in double precision."""


@dataclass(frozen=True)
class ChannelModel:
    beta: float
    eta: float = 2.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")

    @classmethod
    def from_link_budget(cls, power, attenuation_constant, noise_power,
                         rate_threshold, eta=2.0):
        return cls(beta_from_link_budget(power, attenuation_constant,
                                         noise_power, rate_threshold), eta)

    def require_free_space(self):
        if self.eta != 2:
            raise ValueError(
                f"closed forms are only valid for eta == 2 (got eta={self.eta})")

    @property
    def length_scale(self) -> float:
        """Distance at which the link probability drops to 1/e."""
        return self.beta ** (-1.0 / self.eta)


@dataclass(frozen=True)
class FiniteInterval:
    """Road ``[-half_width, half_width]``."""

    half_width: float

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")

    @property
    def width(self) -> float:
        return 2.0 * self.half_width


@dataclass(frozen=True)
class InfiniteLine:
    pass


Domain = Union[FiniteInterval, InfiniteLine]


@dataclass(frozen=True)
class RoadScenario:
    rho: float
    domain: Domain = InfiniteLine()
    rsu_position: float = 0.0

    def __post_init__(self):
        if not self.rho >= 0:
            raise ValueError(f"rho must be non-negative, got {self.rho}")


@dataclass(frozen=True)
class SeriesEvaluation:
    value: float
    terms_used: int
    method: str
    estimated_abs_error: float

    def scaled(self, factor: float) -> "SeriesEvaluation":
        return SeriesEvaluation(self.value * factor, self.terms_used, self.method,
                                self.estimated_abs_error * factor)


def beta_from_link_budget(power, attenuation_constant, noise_power, rate_threshold):
    """Link-budget constant ``N0 (2^Y - 1) / (P C)`` of the Rayleigh link."""
    if not power > 0:
        raise ValueError("power must be positive")
    if not 0 < attenuation_constant < 1:
        raise ValueError("attenuation_constant must lie in (0, 1)")
    if not noise_power > 0:
        raise ValueError("noise_power must be positive")
    if not rate_threshold > 0:
        raise ValueError("rate_threshold must be positive")
    return noise_power * math.expm1(rate_threshold * math.log(2.0)) / (
        power * attenuation_constant)


def connection_prob(distance, channel: ChannelModel):
    if distance < 0:
        raise ValueError("distance must be non-negative")
    return math.exp(-channel.beta * distance ** channel.eta)


def effective_intensity(rho: float, channel: ChannelModel) -> float:
    """Intensity of the equivalent ``beta == 1`` model."""
    channel.require_free_space()
    return rho / math.sqrt(channel.beta)


def mean_two_hop_paths(x, u, scenario: RoadScenario, channel: ChannelModel,
                       rescale: bool = True):
    """Expected number of relays ``z`` with ``x <-> z <-> u``.

    For a finite road ``[-W/2, W/2]`` the relay integral gives, with ``beta == 1``,

        (rho/2) sqrt(pi/2) exp(-(x-u)^2/2)
            * [erf((W - (x+u)) / sqrt 2) + erf((W + (x+u)) / sqrt 2)]

    which is centred on the midpoint of ``x`` and ``u``.
    """
    channel.require_free_space()
    rho = scenario.rho
    if rho == 0:
        return 0.0
    d = x - u
    if isinstance(scenario.domain, InfiniteLine):
        beta = channel.beta
        return rho * math.sqrt(math.pi / (2.0 * beta)) * math.exp(-beta * d * d / 2.0)

    half = scenario.domain.half_width
    if abs(x) > half or abs(u) > half:
        raise ValueError("x and u must lie inside the road interval")
    if channel.beta != 1:
        if not rescale:
            raise ValueError("finite-interval formula needs beta == 1; "
                             "enable rescaling for other beta")
        s = math.sqrt(channel.beta)
        x, u, d, half = x * s, u * s, d * s, half * s
        rho = rho / s
    width = 2.0 * half
    m2 = x + u
    return (rho / 2.0) * SQRT_PI_2 * math.exp(-d * d / 2.0) * (
        math.erf((width - m2) / math.sqrt(2.0)) + math.erf((width + m2) / math.sqrt(2.0)))


def two_hop_existence_prob(x, u, scenario: RoadScenario, channel: ChannelModel,
                           rescale: bool = True):
    """Probability that at least one relay joins ``x`` and ``u`` (Poisson void complement)."""
    return -math.expm1(-mean_two_hop_paths(x, u, scenario, channel, rescale))


def n1_moment(order: int, mean: float) -> float:
    """Raw moment of a Poisson count, ``sum_k S(order, k) mean^k``."""
    if order < 1 or int(order) != order:
        raise ValueError("order must be a positive integer")
    if mean < 0:
        raise ValueError("mean must be non-negative")
    order = int(order)
    # Stirling numbers of the second kind, row by row.
    row = [1]
    for n in range(1, order + 1):
        new = [0] * (n + 1)
        for k in range(1, n + 1):
            new[k] = k * (row[k] if k < len(row) else 0) + row[k - 1]
        row = new
    try:
        total = math.fsum(row[k] * mean ** k for k in range(1, order + 1))
    except OverflowError as exc:
        raise OverflowError(f"moment of order {order} overflows at mean={mean}") from exc
    if math.isinf(total):
        raise OverflowError(f"moment of order {order} overflows at mean={mean}")
    return total


def expected_n2_series(alpha: float, rtol: float = DEFAULT_RTOL) -> SeriesEvaluation:
    """Evaluate ``f(alpha) = sqrt(2 pi) sum_k (-1)^(k-1) alpha^k / (k! sqrt k)``.

    Terms come from the recurrence ``alpha^k / k!``; each carries at most about
    ``k + 2`` roundings, and the rounded terms are then summed exactly with
    ``math.fsum``. The error certificate is therefore ``u * sum_k (k + 2) |t_k|``
    plus the first omitted term, which bounds the truncation remainder once the
    terms decrease. Raises :class:`PrecisionExhausted` when the certificate
    exceeds ``rtol * max(1, |f|)``.
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if alpha == 0:
        return SeriesEvaluation(0.0, 0, SERIES, 0.0)

    terms = []
    rounding = 0.0
    power = 1.0  # alpha^k / k!
    k = 0
    while True:
        k += 1
        if k > MAX_SERIES_TERMS:
            raise PrecisionExhausted(f"series did not converge within {MAX_SERIES_TERMS} terms")
        power *= alpha / k
        if math.isinf(power):
            raise PrecisionExhausted(f"series term overflow at alpha={alpha}")
        term = power / math.sqrt(k)
        terms.append(term if k % 2 else -term)
        rounding += (k + 2) * term
        if k > alpha and term < UNIT_ROUNDOFF * 1e-3 * abs(math.fsum(terms)):
            break
    inner = math.fsum(terms)
    remainder = power * alpha / (k + 1) / math.sqrt(k + 1)
    err = SQRT_2PI * (UNIT_ROUNDOFF * rounding + remainder)
    value = SQRT_2PI * inner
    if err > rtol * max(1.0, abs(value)):
        raise PrecisionExhausted(
            f"series at alpha={alpha:g} has error bound {err:.3g}, "
            f"above tolerance {rtol * max(1.0, abs(value)):.3g}")
    return SeriesEvaluation(max(value, 0.0), k, SERIES, err)


def truncation_window(rho_eff: float, epsilon: float) -> float:
    """Half-width beyond which a vehicle has a two-hop link w.p. below ``epsilon``.

    Works in units of the connection scale (``beta == 1``).
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if rho_eff < 0:
        raise ValueError("rho_eff must be non-negative")
    arg = rho_eff * SQRT_PI_2 / -math.log1p(-epsilon)
    if not arg > 1:
        raise ValueError(
            f"no truncation window exists for rho={rho_eff:g} at epsilon={epsilon:g}")
    return math.sqrt(2.0 * math.log(arg))


def _f_integrand(x, alpha):
    return -math.expm1(-alpha * math.exp(-0.5 * x * x))


def expected_n2_quadrature(alpha: float, rtol: float = DEFAULT_RTOL) -> SeriesEvaluation:
    """Adaptive Gauss-Kronrod evaluation of ``f(alpha) = int (1 - exp(-alpha e^{-x^2/2})) dx``.

    The integrand is even, so ``[0, L]`` is integrated and doubled. The tails
    past ``L`` are bounded by ``2 alpha int_L^inf e^{-x^2/2} dx``; the bound is
    added to the error estimate, not to the value.
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if alpha == 0:
        return SeriesEvaluation(0.0, 0, QUADRATURE, 0.0)
    try:
        half = max(truncation_window(alpha / SQRT_PI_2, QUAD_EPSILON), MIN_QUAD_HALF_WIDTH)
    except ValueError:
        half = MIN_QUAD_HALF_WIDTH
    # Split at the plateau edge so the adaptive rule sees one smooth step per piece.
    edge = math.sqrt(2.0 * math.log(alpha)) if alpha > 1 else 0.0
    points = [edge] if 0 < edge < half else None
    value, err, info = integrate.quad(
        _f_integrand, 0.0, half, args=(alpha,), points=points,
        epsabs=1e-15, epsrel=1e-13, limit=500, full_output=True)[:3]
    if info.get("ier", 0) not in (0,) and err > rtol * max(1.0, value):
        raise ArithmeticError(f"quadrature did not converge at alpha={alpha:g}")
    tail = alpha * SQRT_PI_2 * math.erfc(half / math.sqrt(2.0))
    return SeriesEvaluation(2.0 * value, info["neval"], QUADRATURE, 2.0 * (err + tail))


def expected_n2_dense_asymptotic(rho_eff: float) -> float:
    """Large-intensity equivalent ``2 rho sqrt(2 ln rho + 2 ln sqrt(pi/2))``.

    Defined for ``rho sqrt(pi/2) > 1``; ``rho == 0`` returns 0 like every
    other mean-value function.
    """
    if rho_eff == 0:
        return 0.0
    arg = 2.0 * math.log(rho_eff) + 2.0 * math.log(SQRT_PI_2) if rho_eff > 0 else -math.inf
    if not arg > 0:
        raise ValueError(f"dense asymptotic needs rho*sqrt(pi/2) > 1, got rho={rho_eff:g}")
    return 2.0 * rho_eff * math.sqrt(arg)


def expected_n2_sparse_asymptotic(rho_eff: float) -> float:
    if rho_eff < 0:
        raise ValueError("rho_eff must be non-negative")
    return math.pi * rho_eff ** 2


def expected_n2(scenario: RoadScenario, channel: ChannelModel, method: str = "auto",
                rtol: float = DEFAULT_RTOL) -> SeriesEvaluation:
    """Mean number of vehicles with a two-hop path to the RSU on the infinite line.

    ``method`` is ``auto`` (series when certifiable, else quadrature),
    ``series`` (may raise :class:`PrecisionExhausted`) or ``quadrature``.
    """
    if not isinstance(scenario.domain, InfiniteLine):
        raise ValueError("expected_n2 is defined on the infinite line only")
    rho_eff = effective_intensity(scenario.rho, channel)
    if method not in ("auto", SERIES, QUADRATURE):
        raise ValueError(f"unknown method {method!r}")
    if rho_eff == 0:
        return SeriesEvaluation(0.0, 0, QUADRATURE if method == QUADRATURE else SERIES, 0.0)
    alpha = rho_eff * SQRT_PI_2
    if method == SERIES:
        inner = expected_n2_series(alpha, rtol)
    elif method == QUADRATURE:
        inner = expected_n2_quadrature(alpha, rtol)
    else:
        try:
            inner = expected_n2_series(alpha, rtol)
        except PrecisionExhausted:
            inner = expected_n2_quadrature(alpha, rtol)
    return inner.scaled(rho_eff)


def mean_degree(rho: float, channel: ChannelModel) -> float:
    """Expected number of direct neighbours, ``rho sqrt(pi / beta)``."""
    channel.require_free_space()
    if rho < 0:
        raise ValueError("rho must be non-negative")
    return rho * math.sqrt(math.pi / channel.beta)
