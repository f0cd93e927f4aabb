"""Background spacetime, mode frequencies and Bogoliubov coefficients.

The conformal scale factor ``C(eta) = 1 + eps * (1 + tanh(rho * eta))`` interpolates
between flat in- and out-regions.  A scalar mode of mass ``m`` and momentum ``k``
has frequency ``omega_in`` in the past and ``omega_out`` in the future; the two
mode bases are related by the Bogoliubov pair ``(alpha, beta)``, evaluated here
from ratios of complex Gamma functions.  All moduli are additionally available
in closed ``sinh`` form, computed in log-space so that large ``omega / rho``
never overflows.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .errors import GammaPoleError, NumericalFault, ValidationError

__all__ = [
    "CosmologyParams",
    "ModeParams",
    "ModeFrequencies",
    "BogoliubovData",
    "conformal_factor",
    "frequencies",
    "log_gamma",
    "scaled_log_gamma",
    "complex_gamma",
    "bogoliubov",
    "gamma_sq_closed",
    "one_minus_gamma_sq_closed",
    "log_sinh",
]


@dataclass(frozen=True)
class CosmologyParams:
    """Expansion volume ``epsilon`` (>= 0) and expansion rate ``rho`` (> 0)."""

    epsilon: float
    rho: float

    def __post_init__(self):
        if not math.isfinite(self.epsilon) or self.epsilon < 0:
            raise ValidationError(f"epsilon must be finite and >= 0, got {self.epsilon!r}")
        if not math.isfinite(self.rho) or self.rho <= 0:
            raise ValidationError(f"rho must be finite and > 0, got {self.rho!r}")


@dataclass(frozen=True)
class ModeParams:
    """Field mode (mass, momentum) together with the qubit weight ``chi``."""

    mass: float
    momentum: float
    chi: float = 1 / math.sqrt(2)

    def __post_init__(self):
        if not math.isfinite(self.mass) or self.mass < 0:
            raise ValidationError(f"mass must be finite and >= 0, got {self.mass!r}")
        if not math.isfinite(self.momentum) or self.momentum < 0:
            raise ValidationError(f"momentum must be finite and >= 0, got {self.momentum!r}")
        if self.mass == 0 and self.momentum == 0:
            raise ValidationError("mass and momentum cannot both be zero (omega_in must be > 0)")
        if not 0 <= self.chi <= 1:
            raise ValidationError(f"chi must lie in [0, 1], got {self.chi!r}")


@dataclass(frozen=True)
class ModeFrequencies:
    omega_in: float
    omega_out: float
    omega_plus: float
    omega_minus: float


@dataclass(frozen=True)
class BogoliubovData:
    """Bogoliubov pair for one mode.

    ``alpha`` and ``beta`` carry the phases of the Gamma-function route.
    ``gamma_sq`` and ``alpha_sq`` come from the log-space closed form and are the
    values every observable is computed from; ``beta_sq = gamma_sq * alpha_sq``.
    """

    alpha: complex
    beta: complex
    gamma_sq: float
    alpha_sq: float

    @property
    def beta_sq(self) -> float:
        return self.gamma_sq * self.alpha_sq

    @property
    def normalization(self) -> float:
        """``|alpha|^2 - |beta|^2`` from the complex coefficients (should be 1)."""
        return abs(self.alpha) ** 2 - abs(self.beta) ** 2

    @property
    def gamma_sq_from_coefficients(self) -> float:
        return abs(self.beta) ** 2 / abs(self.alpha) ** 2

    @classmethod
    def from_gamma_sq(cls, gamma_sq: float, phase: float = 0.0) -> "BogoliubovData":
        """Build a pair with real positive ``alpha`` and ``arg(beta) = phase``."""
        if not 0 <= gamma_sq < 1:
            raise ValidationError(f"gamma_sq must lie in [0, 1), got {gamma_sq!r}")
        alpha_sq = 1.0 / (1.0 - gamma_sq)
        alpha = complex(math.sqrt(alpha_sq))
        beta = cmath.rect(math.sqrt(gamma_sq * alpha_sq), phase)
        return cls(alpha=alpha, beta=beta, gamma_sq=gamma_sq, alpha_sq=alpha_sq)


def conformal_factor(eta, cosmo: CosmologyParams):
    """``C(eta) = 1 + epsilon * (1 + tanh(rho * eta))``; accepts scalars or arrays."""
    import numpy as np

    return 1.0 + cosmo.epsilon * (1.0 + np.tanh(cosmo.rho * np.asarray(eta, dtype=float)))


def frequencies(mode: ModeParams, cosmo: CosmologyParams) -> ModeFrequencies:
    m2 = mode.mass * mode.mass
    k2 = mode.momentum * mode.momentum
    omega_in = math.sqrt(k2 + m2)
    if omega_in == 0:
        raise ValidationError("zero in-frequency: mass and momentum are both zero")
    omega_out = math.sqrt(k2 + m2 * (1.0 + 2.0 * cosmo.epsilon))
    # difference form avoids cancellation when eps * m^2 << k^2
    omega_minus = cosmo.epsilon * m2 / (omega_out + omega_in)
    omega_plus = 0.5 * (omega_out + omega_in)
    return ModeFrequencies(omega_in, omega_out, omega_plus, omega_minus)


# Lanczos approximation, g = 7, n = 9
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_LOG_PI = math.log(math.pi)


def _scaled_log_sin_pi(z: complex) -> complex:
    # log(sin(pi z)) - pi |Im z|, no overflow for large |Im z|.  The nearest
    # integer is split off first, sin(pi (z - n)) (-1)^n, so arguments close to
    # a pole keep their relative precision.
    n = round(z.real)
    w = math.pi * (z - n)
    shift = complex(0.0, math.pi * n)
    if abs(w.imag) < 20.0:
        return cmath.log(cmath.sin(w)) - abs(w.imag) + shift
    if w.imag > 0:
        # sin w = (i/2) e^{-iw} (1 - e^{2iw})
        return complex(0.0, -w.real) + cmath.log(1.0 - cmath.exp(2j * w)) + cmath.log(0.5j) + shift
    return complex(0.0, w.real) + cmath.log(1.0 - cmath.exp(-2j * w)) + cmath.log(-0.5j) + shift


def scaled_log_gamma(z) -> complex:
    """``log Gamma(z) + pi |Im z| / 2``.

    The linear decay of ``|Gamma|`` along the imaginary axis is removed
    analytically so that quotients of Gamma functions at large ``|Im z|`` can be
    combined without cancellation.  Lanczos series for ``Re z >= 1/2``,
    reflection below that.  The imaginary part is not branch-normalised.
    """
    z = complex(z)
    if z.imag == 0 and z.real <= 0 and z.real == math.floor(z.real):
        raise GammaPoleError(f"Gamma has a pole at z = {z.real:g}")
    if z.real < 0.5:
        return _LOG_PI - _scaled_log_sin_pi(z) - scaled_log_gamma(1.0 - z)
    z -= 1.0
    series = _LANCZOS_COEF[0]
    for i in range(1, len(_LANCZOS_COEF)):
        series += _LANCZOS_COEF[i] / (z + i)
    t_re = z.real + _LANCZOS_G + 0.5
    y = z.imag
    log_abs_t = math.log(math.hypot(t_re, y))
    arg_t = math.atan2(y, t_re)
    log_series = cmath.log(series)
    # -y * arg(t) = -|y| pi/2 + |y| atan2(t_re, |y|); the first piece is the scaling
    real = (_HALF_LOG_2PI + (z.real + 0.5) * log_abs_t + abs(y) * math.atan2(t_re, abs(y))
            - t_re + log_series.real)
    imag = y * log_abs_t + (z.real + 0.5) * arg_t - y + log_series.imag
    return complex(real, imag)


def log_gamma(z) -> complex:
    """Complex log-Gamma (branch not normalised; ``exp`` of it is exact)."""
    z = complex(z)
    return scaled_log_gamma(z) - 0.5 * math.pi * abs(z.imag)


def complex_gamma(z) -> complex:
    """Gamma function of a complex argument.

    Raises :class:`GammaPoleError` at non-positive integers and
    :class:`OverflowError` if the result is not representable.
    """
    lg = log_gamma(z)
    if lg.real > 709.0:
        raise OverflowError(f"Gamma({z}) overflows a double")
    return cmath.exp(lg)


def log_sinh(x: float) -> float:
    """``log(sinh(x))`` for ``x >= 0``, stable for large ``x``; ``-inf`` at 0."""
    if x < 0:
        raise ValueError("log_sinh needs x >= 0")
    if x == 0:
        return -math.inf
    if x > 20.0:
        return x - math.log(2.0) + math.log1p(-math.exp(-2.0 * x))
    return math.log(math.sinh(x))


def _log_sinh_excess(x: float) -> float:
    # log(sinh(x)) - x, so the linear growth can be cancelled analytically
    if x > 20.0:
        return -math.log(2.0) + math.log1p(-math.exp(-2.0 * x))
    if x == 0:
        return -math.inf
    return math.log(math.sinh(x)) - x


def gamma_sq_closed(freq: ModeFrequencies, cosmo: CosmologyParams) -> float:
    """``sinh^2(pi w_- / rho) / sinh^2(pi w_+ / rho)`` evaluated in log-space.

    The linear parts of the two log-sinh terms combine to ``-pi w_in / rho``
    exactly, which is used directly instead of subtracting two large numbers.
    """
    if freq.omega_minus == 0:
        return 0.0
    scale = math.pi / cosmo.rho
    return math.exp(2.0 * (_log_sinh_excess(scale * freq.omega_minus)
                           - _log_sinh_excess(scale * freq.omega_plus) - scale * freq.omega_in))


def one_minus_gamma_sq_closed(freq: ModeFrequencies, cosmo: CosmologyParams) -> float:
    """``1 - gamma^2 = sinh(pi w_in / rho) sinh(pi w_out / rho) / sinh^2(pi w_+ / rho)``.

    Free of the cancellation that ``1 - gamma_sq_closed(...)`` suffers near 1.
    """
    if freq.omega_minus == 0:
        return 1.0
    scale = math.pi / cosmo.rho
    # the linear parts cancel: w_in + w_out - 2 w_+ = 0
    return math.exp(
        _log_sinh_excess(scale * freq.omega_in)
        + _log_sinh_excess(scale * freq.omega_out)
        - 2.0 * _log_sinh_excess(scale * freq.omega_plus)
    )


def bogoliubov(mode: ModeParams, cosmo: CosmologyParams) -> BogoliubovData:
    freq = frequencies(mode, cosmo)
    if freq.omega_minus == 0:
        # conformally trivial: no particle creation, Gamma(i*0) poles avoided
        return BogoliubovData(alpha=1 + 0j, beta=0j, gamma_sq=0.0, alpha_sq=1.0)

    x_in = freq.omega_in / cosmo.rho
    x_out = freq.omega_out / cosmo.rho
    x_plus = freq.omega_plus / cosmo.rho
    x_minus = freq.omega_minus / cosmo.rho
    prefactor = 0.5 * math.log(freq.omega_out / freq.omega_in)
    lg = scaled_log_gamma
    common = prefactor + lg(1 - 1j * x_in)
    # the pi|Im z|/2 scalings sum to x_in + x_out - 2 x_plus = 0 for alpha and to
    # x_in + x_out - 2 x_minus = 2 x_in for beta (omega_plus - omega_minus = omega_in)
    log_alpha = common + lg(-1j * x_out) - lg(1 - 1j * x_plus) - lg(-1j * x_plus)
    log_beta = common + lg(1j * x_out) - lg(1 + 1j * x_minus) - lg(1j * x_minus) - math.pi * x_in
    alpha = cmath.exp(log_alpha)
    beta = cmath.exp(log_beta)

    gamma_sq = gamma_sq_closed(freq, cosmo)
    alpha_sq = 1.0 / one_minus_gamma_sq_closed(freq, cosmo)
    for name, value in (("alpha", alpha), ("beta", beta), ("gamma_sq", gamma_sq), ("alpha_sq", alpha_sq)):
        if not cmath.isfinite(value):
            raise NumericalFault(f"non-finite {name} at {mode}, {cosmo}")
    if not 0 <= gamma_sq < 1:
        raise NumericalFault(f"gamma_sq = {gamma_sq!r} outside [0, 1) at {mode}, {cosmo}")
    return BogoliubovData(alpha=alpha, beta=beta, gamma_sq=gamma_sq, alpha_sq=alpha_sq)
