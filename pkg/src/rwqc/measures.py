"""Closed-form correlation measures for the qubit / boson / antiboson state.

Every quantity is a convergent series in ``gamma^2 = |beta/alpha|^2``.  Series are
summed in vectorised chunks and stopped only once the current term and a
geometric bound on the remaining tail are both below ``tol`` times the running
sum.  Factors ``gamma^(2n) n / |beta|^2`` are rewritten as
``n gamma^(2(n-1)) / |alpha|^2`` so that the flat limit ``beta -> 0`` needs no
special casing.

Naming: ``p`` is the qubit, ``k`` the boson, ``mk`` the antiboson (mode ``-k``).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .errors import NumericalFault, ValidationError
from .spectrum import BogoliubovData, CosmologyParams, ModeParams, bogoliubov

DEFAULT_TOL = 1e-10
MAX_TERMS = 4_000_000

__all__ = [
    "DEFAULT_TOL",
    "SeriesSum",
    "Entropies",
    "CorrelationReport",
    "pt_spectrum_pk",
    "pt_spectrum_pmk",
    "negativity_pk",
    "negativity_pmk",
    "antiboson_pt_trace_sum",
    "entropies",
    "mutual_information",
    "asymptote",
    "binary_entropy",
    "report",
    "report_from_bogoliubov",
]


class SeriesSum(NamedTuple):
    value: float
    terms_used: int
    tail_bound: float


def sum_series(term_fn, tol: float = DEFAULT_TOL, chunk: int = 64) -> SeriesSum:
    """Sum non-negative terms ``term_fn(n)`` (vectorised over ``n``) with a certified tail.

    Stops at the first ``n >= 3`` where the term ratio ``q_n = t_n / t_{n-1}`` is
    below 1 and no larger than ``q_{n-1}``, and both ``t_n`` and the geometric
    tail ``t_n q_n / (1 - q_n)`` are at most ``tol`` times the partial sum.
    The ratio test makes the tail a bound for terms of the form
    ``gamma^(2n) * (slowly varying factor)``, which covers every series here.
    """
    size = chunk
    while True:
        n = np.arange(size)
        t = np.asarray(term_fn(n), dtype=float)
        if np.any(t < 0) or not np.all(np.isfinite(t)):
            raise NumericalFault("series produced negative or non-finite terms")
        partial = np.cumsum(t)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            q = np.where(t[:-1] > 0, t[1:] / np.where(t[:-1] > 0, t[:-1], 1.0),
                         np.where(t[1:] > 0, np.inf, 0.0))
            tail = np.where(q < 1, t[1:] * q / (1.0 - q), np.inf)
        q_prev = np.concatenate(([np.inf], q[:-1]))
        bound = tol * partial[1:]
        ok = (q < 1) & (q <= q_prev * (1 + 1e-12)) & (t[1:] <= bound) & (tail <= bound)
        ok[:2] = False
        hits = np.flatnonzero(ok)
        if hits.size:
            i = hits[0]
            return SeriesSum(float(partial[i + 1]), int(i + 2), float(tail[i]))
        if size >= MAX_TERMS:
            raise NumericalFault(f"series did not converge within {MAX_TERMS} terms")
        size = min(4 * size, MAX_TERMS)


def _weights(chi: float):
    c2 = chi * chi
    return c2, max(0.0, 1.0 - c2)


def _check(chi, bog):
    if not 0 <= chi <= 1:
        raise ValidationError(f"chi must lie in [0, 1], got {chi!r}")
    if not 0 <= bog.gamma_sq < 1:
        raise ValidationError(f"gamma_sq must lie in [0, 1), got {bog.gamma_sq!r}")


def _gpow(g, n):
    # gamma^(2n) with 0**0 = 1
    return np.power(g, n, dtype=float)


def _gpow_shift(g, n):
    # n * gamma^(2(n-1)), zero at n = 0
    return np.where(n > 0, n * np.power(g, np.maximum(n - 1, 0), dtype=float), 0.0)


def _pk_blocks(chi, bog, n):
    # partial-transpose blocks of rho_{p,k}: trace * |alpha|^2 and discriminant shift
    c2, s2 = _weights(chi)
    g, inv_a2 = bog.gamma_sq, 1.0 / bog.alpha_sq
    a = _gpow(g, n + 1) * c2 + _gpow_shift(g, n) * s2 * inv_a2
    b = 4.0 * c2 * s2 * _gpow(g, 2 * n) * inv_a2
    return a, b, inv_a2


def _pmk_blocks(chi, bog, n):
    c2, s2 = _weights(chi)
    g, inv_a2 = bog.gamma_sq, 1.0 / bog.alpha_sq
    gn = _gpow(g, n)
    d = gn * (c2 + (n + 2) * s2 * g * inv_a2)
    c = 4.0 * c2 * s2 * _gpow(g, 2 * n + 1) * inv_a2
    return d, c, inv_a2


def pt_spectrum_pk(chi: float, bog: BogoliubovData, n_max: int) -> np.ndarray:
    """Eigenvalues of the qubit-transposed ``rho_{p,k}``.

    Order: ``chi^2/|alpha|^2``, then ``(lambda_+, lambda_-)`` for ``n = 0..n_max``.
    """
    _check(chi, bog)
    n = np.arange(n_max + 1)
    a, b, inv_a2 = _pk_blocks(chi, bog, n)
    root = np.sqrt(a * a + b)
    plus = 0.5 * inv_a2 * (a + root)
    denom = a + root
    minus = -0.5 * inv_a2 * np.divide(b, denom, out=np.zeros_like(b), where=denom > 0)
    c2, _ = _weights(chi)
    return np.concatenate(([c2 * inv_a2], np.column_stack((plus, minus)).ravel()))


def pt_spectrum_pmk(chi: float, bog: BogoliubovData, n_max: int) -> np.ndarray:
    """Eigenvalues of the qubit-transposed ``rho_{p,-k}`` (all non-negative).

    Order: ``(1-chi^2)/|alpha|^4``, then ``(lambda_+, lambda_-)`` for ``n = 0..n_max``.
    """
    _check(chi, bog)
    n = np.arange(n_max + 1)
    d, c, inv_a2 = _pmk_blocks(chi, bog, n)
    root = np.sqrt(np.maximum(d * d - c, 0.0))
    plus = 0.5 * inv_a2 * (d + root)
    denom = d + root
    minus = 0.5 * inv_a2 * np.divide(c, denom, out=np.zeros_like(c), where=denom > 0)
    _, s2 = _weights(chi)
    return np.concatenate(([s2 * inv_a2 * inv_a2], np.column_stack((plus, minus)).ravel()))


def _negativity_pk_series(chi, bog, tol):
    def terms(n):
        a, b, inv_a2 = _pk_blocks(chi, bog, n)
        return inv_a2 * np.sqrt(a * a + b)

    return sum_series(terms, tol)


def negativity_pk(chi: float, bog: BogoliubovData, tol: float = DEFAULT_TOL) -> float:
    """Logarithmic negativity between the qubit and the boson."""
    _check(chi, bog)
    if chi in (0.0, 1.0):
        return 0.0
    series = _negativity_pk_series(chi, bog, tol)
    c2, _ = _weights(chi)
    return max(0.0, math.log2(c2 / bog.alpha_sq + series.value))


def antiboson_pt_trace_sum(chi: float, bog: BogoliubovData, tol: float = 1e-14) -> SeriesSum:
    """Trace norm of the qubit-transposed ``rho_{p,-k}`` as a series.

    Every eigenvalue is non-negative, so this equals the trace; analytically 1.
    """
    _check(chi, bog)
    _, s2 = _weights(chi)

    def terms(n):
        d, _, inv_a2 = _pmk_blocks(chi, bog, n)
        return inv_a2 * d

    series = sum_series(terms, tol)
    head = s2 / (bog.alpha_sq * bog.alpha_sq)
    return SeriesSum(head + series.value, series.terms_used, series.tail_bound)


def negativity_pmk(chi: float, bog: BogoliubovData, check_tol: float = 1e-10) -> float:
    """Logarithmic negativity between the qubit and the antiboson: always 0.

    The partial transpose has no negative eigenvalue, so its trace norm is its
    trace.  That trace is re-summed as a consistency check before returning.
    """
    total = antiboson_pt_trace_sum(chi, bog)
    if abs(total.value - 1.0) > check_tol:
        raise NumericalFault(
            f"antiboson partial-transpose trace sums to {total.value!r}, not 1 "
            f"(chi={chi}, gamma_sq={bog.gamma_sq})"
        )
    return 0.0


def binary_entropy(p: float) -> float:
    """``-p log2 p - (1-p) log2 (1-p)``."""
    out = 0.0
    for x in (p, 1.0 - p):
        if x > 0:
            out -= x * math.log2(x)
    return out


def _entropy_terms(lam):
    lam = np.minimum(np.asarray(lam, dtype=float), 1.0)
    safe = np.where(lam > 0, lam, 1.0)
    return np.where(lam > 0, -lam * np.log2(safe), 0.0)


def _spectrum_pk(chi, bog, n):
    # eigenvalues of rho_{p,k}; also the diagonal of rho_{-k}
    c2, s2 = _weights(chi)
    inv_a2 = 1.0 / bog.alpha_sq
    return _gpow(bog.gamma_sq, n) * inv_a2 * (c2 + (n + 1) * s2 * inv_a2)


def _spectrum_k(chi, bog, n):
    # diagonal of rho_k; also the eigenvalues of rho_{p,-k}
    c2, s2 = _weights(chi)
    inv_a2 = 1.0 / bog.alpha_sq
    return inv_a2 * (_gpow(bog.gamma_sq, n) * c2 + _gpow_shift(bog.gamma_sq, n) * s2 * inv_a2)


# Below this gamma^2 the difference S_p + S_pk - S_k loses I_pmk to rounding.
DIRECT_IPMK_BELOW = 1e-2


def _h_diff(x, y, d):
    # -x ln x + y ln y given d = x - y exactly; the pairing only helps when x ~ y
    close = np.abs(d) < 0.5 * y
    y_safe = np.where(y > 0, y, 1.0)
    paired = -d * np.log(x) - y * np.log1p(np.where(close, d / y_safe, 0.0))
    direct = -x * np.log(x) + y * np.log(y_safe)
    return np.where(close, paired, direct)


def _i_pmk_direct(chi, bog, tol):
    """``I_pmk`` as a sum of entropy differences, free of cancellation.

    With ``a_n = chi^2 g^n / |alpha|^2`` and ``b_n = (1-chi^2)(n+1) g^n / |alpha|^4``
    the two spectra are ``a_n + b_n`` and ``a_n + b_{n-1}``; pairing eigenvalues
    whose difference is known in closed form keeps every term at the size of the
    result.  Valid for small ``g = gamma^2``, where every paired eigenvalue past
    the first lies below ``1/e`` and the terms are positive.
    """
    c2, s2 = _weights(chi)
    g = bog.gamma_sq
    if g == 0 or c2 == 0 or s2 == 0:
        return SeriesSum(0.0, 0, 0.0)
    inv_a2 = 1.0 - g
    head = float(_h_diff(c2, c2 * inv_a2, c2 * g))
    y = c2 * g * inv_a2 + s2 * inv_a2 * inv_a2
    head += float(_h_diff(s2, y, g * (s2 * (2.0 - g) - c2 * inv_a2)))
    delta = g * (c2 + s2 * (2.0 - g))
    head += -(1.0 - delta) * math.log1p(-delta)

    def term(n):
        n = n + 1
        a = c2 * _gpow(g, n) * inv_a2
        b = s2 * (n + 1) * _gpow(g, n) * inv_a2 * inv_a2
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(a > 0, _h_diff(a + b, a * g + b, a * inv_a2), 0.0)

    tail = sum_series(term, tol)
    return SeriesSum((head + tail.value) / math.log(2.0), tail.terms_used + 3, tail.tail_bound)


class Entropies(NamedTuple):
    S_p: float
    S_k: float
    S_mk: float
    S_pk: float
    S_pmk: float


def _entropy_series(chi, bog, tol):
    s_pk = sum_series(lambda n: _entropy_terms(_spectrum_pk(chi, bog, n)), tol)
    s_k = sum_series(lambda n: _entropy_terms(_spectrum_k(chi, bog, n)), tol)
    return s_pk, s_k


def entropies(chi: float, bog: BogoliubovData, tol: float = DEFAULT_TOL) -> Entropies:
    """Von Neumann entropies (bits) of the qubit, boson, antiboson and both pairs.

    The joint state is pure, so ``S_mk = S_pk`` and ``S_pmk = S_k``; the two
    remaining series are summed once and shared.
    """
    _check(chi, bog)
    s_pk, s_k = _entropy_series(chi, bog, tol)
    return Entropies(
        S_p=binary_entropy(chi * chi),
        S_k=s_k.value,
        S_mk=s_pk.value,
        S_pk=s_pk.value,
        S_pmk=s_k.value,
    )


_PAIRS = {
    "pk": "pk", ("qubit", "boson"): "pk", "qubit-boson": "pk",
    "pmk": "pmk", ("qubit", "antiboson"): "pmk", "qubit-antiboson": "pmk",
}


def mutual_information(chi: float, bog: BogoliubovData, pair="pk", tol: float = DEFAULT_TOL) -> float:
    """Mutual information of the qubit with the boson (``"pk"``) or antiboson (``"pmk"``)."""
    key = _PAIRS.get(tuple(pair) if isinstance(pair, list) else pair)
    if key is None:
        raise ValidationError(f"unknown pair selector {pair!r}")
    if chi in (0.0, 1.0):
        return 0.0
    if key == "pmk" and bog.gamma_sq < DIRECT_IPMK_BELOW:
        return max(0.0, _i_pmk_direct(chi, bog, tol).value)
    s = entropies(chi, bog, tol)
    if key == "pk":
        return max(0.0, s.S_p + s.S_k - s.S_pk)
    return max(0.0, s.S_p + s.S_mk - s.S_pmk)


def asymptote(quantity: str, chi: float) -> float:
    """Value a measure returns to when particle creation switches off.

    Covers ``k -> inf``, ``m -> 0`` and ``m -> inf`` alike: in each limit
    ``gamma^2 -> 0`` and the state reduces to the initial qubit-boson pair.
    """
    if not 0 <= chi <= 1:
        raise ValidationError(f"chi must lie in [0, 1], got {chi!r}")
    s_p = binary_entropy(chi * chi)
    values = {
        "N_pk": math.log2(1.0 + 2.0 * chi * math.sqrt(max(0.0, 1.0 - chi * chi))),
        "N_pmk": 0.0,
        "I_pk": 2.0 * s_p,
        "I_pmk": 0.0,
        "S_p": s_p,
        # the boson stays maximally correlated with the qubit: S_k -> S_p, not 0
        "S_k": s_p,
        "S_pk": 0.0,
    }
    try:
        return values[quantity]
    except KeyError:
        raise ValidationError(
            f"unknown asymptote selector {quantity!r}; choose from {sorted(values)}"
        ) from None


@dataclass(frozen=True)
class CorrelationReport:
    epsilon: float
    rho: float
    mass: float
    momentum: float
    chi: float
    gamma_sq: float
    N_pk: float
    N_pmk: float
    I_pk: float
    I_pmk: float
    S_p: float
    S_k: float
    S_mk: float
    S_pk: float
    S_pmk: float
    monogamy_residual: float
    terms_used: int
    tail_bound: float

    def to_dict(self):
        return asdict(self)


def report_from_bogoliubov(mode: ModeParams, cosmo: CosmologyParams, bog: BogoliubovData,
                           tol: float = DEFAULT_TOL) -> CorrelationReport:
    chi = mode.chi
    _check(chi, bog)
    s_pk, s_k = _entropy_series(chi, bog, tol)
    s_p = binary_entropy(chi * chi)
    series = [s_pk, s_k]
    n_pmk = negativity_pmk(chi, bog)
    if chi in (0.0, 1.0):
        n_pk = i_pk = i_pmk = 0.0
    else:
        neg = _negativity_pk_series(chi, bog, tol)
        series.append(neg)
        n_pk = max(0.0, math.log2(chi * chi / bog.alpha_sq + neg.value))
        i_pk = max(0.0, s_p + s_k.value - s_pk.value)
        if bog.gamma_sq < DIRECT_IPMK_BELOW:
            direct = _i_pmk_direct(chi, bog, tol)
            series.append(direct)
            i_pmk = max(0.0, direct.value)
        else:
            i_pmk = max(0.0, s_p + s_pk.value - s_k.value)
    return CorrelationReport(
        epsilon=cosmo.epsilon,
        rho=cosmo.rho,
        mass=mode.mass,
        momentum=mode.momentum,
        chi=chi,
        gamma_sq=bog.gamma_sq,
        N_pk=n_pk,
        N_pmk=n_pmk,
        I_pk=i_pk,
        I_pmk=i_pmk,
        S_p=s_p,
        S_k=s_k.value,
        S_mk=s_pk.value,
        S_pk=s_pk.value,
        S_pmk=s_k.value,
        monogamy_residual=i_pk + i_pmk - 2.0 * s_p if chi not in (0.0, 1.0) else 0.0,
        terms_used=max(s.terms_used for s in series),
        tail_bound=max(s.tail_bound for s in series),
    )


def report(mode: ModeParams, cosmo: CosmologyParams, tol: float = DEFAULT_TOL) -> CorrelationReport:
    """All correlation measures at one parameter point."""
    return report_from_bogoliubov(mode, cosmo, bogoliubov(mode, cosmo), tol)
