"""Recovering (epsilon, rho) from correlation data.

Three routes are offered:

* :func:`gamma_sq_small_mass` -- the closed small-mass approximation;
* :func:`rho_from_spectrum` -- the expansion rate from the energy dependence of
  ``gamma^2``, with the derivative taken either from neighbouring momenta or from
  the exact model;
* :func:`fit_parameters` -- damped Gauss-Newton (Levenberg-Marquardt) in
  ``(log eps, log rho)`` against the exact forward model.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize

from . import measures
from .errors import DegenerateFitError, OutOfRegimeError, ValidationError
from .spectrum import CosmologyParams, ModeParams, bogoliubov, frequencies, gamma_sq_closed

KINDS = ("gamma_sq", "I_pmk", "S_k")


@dataclass(frozen=True)
class Observation:
    k: float
    value: float
    kind: str = "gamma_sq"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown observable kind {self.kind!r}; expected one of {KINDS}")
        if not (math.isfinite(self.k) and self.k >= 0):
            raise ValidationError(f"momentum k must be finite and >= 0, got {self.k!r}")
        if not math.isfinite(self.value):
            raise ValidationError(f"observable value must be finite, got {self.value!r}")
        if self.kind == "gamma_sq" and not 0 <= self.value < 1:
            raise ValidationError(f"gamma_sq must lie in [0, 1), got {self.value!r}")
        if self.kind != "gamma_sq" and self.value < 0:
            raise ValidationError(f"{self.kind} must be >= 0, got {self.value!r}")


@dataclass(frozen=True)
class ObservationSet:
    records: tuple
    mass: float
    chi: float = 1 / math.sqrt(2)
    noise: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not (math.isfinite(self.mass) and self.mass >= 0):
            raise ValidationError(f"mass must be finite and >= 0, got {self.mass!r}")
        if not 0 <= self.chi <= 1:
            raise ValidationError(f"chi must lie in [0, 1], got {self.chi!r}")
        if self.noise is not None and not self.noise >= 0:
            raise ValidationError(f"noise scale must be >= 0, got {self.noise!r}")
        for r in self.records:
            ModeParams(self.mass, r.k, self.chi)

    @property
    def distinct_momenta(self) -> int:
        return len({r.k for r in self.records})

    def require_identifiable(self, n_params: int = 2):
        if len(self.records) < n_params or self.distinct_momenta < n_params:
            raise DegenerateFitError(
                f"degenerate fit: {len(self.records)} record(s) at {self.distinct_momenta} distinct "
                f"momentum value(s) cannot constrain {n_params} parameters (need >= {n_params} distinct k)"
            )


@dataclass
class EstimationResult:
    epsilon_hat: float
    rho_hat: float
    residual_norm: float
    iterations: int
    converged: bool
    covariance: list
    message: str = ""
    gradient_norm: float = float("nan")
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def gamma_sq_small_mass(mode: ModeParams, epsilon: float) -> float:
    """``eps m^2 / (2 (m^2 + k^2))``, the small-mass formula for particle creation.

    Meant for ``m << 2 rho sqrt(eps)`` (not checked, ``rho`` is not an input).
    Against the exact model this expression tracks ``|beta/alpha|``; its square
    tracks ``gamma^2`` in the regime ``rho >> omega_+``.
    """
    e2 = mode.mass ** 2 + mode.momentum ** 2
    if e2 == 0:
        raise ValidationError("mass and momentum cannot both be zero")
    return epsilon * mode.mass ** 2 / (2.0 * e2)


def rho_from_spectrum(energy: float, gamma_sq: float, dlog_gamma_sq_dE: float) -> float:
    """``pi E sqrt((1 + gamma^2) / (-E d ln(gamma^2)/dE - 4))``.

    Raises :class:`OutOfRegimeError` carrying the radicand's denominator when it
    is not positive.
    """
    if not energy > 0:
        raise ValidationError(f"energy must be > 0, got {energy!r}")
    radicand = -energy * dlog_gamma_sq_dE - 4.0
    if not radicand > 0:
        raise OutOfRegimeError(
            f"expansion-rate formula out of regime: -E dlnG/dE - 4 = {radicand:.6g} <= 0", radicand
        )
    return math.pi * energy * math.sqrt((1.0 + gamma_sq) / radicand)


def finite_difference(f: Callable[[float], float], x: float, rel_step: float = 1e-4) -> float:
    """Central difference with step ``rel_step * |x|`` (or ``rel_step`` at 0)."""
    h = rel_step * abs(x) if x != 0 else rel_step
    return (f(x + h) - f(x - h)) / (2.0 * h)


def exact_gamma_sq(mass: float, momentum: float, cosmo: CosmologyParams) -> float:
    return gamma_sq_closed(frequencies(ModeParams(mass, momentum), cosmo), cosmo)


def log_gamma_sq_of_energy(mass: float, cosmo: CosmologyParams) -> Callable[[float], float]:
    """``E -> ln gamma^2`` at fixed mass (``k = sqrt(E^2 - m^2)``)."""

    def f(energy):
        k = math.sqrt(max(energy * energy - mass * mass, 0.0))
        return math.log(exact_gamma_sq(mass, k, cosmo))

    return f


def _coth(x):
    return 1.0 / math.tanh(x) if x < 20 else 1.0


def dlog_gamma_sq_dE(mass: float, energy: float, cosmo: CosmologyParams) -> float:
    """Analytic ``d ln(gamma^2) / dE`` at fixed mass from the sinh closed form."""
    k = math.sqrt(max(energy * energy - mass * mass, 0.0))
    freq = frequencies(ModeParams(mass, k), cosmo)
    if freq.omega_minus == 0:
        raise ValidationError("gamma^2 vanishes identically (massless mode or flat spacetime)")
    s = math.pi / cosmo.rho
    d_out = energy / freq.omega_out
    d_plus = 0.5 * (d_out + 1.0)
    d_minus = 0.5 * (d_out - 1.0)
    return 2.0 * s * (_coth(s * freq.omega_minus) * d_minus - _coth(s * freq.omega_plus) * d_plus)


def forward(kind: str, momentum: float, mass: float, chi: float, cosmo: CosmologyParams) -> float:
    """Exact model value of an observable."""
    mode = ModeParams(mass, momentum, chi)
    bog = bogoliubov(mode, cosmo)
    if kind == "gamma_sq":
        return bog.gamma_sq
    if kind == "I_pmk":
        return measures.mutual_information(chi, bog, "pmk")
    if kind == "S_k":
        return measures.entropies(chi, bog).S_k
    raise ValidationError(f"unknown observable kind {kind!r}")


def synthesize(cosmo: CosmologyParams, mass: float, momenta: Sequence[float], kind: str = "gamma_sq",
               chi: float = 1 / math.sqrt(2), noise: float = 0.0, seed: Optional[int] = None) -> ObservationSet:
    """Observations from the exact model, optionally with multiplicative Gaussian noise."""
    rng = np.random.default_rng(seed)
    records = []
    for k in momenta:
        value = forward(kind, k, mass, chi, cosmo)
        if noise:
            value *= 1.0 + noise * rng.standard_normal()
        records.append(Observation(float(k), float(value), kind))
    return ObservationSet(records, mass, chi, noise if noise else None)


def _residuals(theta, obs: ObservationSet):
    eps, rho = math.exp(theta[0]), math.exp(theta[1])
    try:
        cosmo = CosmologyParams(eps, rho)
        model = np.array([forward(r.kind, r.k, obs.mass, obs.chi, cosmo) for r in obs.records])
    except (ValidationError, ArithmeticError, OverflowError):
        return None
    data = np.array([r.value for r in obs.records])
    if np.any(model <= 0):
        return None
    return np.log(model) - np.log(data)


def _jacobian(theta, obs, r0, h=1e-6):
    jac = np.empty((r0.size, theta.size))
    for j in range(theta.size):
        step = np.zeros_like(theta)
        step[j] = h
        up, down = _residuals(theta + step, obs), _residuals(theta - step, obs)
        if up is None or down is None:
            one = up if up is not None else down
            if one is None:
                raise ArithmeticError("forward model failed on both sides of the Jacobian stencil")
            jac[:, j] = (one - r0) / (h if up is not None else -h)
        else:
            jac[:, j] = (up - down) / (2 * h)
    return jac


def _cost(theta, obs):
    r = _residuals(theta, obs)
    return math.inf if r is None else 0.5 * float(r @ r)


def _profile_seeds(theta0, obs, n_eps, half_width, starts, n_rho=25):
    """Starting points from the profile of the cost over ``log eps``.

    For each ``log eps`` on an ``n_eps`` grid the cost is minimised over
    ``log rho`` (coarse scan, then a bounded Brent polish); the local minima of
    the resulting profile, lowest first, are returned.  The valley in ``rho``
    is narrow, so a plain 2-D grid tends to straddle it and miss the basin.
    """
    eps_grid = theta0[0] + np.linspace(-half_width, half_width, n_eps)
    rho_grid = theta0[1] + np.linspace(-1.5 * half_width, 1.5 * half_width, n_rho)
    drho = rho_grid[1] - rho_grid[0]
    profile = []
    for le in eps_grid:
        costs = [_cost((le, lr), obs) for lr in rho_grid]
        j = int(np.argmin(costs))
        if not math.isfinite(costs[j]):
            profile.append((math.inf, le, rho_grid[j]))
            continue
        res = optimize.minimize_scalar(lambda lr: _cost((le, lr), obs), method="bounded",
                                       bounds=(rho_grid[j] - drho, rho_grid[j] + drho),
                                       options={"xatol": 1e-6})
        if res.fun <= costs[j]:
            profile.append((float(res.fun), le, float(res.x)))
        else:
            profile.append((costs[j], le, rho_grid[j]))
    values = [c for c, _, _ in profile]
    minima = []
    for i, (c, le, lr) in enumerate(profile):
        if not math.isfinite(c):
            continue
        left = values[i - 1] if i > 0 else math.inf
        right = values[i + 1] if i + 1 < len(values) else math.inf
        if c <= left and c <= right:
            minima.append((c, le, lr))
    minima.sort()
    return [np.array([le, lr]) for _, le, lr in minima[:starts]]


def _levenberg_marquardt(theta, obs, max_iter, xtol, gtol, max_log_step):
    r = _residuals(theta, obs)
    cost = 0.5 * float(r @ r)
    lam = 1e-3
    converged = False
    message = "maximum iterations reached"
    grad_norm = float("inf")
    it = 0
    jac = _jacobian(theta, obs, r)
    for it in range(1, max_iter + 1):
        grad = jac.T @ r
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < gtol:
            converged, message = True, "gradient norm below tolerance"
            break
        jtj = jac.T @ jac
        diag = np.diag(jtj).copy()
        diag[diag == 0] = 1.0
        accepted = False
        while lam < 1e16:
            try:
                delta = np.linalg.solve(jtj + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            longest = float(np.max(np.abs(delta)))
            if longest > max_log_step:
                delta = delta * (max_log_step / longest)
            trial = theta + delta
            r_new = _residuals(trial, obs) if np.all(np.abs(trial) < 700) else None
            if r_new is not None and 0.5 * float(r_new @ r_new) <= cost:
                accepted = True
                break
            lam *= 4
        if not accepted:
            message = "no downhill step found"
            break
        step_norm = float(np.linalg.norm(delta))
        theta, r = trial, r_new
        cost = 0.5 * float(r @ r)
        lam = max(lam / 3, 1e-12)
        jac = _jacobian(theta, obs, r)
        if step_norm < xtol * (1.0 + float(np.linalg.norm(theta))):
            converged, message = True, "step norm below tolerance"
            break
    return theta, r, jac, cost, converged, message, grad_norm, it


def fit_parameters(obs: ObservationSet, init=(1.0, 1.0), max_iter: int = 200,
                   xtol: float = 1e-10, gtol: float = 1e-10, cond_max: float = 1e16,
                   max_log_step: float = 1.0, prescan: int = 25,
                   prescan_span: float = 10.0, starts: int = 4) -> EstimationResult:
    """Least-squares fit of ``(epsilon, rho)`` to ``obs`` with log residuals.

    With ``prescan > 1`` the cost is profiled over ``prescan`` values of
    ``epsilon`` spanning a factor ``prescan_span`` either side of ``init``
    (minimising over ``rho`` at each), and the damped iteration is run from
    ``init`` and from the ``starts`` lowest local minima of the profile; the
    lowest final cost wins.  This avoids the secondary minima a single start
    can fall into.  Each step is capped at ``max_log_step`` in either
    log-parameter, which keeps the iteration out of the plateaus where
    ``gamma^2`` stops depending on ``rho``.  Converged when the gradient norm
    or the relative step norm drops below its tolerance.  An ill-conditioned
    Gauss-Newton curvature at the end marks the result as not converged, since
    the data then pin down only a combination of the parameters.  The returned
    covariance is ``s^2 (J^T J)^-1`` mapped to ``(epsilon, rho)`` coordinates,
    with ``s`` the noise scale if known and the residual RMS otherwise.
    """
    obs.require_identifiable(2)
    if any(r.value <= 0 for r in obs.records):
        raise ValidationError("observations with value 0 carry no information for a log-residual fit")
    eps0, rho0 = init
    CosmologyParams(eps0, rho0)
    if eps0 <= 0:
        raise ValidationError("initial epsilon must be > 0 for a log-parameter fit")

    theta0 = np.log([eps0, rho0])
    r0 = _residuals(theta0, obs)
    if r0 is None:
        raise ValidationError(f"forward model undefined at the initial point {init}")
    seeds = [theta0]
    if prescan > 1:
        seeds += _profile_seeds(theta0, obs, prescan, math.log(prescan_span), starts)

    best = None
    total_iter = 0
    for seed in seeds:
        run = _levenberg_marquardt(seed, obs, max_iter, xtol, gtol, max_log_step)
        total_iter += run[-1]
        if best is None or run[3] < best[3]:
            best = run
    theta, r, jac, cost, converged, message, grad_norm, _ = best

    jtj = jac.T @ jac
    cond = np.linalg.cond(jtj)
    eps_hat, rho_hat = float(math.exp(theta[0])), float(math.exp(theta[1]))
    dof = len(obs.records) - 2
    if obs.noise:
        scale = obs.noise ** 2
    elif dof > 0:
        scale = 2.0 * cost / dof
    else:
        scale = 1.0
    if not np.isfinite(cond) or cond > cond_max:
        converged = False
        message = f"degenerate curvature (condition number {cond:.3g}); parameters not separately identified"
        cov = np.full((2, 2), np.inf)
    else:
        d = np.diag([eps_hat, rho_hat])
        cov = d @ np.linalg.inv(jtj) @ d * scale
    return EstimationResult(
        epsilon_hat=eps_hat,
        rho_hat=rho_hat,
        residual_norm=float(np.linalg.norm(r)),
        iterations=total_iter,
        converged=converged,
        covariance=cov.tolist(),
        message=message,
        gradient_norm=grad_norm,
    )


def spectral_rho(obs: ObservationSet, cosmo_hat: Optional[CosmologyParams] = None) -> dict:
    """Expansion-rate estimates from the energy dependence of ``gamma^2``.

    ``"neighbours"``: derivative by differences between adjacent momenta in the
    data.  ``"model"``: analytic derivative of the exact model at ``cosmo_hat``.
    Out-of-regime points are reported with their radicand instead of a value.
    """
    pts = sorted((r for r in obs.records if r.kind == "gamma_sq" and r.value > 0), key=lambda r: r.k)
    m = obs.mass
    out = {"neighbours": [], "model": []}
    for a, b in zip(pts, pts[1:]):
        e_a, e_b = math.hypot(m, a.k), math.hypot(m, b.k)
        if e_b == e_a:
            continue
        slope = (math.log(b.value) - math.log(a.value)) / (e_b - e_a)
        energy = 0.5 * (e_a + e_b)
        out["neighbours"].append(_rho_entry(energy, math.sqrt(a.value * b.value), slope))
    if cosmo_hat is not None:
        for r in pts:
            energy = math.hypot(m, r.k)
            try:
                slope = dlog_gamma_sq_dE(m, energy, cosmo_hat)
            except ValidationError:
                continue
            out["model"].append(_rho_entry(energy, r.value, slope))
    return out


def _rho_entry(energy, gamma_sq, slope):
    entry = {"energy": energy, "gamma_sq": gamma_sq, "dlog_gamma_sq_dE": slope}
    try:
        entry["rho"] = rho_from_spectrum(energy, gamma_sq, slope)
    except OutOfRegimeError as exc:
        entry["rho"] = None
        entry["radicand"] = exc.radicand
    return entry


def monte_carlo(cosmo: CosmologyParams, mass: float, momenta: Sequence[float], noise: float,
                seeds: Sequence[int], init=(1.0, 1.0), kind: str = "gamma_sq", workers: int = 1):
    """Fit noisy synthetic data once per seed; returns the results in seed order."""

    def one(seed):
        return fit_parameters(synthesize(cosmo, mass, momenta, kind, noise=noise, seed=seed), init)

    if workers <= 1:
        return [one(s) for s in seeds]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, seeds))


def read_observations(path, mass: float, chi: float = 1 / math.sqrt(2),
                      noise: Optional[float] = None) -> ObservationSet:
    """Parse a ``k,value,kind`` CSV; errors name the offending line."""
    records = []
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = None
        for lineno, row in enumerate(rows, start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            if header is None:
                header = [c.strip() for c in row]
                if header != ["k", "value", "kind"]:
                    raise ValidationError(f"line {lineno}: expected header 'k,value,kind', got {','.join(row)!r}")
                continue
            if len(row) != 3:
                raise ValidationError(f"line {lineno}: expected 3 fields, got {len(row)}")
            try:
                k, value = float(row[0]), float(row[1])
            except ValueError:
                raise ValidationError(f"line {lineno}: non-numeric field in {','.join(row)!r}") from None
            try:
                records.append(Observation(k, value, row[2].strip()))
            except ValidationError as exc:
                raise ValidationError(f"line {lineno}: {exc}") from None
    if header is None:
        raise ValidationError(f"{path}: empty observation file")
    return ObservationSet(records, mass, chi, noise)


def write_observations(obs: ObservationSet, path, comment: Optional[str] = None):
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "value", "kind"])
        for r in obs.records:
            w.writerow([repr(r.k), repr(r.value), r.kind])
