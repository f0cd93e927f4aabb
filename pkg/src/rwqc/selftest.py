"""Randomised oracle-versus-closed-form suite and model invariant checks.

Every check reports its worst deviation against a fixed limit.  Output depends
only on the seed and the knobs, never on timing, so two runs with the same
flags print the same bytes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import estimate, fock, measures
from .spectrum import CosmologyParams, ModeParams, bogoliubov

CANONICAL_MODE = ModeParams(1.0, 1.0)
CANONICAL_COSMO = CosmologyParams(10.0, 10.0)
ORACLE_FIELDS = ("N_pk", "S_p", "S_k", "S_mk", "S_pk", "S_pmk", "I_pk", "I_pmk")
HALF = 1 / math.sqrt(2)


@dataclass
class Check:
    name: str
    limit: float
    worst: float = 0.0
    failures: list = field(default_factory=list)

    def record(self, deviation: float, where: str):
        if not deviation <= self.worst:
            self.worst = deviation if math.isfinite(deviation) else math.inf
        if not deviation <= self.limit:
            self.failures.append(f"{where}: deviation {deviation:.3e}")

    @property
    def passed(self) -> bool:
        return not self.failures

    def lines(self):
        head = f"{'PASS' if self.passed else 'FAIL'} {self.name}: worst {self.worst:.2e} (limit {self.limit:.0e})"
        return [head] + [f"    {f}" for f in self.failures[:10]]


def _log_uniform(rng, lo, hi, size=None):
    return np.exp(rng.uniform(math.log(lo), math.log(hi), size))


def _point(eps, rho, m, k, chi=HALF):
    return ModeParams(float(m), float(k), float(chi)), CosmologyParams(float(eps), float(rho))


def _fmt(mode, cosmo):
    return (f"eps={cosmo.epsilon!r} rho={cosmo.rho!r} m={mode.mass!r} k={mode.momentum!r} "
            f"chi={mode.chi!r}")


def check_coefficients(rng, n=500):
    norm = Check("Bogoliubov normalization |alpha|^2-|beta|^2=1", 1e-10)
    route = Check("Gamma-function gamma^2 equals sinh closed form", 1e-10)
    for eps, rho, m, k in _log_uniform(rng, 1e-2, 1e2, (n, 4)):
        mode, cosmo = _point(eps, rho, m, k)
        bog = bogoliubov(mode, cosmo)
        norm.record(abs(bog.normalization - 1.0), _fmt(mode, cosmo))
        route.record(abs(bog.gamma_sq_from_coefficients - bog.gamma_sq), _fmt(mode, cosmo))
    return [norm, route]


def oracle_points(rng, n, gamma_sq_max=0.9):
    pts = []
    while len(pts) < n:
        eps, rho, m, k = _log_uniform(rng, 1e-1, 1e2, 4)
        chi = rng.uniform(0.0, 1.0)
        mode, cosmo = _point(eps, rho, m, k, chi)
        bog = bogoliubov(mode, cosmo)
        if bog.gamma_sq <= gamma_sq_max:
            pts.append((mode, cosmo, bog))
    return pts


def check_oracle(rng, n, tol, cap):
    oracle = Check("closed form matches truncated-Fock oracle", 1e-8)
    antisum = Check("qubit-antiboson partial transpose trace sum is 1 (series)", 1e-10)
    antinorm = Check("qubit-antiboson partial transpose trace norm is 1 (oracle)", 1e-8)
    trunc = fock.TruncationPolicy(cap=cap)
    for mode, cosmo, bog in oracle_points(rng, n):
        where = _fmt(mode, cosmo)
        closed = measures.report_from_bogoliubov(mode, cosmo, bog, tol)
        ref = fock.oracle_report(mode, bog, trunc)
        worst = max(abs(getattr(closed, f) - getattr(ref, f)) for f in ORACLE_FIELDS)
        oracle.record(worst, where)
        antisum.record(abs(measures.antiboson_pt_trace_sum(mode.chi, bog).value - 1.0), where)
        antinorm.record(abs(ref.trace_norm_pmk - 1.0), where)
    return [oracle, antisum, antinorm]


def check_monogamy(rng, n=100, tol=measures.DEFAULT_TOL):
    mono = Check("I_pk + I_pmk = 2 S_p", 1e-8)
    half = Check("I_pk + I_pmk = 2 at chi=1/sqrt(2)", 1e-8)
    for eps, rho, m, k in _log_uniform(rng, 1e-2, 1e2, (n, 4)):
        mode, cosmo = _point(eps, rho, m, k, rng.uniform(0.0, 1.0))
        rep = measures.report(mode, cosmo, tol)
        mono.record(abs(rep.monogamy_residual), _fmt(mode, cosmo))
        mode, cosmo = _point(eps, rho, m, k)
        rep = measures.report(mode, cosmo, tol)
        half.record(abs(rep.I_pk + rep.I_pmk - 2.0), _fmt(mode, cosmo))
    return [mono, half]


def check_limits(tol=measures.DEFAULT_TOL):
    large_k = Check("k=1e3 recovers flat values (N_pk=1, I_pk=2, I_pmk=0, S_k=S_p)", 1e-4)
    mode, cosmo = _point(10, 10, 1, 1e3)
    rep = measures.report(mode, cosmo, tol)
    s_p = measures.binary_entropy(0.5)
    for got, want in ((rep.N_pk, 1.0), (rep.I_pk, 2.0), (rep.I_pmk, 0.0), (rep.S_k, s_p)):
        large_k.record(abs(got - want), _fmt(mode, cosmo))
    masses = Check("m=1e-3 and m=1e3 recover N_pk=1", 1e-3)
    for m in (1e-3, 1e3):
        mode, cosmo = _point(10, 10, m, 1)
        masses.record(abs(measures.report(mode, cosmo, tol).N_pk - 1.0), _fmt(mode, cosmo))
    return [large_k, masses]


def check_trigger(rng, n=50, tol=measures.DEFAULT_TOL):
    zero = Check("I_pmk = 0 at chi in {0, 1}", 0.0)
    positive = Check("I_pmk > 0 at chi=1/sqrt(2) when gamma^2 > 0", 0.0)
    for eps, rho, m, k in _log_uniform(rng, 1e-2, 1e2, (n, 4)):
        for chi in (0.0, 1.0):
            mode, cosmo = _point(eps, rho, m, k, chi)
            zero.record(abs(measures.report(mode, cosmo, tol).I_pmk), _fmt(mode, cosmo))
        mode, cosmo = _point(eps, rho, m, k)
        rep = measures.report(mode, cosmo, tol)
        if rep.gamma_sq > 0:
            positive.record(0.0 if rep.I_pmk > 0 else 1.0, _fmt(mode, cosmo))
    return [zero, positive]


def check_argmin(tol=measures.DEFAULT_TOL):
    check = Check("argmin_m I_pk = argmax_m I_pmk", 0.0)
    masses = np.geomspace(0.01, 100.0, 200)
    for eps, rho in ((10, 10), (1, 10), (10, 1), (0.1, 10)):
        i_pk, i_pmk = [], []
        for m in masses:
            rep = measures.report(*_point(eps, rho, m, 1.0), tol)
            i_pk.append(rep.I_pk)
            i_pmk.append(rep.I_pmk)
        check.record(float(np.argmin(i_pk) != np.argmax(i_pmk)), f"eps={eps} rho={rho}")
    return [check]


def check_truncation(cap):
    check = Check("doubling the Fock cutoff at the canonical point", 1e-10)
    bog = bogoliubov(CANONICAL_MODE, CANONICAL_COSMO)
    base = fock.oracle_report(CANONICAL_MODE, bog, fock.TruncationPolicy(cap=cap))
    wide = fock.TruncationPolicy(cutoff=2 * base.cutoff, cap=max(cap, 2 * base.cutoff))
    doubled = fock.oracle_report(CANONICAL_MODE, bog, wide)
    where = f"cutoff {base.cutoff} -> {doubled.cutoff}"
    for f in ORACLE_FIELDS + ("N_pmk",):
        check.record(abs(getattr(base, f) - getattr(doubled, f)), f"{where}, {f}")
    return [check]


def check_round_trip():
    check = Check("noiseless fit recovers (eps, rho) = (5, 8)", 1e-6)
    truth = CosmologyParams(5.0, 8.0)
    obs = estimate.synthesize(truth, 0.05, [0.2, 0.5, 1.0, 2.0, 5.0])
    res = estimate.fit_parameters(obs, (1.0, 1.0))
    err = max(abs(res.epsilon_hat / 5.0 - 1.0), abs(res.rho_hat / 8.0 - 1.0))
    check.record(err if res.converged else math.inf, res.message)
    return [check]


def run(points: int = 20, seed: int = 0, tol: float = measures.DEFAULT_TOL, cap: int = 512):
    rng = np.random.default_rng(seed)
    checks = []
    checks += check_coefficients(rng)
    checks += check_oracle(rng, points, tol, cap)
    checks += check_monogamy(rng, tol=tol)
    checks += check_limits(tol)
    checks += check_trigger(rng, tol=tol)
    checks += check_argmin(tol)
    checks += check_truncation(cap)
    checks += check_round_trip()
    return checks
