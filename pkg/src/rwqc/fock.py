"""Brute-force oracle in a truncated Fock basis.

The qubit-boson-antiboson pure state is tabulated explicitly, reduced density
matrices are formed by partial trace, and every correlation measure is obtained
from a dense Hermitian eigendecomposition.  Nothing here uses the closed-form
series of :mod:`rwqc.measures`, so the two modules check each other.

Basis ordering is qubit major (``UP`` = 0, ``DOWN`` = 1), then boson number,
then antiboson number, all ascending.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalFault, TruncationError, ValidationError
from .spectrum import BogoliubovData, ModeParams

UP, DOWN = 0, 1
QUBIT, BOSON, ANTIBOSON = "qubit", "boson", "antiboson"
SUBSYSTEMS = (QUBIT, BOSON, ANTIBOSON)

EIGEN_FLOOR = -1e-10


@dataclass(frozen=True)
class TruncationPolicy:
    """Fock cutoff selection.

    ``cutoff`` is the smallest antiboson number retained (the boson then runs to
    ``cutoff + 1``); it is escalated until the discarded weight is certified
    below ``tail_tol``, but never beyond ``cap``.
    """

    cutoff: int = 8
    tail_tol: float = 1e-13
    cap: int = 512

    def __post_init__(self):
        if self.cutoff < 1:
            raise ValidationError(f"cutoff must be >= 1, got {self.cutoff}")
        if not self.tail_tol > 0:
            raise ValidationError(f"tail_tol must be > 0, got {self.tail_tol}")
        if self.cap < self.cutoff:
            raise ValidationError(f"cap ({self.cap}) is below cutoff ({self.cutoff})")


def discarded_weight_bound(gamma_sq: float, cutoff: int) -> float:
    """Upper bound on the norm lost by dropping all terms with ``n > cutoff``."""
    if gamma_sq == 0:
        return 0.0
    return gamma_sq ** (cutoff + 1) * (cutoff + 2) / (1.0 - gamma_sq) ** 2


def select_cutoff(gamma_sq: float, policy: TruncationPolicy):
    """Smallest cutoff ``>= policy.cutoff`` meeting the tail bound, or ``None``
    if no cutoff up to ``policy.cap`` does."""
    for n in range(policy.cutoff, policy.cap + 1):
        if discarded_weight_bound(gamma_sq, n) <= policy.tail_tol:
            return n
    return None


@dataclass(frozen=True)
class PureState:
    """Amplitudes ``a[qubit, n_boson, n_antiboson]`` of the joint out-state."""

    amplitudes: np.ndarray
    cutoff: int

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    @property
    def dims(self):
        return self.amplitudes.shape


def build_joint_state(mode: ModeParams, bog: BogoliubovData,
                      trunc: TruncationPolicy = TruncationPolicy()) -> PureState:
    """Tabulate the out-region state of qubit, boson ``k`` and antiboson ``-k``.

    ``a(up, n, n) = chi/|alpha| r^n`` and
    ``a(down, n+1, n) = sqrt(1-chi^2)/|alpha| r^n sqrt(n+1)/conj(alpha)`` with
    ``r = conj(beta)/conj(alpha)``.
    """
    gamma_sq = abs(bog.beta) ** 2 / abs(bog.alpha) ** 2
    if not gamma_sq < 1:
        raise ValidationError(f"gamma_sq must be < 1, got {gamma_sq}")
    cutoff = select_cutoff(gamma_sq, trunc)
    certified = cutoff is not None
    if not certified:
        cutoff = trunc.cap
    chi = mode.chi
    chi_perp = math.sqrt(max(0.0, 1.0 - chi * chi))
    ratio = np.conj(bog.beta) / np.conj(bog.alpha)
    mod_alpha = abs(bog.alpha)

    n = np.arange(cutoff + 1)
    powers = ratio ** n
    amp = np.zeros((2, cutoff + 2, cutoff + 1), dtype=complex)
    amp[UP, n, n] = chi / mod_alpha * powers
    amp[DOWN, n + 1, n] = chi_perp / mod_alpha * powers * np.sqrt(n + 1) / np.conj(bog.alpha)

    state = PureState(amp, cutoff)
    if not certified:
        achieved = state.norm ** 2
        raise TruncationError(
            f"cutoff cap {trunc.cap} reached at gamma_sq={gamma_sq:.6g} before the tail bound "
            f"{trunc.tail_tol:g} held; retained norm^2 = {achieved:.16f}",
            achieved_norm=achieved,
            cutoff=cutoff,
        )
    return state


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian matrix on a product basis with named subsystems."""

    matrix: np.ndarray
    dims: tuple
    labels: tuple

    @property
    def basis(self):
        """Index tuples in row order (first subsystem major)."""
        return list(np.ndindex(*self.dims))

    def check(self, tol=1e-12):
        herm = np.max(np.abs(self.matrix - self.matrix.conj().T)) if self.matrix.size else 0.0
        if herm > tol:
            raise NumericalFault(f"density matrix not Hermitian (deviation {herm:.2e})")
        return self


def partial_trace(state: PureState, keep) -> DensityMatrix:
    """Reduced density matrix on the subsystems named in ``keep``.

    ``keep`` is any subset of ``("qubit", "boson", "antiboson")``; the kept
    subsystems are ordered as in the joint basis regardless of the order given.
    """
    unknown = set(keep) - set(SUBSYSTEMS)
    if unknown:
        raise ValidationError(f"unknown subsystems {sorted(unknown)}")
    keep = tuple(s for s in SUBSYSTEMS if s in set(keep))
    if not keep:
        raise ValidationError("keep must name at least one subsystem")
    kept_axes = [SUBSYSTEMS.index(s) for s in keep]
    traced_axes = [i for i in range(3) if i not in kept_axes]
    psi = np.transpose(state.amplitudes, kept_axes + traced_axes)
    dims = psi.shape[: len(kept_axes)]
    mat = psi.reshape(int(np.prod(dims)), -1)
    rho = mat @ mat.conj().T
    return DensityMatrix(rho, tuple(dims), keep).check()


def partial_transpose(dm: DensityMatrix, transpose_over=QUBIT) -> DensityMatrix:
    """Transpose the indices of one subsystem of a bipartite matrix."""
    if len(dm.dims) != 2:
        raise ValidationError("partial transpose needs a bipartite density matrix")
    which = dm.labels.index(transpose_over)
    d1, d2 = dm.dims
    t = dm.matrix.reshape(d1, d2, d1, d2)
    t = t.transpose(2, 1, 0, 3) if which == 0 else t.transpose(0, 3, 2, 1)
    return DensityMatrix(t.reshape(d1 * d2, d1 * d2), dm.dims, dm.labels)


def pt_eigenvalues(dm: DensityMatrix, transpose_over=QUBIT) -> np.ndarray:
    return np.linalg.eigvalsh(partial_transpose(dm, transpose_over).matrix)


def pt_negativity(dm: DensityMatrix, transpose_over=QUBIT) -> float:
    """``log2`` of the trace norm of the partial transpose."""
    trace_norm = float(np.sum(np.abs(pt_eigenvalues(dm, transpose_over))))
    return max(0.0, math.log2(trace_norm))


def spectrum(dm: DensityMatrix) -> np.ndarray:
    w = np.linalg.eigvalsh(dm.matrix)
    if w.size and w.min() < EIGEN_FLOOR:
        raise NumericalFault(f"reduced density matrix has eigenvalue {w.min():.3e} < {EIGEN_FLOOR}")
    return np.clip(w, 0.0, None)


def von_neumann_entropy(dm: DensityMatrix) -> float:
    w = spectrum(dm)
    w = w[w > 0]
    return float(max(0.0, -np.sum(w * np.log2(w))))


def mutual_information_numeric(state: PureState, pair) -> float:
    a, b = pair
    s_a = von_neumann_entropy(partial_trace(state, (a,)))
    s_b = von_neumann_entropy(partial_trace(state, (b,)))
    s_ab = von_neumann_entropy(partial_trace(state, (a, b)))
    return max(0.0, s_a + s_b - s_ab)


@dataclass(frozen=True)
class OracleReport:
    N_pk: float
    N_pmk: float
    trace_norm_pmk: float
    S_p: float
    S_k: float
    S_mk: float
    S_pk: float
    S_pmk: float
    I_pk: float
    I_pmk: float
    cutoff: int
    norm: float


def oracle_report(mode: ModeParams, bog: BogoliubovData,
                  trunc: TruncationPolicy = TruncationPolicy()) -> OracleReport:
    """Every observable of the model from dense linear algebra."""
    state = build_joint_state(mode, bog, trunc)
    rho_pk = partial_trace(state, (QUBIT, BOSON))
    rho_pmk = partial_trace(state, (QUBIT, ANTIBOSON))
    s = {name: von_neumann_entropy(partial_trace(state, (name,))) for name in SUBSYSTEMS}
    s_pk = von_neumann_entropy(rho_pk)
    s_pmk = von_neumann_entropy(rho_pmk)
    trace_norm_pmk = float(np.sum(np.abs(pt_eigenvalues(rho_pmk))))
    return OracleReport(
        N_pk=pt_negativity(rho_pk),
        N_pmk=pt_negativity(rho_pmk),
        trace_norm_pmk=trace_norm_pmk,
        S_p=s[QUBIT],
        S_k=s[BOSON],
        S_mk=s[ANTIBOSON],
        S_pk=s_pk,
        S_pmk=s_pmk,
        I_pk=s[QUBIT] + s[BOSON] - s_pk,
        I_pmk=s[QUBIT] + s[ANTIBOSON] - s_pmk,
        cutoff=state.cutoff,
        norm=state.norm,
    )
