"""Photon-number states, density matrices, and scalar observables.

A light pulse is described in the number basis by populations p_0..p_m,
relative phases alpha_1..alpha_m (alpha_0 = 0 by convention), and a single
coherence parameter lambda in [0, 1] that interpolates between the pure
superposition (lambda = 1) and the diagonal mixture (lambda = 0):

    rho = lambda |psi><psi| + (1 - lambda) diag(p),
    |psi> = sum_n sqrt(p_n) exp(i alpha_n) |n>.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UndefinedObservableError, ValidationError

# Construction tolerances: renormalize silently below NORM_TOL, reject above.
NORM_TOL = 1e-9
_NEG_TOL = 1e-12


@dataclass(frozen=True)
class NumberState:
    """Photon-number description of one emitted wavepacket.

    populations: p_0..p_m, non-negative, summing to 1.
    phases: alpha_1..alpha_m in radians (length m, alpha_0 fixed to 0).
    lam: number-basis coherence parameter, 0 (mixed) to 1 (pure).
    """

    populations: tuple[float, ...]
    phases: tuple[float, ...] = ()
    lam: float = 1.0

    def __post_init__(self):
        p = np.asarray(self.populations, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValidationError("populations must be a non-empty 1-d sequence")
        if np.any(p < -_NEG_TOL):
            raise ValidationError(f"negative population: {p.min()}")
        p = np.clip(p, 0.0, None)
        total = p.sum()
        if abs(total - 1.0) > NORM_TOL:
            raise ValidationError(f"populations sum to {total}, not 1")
        p = p / total
        if not 0.0 <= self.lam <= 1.0:
            raise ValidationError(f"lambda must lie in [0, 1], got {self.lam}")
        m = p.size - 1
        alpha = tuple(float(a) for a in self.phases) if self.phases else (0.0,) * m
        if len(alpha) != m:
            raise ValidationError(
                f"phases must have length {m} (alpha_1..alpha_m), got {len(alpha)}"
            )
        object.__setattr__(self, "populations", tuple(float(x) for x in p))
        object.__setattr__(self, "phases", alpha)
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def cutoff(self) -> int:
        """Largest photon number m carried by the state."""
        return len(self.populations) - 1

    def all_phases(self) -> np.ndarray:
        """Phases alpha_0..alpha_m with alpha_0 = 0."""
        return np.concatenate([[0.0], np.asarray(self.phases, dtype=float)])

    def amplitudes(self) -> np.ndarray:
        """Pure-branch amplitudes sqrt(p_n) exp(i alpha_n)."""
        p = np.asarray(self.populations)
        return np.sqrt(p) * np.exp(1j * self.all_phases())

    def to_json_dict(self) -> dict:
        return {
            "p": list(self.populations),
            "alpha": list(self.phases),
            "lambda": self.lam,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json_dict(cls, d: dict) -> "NumberState":
        try:
            return cls(
                populations=tuple(d["p"]),
                phases=tuple(d.get("alpha", ())),
                lam=float(d.get("lambda", 1.0)),
            )
        except KeyError as exc:
            raise ValidationError(f"missing state field {exc}") from exc

    @classmethod
    def from_json(cls, s: str) -> "NumberState":
        return cls.from_json_dict(json.loads(s))


@dataclass(frozen=True)
class DensityMatrix:
    """Validated number-basis density matrix."""

    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        rho = np.asarray(self.entries, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValidationError("density matrix must be square")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
            raise ValidationError("density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > 1e-12:
            raise ValidationError(f"trace is {np.trace(rho).real}, not 1")
        if np.linalg.eigvalsh(rho).min() < -1e-10:
            raise ValidationError("density matrix has a negative eigenvalue")
        object.__setattr__(self, "entries", rho)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def density_of(state: NumberState) -> DensityMatrix:
    """Build the density matrix of a NumberState.

    Diagonal entries are the populations; the (i, j) off-diagonal carries
    lambda sqrt(p_i p_j) exp(i (alpha_i - alpha_j)).
    """
    p = np.asarray(state.populations)
    psi = state.amplitudes()
    pure = np.outer(psi, psi.conj())
    rho = state.lam * pure + (1.0 - state.lam) * np.diag(p)
    # The convex construction can leave the diagonal off by one ulp.
    np.fill_diagonal(rho, p)
    return DensityMatrix(rho)


def purity(rho: DensityMatrix) -> float:
    """Tr(rho^2); equals sum p_i^2 + 2 lambda^2 sum_{i<j} p_i p_j for our states."""
    m = rho.entries
    return float(np.real(np.trace(m @ m)))


def mean_photon(state: NumberState) -> float:
    """Mean photon number <n> = sum n p_n."""
    p = np.asarray(state.populations)
    return float(np.dot(np.arange(p.size), p))


def mean_n_nm1(state: NumberState) -> float:
    """Unnormalized second factorial moment <n(n-1)> = sum n(n-1) p_n."""
    p = np.asarray(state.populations)
    n = np.arange(p.size)
    return float(np.dot(n * (n - 1), p))


def g2_zero(state: NumberState) -> float:
    """Normalized zero-delay second-order correlation <n(n-1)> / <n>^2.

    Raises UndefinedObservableError for states with zero mean photon number.
    """
    nbar = mean_photon(state)
    if nbar <= 0.0:
        raise UndefinedObservableError("g2(0) undefined for zero mean photon number")
    return mean_n_nm1(state) / nbar**2


def cat_populations(alpha_sq: float, cutoff: int, tail_tol: float = 1e-12) -> np.ndarray:
    """Number distribution of the even cat state |alpha> + |-alpha>.

    p_n = (|alpha|^(2n) / n!) / cosh(|alpha|^2) for even n, 0 for odd n,
    returned for n = 0..cutoff. Terms below tail_tol are zeroed.
    """
    if alpha_sq < 0.0:
        raise ValidationError("alpha_sq must be non-negative")
    n = np.arange(cutoff + 1)
    with np.errstate(divide="ignore"):
        logterm = n * np.log(alpha_sq) if alpha_sq > 0 else np.where(n == 0, 0.0, -np.inf)
    logfact = np.array([math.lgamma(k + 1) for k in n])
    p = np.exp(logterm - logfact) / math.cosh(alpha_sq)
    p[n % 2 == 1] = 0.0
    p[p < tail_tol] = 0.0
    return p


def cat_fidelity(state: NumberState, alpha_sq: float) -> float:
    """Statistical fidelity sum_n sqrt(p_n p_n_cat) to an even cat state.

    Compares number distributions only; the state's phases play no role.
    """
    p = np.asarray(state.populations)
    pcat = cat_populations(alpha_sq, state.cutoff)
    return float(np.sum(np.sqrt(p * pcat)))
