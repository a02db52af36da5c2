"""Balanced-beamsplitter interference of photon-number superpositions.

Two routes to the same observables:

* exact state-vector expansion for pure inputs (``bs_output`` and the
  ``*_from_state`` reductions), using the mode transformation
  a+ = (c+ + d+)/sqrt(2), b+ = (c+ - d+)/sqrt(2), with the b input
  carrying an extra n*phi phase per Fock term;

* closed forms for singles and zero-delay coincidences of one wavepacket
  interfering with its (phase-shifted) twin,

      N_c,d = (1/2) [<n> +/- sqrt(M) C1 cos(phi)],
      C(0)  = (1/8) [<n(n-1)> - C2 cos(2 phi)],

  where C1 and C2 are first- and second-order number-coherence terms
  damped by lambda^2, and M in [0, 1] is the scalar wavepacket overlap.

Normalization conventions differ between the two routes and are kept
deliberately: the closed forms count photons per interfering input
(N_c + N_d = <n>), while the state-vector singles count both unit inputs
(sum = 2 <n>).  Zero-delay coincidences from the state vector carry the
factor 1/4 of the pulse-pair picture (each wavepacket is split once
before interfering), which makes them agree with the closed form as is.
Normalized quantities (n_c, visibilities, Cbar) agree between routes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MixedInputError, UndefinedObservableError, ValidationError
from .fock import NumberState, g2_zero, mean_n_nm1, mean_photon

DEFAULT_MAX_CUTOFF = 4

FRINGE_CSV_HEADER = "phi,n_c,n_d,C0,Cbar"


@dataclass(frozen=True)
class JointFockState:
    """Pure two-mode output state as an amplitude grid over |n_c, m_d>."""

    amplitudes: np.ndarray = field(repr=False)  # [n_c, m_d] complex

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.ndim != 2:
            raise ValidationError("amplitude grid must be 2-d")
        norm = np.sum(np.abs(amp) ** 2)
        if abs(norm - 1.0) > 1e-10:
            raise ValidationError(f"output state norm^2 is {norm}, not 1")
        object.__setattr__(self, "amplitudes", amp)

    @property
    def cutoff(self) -> int:
        """Largest photon number representable per output mode."""
        return self.amplitudes.shape[0] - 1

    def amplitude(self, n_c: int, m_d: int) -> complex:
        return complex(self.amplitudes[n_c, m_d])

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class InterferenceObservables:
    """Closed-form observables of one state self-interfering at phase phi."""

    n_c: float
    n_d: float
    c0: float
    v1: float
    v2: float
    phi: float


def bs_output(
    state_a: NumberState,
    state_b: NumberState,
    phi: float,
    max_cutoff: int = DEFAULT_MAX_CUTOFF,
) -> JointFockState:
    """Exact output state of two pure number superpositions on a 50/50 splitter.

    Input b picks up an extra phase n*phi on its n-photon component (the
    long interferometer arm).  Mixed inputs (lambda < 1) are not
    representable as state vectors; use the closed forms for those.
    """
    for s in (state_a, state_b):
        if s.lam < 1.0:
            raise MixedInputError(
                "state-vector interference requires pure inputs (lambda = 1)"
            )
        if s.cutoff > max_cutoff:
            raise ValidationError(
                f"input cutoff {s.cutoff} exceeds brute-force limit {max_cutoff}"
            )

    amp_a = state_a.amplitudes()
    amp_b = state_b.amplitudes() * np.exp(
        1j * phi * np.arange(state_b.cutoff + 1)
    )

    n_max = state_a.cutoff + state_b.cutoff
    out = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    # (a+)^na (b+)^nb |0,0> expanded over c+, d+ monomials via binomials.
    for na in range(state_a.cutoff + 1):
        for nb in range(state_b.cutoff + 1):
            c_ab = amp_a[na] * amp_b[nb]
            if c_ab == 0:
                continue
            c_ab /= math.sqrt(math.factorial(na) * math.factorial(nb))
            c_ab /= math.sqrt(2.0) ** (na + nb)
            for j in range(na + 1):
                for k in range(nb + 1):
                    p = j + k
                    q = na + nb - p
                    coeff = (
                        math.comb(na, j)
                        * math.comb(nb, k)
                        * (-1) ** (nb - k)
                    )
                    out[p, q] += c_ab * coeff * math.sqrt(
                        math.factorial(p) * math.factorial(q)
                    )
    return JointFockState(out)


def singles_from_state(out: JointFockState) -> tuple[float, float]:
    """Mean photon numbers (N_c, N_d) of the output state.

    Sums to the total mean photon number of both unit inputs.
    """
    prob = out.probabilities()
    n = np.arange(prob.shape[0])
    n_c = float(np.sum(prob * n[:, None]))
    n_d = float(np.sum(prob * n[None, :]))
    return n_c, n_d


def coincidences_from_state(out: JointFockState) -> float:
    """Zero-delay coincidence rate sum n_c m_d |amp|^2, in pulse-pair units.

    Carries the 1/4 factor of the pulse-pair convention (see module
    docstring), so it is directly comparable to ``closed_coincidences``.
    """
    prob = out.probabilities()
    n = np.arange(prob.shape[0])
    return 0.25 * float(np.sum(prob * n[:, None] * n[None, :]))


def coherence_c1(state: NumberState) -> float:
    """First-order number-coherence term C1 = lambda^2 |sum_n sqrt(n p_n p_{n-1}) e^{i(a_n - a_{n-1})}|^2."""
    p = np.asarray(state.populations)
    alpha = state.all_phases()
    n = np.arange(1, p.size)
    s = np.sum(np.sqrt(n * p[1:] * p[:-1]) * np.exp(1j * (alpha[1:] - alpha[:-1])))
    return state.lam**2 * float(np.abs(s) ** 2)


def coherence_c2(state: NumberState) -> float:
    """Second-order term C2 = lambda^2 |sum_n sqrt(n(n-1) p_n p_{n-2}) e^{i(a_n - a_{n-2})}|^2."""
    p = np.asarray(state.populations)
    if p.size < 3:
        return 0.0
    alpha = state.all_phases()
    n = np.arange(2, p.size)
    s = np.sum(
        np.sqrt(n * (n - 1) * p[2:] * p[:-2]) * np.exp(1j * (alpha[2:] - alpha[:-2]))
    )
    return state.lam**2 * float(np.abs(s) ** 2)


def closed_singles(state: NumberState, M: float, phi) -> tuple:
    """Closed-form singles N_c,d = (1/2)[<n> +/- sqrt(M) C1 cos(phi)].

    Distinguishability damps only the interference term, by sqrt(M).
    Accepts scalar or array phi.
    """
    if not 0.0 <= M <= 1.0:
        raise ValidationError(f"overlap M must lie in [0, 1], got {M}")
    nbar = mean_photon(state)
    osc = math.sqrt(M) * coherence_c1(state) * np.cos(phi)
    return 0.5 * (nbar + osc), 0.5 * (nbar - osc)


def closed_coincidences(state: NumberState, phi):
    """Closed-form zero-delay coincidences C(0) = (1/8)[<n(n-1)> - C2 cos(2 phi)].

    Oscillates at twice the singles frequency (phase super-resolution).
    Accepts scalar or array phi.
    """
    return 0.125 * (mean_n_nm1(state) - coherence_c2(state) * np.cos(2.0 * np.asarray(phi)))


def singles_visibility(state: NumberState, M: float = 1.0) -> float:
    """Fringe contrast of the normalized singles, sqrt(M) C1 / <n>."""
    if not 0.0 <= M <= 1.0:
        raise ValidationError(f"overlap M must lie in [0, 1], got {M}")
    nbar = mean_photon(state)
    if nbar <= 0.0:
        raise UndefinedObservableError("singles visibility undefined for vacuum")
    return math.sqrt(M) * coherence_c1(state) / nbar


def coincidence_visibility(state: NumberState) -> float:
    """Contrast of the coincidence fringe, C2 / <n(n-1)>."""
    nn = mean_n_nm1(state)
    if nn <= 0.0:
        raise UndefinedObservableError(
            "coincidence visibility undefined without a two-photon component"
        )
    return coherence_c2(state) / nn


def normalized_coincidence_curve(state: NumberState, phi, M: float = 1.0):
    """Normalized coincidences Cbar(0) = C(0) / (N_c N_d).

    Equals (1/2) g2 (1 - v2 cos 2 phi) / (1 - v1^2 cos^2 phi) with
    v1 = sqrt(M) C1/<n> and v2 = C2/<n(n-1)>.  Accepts scalar or array phi.
    """
    g2 = g2_zero(state)  # raises for zero-mean states
    v1 = singles_visibility(state, M)
    nn = mean_n_nm1(state)
    v2 = coincidence_visibility(state) if nn > 0.0 else 0.0
    phi = np.asarray(phi, dtype=float)
    return 0.5 * g2 * (1.0 - v2 * np.cos(2.0 * phi)) / (1.0 - v1**2 * np.cos(phi) ** 2)


def v1_with_phases(state: NumberState) -> float:
    """Singles visibility of a 0+1+2 state with explicit Fock-term phases.

    v1 = lambda^2 p1 (p0 + 2 p2 + 2 sqrt(2 p0 p2) cos(2 a1 - a2)) / (p1 + 2 p2);
    maximal when a2 = 2 a1.  Only defined up to two photons.
    """
    if state.cutoff > 2:
        raise ValidationError("phase-resolved v1 formula covers cutoff <= 2 only")
    p = list(state.populations) + [0.0, 0.0]
    p0, p1, p2 = p[0], p[1], p[2]
    if p1 + 2.0 * p2 <= 0.0:
        raise UndefinedObservableError("singles visibility undefined for vacuum")
    alpha = state.all_phases()
    a1 = alpha[1] if state.cutoff >= 1 else 0.0
    a2 = alpha[2] if state.cutoff >= 2 else 0.0
    num = p0 + 2.0 * p2 + 2.0 * math.sqrt(2.0 * p0 * p2) * math.cos(2.0 * a1 - a2)
    return state.lam**2 * p1 * num / (p1 + 2.0 * p2)


def observables(state: NumberState, M: float, phi: float) -> InterferenceObservables:
    """Bundle of closed-form observables at a single phase."""
    n_c, n_d = closed_singles(state, M, phi)
    nn = mean_n_nm1(state)
    return InterferenceObservables(
        n_c=float(n_c),
        n_d=float(n_d),
        c0=float(closed_coincidences(state, phi)),
        v1=singles_visibility(state, M),
        v2=coincidence_visibility(state) if nn > 0.0 else 0.0,
        phi=phi,
    )


def fringe_table(state: NumberState, M: float, phis: np.ndarray) -> np.ndarray:
    """Columns (phi, n_c, n_d, C0, Cbar) over a phase grid.

    n_c and n_d are the normalized singles (1 +/- v1 cos phi)/2.
    """
    phis = np.asarray(phis, dtype=float)
    nc_raw, nd_raw = closed_singles(state, M, phis)
    total = nc_raw + nd_raw
    c0 = np.broadcast_to(closed_coincidences(state, phis), phis.shape)
    cbar = normalized_coincidence_curve(state, phis, M)
    return np.column_stack([phis, nc_raw / total, nd_raw / total, c0, cbar])


def write_fringe_csv(path, state: NumberState, M: float, phis: np.ndarray) -> None:
    """Write the fringe table to CSV with header ``phi,n_c,n_d,C0,Cbar``."""
    table = fringe_table(state, M, phis)
    with open(path, "w") as fh:
        fh.write(FRINGE_CSV_HEADER + "\n")
        for row in table:
            fh.write(",".join(f"{x:.12g}" for x in row) + "\n")
