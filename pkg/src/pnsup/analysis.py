"""Inverse pipeline: from count records back to the emitted quantum state.

Stages, mirroring how the measurement is actually analyzed:

1. ``time_to_phase``: the normalized singles n_c = counts_c / (counts_c +
   counts_d) are mapped bin by bin onto a folded interferometer phase in
   [0, pi] through phi = arccos((2 n_c - 1) / v), using the observed
   fringe contrast; an intensity binning ties intensity bins one-to-one
   to phase bins.
2. ``extract_visibility``: the singles visibility v1, from a weighted
   cosine fit over phase bins (raw extrema available behind a flag).
3. coincidence fit: normalized zero-delay coincidences against the
   assigned phase give g2(0) and the coincidence visibility v2 via the
   linear form Cbar (1 - v1^2 cos^2 phi) = g2/2 (1 - v2 cos 2 phi).
4. ``invert_two_photon``: {v1, v2, g2} plus normalization pin down
   {p0, p1, p2, lambda} through 1-d root bracketing in p0.
5. ``report``: purity, g2 consistency, and cat-state fidelity attached.

Uncertainty propagation is by bootstrap: acquisition bins are resampled
with replacement (phase-coverage variability of the free drift) and
every count Poisson-redrawn (shot noise), with the whole chain re-run
per replicate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import (
    DegenerateDataError,
    InfeasibleMeasurementsError,
    InsufficientContrastError,
    ValidationError,
)
from .fock import NumberState, cat_fidelity, density_of, g2_zero, purity
from .mzi import TagStream

_EPS = 1e-12


# ---------------------------------------------------------------------------
# phase mapping


@dataclass(frozen=True)
class PhaseMapped:
    """Per-acquisition-bin folded phases plus the intensity binning."""

    phi: np.ndarray = field(repr=False)  # folded to [0, pi]
    n_c: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)  # total counts per bin
    v_est: float = 0.0
    bin_index: np.ndarray = field(repr=False, default=None)
    bin_phi: np.ndarray = field(repr=False, default=None)
    occupancy: np.ndarray = field(repr=False, default=None)
    edges: np.ndarray = field(repr=False, default=None)


def _normalized_singles(counts_c, counts_d):
    c = np.asarray(counts_c, dtype=float)
    d = np.asarray(counts_d, dtype=float)
    total = c + d
    ok = total > 0
    if not np.any(ok):
        raise ValidationError("stream has no counts at all")
    return c[ok] / total[ok], total[ok], ok


def _contrast(n_c, raw_extrema: bool) -> float:
    if raw_extrema:
        return float(n_c.max() - n_c.min())
    return float(np.quantile(n_c, 0.995) - np.quantile(n_c, 0.005))


def _fold(n_c, v: float) -> np.ndarray:
    return np.arccos(np.clip((2.0 * n_c - 1.0) / max(v, _EPS), -1.0, 1.0))


def time_to_phase(counts_c, counts_d, n_bins: int = 20, raw_extrema: bool = False) -> PhaseMapped:
    """Assign a folded phase in [0, pi] to every acquisition bin.

    Maximal n_c maps to phi = 0, minimal to pi, n_c = n_d to pi/2.
    Raises InsufficientContrastError when the fringe amplitude does not
    clear the Poisson noise floor.
    """
    n_c, weights, _ = _normalized_singles(counts_c, counts_d)
    sigma = np.sqrt(np.maximum(n_c * (1.0 - n_c), 1e-12) / weights)
    noise = float(np.median(sigma))
    v_est = _contrast(n_c, raw_extrema)
    if v_est < max(4.0 * noise, 1e-9):
        raise InsufficientContrastError(
            f"fringe amplitude {v_est:.3g} below noise floor {noise:.3g}"
        )

    phi = _fold(n_c, v_est)
    lo, hi = 0.5 * (1.0 - v_est), 0.5 * (1.0 + v_est)
    edges = np.linspace(lo, hi, n_bins + 1)
    idx = np.clip(np.digitize(n_c, edges) - 1, 0, n_bins - 1)
    occupancy = np.bincount(idx, minlength=n_bins)
    centers = 0.5 * (edges[:-1] + edges[1:])
    bin_phi = _fold(centers, v_est)
    return PhaseMapped(
        phi=phi,
        n_c=n_c,
        weights=weights,
        v_est=v_est,
        bin_index=idx,
        bin_phi=bin_phi,
        occupancy=occupancy,
        edges=edges,
    )


# ---------------------------------------------------------------------------
# visibility


@dataclass(frozen=True)
class VisibilityEstimate:
    v: float
    se: float
    v_raw: float  # contrast before the fit stage


def _binned_cosine_fit(phi, n_c, weights, n_bins):
    """Weighted LS of binned means against cos(phi); returns (v, se)."""
    edges = np.linspace(0.0, math.pi, n_bins + 1)
    idx = np.clip(np.digitize(phi, edges) - 1, 0, n_bins - 1)
    wsum = np.bincount(idx, weights=weights, minlength=n_bins)
    filled = wsum > 0
    if filled.sum() < 3:
        raise DegenerateDataError("fewer than 3 occupied phase bins")
    mean = np.bincount(idx, weights=weights * n_c, minlength=n_bins)[filled] / wsum[filled]
    x = np.cos(0.5 * (edges[:-1] + edges[1:]))[filled]
    w = wsum[filled] / np.maximum(mean * (1.0 - mean), 1e-12)
    xm = np.column_stack([np.ones_like(x), x])
    xtwx = xm.T @ (w[:, None] * xm)
    beta = np.linalg.solve(xtwx, xm.T @ (w * mean))
    resid = mean - xm @ beta
    dof = max(filled.sum() - 2, 1)
    s2 = float(np.sum(w * resid**2) / dof)
    cov = np.linalg.inv(xtwx) * s2
    v = 2.0 * float(beta[1])
    se = 2.0 * float(np.sqrt(max(cov[1, 1], 0.0)))
    return v, se


def extract_visibility(
    phase_mapped: PhaseMapped | None = None,
    counts_c=None,
    counts_d=None,
    n_bins: int = 20,
    raw_extrema: bool = False,
    n_iter: int = 3,
) -> VisibilityEstimate:
    """Singles fringe visibility with a standard error.

    Accepts either a PhaseMapped record or the raw count arrays.  With
    count arrays, a stream whose contrast sits below the noise floor is
    not an error: the (noise-level) contrast itself is returned, which
    is the correct near-zero estimate for a number-mixed input.
    """
    if phase_mapped is None:
        if counts_c is None or counts_d is None:
            raise ValidationError("need a PhaseMapped or both count arrays")
        try:
            phase_mapped = time_to_phase(counts_c, counts_d, n_bins, raw_extrema)
        except InsufficientContrastError:
            n_c, weights, _ = _normalized_singles(counts_c, counts_d)
            v = _contrast(n_c, raw_extrema)
            se = float(np.median(np.sqrt(np.maximum(n_c * (1 - n_c), 1e-12) / weights)))
            return VisibilityEstimate(v=v, se=max(se, v), v_raw=v)

    pm = phase_mapped
    if raw_extrema:
        return VisibilityEstimate(v=pm.v_est, se=0.0, v_raw=pm.v_est)
    v, se = pm.v_est, 0.0
    # Re-assigning phases at the fitted contrast and refitting converges in
    # a couple of passes; clipped bins at the fringe turning points pull the
    # scale toward the true contrast.
    for _ in range(n_iter):
        phi = _fold(pm.n_c, v)
        v_new, se = _binned_cosine_fit(phi, pm.n_c, pm.weights, n_bins)
        if abs(v_new - v) < 1e-9:
            v = v_new
            break
        v = v_new
    return VisibilityEstimate(v=float(np.clip(v, 0.0, 1.0)), se=se, v_raw=pm.v_est)


# ---------------------------------------------------------------------------
# lambda from the visibility-vs-countrate trend


@dataclass(frozen=True)
class LambdaFit:
    lam: float
    intercept: float
    slope: float
    residual_rms: float
    se_lam: float


def fit_lambda_linear(points, M: float = 1.0) -> LambdaFit:
    """Coherence parameter from a linear visibility-vs-countrate trend.

    The visibility of a 0+1 superposition is lambda^2 p0 sqrt(M); with the
    countrate proportional to p1 = 1 - p0, v is linear in the countrate
    and extrapolates to lambda^2 sqrt(M) at zero countrate.  ``points``
    is a sequence of (countrate, v) pairs, countrate in any fixed unit.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise ValidationError("need at least 3 (countrate, v) points")
    if not 0.0 < M <= 1.0:
        raise ValidationError(f"M must lie in (0, 1], got {M}")
    r, v = pts[:, 0], pts[:, 1]
    if np.ptp(r) <= 0.0:
        raise DegenerateDataError("all countrates identical; slope is undefined")
    xm = np.column_stack([np.ones_like(r), r])
    beta, *_ = np.linalg.lstsq(xm, v, rcond=None)
    resid = v - xm @ beta
    rms = float(np.sqrt(np.mean(resid**2)))
    intercept = float(beta[0])
    lam_sq = intercept / math.sqrt(M)
    if lam_sq < -1e-6 or lam_sq > 1.0 + 1e-6:
        raise InfeasibleMeasurementsError(
            f"extrapolated zero-countrate visibility {intercept:.4g} implies "
            f"lambda^2 = {lam_sq:.4g} outside [0, 1]"
        )
    lam = math.sqrt(min(max(lam_sq, 0.0), 1.0))
    dof = max(pts.shape[0] - 2, 1)
    cov = np.linalg.inv(xm.T @ xm) * float(np.sum(resid**2) / dof)
    se_int = math.sqrt(max(cov[0, 0], 0.0))
    se_lam = se_int / (2.0 * math.sqrt(M) * lam) if lam > 0 else float("inf")
    return LambdaFit(lam=lam, intercept=intercept, slope=float(beta[1]),
                     residual_rms=rms, se_lam=se_lam)


# ---------------------------------------------------------------------------
# inversion of (v1, v2, g2)


@dataclass(frozen=True)
class InversionResult:
    """State parameters recovered from (v1, v2, g2) plus normalization."""

    p0: float
    p1: float
    p2: float
    lam: float | None
    purity: float
    g2: float
    cat_fidelity: float
    residual_norm: float
    lambda_identifiable: bool = True

    def to_number_state(self) -> NumberState:
        lam = self.lam if self.lam is not None else 0.0
        return NumberState((self.p0, self.p1, self.p2), lam=lam)


def _split_populations(p0: float, g2: float) -> tuple[float, float]:
    """(p1, p2) from p0 and g2 = 2 p2 / (p1 + 2 p2)^2 with p0+p1+p2 = 1."""
    u = 1.0 - p0
    if g2 <= 0.0:
        return u, 0.0
    disc = 1.0 - 2.0 * g2 * u
    if disc < 0.0:
        raise ValueError("discriminant negative")
    s = (1.0 - math.sqrt(disc)) / g2
    return max(2.0 * u - s, 0.0), max(s - u, 0.0)


def _v1_model(p0: float, v2: float, g2: float) -> float:
    lam_sq = v2 / p0
    p1, p2 = _split_populations(p0, g2)
    s = p1 + 2.0 * p2
    if s <= 0.0:
        return 0.0
    return lam_sq * p1 * (p0 + 2.0 * math.sqrt(2.0 * p0 * p2) + 2.0 * p2) / s


def invert_two_photon(v1: float, v2: float, g2: float) -> InversionResult:
    """Solve {v1, v2, g2, normalization} for {p0, p1, p2, lambda}.

    Uses v2 = lambda^2 p0 to eliminate lambda and the g2 relation to
    eliminate (p1, p2), leaving one equation for p0 that is bracketed
    and bisected on (0, 1).  Raises InfeasibleMeasurementsError when no
    physical state (or no unique one) reproduces the measurements.
    """
    for name, val in (("v1", v1), ("v2", v2)):
        if not 0.0 <= val < 1.0:
            raise ValidationError(f"{name} must lie in [0, 1), got {val}")
    if g2 < 0.0:
        raise ValidationError(f"g2 must be non-negative, got {g2}")

    if v2 < _EPS:
        if v1 < _EPS and g2 < _EPS:
            # Pure single photon up to an unobservable coherence: p0 = 0
            # makes v2 blind to lambda.
            return _finish(0.0, 1.0, 0.0, None, residual=0.0, identifiable=False)
        raise InfeasibleMeasurementsError(
            "v2 = 0 leaves lambda and p0 entangled; the remaining "
            "measurements cannot pin the state"
        )

    lo = v2 + 1e-12
    if g2 > 0.0:
        lo = max(lo, 1.0 - 1.0 / (2.0 * g2) + 1e-12)
    hi = 1.0 - 1e-12
    if lo >= hi:
        raise InfeasibleMeasurementsError(
            f"no p0 in (0, 1) satisfies both lambda <= 1 and g2 = {g2}"
        )

    def f(p0: float) -> float:
        return _v1_model(p0, v2, g2) - v1

    grid = np.linspace(lo, hi, 400)
    vals = np.array([f(x) for x in grid])
    roots = []
    for i in range(grid.size - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            roots.append(grid[i])
        elif a * b < 0.0:
            roots.append(brentq(f, grid[i], grid[i + 1], xtol=1e-14, rtol=8.9e-16))
    if vals[-1] == 0.0:
        roots.append(grid[-1])
    roots = _dedupe(roots)
    if not roots:
        raise InfeasibleMeasurementsError(
            f"no physical state reproduces (v1={v1}, v2={v2}, g2={g2})"
        )
    if len(roots) > 1:
        raise InfeasibleMeasurementsError(
            f"measurements admit {len(roots)} distinct states; inversion is not unique"
        )
    p0 = float(roots[0])
    p1, p2 = _split_populations(p0, g2)
    lam = math.sqrt(min(v2 / p0, 1.0))
    return _finish(p0, p1, p2, lam, residual=abs(f(p0)), identifiable=True)


def _dedupe(roots, tol: float = 1e-9):
    out = []
    for r in sorted(roots):
        if not out or r - out[-1] > tol:
            out.append(r)
    return out


def _finish(p0, p1, p2, lam, residual, identifiable) -> InversionResult:
    state = NumberState((p0, p1, p2), lam=lam if lam is not None else 0.0)
    nbar = p1 + 2.0 * p2
    return InversionResult(
        p0=p0,
        p1=p1,
        p2=p2,
        lam=lam,
        purity=purity(density_of(state)),
        g2=g2_zero(state) if nbar > 0 else 0.0,
        cat_fidelity=cat_fidelity(state, 0.5),
        residual_norm=float(residual),
        lambda_identifiable=identifiable,
    )


def report(result: InversionResult, alpha_sq: float = 0.5, errors: dict | None = None) -> dict:
    """Summary record for an inversion, JSON-ready."""
    state = result.to_number_state()
    g2_pop = g2_zero(state) if (result.p1 + 2 * result.p2) > 0 else 0.0
    return {
        "p": [result.p0, result.p1, result.p2],
        "lambda": result.lam,
        "lambda_identifiable": result.lambda_identifiable,
        "purity": purity(density_of(state)),
        "g2": g2_pop,
        "g2_consistency": abs(g2_pop - result.g2),
        "cat_fidelity": cat_fidelity(state, alpha_sq),
        "cat_alpha_sq": alpha_sq,
        "residual": result.residual_norm,
        "errors": dict(errors or {}),
    }


# ---------------------------------------------------------------------------
# full stream analysis


@dataclass(frozen=True)
class StreamEstimates:
    v1: float
    v2: float
    g2: float
    v1_se: float


@dataclass(frozen=True)
class AnalysisReport:
    estimates: StreamEstimates
    inversion: InversionResult
    errors: dict
    n_bootstrap: int
    alpha_sq: float

    def to_json_dict(self) -> dict:
        rec = report(self.inversion, alpha_sq=self.alpha_sq, errors=self.errors)
        rec["v1"] = self.estimates.v1
        rec["v2"] = self.estimates.v2
        rec["g2_fit"] = self.estimates.g2
        rec["n_bootstrap"] = self.n_bootstrap
        return rec


def _coincidence_fit(phi, c, d, cbar_scaled, pulses) -> tuple[float, float]:
    """(g2, v2) from per-bin zero-delay coincidences against assigned phase.

    Fits Cbar (1 - v1^2 cos^2 phi) = g2/2 (1 - v2 cos 2 phi) in its
    linear form; detection efficiency cancels in Cbar, the pulse count
    sets its absolute scale.
    """
    cbar = cbar_scaled * pulses / (c * d)
    x = np.cos(2.0 * phi)
    w = c * d  # leading inverse-variance weight for the Poisson numerator
    xm = np.column_stack([np.ones_like(x), x])
    beta = np.linalg.solve(xm.T @ (w[:, None] * xm), xm.T @ (w * cbar))
    a, b = float(beta[0]), -float(beta[1])
    if a <= 0.0:
        raise InfeasibleMeasurementsError("coincidence fit gives a non-positive g2")
    return 2.0 * a, b / a


def _estimate_chain(counts_c, counts_d, coinc_zero, pulses, n_bins, raw_extrema) -> StreamEstimates:
    c = np.asarray(counts_c, dtype=float)
    d = np.asarray(counts_d, dtype=float)
    z = np.asarray(coinc_zero, dtype=float)
    vis = extract_visibility(counts_c=c, counts_d=d, n_bins=n_bins, raw_extrema=raw_extrema)
    ok = (c > 0) & (d > 0)
    if ok.sum() < 3:
        raise DegenerateDataError("not enough populated bins for the coincidence fit")
    n_c = c[ok] / (c[ok] + d[ok])
    phi = _fold(n_c, max(vis.v, _EPS))
    corr = 1.0 - vis.v**2 * np.cos(phi) ** 2
    g2, v2 = _coincidence_fit(phi, c[ok], d[ok], z[ok] * corr, pulses)
    return StreamEstimates(v1=vis.v, v2=v2, g2=g2, v1_se=vis.se)


def analyze_stream(
    stream: TagStream,
    n_bins: int = 20,
    alpha_sq: float = 0.5,
    n_bootstrap: int = 100,
    seed: int = 0,
    raw_extrema: bool = False,
) -> AnalysisReport:
    """Full blind analysis of one synthetic run, with bootstrap errors."""
    pulses = stream.pulses_per_bin
    if pulses <= 0:
        raise ValidationError("stream is missing its pulses-per-bin scale")
    est = _estimate_chain(
        stream.counts_c, stream.counts_d, stream.coinc_zero, pulses, n_bins, raw_extrema
    )
    inv = invert_two_photon(
        float(np.clip(est.v1, 0.0, 1.0 - 1e-9)),
        float(np.clip(est.v2, 0.0, 1.0 - 1e-9)),
        max(est.g2, 0.0),
    )

    errors: dict = {}
    if n_bootstrap > 0:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xB0]))
        samples = {k: [] for k in ("v1", "v2", "g2", "p0", "p1", "p2", "lambda")}
        n_failed = 0
        mean_c = np.maximum(stream.counts_c, 0.0)
        mean_d = np.maximum(stream.counts_d, 0.0)
        mean_z = np.maximum(stream.coinc_zero, 0.0)
        n = mean_c.size
        for _ in range(n_bootstrap):
            # Resampling the bins propagates the phase-coverage variability
            # of the free drift; the Poisson redraw propagates shot noise.
            idx = rng.integers(0, n, n)
            c = rng.poisson(mean_c[idx])
            d = rng.poisson(mean_d[idx])
            z = rng.poisson(mean_z[idx])
            try:
                e = _estimate_chain(c, d, z, pulses, n_bins, raw_extrema)
                r = invert_two_photon(
                    float(np.clip(e.v1, 0.0, 1.0 - 1e-9)),
                    float(np.clip(e.v2, 0.0, 1.0 - 1e-9)),
                    max(e.g2, 0.0),
                )
            except (InfeasibleMeasurementsError, InsufficientContrastError,
                    DegenerateDataError):
                n_failed += 1
                continue
            samples["v1"].append(e.v1)
            samples["v2"].append(e.v2)
            samples["g2"].append(e.g2)
            samples["p0"].append(r.p0)
            samples["p1"].append(r.p1)
            samples["p2"].append(r.p2)
            samples["lambda"].append(r.lam if r.lam is not None else np.nan)
        n_ok = len(samples["p0"])
        if n_ok < max(8, n_bootstrap // 2):
            raise InfeasibleMeasurementsError(
                f"bootstrap unstable: only {n_ok}/{n_bootstrap} replicates inverted"
            )
        for key, vals in samples.items():
            arr = np.asarray(vals, dtype=float)
            errors[key + "_sigma"] = float(np.nanstd(arr, ddof=1))
        errors["bootstrap_failures"] = n_failed
    return AnalysisReport(
        estimates=est, inversion=inv, errors=errors,
        n_bootstrap=n_bootstrap, alpha_sq=alpha_sq,
    )


def phase_binned_curves(stream: TagStream, n_bins: int = 20) -> np.ndarray:
    """Plot-ready table (phi, n_c, cbar) averaged over phase bins."""
    pulses = stream.pulses_per_bin
    n_c, weights, ok = _normalized_singles(stream.counts_c, stream.counts_d)
    pm = time_to_phase(stream.counts_c, stream.counts_d, n_bins)
    z = np.asarray(stream.coinc_zero, dtype=float)[ok]
    cbar = z * pulses / (np.asarray(stream.counts_c, float)[ok] * np.asarray(stream.counts_d, float)[ok])
    edges = np.linspace(0.0, math.pi, n_bins + 1)
    idx = np.clip(np.digitize(pm.phi, edges) - 1, 0, n_bins - 1)
    wsum = np.bincount(idx, weights=weights, minlength=n_bins)
    filled = wsum > 0
    mean_nc = np.bincount(idx, weights=weights * pm.n_c, minlength=n_bins)
    mean_cb = np.bincount(idx, weights=weights * cbar, minlength=n_bins)
    centers = 0.5 * (edges[:-1] + edges[1:])
    out = np.column_stack([
        centers[filled],
        mean_nc[filled] / wsum[filled],
        mean_cb[filled] / wsum[filled],
    ])
    return out
