"""Synthetic path-unbalanced Mach-Zehnder experiment.

Generates time-tagged count records the way the real acquisition works:
the interferometer phase drifts freely but is quasi-static within one
acquisition bin, singles and zero-delay coincidences follow the closed
forms of :mod:`pnsup.interference` scaled by detection efficiency, and
all counts are Poisson.

Per acquisition bin (P pulses, efficiency eta, phase phi):

    E[counts_c,d]   = eta P N_c,d(phi) + dark counts
    E[coincidences] = eta^2 P C(0)(phi)          (zero delay)
    E[pedestal]     = eta^2 P N_c(phi) N_d(phi)  (per off-zero delay slot)

The coincidence histogram is binned in units of the pulse period; the
interferometer arm delay only fixes which histogram peak is the
interfering one and is carried as metadata.  A stream is persisted as
``singles.csv`` (``bin_index,t_ms,counts_c,counts_d,true_phi``),
``histogram.csv`` (``delta_pulses,coincidences``, aggregated over the
run), ``coincidences.csv`` (``bin_index,coincidences``, the per-bin
zero-delay record needed for phase-resolved analysis) and a
``config.json`` sidecar holding the full experiment description.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import ValidationError
from .fock import NumberState
from .interference import closed_coincidences, closed_singles

SINGLES_CSV = "singles.csv"
HISTOGRAM_CSV = "histogram.csv"
COINCIDENCES_CSV = "coincidences.csv"
CONFIG_JSON = "config.json"

SINGLES_HEADER = "bin_index,t_ms,counts_c,counts_d,true_phi"
HISTOGRAM_HEADER = "delta_pulses,coincidences"
COINCIDENCES_HEADER = "bin_index,coincidences"


@dataclass(frozen=True)
class DriftParams:
    """Free phase evolution: slow sinusoid plus a mean-reverting walk.

    The defaults sweep more than a full fringe over a ~100 s record while
    moving much less than pi within one acquisition bin.
    """

    phi0_rad: float = 0.3
    sine_amp_rad: float = 4.2
    sine_period_s: float = 80.0
    ou_sigma_rad: float = 0.15
    ou_tau_s: float = 5.0

    def __post_init__(self):
        if self.sine_period_s <= 0.0 or self.ou_tau_s <= 0.0:
            raise ValidationError("drift timescales must be positive")
        if self.sine_amp_rad < 0.0 or self.ou_sigma_rad < 0.0:
            raise ValidationError("drift amplitudes must be non-negative")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to synthesize one acquisition run."""

    state: NumberState
    m_overlap: float = 1.0
    theta_rad: float = 0.0  # polarization angle; effective M = m_overlap cos^2 theta
    eta: float = 0.1
    rep_period_ns: float = 24.67
    mzi_delay_ns: float = 12.34
    acq_bin_ms: float = 310.0
    n_bins: int = 320
    drift: DriftParams = field(default_factory=DriftParams)
    seed: int = 12345
    hist_max_delta: int = 10
    coinc_window_ns: float = 2.0
    dark_rate_hz: float = 0.0
    noiseless: bool = False
    counts_cap: float = 1e9

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValidationError(f"eta must lie in (0, 1], got {self.eta}")
        if self.rep_period_ns <= 0.0:
            raise ValidationError("rep_period_ns must be positive")
        if self.acq_bin_ms <= 0.0 or self.n_bins < 1:
            raise ValidationError("need a positive bin duration and at least one bin")
        if not 0.0 <= self.m_overlap <= 1.0:
            raise ValidationError(f"m_overlap must lie in [0, 1], got {self.m_overlap}")
        if self.hist_max_delta < 1:
            raise ValidationError("hist_max_delta must be >= 1")
        if self.dark_rate_hz < 0.0:
            raise ValidationError("dark_rate_hz must be non-negative")

    @property
    def pulses_per_bin(self) -> float:
        return self.acq_bin_ms * 1e6 / self.rep_period_ns

    @property
    def effective_overlap(self) -> float:
        return theta_to_M(self.theta_rad, self.m_overlap)


@dataclass(frozen=True)
class TagStream:
    """Synthetic detection record of one run.

    Counts are integers in stochastic mode and expected values (floats)
    in noiseless mode.  ``true_phi`` is the hidden drift phase per bin,
    retained for validation only.
    """

    t_ms: np.ndarray = field(repr=False)
    counts_c: np.ndarray = field(repr=False)
    counts_d: np.ndarray = field(repr=False)
    coinc_zero: np.ndarray = field(repr=False)
    hist_delta: np.ndarray = field(repr=False)
    hist_counts: np.ndarray = field(repr=False)
    true_phi: np.ndarray | None = field(repr=False, default=None)
    pulses_per_bin: float = 0.0
    config: ExperimentConfig | None = None

    @property
    def n_bins(self) -> int:
        return self.t_ms.size


def phase_drift(drift: DriftParams, t_s, seed: int = 0) -> np.ndarray:
    """Phase path phi(t) on the given time grid; deterministic per seed.

    The random component is an exactly discretized Ornstein-Uhlenbeck
    process, so the path is continuous and its statistics do not depend
    on the sampling grid.
    """
    t = np.atleast_1d(np.asarray(t_s, dtype=float))
    if np.any(t < 0.0):
        raise ValidationError("drift times must be non-negative")
    phi = drift.phi0_rad + drift.sine_amp_rad * np.sin(
        2.0 * math.pi * t / drift.sine_period_s
    )
    if drift.ou_sigma_rad > 0.0:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0x0D]))
        x = 0.0
        walk = np.empty(t.size)
        t_prev = 0.0
        for i, ti in enumerate(t):
            decay = math.exp(-(ti - t_prev) / drift.ou_tau_s)
            x = x * decay + drift.ou_sigma_rad * math.sqrt(1.0 - decay**2) * rng.standard_normal()
            walk[i] = x
            t_prev = ti
        phi = phi + walk
    return phi


def theta_to_M(theta: float, M0: float) -> float:
    """Wavepacket overlap tuned by the relative polarization angle: M0 cos^2(theta)."""
    if not 0.0 <= M0 <= 1.0:
        raise ValidationError(f"M0 must lie in [0, 1], got {M0}")
    return M0 * math.cos(theta) ** 2


def apply_loss(config: ExperimentConfig, extra_loss: float) -> ExperimentConfig:
    """Scale the end-to-end efficiency by a transmission factor in (0, 1]."""
    if not 0.0 < extra_loss <= 1.0:
        raise ValidationError(f"extra_loss must lie in (0, 1], got {extra_loss}")
    return replace(config, eta=config.eta * extra_loss)


def synthesize(config: ExperimentConfig) -> TagStream:
    """Generate one acquisition run as per-bin Poisson counts."""
    n_bins = config.n_bins
    bin_s = config.acq_bin_ms * 1e-3
    t_s = (np.arange(n_bins) + 0.5) * bin_s
    phi = phase_drift(config.drift, t_s, seed=config.seed)

    pulses = config.pulses_per_bin
    m_eff = config.effective_overlap
    n_c, n_d = closed_singles(config.state, m_eff, phi)
    c0 = np.broadcast_to(closed_coincidences(config.state, phi), phi.shape)

    darks = config.dark_rate_hz * bin_s
    mean_c = config.eta * pulses * n_c + darks
    mean_d = config.eta * pulses * n_d + darks
    mean_c0 = config.eta**2 * pulses * c0
    mean_ped = config.eta**2 * pulses * n_c * n_d

    worst = max(float(mean_c.max()), float(mean_d.max()), float(mean_c0.max()))
    if worst > config.counts_cap:
        raise ValidationError(
            f"expected counts per bin ({worst:.3g}) exceed the cap {config.counts_cap:.3g}"
        )

    deltas = np.arange(-config.hist_max_delta, config.hist_max_delta + 1)
    ped_total = float(np.sum(mean_ped))

    if config.noiseless:
        counts_c, counts_d, coinc_zero = mean_c, mean_d, mean_c0
        hist = np.where(deltas == 0, float(np.sum(mean_c0)), ped_total)
    else:
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0xC0]))
        counts_c = rng.poisson(mean_c)
        counts_d = rng.poisson(mean_d)
        coinc_zero = rng.poisson(mean_c0)
        hist = rng.poisson(ped_total, size=deltas.size).astype(float)
        hist[deltas == 0] = coinc_zero.sum()

    return TagStream(
        t_ms=t_s * 1e3,
        counts_c=counts_c,
        counts_d=counts_d,
        coinc_zero=coinc_zero,
        hist_delta=deltas,
        hist_counts=hist,
        true_phi=phi,
        pulses_per_bin=pulses,
        config=config,
    )


# ---------------------------------------------------------------------------
# persistence


def _fmt(x) -> str:
    if float(x) == int(x):
        return str(int(x))
    return f"{float(x):.12g}"


def config_to_json_dict(config: ExperimentConfig) -> dict:
    d = asdict(config)
    d["state"] = config.state.to_json_dict()
    return d


def config_from_json_dict(d: dict) -> ExperimentConfig:
    d = dict(d)
    try:
        state = NumberState.from_json_dict(d.pop("state"))
        drift = DriftParams(**d.pop("drift"))
        return ExperimentConfig(state=state, drift=drift, **d)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"bad experiment config record: {exc}") from exc


def write_stream(stream: TagStream, outdir) -> dict:
    """Persist a stream; returns the paths written."""
    os.makedirs(outdir, exist_ok=True)
    paths = {
        "singles": os.path.join(outdir, SINGLES_CSV),
        "histogram": os.path.join(outdir, HISTOGRAM_CSV),
        "coincidences": os.path.join(outdir, COINCIDENCES_CSV),
        "config": os.path.join(outdir, CONFIG_JSON),
    }
    with open(paths["singles"], "w") as fh:
        has_phi = stream.true_phi is not None
        fh.write(SINGLES_HEADER + "\n" if has_phi else SINGLES_HEADER.rsplit(",", 1)[0] + "\n")
        for i in range(stream.n_bins):
            row = f"{i},{stream.t_ms[i]:.12g},{_fmt(stream.counts_c[i])},{_fmt(stream.counts_d[i])}"
            if has_phi:
                row += f",{stream.true_phi[i]:.12g}"
            fh.write(row + "\n")
    with open(paths["histogram"], "w") as fh:
        fh.write(HISTOGRAM_HEADER + "\n")
        for d, c in zip(stream.hist_delta, stream.hist_counts):
            fh.write(f"{int(d)},{_fmt(c)}\n")
    with open(paths["coincidences"], "w") as fh:
        fh.write(COINCIDENCES_HEADER + "\n")
        for i in range(stream.n_bins):
            fh.write(f"{i},{_fmt(stream.coinc_zero[i])}\n")
    if stream.config is not None:
        with open(paths["config"], "w") as fh:
            json.dump(config_to_json_dict(stream.config), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return paths


def _read_csv(path, expect_header: str, min_cols: int):
    with open(path) as fh:
        header = fh.readline().strip()
        expected = expect_header.split(",")[:min_cols]
        if header.split(",")[:min_cols] != expected:
            raise ValidationError(
                f"{path}:1: header {header!r} does not start with {','.join(expected)!r}"
            )
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) < min_cols:
                raise ValidationError(f"{path}:{lineno}: expected >= {min_cols} columns")
            try:
                rows.append([float(x) for x in parts])
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: non-numeric field ({exc})")
    return rows


def read_stream(indir) -> TagStream:
    """Load a stream previously written by :func:`write_stream`."""
    singles = _read_csv(os.path.join(indir, SINGLES_CSV), SINGLES_HEADER, 4)
    hist = _read_csv(os.path.join(indir, HISTOGRAM_CSV), HISTOGRAM_HEADER, 2)
    coinc = _read_csv(os.path.join(indir, COINCIDENCES_CSV), COINCIDENCES_HEADER, 2)
    cfg_path = os.path.join(indir, CONFIG_JSON)
    config = None
    if os.path.exists(cfg_path):
        with open(cfg_path) as fh:
            config = config_from_json_dict(json.load(fh))

    singles = np.asarray(singles, dtype=float)
    t_ms = singles[:, 1]
    counts_c = singles[:, 2]
    counts_d = singles[:, 3]
    true_phi = singles[:, 4] if singles.shape[1] >= 5 else None
    hist = np.asarray(hist, dtype=float)
    coinc = np.asarray(coinc, dtype=float)
    if coinc.shape[0] != t_ms.size:
        raise ValidationError("coincidences.csv and singles.csv disagree on bin count")
    return TagStream(
        t_ms=t_ms,
        counts_c=counts_c,
        counts_d=counts_d,
        coinc_zero=coinc[:, 1],
        hist_delta=hist[:, 0].astype(int),
        hist_counts=hist[:, 1],
        true_phi=true_phi,
        pulses_per_bin=config.pulses_per_bin if config is not None else 0.0,
        config=config,
    )
