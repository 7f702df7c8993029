"""Ring of single-pixel multispectral imagers localising and typing a point flash.

Hypotheses are (direction, signature) pairs, indexed ``d * K + k``. Each of
S imagers on a ring reports B band counts: a constant background plus the
flash signal scaled by the obliquity factor max(cos(angle offset), 0) and
the signature's relative band weights. Background fluctuation and read
noise together form the shared Gaussian variance.
"""

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ._validation import check_positive_int
from .core import GaussianChannel, HypothesisModel, HypothesisSet, Prior
from .mc import sample_joint
from .report import ReportConfig, assemble_report

# Band shapes the default signatures are mixed from (B = 4).
_FLAT = np.full(4, 0.25)
_RAMP_UP = np.array([1.0, 2.0, 3.0, 4.0]) / 10.0
_RAMP_DOWN = _RAMP_UP[::-1].copy()
_VALLEY = np.array([3.0, 1.0, 1.0, 3.0]) / 8.0


def default_signatures(bands=4):
    """Eight fixed unit-sum band signatures.

    Four are a one-hot band blended 60/40 with the flat profile; the rest
    are flat, rising, falling and valley-shaped.
    """
    if bands != 4:
        return _generic_signatures(8, bands)
    eye = np.eye(4)
    rows = [0.6 * eye[b] + 0.4 * _FLAT for b in range(4)]
    rows += [_FLAT, _RAMP_UP, _RAMP_DOWN, _VALLEY]
    return np.array(rows)


def _generic_signatures(K, bands):
    # smooth bumps centred across the band range, one per signature
    centres = np.linspace(0, bands - 1, K)
    grid = np.arange(bands)
    width = max(bands / K, 0.75)
    S = np.exp(-0.5 * ((grid[None, :] - centres[:, None]) / width) ** 2) + 0.2
    return S / S.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class RingGeometry:
    imagers: int = 16
    offset: float = 0.0

    def __post_init__(self):
        if check_positive_int(self.imagers, "imagers") < 4:
            raise ValueError("the ring needs at least 4 imagers")

    @property
    def angles(self):
        return self.offset + 2 * np.pi * np.arange(self.imagers) / self.imagers

    def obliquity(self, direction):
        """Per-imager response max(cos(imager angle - direction), 0)."""
        return np.maximum(np.cos(self.angles - direction), 0.0)


@dataclass(frozen=True, eq=False)
class SpectralLibrary:
    traces: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.traces, dtype=float)
        if t.ndim != 2 or t.shape[0] < 1:
            raise ValueError("traces must be a (K, B) array")
        if np.any(t < 0):
            raise ValueError("spectral traces must be non-negative")
        if np.any(np.abs(t.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("each spectral trace must sum to 1")
        if len({row.tobytes() for row in t}) != t.shape[0]:
            raise ValueError("spectral traces must be pairwise distinct")
        t.setflags(write=False)
        object.__setattr__(self, "traces", t)

    @property
    def K(self):
        return self.traces.shape[0]

    @property
    def B(self):
        return self.traces.shape[1]


@dataclass(frozen=True)
class FlemConfig:
    """Operating point of the flash detector.

    ``bg_fluctuation_mode`` says how ``bg_fluctuation_frac * bg_mean`` enters
    the variance: as a standard deviation ("std", default) or directly as a
    variance ("variance").
    """

    psbr: float = 1.0
    directions: int = 4
    signatures: int = 8
    bands: int = 4
    imagers: int = 16
    read_noise_var: float = 25.0
    bg_mean: float = 10.0
    bg_fluctuation_frac: float = 0.5
    bg_fluctuation_mode: str = "std"
    angle_offset: float = 0.0
    prior: tuple = field(default=None)

    def __post_init__(self):
        if not (self.psbr >= 0 and math.isfinite(self.psbr)):
            raise ValueError(f"psbr must be finite and >= 0, got {self.psbr!r}")
        for name in ("directions", "signatures", "bands", "imagers"):
            check_positive_int(getattr(self, name), name)
        if self.read_noise_var < 0 or self.bg_mean < 0 or self.bg_fluctuation_frac < 0:
            raise ValueError("noise and background parameters must be non-negative")
        if self.bg_fluctuation_mode not in ("std", "variance"):
            raise ValueError("bg_fluctuation_mode must be 'std' or 'variance'")
        if self.prior is not None:
            object.__setattr__(self, "prior", tuple(float(p) for p in self.prior))
            if len(self.prior) != self.M:
                raise ValueError(
                    f"prior has {len(self.prior)} entries, expected directions*signatures = {self.M}"
                )
        if self.variance <= 0:
            raise ValueError("total noise variance must be positive")

    @property
    def M(self):
        return self.directions * self.signatures

    @property
    def variance(self):
        fluct = self.bg_fluctuation_frac * self.bg_mean
        extra = fluct**2 if self.bg_fluctuation_mode == "std" else fluct
        return self.read_noise_var + extra

    @property
    def s_peak(self):
        return self.psbr * self.bg_mean

    def with_psbr(self, psbr):
        return replace(self, psbr=float(psbr))

    def to_dict(self):
        d = asdict(self)
        d["prior"] = None if self.prior is None else list(self.prior)
        return d


def direction_angles(directions, imagers, offset=0.0):
    # half an imager spacing off the imager normals so no flash is exactly head-on
    return offset + np.pi / imagers + 2 * np.pi * np.arange(directions) / directions


def signal_means(config, library=None):
    """Mean counts, shape (M, S*B), ordered hypothesis-major then imager-major."""
    library = library or SpectralLibrary(default_signatures(config.bands)[: config.signatures])
    if library.K != config.signatures or library.B != config.bands:
        raise ValueError("spectral library shape does not match the configuration")
    ring = RingGeometry(config.imagers, config.angle_offset)
    dirs = direction_angles(config.directions, config.imagers, config.angle_offset)
    means = []
    for phi in dirs:
        gain = ring.obliquity(phi)
        for trace in library.traces:
            excess = config.s_peak * np.outer(gain, trace)
            means.append((config.bg_mean + excess).ravel())
    return np.array(means)


def build_model(config, library=None):
    """HypothesisModel for one detector operating point."""
    means = signal_means(config, library)
    prior = Prior.uniform(config.M) if config.prior is None else Prior(np.array(config.prior))
    labels = HypothesisSet(
        tuple((d, k) for d in range(config.directions) for k in range(config.signatures))
    )
    return HypothesisModel(prior, GaussianChannel(means, config.variance), labels)


def psbr_sweep(config, psbr_values, samples, seed, report_config=None, workers=None):
    """One report per PSBR value, all drawn with the same seed.

    Returns a list of ``(psbr, Report)`` in the order given.
    """
    psbr_values = [float(p) for p in psbr_values]
    if not psbr_values:
        raise ValueError("psbr_values must be non-empty")
    out = []
    for psbr in psbr_values:
        model = build_model(config.with_psbr(psbr))
        batch = sample_joint(model, samples, seed, workers=workers)
        out.append((psbr, assemble_report(model, batch, report_config or ReportConfig())))
    return out
