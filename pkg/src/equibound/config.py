"""Run configuration: a YAML document with exactly one model section.

Example::

    samples: 100000
    seed: 0
    flem:
      psbr: 2.0

Top-level keys: ``samples``, ``seed``, ``depth``, ``lambda``, ``bn_order``,
``format`` (csv | json), ``units`` (bits | nats), ``psbr_values`` (for
sweeps) and one of the model sections ``flem``, ``gaussian`` or
``posterior_replay``.
"""

import hashlib
import json
import math
from dataclasses import dataclass, fields, replace

import numpy as np
import yaml

from .core import GaussianChannel, HypothesisModel, Prior
from .flem import FlemConfig, build_model

MODEL_KEYS = ("flem", "gaussian", "posterior_replay")
DEFAULT_SAMPLES = 100_000


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending key."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


@dataclass(frozen=True)
class GaussianSpec:
    means: tuple
    variance: float
    prior: tuple = None

    def to_dict(self):
        return {
            "means": [list(m) for m in self.means],
            "variance": self.variance,
            "prior": None if self.prior is None else list(self.prior),
        }


@dataclass(frozen=True)
class ReplaySpec:
    posteriors: tuple
    prior: tuple = None

    def to_dict(self):
        return {
            "posteriors": [list(p) for p in self.posteriors],
            "prior": None if self.prior is None else list(self.prior),
        }


@dataclass(frozen=True)
class RunConfig:
    model_kind: str
    model_spec: object
    samples: int = DEFAULT_SAMPLES
    seed: int = 0
    depth: int = None
    lam: float = 2.0
    bn_order: float = 2.0
    format: str = "csv"
    units: str = "bits"
    psbr_values: tuple = None

    def build_model(self):
        """HypothesisModel for sampled specs; ``None`` for posterior replay."""
        spec = self.model_spec
        if self.model_kind == "flem":
            return build_model(spec)
        if self.model_kind == "gaussian":
            M = len(spec.means)
            prior = Prior.uniform(M) if spec.prior is None else Prior(np.array(spec.prior))
            return HypothesisModel(prior, GaussianChannel(np.array(spec.means), spec.variance))
        return None

    @property
    def M(self):
        spec = self.model_spec
        if self.model_kind == "flem":
            return spec.M
        if self.model_kind == "gaussian":
            return len(spec.means)
        return len(spec.posteriors[0])

    def model_dict(self):
        return {self.model_kind: self.model_spec.to_dict()}

    def model_digest(self):
        blob = json.dumps(self.model_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        cfg = replace(self, **kw)
        _check_run_fields(cfg)
        return cfg


# -- parsing helpers ----------------------------------------------------------


def _int(value, path, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {value}")
    return value


def _float(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(path, "must be finite")
    return value


def _float_list(value, path):
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(path, "expected a non-empty list of numbers")
    return tuple(_float(v, f"{path}[{i}]") for i, v in enumerate(value))


def _matrix(value, path):
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(path, "expected a non-empty list")
    rows = []
    for i, row in enumerate(value):
        row = [row] if isinstance(row, (int, float)) and not isinstance(row, bool) else row
        rows.append(_float_list(row, f"{path}[{i}]"))
    if len({len(r) for r in rows}) != 1:
        raise ConfigError(path, "rows must all have the same length")
    return tuple(rows)


def _reject_unknown(section, allowed, path):
    for key in section:
        if key not in allowed:
            where = f"{path}.{key}" if path else str(key)
            raise ConfigError(where, "unknown key")


def _parse_flem(section):
    allowed = {f.name for f in fields(FlemConfig)}
    _reject_unknown(section, allowed, "flem")
    kw = {}
    for key, value in section.items():
        path = f"flem.{key}"
        if key in ("directions", "signatures", "bands", "imagers"):
            kw[key] = _int(value, path, minimum=1)
        elif key == "bg_fluctuation_mode":
            if value not in ("std", "variance"):
                raise ConfigError(path, "must be 'std' or 'variance'")
            kw[key] = value
        elif key == "prior":
            kw[key] = None if value is None else _float_list(value, path)
        else:
            kw[key] = _float(value, path)
    if "psbr" not in kw:
        raise ConfigError("flem.psbr", "required")
    try:
        return FlemConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError("flem", str(exc)) from None


def _parse_gaussian(section):
    _reject_unknown(section, {"means", "variance", "prior"}, "gaussian")
    for key in ("means", "variance"):
        if key not in section:
            raise ConfigError(f"gaussian.{key}", "required")
    spec = GaussianSpec(
        means=_matrix(section["means"], "gaussian.means"),
        variance=_float(section["variance"], "gaussian.variance"),
        prior=None if section.get("prior") is None
        else _float_list(section["prior"], "gaussian.prior"),
    )
    try:
        spec_model = HypothesisModel(
            Prior.uniform(len(spec.means)) if spec.prior is None else Prior(np.array(spec.prior)),
            GaussianChannel(np.array(spec.means), spec.variance),
        )
    except ValueError as exc:
        raise ConfigError("gaussian", str(exc)) from None
    del spec_model
    return spec


def _parse_replay(section):
    _reject_unknown(section, {"posteriors", "prior"}, "posterior_replay")
    if "posteriors" not in section:
        raise ConfigError("posterior_replay.posteriors", "required")
    spec = ReplaySpec(
        posteriors=_matrix(section["posteriors"], "posterior_replay.posteriors"),
        prior=None if section.get("prior") is None
        else _float_list(section["prior"], "posterior_replay.prior"),
    )
    P = np.array(spec.posteriors)
    if P.shape[1] < 2 or np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1) > 1e-10):
        raise ConfigError("posterior_replay.posteriors", "rows must be PMFs with >= 2 entries")
    if spec.prior is not None and len(spec.prior) != P.shape[1]:
        raise ConfigError("posterior_replay.prior", "length must match the posterior width")
    return spec


def _check_run_fields(cfg):
    _int(cfg.samples, "samples", minimum=1)
    _int(cfg.seed, "seed", minimum=0)
    if cfg.seed > 2**64 - 1:
        raise ConfigError("seed", "must fit in 64 bits")
    if cfg.depth is not None:
        _int(cfg.depth, "depth", minimum=1)
        if cfg.depth > cfg.M - 1:
            raise ConfigError("depth", f"must be <= M - 1 = {cfg.M - 1}")
    if not cfg.lam > 1:
        raise ConfigError("lambda", "must be > 1")
    if not cfg.bn_order >= 1:
        raise ConfigError("bn_order", "must be >= 1")
    if cfg.format not in ("csv", "json"):
        raise ConfigError("format", "must be 'csv' or 'json'")
    if cfg.units not in ("bits", "nats"):
        raise ConfigError("units", "must be 'bits' or 'nats'")
    if cfg.psbr_values is not None and not cfg.psbr_values:
        raise ConfigError("psbr_values", "must be non-empty")


_RUN_KEYS = ("samples", "seed", "depth", "lambda", "bn_order", "format", "units", "psbr_values")


def config_from_mapping(doc):
    if not isinstance(doc, dict):
        raise ConfigError("", "configuration must be a mapping")
    _reject_unknown(doc, set(_RUN_KEYS) | set(MODEL_KEYS), "")
    present = [k for k in MODEL_KEYS if k in doc]
    if len(present) != 1:
        raise ConfigError(
            "", f"exactly one model section ({', '.join(MODEL_KEYS)}) required, found {present}"
        )
    kind = present[0]
    section = doc[kind]
    if not isinstance(section, dict):
        raise ConfigError(kind, "must be a mapping")
    spec = {"flem": _parse_flem, "gaussian": _parse_gaussian, "posterior_replay": _parse_replay}[
        kind
    ](section)

    kw = {}
    if "samples" in doc:
        kw["samples"] = _int(doc["samples"], "samples", minimum=1)
    if "seed" in doc:
        kw["seed"] = _int(doc["seed"], "seed", minimum=0)
    if doc.get("depth") is not None:
        kw["depth"] = _int(doc["depth"], "depth", minimum=1)
    if "lambda" in doc:
        kw["lam"] = _float(doc["lambda"], "lambda")
    if "bn_order" in doc:
        kw["bn_order"] = _float(doc["bn_order"], "bn_order")
    for key in ("format", "units"):
        if key in doc:
            kw[key] = doc[key]
    if doc.get("psbr_values") is not None:
        kw["psbr_values"] = _float_list(doc["psbr_values"], "psbr_values")
    cfg = RunConfig(kind, spec, **kw)
    _check_run_fields(cfg)
    return cfg


def parse_config(text):
    """Parse and validate a YAML configuration document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"malformed YAML: {exc}") from None
    return config_from_mapping({} if doc is None else doc)


def config_to_mapping(cfg):
    doc = {
        "samples": cfg.samples,
        "seed": cfg.seed,
        "depth": cfg.depth,
        "lambda": cfg.lam,
        "bn_order": cfg.bn_order,
        "format": cfg.format,
        "units": cfg.units,
    }
    if cfg.psbr_values is not None:
        doc["psbr_values"] = list(cfg.psbr_values)
    doc.update(cfg.model_dict())
    return doc


def render_config(cfg):
    """YAML text that :func:`parse_config` maps back to ``cfg``."""
    return yaml.safe_dump(config_to_mapping(cfg), sort_keys=False)
