"""Command-line front end: ``equibound run | sweep | demo flem-flash | oracle``.

Reports are written as CSV (columns ``bound_name, kind, value, std_error,
units, flags``) or JSON. Sweeps are long-format CSV with a leading ``psbr``
column and trailing fractional-MI columns, ready for plotting.
"""

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass

import numpy as np

from .config import ConfigError, RunConfig, parse_config
from .core import Prior
from .flem import FlemConfig
from .mc import SampleBatch, sample_joint
from .report import FAILED, ReportConfig, assemble_report

REPORT_COLUMNS = ("bound_name", "kind", "value", "std_error", "units", "flags")
SWEEP_COLUMNS = ("psbr",) + REPORT_COLUMNS + ("fmi", "fmi_std_error")
DEMO_PSBR = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0)
ORACLE_PASS_FRACTION = 0.99

EXIT_OK = 0
EXIT_FAILED_ROWS = 1
EXIT_USAGE = 2


@dataclass(frozen=True)
class RunOutput:
    """Serialized output plus the reports behind it."""

    text: str
    reports: list  # [(psbr or None, Report)]

    @property
    def failed(self):
        return any(FAILED in row.flags for _, rep in self.reports for row in rep.rows)

    @property
    def exit_code(self):
        return EXIT_FAILED_ROWS if self.failed else EXIT_OK


def _report_config(cfg):
    return ReportConfig(depth=cfg.depth, lam=cfg.lam, bn_order=cfg.bn_order)


def compute_report(cfg, workers=None):
    """Sample (or replay) and assemble the bound report for one configuration."""
    if cfg.model_kind == "posterior_replay":
        spec = cfg.model_spec
        prior = None if spec.prior is None else Prior(np.array(spec.prior))
        batch = SampleBatch.from_posteriors(np.array(spec.posteriors), prior)
        return assemble_report(None, batch, _report_config(cfg))
    model = cfg.build_model()
    batch = sample_joint(model, cfg.samples, cfg.seed, workers=workers)
    return assemble_report(model, batch, _report_config(cfg))


# -- serialization ------------------------------------------------------------


def _num(x):
    return repr(float(x))


def _json_num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _fmi_pair(row):
    fmi = row.fmi
    if fmi is None:
        return None, None
    se = row.std_error / row.h_prior if row.h_prior > 0 else math.nan
    return fmi, se


def _csv_rows(report, units):
    for row in report.rows:
        value, se, label = row.in_units(units)
        yield row, [row.name, row.kind, _num(value), _num(se), label, ";".join(row.flags)]


def _write_csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def report_csv(report, units="bits"):
    return _write_csv(REPORT_COLUMNS, (r for _, r in _csv_rows(report, units)))


def sweep_csv(points, units="bits"):
    out = []
    for psbr, report in points:
        for row, fields in _csv_rows(report, units):
            fmi, fmi_se = _fmi_pair(row)
            tail = ["", ""] if fmi is None else [_num(fmi), _num(fmi_se)]
            out.append([_num(psbr)] + fields + tail)
    return _write_csv(SWEEP_COLUMNS, out)


def _json_rows(report, units):
    rows = []
    for row in report.rows:
        value, se, label = row.in_units(units)
        fmi, fmi_se = _fmi_pair(row)
        rows.append({
            "bound_name": row.name,
            "kind": row.kind,
            "value": _json_num(value),
            "std_error": _json_num(se),
            "units": label,
            "flags": list(row.flags),
            "mi_kind": row.mi_kind,
            "fmi": _json_num(fmi),
            "fmi_std_error": _json_num(fmi_se),
        })
    return rows


def _metadata(cfg, report):
    h = report.h_prior / math.log(2) if cfg.units == "bits" else report.h_prior
    return {
        "seed": cfg.seed,
        "samples": report.count,
        "model": cfg.model_kind,
        "model_digest": cfg.model_digest(),
        "M": report.M,
        "prior_entropy": h,
        "units": cfg.units,
        "depth": cfg.depth,
        "lambda": cfg.lam,
        "bn_order": cfg.bn_order,
    }


def report_json(cfg, report):
    doc = {"metadata": _metadata(cfg, report), "rows": _json_rows(report, cfg.units)}
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def sweep_json(cfg, points):
    meta = _metadata(cfg, points[0][1])
    meta["psbr_values"] = [p for p, _ in points]
    doc = {
        "metadata": meta,
        "points": [{"psbr": p, "rows": _json_rows(rep, cfg.units)} for p, rep in points],
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


# -- operations ---------------------------------------------------------------


def run_bounds(cfg, workers=None):
    """One report for ``cfg``, serialized in ``cfg.format``."""
    report = compute_report(cfg, workers)
    text = report_csv(report, cfg.units) if cfg.format == "csv" else report_json(cfg, report)
    return RunOutput(text, [(None, report)])


def run_sweep(cfg, psbr_values=None, workers=None):
    """Reports across PSBR values for a flem configuration.

    ``psbr_values`` defaults to ``cfg.psbr_values``. Each point reuses the
    configured seed, so a single-point sweep reproduces :func:`run_bounds`.
    """
    if cfg.model_kind != "flem":
        raise ConfigError("flem", "sweeps need a flem model section")
    values = cfg.psbr_values if psbr_values is None else tuple(psbr_values)
    if not values:
        raise ConfigError("psbr_values", "need at least one PSBR value")
    points = []
    for psbr in values:
        point = cfg.with_overrides(model_spec=cfg.model_spec.with_psbr(psbr))
        points.append((float(psbr), compute_report(point, workers)))
    text = sweep_csv(points, cfg.units) if cfg.format == "csv" else sweep_json(cfg, points)
    return RunOutput(text, points)


def write_atomic(path, text):
    """Write ``text`` to ``path`` via a temporary file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".equibound-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- argument handling --------------------------------------------------------


def _psbr_list(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty PSBR list")
    return values


def _common(parser, config=True):
    if config:
        parser.add_argument("--config", metavar="PATH", help="YAML run configuration")
    parser.add_argument("--samples", type=int, help="Monte Carlo draws (default 100000)")
    parser.add_argument("--seed", type=int, help="RNG seed (default 0)")
    parser.add_argument("--format", choices=("csv", "json"))
    parser.add_argument("--units", choices=("bits", "nats"))
    parser.add_argument("--depth", type=int, help="ordered-statistics depth")
    parser.add_argument("--lambda", dest="lam", type=float, help="order for MPE-λ (default 2)")
    parser.add_argument("--out", metavar="PATH", help="write output here instead of stdout")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="equibound",
        description="Equivocation, mutual-information and error-probability bounds "
        "for Bayesian hypothesis testing.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="one bound report")
    _common(run)

    sweep = sub.add_parser("sweep", help="PSBR sweep of a flem model")
    _common(sweep)
    sweep.add_argument("--psbr", type=_psbr_list, metavar="LIST", help="e.g. 0.5,1,2,5")

    demo = sub.add_parser("demo", help="built-in scenarios")
    demo_sub = demo.add_subparsers(dest="scenario", required=True)
    flash = demo_sub.add_parser("flem-flash", help="flash detector sweep at default settings")
    _common(flash, config=False)
    flash.add_argument("--psbr", type=_psbr_list, metavar="LIST",
                       help="default " + ",".join(str(p) for p in DEMO_PSBR))

    oracle = sub.add_parser("oracle", help="quadrature vs Monte Carlo self-test")
    oracle.add_argument("--models", type=int, default=100)
    oracle.add_argument("--samples", type=int, default=100_000)
    oracle.add_argument("--seed", type=int, default=20141022)
    oracle.add_argument("--out", metavar="PATH")
    return parser


def _load_config(args):
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            return parse_config(fh.read())
    return None


def _apply_flags(cfg, args):
    return cfg.with_overrides(
        samples=args.samples, seed=args.seed, format=args.format, units=args.units,
        depth=args.depth, lam=args.lam,
    )


def _emit(text, args):
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)


def _cmd_run(args):
    cfg = _load_config(args)
    if cfg is None:
        raise ConfigError("", "run needs --config")
    return run_bounds(_apply_flags(cfg, args))


def _cmd_sweep(args):
    cfg = _load_config(args)
    if cfg is None:
        raise ConfigError("", "sweep needs --config")
    cfg = _apply_flags(cfg, args)
    values = args.psbr if args.psbr is not None else cfg.psbr_values
    if values is None:
        raise ConfigError("psbr_values", "give --psbr or psbr_values")
    return run_sweep(cfg, values)


def _cmd_demo(args):
    cfg = _apply_flags(RunConfig("flem", FlemConfig()), args)
    return run_sweep(cfg, args.psbr or DEMO_PSBR)


def _cmd_oracle(args):
    from .oracle import ORACLE_KEYS, compare_fleet

    lines = ["model,M," + ",".join(f"z_{k}" for k in ORACLE_KEYS) + ",pass"]
    result = compare_fleet(args.models, args.samples, args.seed)
    for i, (spec, z) in enumerate(zip(result.models, result.z)):
        ok = bool(np.all(z <= 3.0))
        lines.append(f"{i},{len(spec['prior'])}," + ",".join(f"{v:.3f}" for v in z)
                     + f",{int(ok)}")
    _emit("\n".join(lines) + "\n", args)
    frac = result.pass_count / max(args.models, 1)
    sys.stderr.write(
        f"oracle: {result.pass_count}/{args.models} models within 3 SE "
        f"({result.seconds:.1f} s)\n"
    )
    return EXIT_OK if frac >= ORACLE_PASS_FRACTION else EXIT_FAILED_ROWS


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "oracle":
            return _cmd_oracle(args)
        handler = {"run": _cmd_run, "sweep": _cmd_sweep, "demo": _cmd_demo}[args.command]
        out = handler(args)
    except (ConfigError, OSError, ValueError) as exc:
        sys.stderr.write(f"equibound: error: {exc}\n")
        return EXIT_USAGE
    _emit(out.text, args)
    if out.failed:
        names = sorted({r.name for _, rep in out.reports for r in rep.rows if FAILED in r.flags})
        sys.stderr.write(f"equibound: failed rows: {', '.join(names)}\n")
    return out.exit_code


if __name__ == "__main__":
    sys.exit(main())
