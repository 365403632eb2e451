"""Command-line front end.

    hypertilt scan | fisher | qfi | simulate | fit | scaling [options]

Lab units on the command line (nm, mm, mm^2, urad); Fisher information is
reported in rad^-2 and simulated angles in rad.  Exit codes: 0 success,
2 usage or input error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .artifacts import CurveFormatError, atomic_write, csv_text, curve_rows, json_text, provenance, read_fringe_csv
from .config import KEYS, MM2, URAD, ConfigError, RunConfig, load_config
from .estimate import (
    BranchError,
    FitError,
    crb_experiment,
    fisher_report_from_fit,
    fit_fringe,
    probe_from_fit,
    quarter_fringe_theta,
    synthesize_counts,
)
from .fisher import UnboundedVariance, fisher_report, qfi, scaling_sweep, shot_noise_baseline
from .model import CountModel, fringe_scan, projection_probability
from .oracle import ResolutionError
from .probe import ProbeError, correlation_coefficient

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    pass


class NumericFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _report_error("UsageError", message, EXIT_USAGE)
        sys.exit(EXIT_USAGE)


def _report_error(kind: str, message: str, code: int) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")


# ---------------------------------------------------------------- output


class Output:
    """Routes the delimited artifact (and optional figure) of one command."""

    def __init__(self, cfg: RunConfig, native: str, seed: int | None, extra: str = ""):
        self.cfg = cfg
        self.native = native  # data format when --format is unset or asks for a figure
        self.format = cfg.format or native
        self.comment = provenance(cfg.digest(extra), seed)
        if self.format == "svg" and cfg.out is None:
            raise UsageError("--format svg needs --out")

    @property
    def wants_figure(self) -> bool:
        return self.format == "svg"

    @property
    def figure_path(self) -> Path:
        return Path(self.cfg.out).with_suffix(".svg")

    def _data_path(self, kind: str) -> Path | None:
        if self.cfg.out is None:
            return None
        out = Path(self.cfg.out)
        return out.with_suffix("." + kind) if self.wants_figure else out

    def _emit(self, text: str, kind: str) -> None:
        path = self._data_path(kind)
        if path is None:
            sys.stdout.write(text)
        else:
            atomic_write(path, text)

    def table(self, header, rows) -> None:
        rows = list(rows)
        if self.format == "json" or (self.wants_figure and self.native == "json"):
            self._emit(json_text({"rows": [dict(zip(header, r)) for r in rows]}, self.comment), "json")
        else:
            self._emit(csv_text(header, rows, self.comment), "csv")

    def record(self, payload: dict) -> None:
        if self.format == "csv" or (self.wants_figure and self.native == "csv"):
            flat = {k: v for k, v in payload.items() if not isinstance(v, dict)}
            self._emit(csv_text(list(flat), [list(flat.values())], self.comment), "csv")
        else:
            self._emit(json_text(payload, self.comment), "json")


# ---------------------------------------------------------------- commands


def cmd_scan(cfg: RunConfig) -> int:
    probe = cfg.probe()
    theta = cfg.theta_grid()
    model = CountModel(cfg.count_model or "exact")
    if model is CountModel.EXACT:
        curve, seed = fringe_scan(probe, theta), None
    else:
        curve, seed = synthesize_counts(probe, theta, cfg.trials, cfg.seed, model), cfg.seed
    out = Output(cfg, "csv", seed)
    header, rows = curve_rows(curve)
    out.table(header, rows)
    if out.wants_figure:
        from .plotting import plot_fringe

        counts = curve.frequencies() if curve.has_counts else None
        prob = projection_probability(probe, theta) if curve.has_counts else curve.probability
        plot_fringe(out.figure_path, theta / URAD, prob, out.comment, counts=counts)
    return EXIT_OK


def cmd_fisher(cfg: RunConfig) -> int:
    probe = cfg.probe()
    report = fisher_report(probe, cfg.theta_grid())
    out = Output(cfg, "csv", None)
    rows = (
        (t / URAD, c, report.qfi, report.shot_noise_baseline, s)
        for t, c, s in zip(report.theta, report.cfi, report.sub_shot_noise)
    )
    out.table(["theta_urad", "cfi", "qfi", "shot_noise", "sub_shot_noise"], rows)
    if out.wants_figure:
        from .plotting import plot_fisher

        plot_fisher(out.figure_path, report.theta / URAD, report.cfi, report.shot_noise_baseline, out.comment,
                    qfi=report.qfi)
    return EXIT_OK


def cmd_qfi(cfg: RunConfig) -> int:
    probe = cfg.probe()
    q, base = qfi(probe), shot_noise_baseline(probe)
    payload = {"n": probe.n_photons, "qfi": q, "shot_noise": base, "qfi_over_shot_noise": q / base}
    if probe.n_photons >= 2:
        payload["correlation"] = correlation_coefficient(probe)
    out = Output(cfg, "json", None)
    out.record(payload)
    if out.wants_figure:
        from .plotting import plot_scaling

        rows = scaling_sweep(probe, range(1, max(probe.n_photons, 2) + 1), "template")
        ns = np.array([r.n for r in rows])
        plot_scaling(out.figure_path, {"template": (ns, [r.qfi for r in rows], [r.baseline for r in rows])},
                     out.comment)
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    probe = cfg.probe()
    if cfg.theta_urad is not None:
        theta = cfg.theta_urad * URAD
    else:
        try:
            theta = quarter_fringe_theta(probe)
        except ValueError:
            raise UsageError("d = 0 has no quarter-fringe point; pass --theta-urad") from None
    model = CountModel(cfg.count_model or "binomial")
    result = crb_experiment(probe, theta, cfg.trials, cfg.replications, cfg.seed, model)
    out = Output(cfg, "json", cfg.seed)
    out.record(result.as_dict())
    if out.wants_figure:
        from .plotting import plot_estimates

        plot_estimates(out.figure_path, result.estimates / URAD, theta / URAD, np.sqrt(result.crb) / URAD,
                       out.comment)
    return EXIT_OK


def cmd_fit(cfg: RunConfig, input_csv: str) -> int:
    curve = read_fringe_csv(input_csv)
    fit = fit_fringe(curve, cfg.n, cfg.wavenumber)
    input_hash = hashlib.sha256(Path(input_csv).read_bytes()).hexdigest()
    out = Output(cfg, "json", None, extra=input_hash)
    out.record(fit.as_dict())
    if out.wants_figure:
        from .plotting import plot_fisher, plot_fringe

        grid = np.linspace(curve.theta[0], curve.theta[-1], 400)
        fitted = projection_probability(probe_from_fit(fit), grid)
        plot_fringe(out.figure_path, curve.theta / URAD, None, out.comment, counts=curve.frequencies(),
                    model=(grid / URAD, fitted))
        s2 = None if cfg.sigma2_single_mm2 is None else cfg.sigma2_single_mm2 * MM2
        report = fisher_report_from_fit(fit, grid, sigma2_single=s2)
        fisher_path = out.figure_path.with_name(out.figure_path.stem + "_fisher.svg")
        plot_fisher(fisher_path, grid / URAD, report.cfi, report.shot_noise_baseline, out.comment,
                    band=(report.cfi_lower, report.cfi_upper))
    if not fit.converged:
        raise NumericFailure(f"fit did not converge after {fit.iterations} iterations: {fit.message}")
    return EXIT_OK


def cmd_scaling(cfg: RunConfig) -> int:
    if cfg.n_max < 2:
        raise UsageError("n_max must be at least 2")
    template = cfg.probe()
    rules = ("max", "zero") if cfg.cov_rule == "both" else (cfg.cov_rule,)
    series, rows = {}, []
    for rule in rules:
        sweep = scaling_sweep(template, range(1, cfg.n_max + 1), rule)
        rows.extend((rule, r.n, r.qfi, r.baseline, r.exponent) for r in sweep)
        series[rule] = (np.array([r.n for r in sweep]), [r.qfi for r in sweep], [r.baseline for r in sweep])
    out = Output(cfg, "csv", None)
    out.table(["cov_rule", "n", "qfi", "baseline", "exponent"], rows)
    if out.wants_figure:
        from .plotting import plot_scaling

        plot_scaling(out.figure_path, series, out.comment)
    return EXIT_OK


COMMANDS = {
    "scan": (cmd_scan, "probability fringe p(theta) over a theta grid"),
    "fisher": (cmd_fisher, "classical Fisher information, QFI and shot-noise level"),
    "qfi": (cmd_qfi, "quantum Fisher information of the configured probe"),
    "simulate": (cmd_simulate, "Monte Carlo MLE experiment against the Cramer-Rao bound"),
    "fit": (cmd_fit, "fit V, sigma_(N)^2 and d to a fringe CSV"),
    "scaling": (cmd_scaling, "QFI versus photon number N"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--out", help="output path (stdout when omitted)")
    common.add_argument("--format", choices=("csv", "json", "svg"))
    common.add_argument("--seed", type=int)
    for key in KEYS:
        if key in ("out", "format", "seed"):
            continue
        common.add_argument("--" + key.replace("_", "-"), dest=key, metavar=key.upper())
    parser = _Parser(prog="hypertilt", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"hypertilt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "fit":
            p.add_argument("input_csv")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in KEYS if getattr(args, k, None) is not None}
    try:
        cfg = load_config(args.config, **overrides)
        func = COMMANDS[args.command][0]
        return func(cfg, args.input_csv) if args.command == "fit" else func(cfg)
    except (ConfigError, ProbeError, UsageError, CurveFormatError, FitError, BranchError) as exc:
        _report_error(type(exc).__name__, str(exc), EXIT_USAGE)
        return EXIT_USAGE
    except (UnboundedVariance, NumericFailure, ResolutionError, FloatingPointError) as exc:
        _report_error(type(exc).__name__, str(exc), EXIT_NUMERIC)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
