"""Command line: scans, shot synthesis and analysis, oracle checks and fits.

Every subcommand writes <name>.csv and <name>.json (and a <name>.png figure
for scans) into the output directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .engine import (
    accel_scan,
    acceleration_phase,
    height_scan,
    mass_scan,
    timing_fwhm,
    timing_scan,
)
from .ensemble import ConfigurationError, sigma_v_to_divergences
from .fitting import FitError, damped_sine, fit_damped_sine, fit_gaussian, gaussian
from .gratings import ConvergenceError
from .io import emit, read_csv, read_json, stamp
from .oracles import classical_oracle_suite, quantum_oracle_suite
from .results import ScanResult
from .shots import (
    Jitter,
    SaturatedBinError,
    ShotTruth,
    analyze_runs,
    read_shots,
    synthesize_shots,
    write_shots,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_ORACLE = 3
EXIT_CONVERGENCE = 4
OUT_ENV = "TDTLI_OUT"

DEFAULT_TIMING_GRID_NS = np.arange(-70.0, 70.0 + 1e-9, 5.0)
DEFAULT_HEIGHT_GRID_MM = np.linspace(0.05, 6.0, 60)
DEFAULT_ACCEL_GRID = np.linspace(0.0, 20.0, 11)

# SI column -> (display unit, factor)
_DISPLAY = {"s": ("ns", 1e9), "m": ("mm", 1e3)}
_DISPLAY_OVERRIDES = {"fringe_shift": ("nm", 1e9)}


def to_display(result: ScanResult) -> ScanResult:
    """Convert time columns to ns and lengths to mm (fringe shifts to nm)."""
    cols, units = {}, {}
    for name, values in result.columns.items():
        unit = result.units[name]
        new_unit, factor = unit, 1.0
        if unit in _DISPLAY:
            new_unit, factor = _DISPLAY_OVERRIDES.get(name, _DISPLAY[unit])
        cols[name] = values * factor
        units[name] = new_unit
    return ScanResult(result.parameter, cols, units, dict(result.metadata))


def _merge(results: list[ScanResult], models: list[str]) -> ScanResult:
    """Join per-model scans on their shared parameter column."""
    first = results[0]
    cols = {first.parameter: first.x}
    units = {first.parameter: first.units[first.parameter]}
    for res, model in zip(results, models):
        for name, values in res.columns.items():
            if name == res.parameter:
                continue
            key = f"{name}_{model}" if name == "delta_sn" else name
            cols[key] = values
            units[key] = res.units[name]
    meta = dict(first.metadata)
    meta["models"] = models
    meta.pop("model", None)
    return ScanResult(first.parameter, cols, units, meta)


def _species(cfg: RunConfig):
    family = cfg.species.family()
    if cfg.scan.species_N is None:
        return family[0]
    for sp in family:
        if sp.n_units == cfg.scan.species_N:
            return sp
    raise ConfigError(f"cluster size {cfg.scan.species_N} not in species.N", "scan.species_N")


def _grid(cfg: RunConfig, default: np.ndarray) -> np.ndarray:
    return default if cfg.scan.grid is None else cfg.scan.grid.array()


def _per_model(cfg: RunConfig, threads: int, fn) -> ScanResult:
    models = cfg.models()
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(fn, models))
    return _merge(results, models)


def cmd_mass_scan(cfg: RunConfig, args) -> tuple[ScanResult, dict]:
    ens = cfg.ensemble.build()
    n0 = cfg.sequence.n0
    res = mass_scan(cfg.species.family(), cfg.sequence.T_ns * 1e-9, ens, cfg.environment.build(),
                    cfg.models(), cfg.sequence.fluences, cfg.sequence.V, cfg.scan.band,
                    cfg.sequence.dT_off_ns * 1e-9,
                    n0_override=None if n0 is None else (lambda N: n0))
    summary = {}
    for model in cfg.models():
        vals = np.abs(res[f"dsn_{model}"])
        summary[f"peak_N_{model}"] = int(res["N"][int(np.argmax(vals))])
    return res, summary


def cmd_timing_scan(cfg: RunConfig, args) -> tuple[ScanResult, dict]:
    sp = _species(cfg)
    ens = cfg.ensemble.build()
    seq = cfg.sequence.build(sp)
    grid = _grid(cfg, DEFAULT_TIMING_GRID_NS) * 1e-9

    def run(model):
        return timing_scan(sp, seq, ens, grid, cfg.environment.build(), model,
                           cfg.sequence.dT_off_ns * 1e-9)

    res = _per_model(cfg, args.threads, run)
    fwhm = timing_fwhm(ens.sigma_v, seq.g1.period_d)
    summary = {"species_N": sp.n_units, "sigma_v": ens.sigma_v, "fwhm_expected_ns": fwhm * 1e9,
               "divergence_under_definitions_mrad":
                   {k: v * 1e3 for k, v in sigma_v_to_divergences(ens.sigma_v, ens.v0).items()}}
    return res, summary


def cmd_height_scan(cfg: RunConfig, args) -> tuple[ScanResult, dict]:
    sp = _species(cfg)
    ens = cfg.ensemble.build()
    seq = cfg.sequence.build(sp)
    grid = _grid(cfg, DEFAULT_HEIGHT_GRID_MM) * 1e-3
    env = cfg.environment

    def run(model):
        return height_scan(sp, seq, ens, grid, env.sigma_h_mm * 1e-3,
                           None if env.decay_length_mm is None else env.decay_length_mm * 1e-3,
                           model, cfg.sequence.dT_off_ns * 1e-9)

    res = _per_model(cfg, args.threads, run)
    period = res.metadata.get("period_expected")
    return res, {"species_N": sp.n_units, "theta_mrad": seq.g2.tilt_theta * 1e3,
                 "period_expected_mm": None if period is None else period * 1e3}


def cmd_accel_scan(cfg: RunConfig, args) -> tuple[ScanResult, dict]:
    sp = _species(cfg)
    ens = cfg.ensemble.build()
    seq = cfg.sequence.build(sp)
    grid = _grid(cfg, DEFAULT_ACCEL_GRID)

    def run(model):
        return accel_scan(sp, seq, ens, grid, model, cfg.sequence.dT_off_ns * 1e-9,
                          cfg.environment.z_mm * 1e-3)

    res = _per_model(cfg, args.threads, run)
    shift_g = acceleration_phase(9.81, seq)[0]
    return res, {"species_N": sp.n_units, "fringe_shift_at_g_nm": shift_g * 1e9}


def _truths(cfg: RunConfig) -> tuple[ShotTruth, ShotTruth]:
    family = tuple(cfg.species.family())
    ens = cfg.ensemble.build()
    s = cfg.shots
    common = dict(species=family, T=cfg.sequence.T_ns * 1e-9, ensemble=ens,
                  fluences=cfg.sequence.fluences, nominal_energy=s.energy_mJ * 1e-3,
                  V=cfg.sequence.V, environment=cfg.environment.build(),
                  model="quantum" if cfg.scan.model == "both" else cfg.scan.model)
    dT_off = cfg.sequence.dT_off_ns * 1e-9
    if s.rates is not None:
        if len(s.rates) != len(family):
            raise ConfigError(f"need {len(family)} rates, got {len(s.rates)}", "shots.rates")
        rates = tuple(s.rates)
    else:
        # default: one expected count per shot off resonance
        probe = ShotTruth(rates=(1.0,) * len(family), dT_target=dT_off, **common)
        flux = probe.expected_counts([probe.T], [probe.T + dT_off],
                                     np.full((3, 1), probe.nominal_energy))[:, 0]
        rates = tuple(1.0 / f if f > 0 else 0.0 for f in flux)
    return (ShotTruth(rates=rates, dT_target=0.0, **common),
            ShotTruth(rates=rates, dT_target=dT_off, **common))


def cmd_synthesize_shots(cfg: RunConfig, args) -> tuple[ScanResult, dict]:
    res_truth, off_truth = _truths(cfg)
    s = cfg.shots
    jitter = Jitter(s.jitter_fwhm_ns * 1e-9, s.drift_ns * 1e-9, s.energy_rel)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    runs = {}
    for tag, truth, offset in (("res", res_truth, 0), ("off", off_truth, 1)):
        run = synthesize_shots(truth, jitter, s.n_shots, seed=cfg.seed * 2 + offset)
        write_shots(run, out / f"shots_{tag}.jsonl")
        runs[tag] = run
    analytic = res_truth.analytic_delta_sn(off_truth.dT_target)
    table = ScanResult(
        "N",
        {"N": [sp.n_units for sp in res_truth.species], "rate": res_truth.rates,
         "mean_counts_res": runs["res"].counts.mean(axis=0),
         "mean_counts_off": runs["off"].counts.mean(axis=0), "delta_sn_analytic": analytic},
        {"N": "1", "rate": "1/shot", "mean_counts_res": "1/shot", "mean_counts_off": "1/shot",
         "delta_sn_analytic": "1"},
    )
    return table, {"files": ["shots_res.jsonl", "shots_off.jsonl"],
                   "truth_digest": res_truth.digest(), "jitter": asdict(jitter)}


def cmd_analyze_shots(cfg: RunConfig | None, args) -> tuple[ScanResult, dict]:
    src = Path(args.shots_dir or args.out)
    res_run = read_shots(src / "shots_res.jsonl")
    off_run = read_shots(src / "shots_off.jsonl")
    window, energy_window = 5e-9, None
    if cfg is not None:
        s = cfg.shots
        window = None if s.window_ns is None else s.window_ns * 1e-9
        if s.energy_window_mJ is not None:
            energy_window = tuple(e * 1e-3 for e in s.energy_window_mJ)
    rows = analyze_runs(res_run, off_run, window, energy_window)
    bins = res_run.header.get("bins", list(range(len(rows))))
    cols = {"N": bins}
    for key in ("lam_res", "sigma_res", "lam_off", "sigma_off", "delta_sn", "sigma_delta_sn"):
        cols[key] = [r[key] for r in rows]
    summary = {"n_selected_res": rows[0]["n_res"] if rows else 0,
               "n_selected_off": rows[0]["n_off"] if rows else 0,
               "unreliable_bins": [b for b, r in zip(bins, rows) if r["unreliable"]]}
    if cfg is not None:
        res_truth, off_truth = _truths(cfg)
        analytic = res_truth.analytic_delta_sn(off_truth.dT_target)
        cols["delta_sn_analytic"] = analytic
        z = np.abs(np.asarray(cols["delta_sn"]) - analytic) / np.asarray(cols["sigma_delta_sn"])
        summary["max_deviation_sigmas"] = float(np.max(z)) if len(z) else 0.0
    units = {k: "1" for k in cols}
    units.update({"lam_res": "1/shot", "sigma_res": "1/shot", "lam_off": "1/shot",
                  "sigma_off": "1/shot"})
    return ScanResult("N", cols, units), summary


def cmd_oracle_check(cfg: RunConfig | None, args) -> tuple[ScanResult, dict]:
    rows = quantum_oracle_suite()
    if not args.quantum_only:
        rows += classical_oracle_suite(seed=0 if cfg is None else cfg.seed)
    names = ("n0", "phi0", "xi", "dT", "engine", "oracle", "error")
    cols = {"case": np.arange(len(rows))}
    cols["classical"] = [r.kind == "classical" for r in rows]
    for n in names:
        cols[n] = [getattr(r, n) for r in rows]
    cols["passed"] = [r.passed for r in rows]
    units = {k: "1" for k in cols}
    units["dT"] = "s"
    failed = [i for i, r in enumerate(rows) if not r.passed]
    for i, r in enumerate(rows):
        print(f"{r.kind:9s} n0={r.n0:<4g} phi0={r.phi0:<4g} xi={r.xi:<4g} "
              f"dT={r.dT * 1e9:<5g}ns err={r.error:.3g} {'PASS' if r.passed else 'FAIL'}")
    summary = {"n_cases": len(rows), "failed_cases": failed}
    return ScanResult("case", cols, units), summary


def cmd_fit(cfg: RunConfig | None, args) -> tuple[ScanResult, dict]:
    path = Path(args.input)
    result = read_json(path)[0] if path.suffix == ".json" else read_csv(path)
    column = args.column or next((c for c in result.columns if "delta_sn" in c or
                                  c.startswith("dsn")), None)
    if column is None or column not in result.columns:
        raise ConfigError(f"column {column!r} not found in {path.name}", "--column")
    x, y = result.x, result[column]
    if args.shape == "gaussian":
        fit = fit_gaussian(x, y)
        curve = gaussian(x, **fit.params)
    else:
        fit = fit_damped_sine(x - x[0], y)
        curve = damped_sine(x - x[0], **fit.params)
    if not fit.converged:
        raise ConvergenceError(f"fit did not converge: {fit.message}")
    out = ScanResult(result.parameter, {result.parameter: x, column: y, "fit": curve},
                     {result.parameter: result.units[result.parameter],
                      column: result.units[column], "fit": result.units[column]},
                     {"source": path.name, "shape": args.shape})
    return out, {"params": fit.params, "residual_norm": fit.residual_norm,
                 "x_unit": result.units[result.parameter]}


COMMANDS = {
    "mass-scan": (cmd_mass_scan, True, True),
    "timing-scan": (cmd_timing_scan, True, True),
    "height-scan": (cmd_height_scan, True, True),
    "accel-scan": (cmd_accel_scan, True, True),
    "synthesize-shots": (cmd_synthesize_shots, True, False),
    "analyze-shots": (cmd_analyze_shots, False, True),
    "oracle-check": (cmd_oracle_check, False, False),
    "fit": (cmd_fit, False, True),
}
SCAN_TYPES = {"mass": "mass-scan", "timing": "timing-scan", "height": "height-scan",
              "accel": "accel-scan"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tdtli", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in [*COMMANDS, "run"]:
        p = sub.add_parser(name, help="scan named by scan.type" if name == "run" else None)
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--out", help=f"output directory (default: config, then ${OUT_ENV})")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--model", choices=["quantum", "classical", "both"])
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--no-figures", action="store_true")
        if name == "analyze-shots":
            p.add_argument("--shots-dir", help="directory holding shots_res/off.jsonl")
        if name == "oracle-check":
            p.add_argument("--quantum-only", action="store_true")
        if name == "fit":
            p.add_argument("--input", required=True, help="result .csv or .json")
            p.add_argument("--shape", choices=["gaussian", "damped-sine"], default="gaussian")
            p.add_argument("--column")
    return parser


def _load(args, needs_config: bool) -> RunConfig | None:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.model is not None:
        overrides["scan"] = {"model": args.model}
    if args.config is None:
        if needs_config:
            raise ConfigError("this subcommand needs a configuration file", "--config")
        return None
    return load_config(args.config, overrides)


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = _load(args, True)
            args.command = SCAN_TYPES[cfg.scan.type]
        fn, needs_config, plots = COMMANDS[args.command]
        cfg = _load(args, needs_config)
        if args.out is None:
            args.out = os.environ.get(OUT_ENV) or (cfg.output.dir if cfg else "out")
        stem = args.command.replace("-", "_")
        result, summary = fn(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, FitError, SaturatedBinError) as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ConfigurationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    result = to_display(result)
    result.metadata = stamp(result.metadata, cfg.digest() if cfg else None)
    result.metadata["command"] = args.command
    if cfg is not None:
        result.metadata["seed"] = cfg.seed
    paths = emit(result, args.out, stem, extra={"summary": summary})
    if plots and not args.no_figures and (cfg is None or cfg.output.figures) and len(result):
        from .plotting import plot_scan

        fit_curve = (result.x, result["fit"]) if "fit" in result.columns else None
        paths["png"] = plot_scan(result, Path(args.out) / f"{stem}.png", args.command, fit_curve)
    print(json.dumps({"outputs": {k: str(v) for k, v in paths.items()}, "summary": summary},
                     default=str))
    if args.command == "oracle-check" and summary["failed_cases"]:
        return EXIT_ORACLE
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
