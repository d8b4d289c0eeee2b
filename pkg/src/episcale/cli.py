"""Batch experiment runner.

Usage::

    episcale simulate --config sis.yaml --out runs/sis
    episcale diffuse  --config ou.yaml --replicates 1000
    episcale verify   --config size_law.yaml --workers 4
    episcale validate --config anything.yaml

A config is a YAML mapping (JSON works too, including a previous
``-summary.json``, whose ``config`` entry is used). Command-line flags
override file values. Outputs are ``<out>-summary.json``,
``<out>-samples.csv`` and, with ``--record-paths``, ``<out>-paths.csv``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np
import yaml

from . import ctmc, diffusion, verify
from .ctmc import EpidemicParams, param_violations
from .diffusion import DiffusionSpec, spec_violations
from .rng import replicate_generator

log = logging.getLogger("episcale")

VERBS = {
    "simulate": ("sis", "sir", "envelope", "coupled"),
    "diffuse": ("diffusion",),
    "verify": ("generator", "scaling", "size_law", "envelope_scaling", "sir_ml"),
}
EXPERIMENTS = tuple(e for group in VERBS.values() for e in group)
REQUIRED = ("experiment", "replicates", "master_seed", "output", "params")
EPIDEMIC_EXPERIMENTS = ("sis", "sir", "coupled", "scaling", "size_law", "sir_ml")

OUTCOME_COLUMNS = ["replicate_index", "duration", "size_integral", "infection_count", "capped"]
COUPLED_COLUMNS = OUTCOME_COLUMNS + [
    "envelope_duration", "envelope_size_integral", "envelope_infection_count",
    "proposed_births", "rejected_births", "violations",
]
DIFFUSION_COLUMNS = ["replicate_index", "absorbed_at", "size_integral", "final_value", "capped"]
ENVELOPE_SCALING_COLUMNS = ["replicate_index", "m", "scaled_state"]
GENERATOR_COLUMNS = ["N", "sup_error"]


class ConfigError(Exception):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict
    replicates: int
    master_seed: int
    output: str
    record_paths: bool = False
    workers: int = 1

    def echo(self) -> dict:
        return {
            "experiment": self.experiment,
            "params": self.params,
            "replicates": self.replicates,
            "master_seed": self.master_seed,
            "output": self.output,
            "record_paths": self.record_paths,
            "workers": self.workers,
        }


# ---------------------------------------------------------------------------
# config loading and validation


def load_mapping(path: str | os.PathLike) -> dict:
    text = Path(path).read_text()
    data = yaml.safe_load(text) if text.strip() else {}
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(["config must be a mapping"])
    if "config" in data and isinstance(data["config"], dict) and "experiment" not in data:
        data = data["config"]
    return data


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _num(params: dict, key: str, problems: list, default=None, required=True):
    if key not in params or params[key] is None:
        if required and default is None:
            problems.append(f"params.{key} is required")
        return default
    val = params[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        problems.append(f"params.{key} must be a number")
        return default
    return val


def _epidemic_violations(experiment: str, p: dict) -> list[str]:
    problems: list[str] = []
    N = p.get("N")
    if N is None:
        problems.append("params.N is required")
    elif not _is_int(N) or N < 1:
        problems.append("params.N must be a positive integer")
        N = None
    alpha = _num(p, "alpha", problems)
    b = _num(p, "b", problems)
    lam = _num(p, "lambda", problems, default=0.0, required=False)
    beta = _num(p, "beta_override", problems, required=False)
    cap = _num(p, "time_cap", problems, required=False)
    if cap is not None and not cap > 0:
        problems.append("params.time_cap must be positive")
    if N is not None and alpha is not None:
        # a missing b is already reported; b = 0 still lets the other checks run
        problems += param_violations(N, alpha, 0.0 if b is None else b, lam, beta)
    elif alpha is not None and not 0 < alpha <= 0.5:
        problems.append("alpha must be in (0, 0.5]" if alpha <= 0 else "alpha must be ≤ 0.5")
    if experiment == "size_law" and alpha is not None and abs(alpha - 0.5) > 1e-12:
        problems.append("size_law requires alpha = 0.5")
    if experiment in ("sir_ml",) and alpha is not None and alpha > 1 / 3 + 1e-12:
        problems.append("alpha must be ≤ 1/3 for the SIR limit")
    if experiment == "scaling":
        cps = p.get("checkpoints")
        if not isinstance(cps, list) or not cps:
            problems.append("params.checkpoints must be a nonempty list of times")
        elif any(isinstance(c, bool) or not isinstance(c, (int, float)) or c < 0 for c in cps) or cps != sorted(cps):
            problems.append("params.checkpoints must be sorted nonnegative numbers")
        limit = p.get("limit")
        if limit is not None and limit not in ("feller", "attenuated_feller"):
            problems.append("params.limit must be 'feller' or 'attenuated_feller'")
    if experiment == "sir_ml":
        _num(p, "t", problems, default=1.0, required=False)
    return problems


def _envelope_violations(p: dict) -> list[str]:
    problems: list[str] = []
    beta = _num(p, "beta", problems)
    if beta is not None and beta < 0:
        problems.append("params.beta must be nonnegative")
    z0 = p.get("z0")
    if z0 is None:
        problems.append("params.z0 is required")
    elif not _is_int(z0) or z0 < 0:
        problems.append("params.z0 must be a nonnegative integer")
    cap = _num(p, "time_cap", problems, required=False)
    if cap is not None and not cap > 0:
        problems.append("params.time_cap must be positive")
    if beta is not None and beta > 1 and cap is None:
        problems.append("supercritical envelope (beta > 1) needs params.time_cap")
    return problems


def _diffusion_violations(p: dict) -> list[str]:
    problems: list[str] = []
    kind = p.get("kind")
    if kind is None:
        return ["params.kind is required"]
    y0 = p.get("y0", 1.0)
    step = _num(p, "step", problems, default=diffusion.DEFAULT_STEP, required=False)
    cap = _num(p, "time_cap", problems, default=diffusion.DEFAULT_TIME_CAP, required=False)
    _num(p, "lambda", problems, default=0.0, required=False)
    noise = _num(p, "noise", problems, required=False)
    if problems:
        return problems
    try:
        return spec_violations(kind, tuple(y0) if isinstance(y0, list) else y0, step, cap, noise)
    except TypeError:
        return ["params.y0 must be a number (or a pair for sir_limit)"]


def _generator_violations(p: dict) -> list[str]:
    problems: list[str] = []
    alpha = _num(p, "alpha", problems)
    _num(p, "lambda", problems, default=0.0, required=False)
    if alpha is not None and not 0 < alpha <= 0.5:
        problems.append("alpha must be ≤ 0.5" if alpha > 0.5 else "alpha must be positive")
    Ns = p.get("N_values")
    if not isinstance(Ns, list) or len(Ns) < 2 or not all(_is_int(n) for n in Ns):
        problems.append("params.N_values must be a list of at least two integers")
    elif any(n < 100 for n in Ns) or Ns != sorted(set(Ns)):
        problems.append("params.N_values must be increasing and each ≥ 100")
    regime = p.get("regime")
    if regime is not None and regime not in (verify.CRITICAL, verify.SUBCRITICAL):
        problems.append("params.regime must be 'critical' or 'subcritical'")
    return problems


def _envelope_scaling_violations(p: dict) -> list[str]:
    problems: list[str] = []
    lam = _num(p, "lambda", problems, default=0.0, required=False)
    b = _num(p, "b", problems)
    if b is not None and b < 0:
        problems.append("params.b must be nonnegative")
    t = _num(p, "t", problems, default=1.0, required=False)
    if t is not None and not t > 0:
        problems.append("params.t must be positive")
    ms = p.get("m_values")
    if not isinstance(ms, list) or not ms or not all(_is_int(m) and m >= 1 for m in ms):
        problems.append("params.m_values must be a nonempty list of positive integers")
    elif lam is not None and any(1 + lam / m < 0 for m in ms):
        problems.append("beta must be positive (1 + lambda/m < 0)")
    if p.get("method", "exact") not in ("exact", "gillespie"):
        problems.append("params.method must be 'exact' or 'gillespie'")
    return problems


def validate_mapping(data: dict, verb: str | None = None) -> list[str]:
    """Every schema and cross-field violation in a raw config mapping."""
    problems = [f"missing required field '{k}'" for k in REQUIRED if k not in data]
    exp = data.get("experiment")
    if exp is not None and exp not in EXPERIMENTS:
        problems.append(f"experiment must be one of {list(EXPERIMENTS)}")
        exp = None
    if verb is not None and verb != "validate" and exp is not None and exp not in VERBS[verb]:
        problems.append(f"experiment '{exp}' is not run by '{verb}' (expected one of {list(VERBS[verb])})")
    reps = data.get("replicates")
    if reps is not None and (not _is_int(reps) or reps < 1):
        problems.append("replicates must be an integer ≥ 1")
    seed = data.get("master_seed")
    if seed is not None and (not _is_int(seed) or not 0 <= seed < 2**64):
        problems.append("master_seed must be an integer in [0, 2^64)")
    workers = data.get("workers", 1)
    if not _is_int(workers) or workers < 1:
        problems.append("workers must be an integer ≥ 1")
    if "record_paths" in data and not isinstance(data["record_paths"], bool):
        problems.append("record_paths must be true or false")
    out = data.get("output")
    if out is not None:
        if not isinstance(out, str) or not out:
            problems.append("output must be a nonempty path prefix")
        else:
            parent = Path(out).parent
            probe = parent
            while not probe.exists() and probe != probe.parent:
                probe = probe.parent
            if not os.access(probe, os.W_OK):
                problems.append(f"output prefix '{out}' is not writable")
    params = data.get("params")
    if "params" in data and not isinstance(params, dict):
        problems.append("params must be a mapping")
    elif exp is not None and isinstance(params, dict):
        if exp in EPIDEMIC_EXPERIMENTS:
            problems += _epidemic_violations(exp, params)
        elif exp == "envelope":
            problems += _envelope_violations(params)
        elif exp == "diffusion":
            problems += _diffusion_violations(params)
        elif exp == "generator":
            problems += _generator_violations(params)
        elif exp == "envelope_scaling":
            problems += _envelope_scaling_violations(params)
        if exp in ("scaling", "size_law", "sir_ml") and _is_int(reps) and reps < 1000:
            problems.append(f"{exp} needs at least 1000 replicates")
    return problems


def build_config(data: dict, verb: str | None = None) -> ExperimentConfig:
    problems = validate_mapping(data, verb)
    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(
        experiment=data["experiment"],
        params=dict(data["params"]),
        replicates=int(data["replicates"]),
        master_seed=int(data["master_seed"]),
        output=str(data["output"]),
        record_paths=bool(data.get("record_paths", False)),
        workers=int(data.get("workers", 1)),
    )


def _epidemic_params(p: dict) -> EpidemicParams:
    return EpidemicParams(int(p["N"]), float(p["alpha"]), float(p["b"]), float(p.get("lambda") or 0.0),
                          None if p.get("beta_override") is None else float(p["beta_override"]))


# ---------------------------------------------------------------------------
# output helpers


def fmt(v) -> str:
    """Shortest round-trip text for a value (``repr`` of floats, ``true``/``false``)."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return ""
        return repr(v)
    return str(v)


def write_csv(path: Path, header: list[str], rows: Iterable[Iterable[Any]]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def _stats(values: np.ndarray) -> dict:
    values = np.asarray(values, dtype=float)
    values = values[~np.isnan(values)]
    if values.size == 0:
        return {"n": 0}
    sd = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return {"n": int(values.size), "mean": float(values.mean()), "sd": sd,
            "se": sd / math.sqrt(values.size), "median": float(np.median(values)),
            "min": float(values.min()), "max": float(values.max())}


def _outcome_stats(batch: dict) -> dict:
    return {
        "duration": _stats(batch["duration"]),
        "size_integral": _stats(batch["size_integral"]),
        "infection_count": _stats(batch["infection_count"]),
        "n_capped": int(np.sum(batch["capped"])),
    }


def _outcome_rows(batch: dict):
    for k in range(len(batch["duration"])):
        yield (k, float(batch["duration"][k]), float(batch["size_integral"][k]),
               int(batch["infection_count"][k]), bool(batch["capped"][k]))


# ---------------------------------------------------------------------------
# experiment runners; each returns (summary body, samples (header, rows), paths or None)


def _run_chain(cfg: ExperimentConfig):
    p = cfg.params
    cap = p.get("time_cap")
    paths = None
    if cfg.experiment == "envelope":
        beta, z0 = float(p["beta"]), int(p["z0"])
        sim = lambda gen: ctmc.simulate_envelope(beta, z0, gen, cap)  # noqa: E731
        stream = "envelope"
        run_batch = lambda: ctmc.envelope_batch(beta, z0, cfg.replicates, cfg.master_seed,  # noqa: E731
                                                time_cap=cap, workers=cfg.workers)
    else:
        params = _epidemic_params(p)
        single = ctmc.simulate_sis if cfg.experiment == "sis" else ctmc.simulate_sir
        sim = lambda gen: single(params, gen, cap)  # noqa: E731
        stream = cfg.experiment
        batch_fn = ctmc.sis_batch if cfg.experiment == "sis" else ctmc.sir_batch
        run_batch = lambda: batch_fn(params, cfg.replicates, cfg.master_seed,  # noqa: E731
                                     time_cap=cap, workers=cfg.workers)
    if cfg.record_paths:
        outcomes, path_rows = [], []
        for k in range(cfg.replicates):
            path, out = sim(replicate_generator(cfg.master_seed, stream, k))
            outcomes.append(out)
            for t, s in path:
                path_rows.append((k, t) + (s if isinstance(s, tuple) else (s,)))
        batch = {
            "duration": np.array([o.duration for o in outcomes]),
            "size_integral": np.array([o.size_integral for o in outcomes]),
            "infection_count": np.array([o.infection_count for o in outcomes]),
            "capped": np.array([o.capped for o in outcomes]),
        }
        cols = ["replicate_index", "time"] + (["infected", "removed"] if cfg.experiment == "sir" else ["state"])
        paths = (cols, path_rows)
    else:
        batch = run_batch()
    return {"statistics": _outcome_stats(batch), "pass": None}, (OUTCOME_COLUMNS, _outcome_rows(batch)), paths


def _run_coupled(cfg: ExperimentConfig):
    params = _epidemic_params(cfg.params)
    cap = cfg.params.get("time_cap")
    paths = None
    if cfg.record_paths:
        runs = [ctmc.simulate_coupled(params, replicate_generator(cfg.master_seed, "coupled", k), cap)
                for k in range(cfg.replicates)]
        batch = {
            "x_duration": [r.x_outcome.duration for r in runs],
            "x_size": [r.x_outcome.size_integral for r in runs],
            "x_infections": [r.x_outcome.infection_count for r in runs],
            "x_capped": [r.x_outcome.capped for r in runs],
            "z_duration": [r.z_outcome.duration for r in runs],
            "z_size": [r.z_outcome.size_integral for r in runs],
            "z_infections": [r.z_outcome.infection_count for r in runs],
            "proposed_births": [r.proposed_births for r in runs],
            "rejected_births": [r.rejected_births for r in runs],
            "violations": [r.violations for r in runs],
        }
        batch = {k: np.asarray(v) for k, v in batch.items()}
        rows = []
        for k, r in enumerate(runs):
            for t, z in r.z_path:
                rows.append((k, t, int(r.x_path.state_at(t)), z))
        paths = (["replicate_index", "time", "sis_state", "envelope_state"], rows)
    else:
        batch = ctmc.coupled_batch(params, cfg.replicates, cfg.master_seed, time_cap=cap, workers=cfg.workers)
    proposed = int(batch["proposed_births"].sum())
    stats = {
        "sis_duration": _stats(batch["x_duration"]),
        "envelope_duration": _stats(batch["z_duration"]),
        "sis_size_integral": _stats(batch["x_size"]),
        "envelope_size_integral": _stats(batch["z_size"]),
        "violations": int(batch["violations"].sum()),
        "rejection_fraction": float(batch["rejected_births"].sum() / proposed) if proposed else 0.0,
    }
    rows = (
        (k, float(batch["x_duration"][k]), float(batch["x_size"][k]), int(batch["x_infections"][k]),
         bool(batch["x_capped"][k]), float(batch["z_duration"][k]), float(batch["z_size"][k]),
         int(batch["z_infections"][k]), int(batch["proposed_births"][k]),
         int(batch["rejected_births"][k]), int(batch["violations"][k]))
        for k in range(cfg.replicates)
    )
    return {"statistics": stats, "pass": stats["violations"] == 0}, (COUPLED_COLUMNS, rows), paths


def _diffusion_spec(p: dict) -> DiffusionSpec:
    y0 = p.get("y0", 1.0)
    return DiffusionSpec(
        kind=p["kind"],
        lam=float(p.get("lambda") or 0.0),
        y0=tuple(y0) if isinstance(y0, list) else float(y0),
        step=float(p.get("step", diffusion.DEFAULT_STEP)),
        time_cap=float(p.get("time_cap", diffusion.DEFAULT_TIME_CAP)),
        noise=None if p.get("noise") is None else float(p["noise"]),
    )


def _run_diffusion(cfg: ExperimentConfig):
    spec = _diffusion_spec(cfg.params)
    paths = None
    batch = diffusion.sample_batch(spec, cfg.replicates, cfg.master_seed,
                                   checkpoints=[spec.time_cap], workers=cfg.workers)
    final = batch["checkpoint_y"][:, 0]
    if cfg.record_paths:
        rows = []
        for k in range(cfg.replicates):
            path = diffusion.integrate(spec, replicate_generator(cfg.master_seed, "diffusion", k))
            vals = path.values if path.values.ndim == 2 else path.values[:, None]
            rows.extend((k, float(t)) + tuple(float(v) for v in row) for t, row in zip(path.grid, vals))
        cols = ["replicate_index", "time"] + (["infected", "removed"] if spec.kind == "sir_limit" else ["value"])
        paths = (cols, rows)
    absorbed = batch["absorbed_at"]
    stats = {
        "absorbed_at": _stats(absorbed),
        "size_integral": _stats(batch["size_integral"]),
        "final_value": _stats(final),
        "n_unabsorbed": int(np.sum(np.isnan(absorbed))),
        "noise": spec.noise_coefficient,
    }
    rows = ((k, float(absorbed[k]), float(batch["size_integral"][k]), float(final[k]),
             bool(np.isnan(absorbed[k])) and spec.absorbing) for k in range(cfg.replicates))
    return {"statistics": stats, "pass": None}, (DIFFUSION_COLUMNS, rows), paths


def _run_verify(cfg: ExperimentConfig):
    p = cfg.params
    exp = cfg.experiment
    if exp == "generator":
        report = verify.check_generator_convergence(
            float(p["alpha"]), float(p.get("lambda") or 0.0), verify.standard_bump(),
            p["N_values"], regime=p.get("regime"))
        rows = list(zip(report.N_values, report.sup_errors))
        return {"report": report.to_dict(), "pass": report.passed}, (GENERATOR_COLUMNS, rows), None
    if exp == "envelope_scaling":
        m_values = [int(m) for m in p["m_values"]]
        report = verify.check_envelope_scaling(
            float(p.get("lambda") or 0.0), float(p["b"]), m_values, cfg.replicates, cfg.master_seed,
            t=float(p.get("t", 1.0)), method=p.get("method", "exact"), workers=cfg.workers)
        rows = ((k, m, float(report.samples[m][k])) for m in m_values for k in range(cfg.replicates))
        return {"report": report.to_dict(), "pass": report.passed}, (ENVELOPE_SCALING_COLUMNS, rows), None
    params = _epidemic_params(p)
    if exp == "scaling":
        report = verify.check_process_scaling(params, p["checkpoints"], cfg.replicates, cfg.master_seed,
                                              limit=p.get("limit"), workers=cfg.workers)
    elif exp == "size_law":
        report = verify.check_size_law(params, cfg.replicates, cfg.master_seed, workers=cfg.workers)
    else:
        report = verify.check_sir_scaling_and_ml(params, cfg.replicates, cfg.master_seed,
                                                 t=float(p.get("t", 1.0)), workers=cfg.workers)
    body = {"report": report.to_dict(), "pass": report.passed}
    if isinstance(getattr(report, "ks", None), float):
        body["ks"] = report.ks
    if report.samples is None:
        rows = ((k, 0.0, 0.0, 0, False) for k in range(cfg.replicates))
        return body, (OUTCOME_COLUMNS, rows), None
    body["statistics"] = _outcome_stats(report.samples)
    return body, (OUTCOME_COLUMNS, _outcome_rows(report.samples)), None


RUNNERS = {
    "sis": _run_chain, "sir": _run_chain, "envelope": _run_chain,
    "coupled": _run_coupled, "diffusion": _run_diffusion,
    "generator": _run_verify, "scaling": _run_verify, "size_law": _run_verify,
    "envelope_scaling": _run_verify, "sir_ml": _run_verify,
}


def output_paths(prefix: str) -> dict[str, Path]:
    return {name: Path(f"{prefix}-{name}.{ext}")
            for name, ext in (("summary", "json"), ("samples", "csv"), ("paths", "csv"))}


def run(cfg: ExperimentConfig) -> dict:
    """Execute an experiment and write its artifacts; returns the summary."""
    files = output_paths(cfg.output)
    files["summary"].parent.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    start = time.perf_counter()
    try:
        log.info("running %s with %d replicates", cfg.experiment, cfg.replicates)
        body, (header, rows), paths = RUNNERS[cfg.experiment](cfg)
        written.append(files["samples"])
        write_csv(files["samples"], header, rows)
        if paths is not None:
            written.append(files["paths"])
            write_csv(files["paths"], *paths)
        summary = {"config": cfg.echo(), **body, "wall_time_s": time.perf_counter() - start}
        written.append(files["summary"])
        files["summary"].write_text(json.dumps(verify._jsonable(summary), indent=2) + "\n")
    except BaseException:
        for f in written:
            f.unlink(missing_ok=True)
        raise
    log.info("done in %.2fs", summary["wall_time_s"])
    return summary


# ---------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="episcale", description=__doc__.split("\n")[0])
    ap.add_argument("verb", choices=["simulate", "diffuse", "verify", "validate"])
    ap.add_argument("--config", required=True, help="YAML/JSON experiment config")
    ap.add_argument("--seed", type=int, help="override master_seed")
    ap.add_argument("--replicates", type=int, help="override replicates")
    ap.add_argument("--out", help="override output prefix")
    ap.add_argument("--workers", type=int, help="worker processes (default 1)")
    ap.add_argument("--record-paths", action="store_true", default=None, help="also write <out>-paths.csv")
    ap.add_argument("-v", "--verbose", action="store_true", help="progress messages on stderr")
    return ap


def _fail(kind: str, message: str, violations: list[str] | None = None, code: int = 2) -> int:
    err = {"error": kind, "message": message}
    if violations is not None:
        err["violations"] = violations
    print(json.dumps(err, ensure_ascii=False), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(message)s")
    try:
        data = load_mapping(args.config)
    except OSError as exc:
        return _fail("io_error", str(exc))
    except yaml.YAMLError as exc:
        return _fail("config_error", f"unparseable config: {exc}", ["config is not valid YAML/JSON"])
    except ConfigError as exc:
        return _fail("config_error", str(exc), exc.violations)
    overrides = {"master_seed": args.seed, "replicates": args.replicates, "output": args.out,
                 "workers": args.workers, "record_paths": args.record_paths}
    data.update({k: v for k, v in overrides.items() if v is not None})
    if args.verb == "validate":
        problems = validate_mapping(data)
        print(json.dumps({"valid": not problems, "violations": problems}, indent=2, ensure_ascii=False))
        return 0 if not problems else 1
    try:
        cfg = build_config(data, args.verb)
    except ConfigError as exc:
        return _fail("config_error", str(exc), exc.violations)
    try:
        summary = run(cfg)
    except (ValueError, ArithmeticError) as exc:
        return _fail(type(exc).__name__, str(exc), code=1)
    print(json.dumps({"summary": str(output_paths(cfg.output)["summary"]), "pass": summary.get("pass")}))
    return 0 if summary.get("pass") is not False else 3


if __name__ == "__main__":
    sys.exit(main())
