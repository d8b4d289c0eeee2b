"""Acceptance criteria at their stated sizes and tolerances.

Each test records one PASS/FAIL line, repeated in the terminal summary.
Population diffusions use the chain-matched noise coefficient 2; every
report also carries the distance to the unit-noise limit for comparison.
"""

import math

import numpy as np
import pytest
import yaml

from conftest import record_criterion
from episcale import cli, ctmc, verify
from episcale.analytics import harmonic_mean_duration, ou_survival
from episcale.ctmc import EpidemicParams
from episcale.diffusion import DiffusionSpec, sample_batch

pytestmark = pytest.mark.slow

SEED = 20240611


def _fmt(values):
    return "[" + ", ".join(f"{v:.4f}" for v in values) + "]"


def test_criterion_1_generator_convergence():
    f = verify.standard_bump()
    reports = [verify.check_generator_convergence(0.5, lam, f, [10**2, 10**4, 10**6]) for lam in (0.0, 1.0)]
    ok = all(r.passed for r in reports)
    detail = "; ".join(
        f"lam={r.lam:g} errors={_fmt(r.sup_errors)} slope={r.empirical_rate:.3f}" for r in reports
    )
    record_criterion("#1", "generator convergence", ok, detail + " (band [-1.3, -0.7])")
    assert ok


def test_criterion_2_pure_death_oracle():
    parts, ok = [], True
    for x0 in (1, 3, 10):
        params = EpidemicParams(10_000, 0.5, x0 / 100.0, beta_override=0.0)
        assert params.x0 == x0
        d = ctmc.sis_batch(params, 100_000, SEED + x0)["duration"]
        se = d.std(ddof=1) / math.sqrt(d.size)
        oracle = harmonic_mean_duration(x0)
        z = abs(d.mean() - oracle) / se
        ok &= z < 3
        parts.append(f"x0={x0} mean={d.mean():.4f} oracle={oracle:.4f} |z|={z:.2f}")
    record_criterion("#2", "pure-death oracle", ok, "; ".join(parts))
    assert ok


def test_criterion_3_coupling_domination():
    r = verify.check_coupling(EpidemicParams(10_000, 0.5, 1.0, 0.0), 10_000, SEED, stop_with_sis=True)
    ok = r.violations == 0
    record_criterion("#3", "coupling domination", ok,
                     f"violations={r.violations} over {r.replicates} replicates, "
                     f"rejection fraction={r.rejection_fraction:.4f}")
    assert ok


def test_criterion_4_envelope_feller_scaling():
    reports = [verify.check_envelope_scaling(lam, 1.0, [10_000], 10_000, SEED) for lam in (0.0, 1.0)]
    ok = all(r.passed for r in reports)
    detail = "; ".join(
        f"lam={r.lam:g} KS={r.ks[0]:.4f} atom chain/limit={r.atom_chain[0]:.4f}/{r.atom_limit[0]:.4f}"
        f" (unit-noise KS={r.ks_unit_noise[0]:.4f})"
        for r in reports
    )
    record_criterion("#4", "envelope Feller scaling", ok, detail + " (KS < 0.05, atom within 0.02)")
    assert ok


def test_criterion_5_process_scaling():
    ts = [0.5, 1.0, 2.0]
    parts, ok = [], True
    for lam in (0.0, 1.0):
        r = verify.check_process_scaling(EpidemicParams(10_000, 0.5, 1.0, lam), ts, 10_000, SEED)
        ok &= r.passed
        parts.append(f"alpha=1/2 lam={lam:g} KS={_fmt(r.ks)} (unit-noise {_fmt(r.ks_unit_noise)})")
    for lam in (0.0, 1.0):
        r = verify.check_process_scaling(EpidemicParams(10_000, 0.25, 1.0, lam), ts, 10_000, SEED + 1)
        ok &= r.passed
        parts.append(f"alpha=1/4 lam={lam:g} vs feller KS={_fmt(r.ks)}")
    neg = verify.check_process_scaling(EpidemicParams(10_000, 0.25, 3.0, 0.0), ts, 10_000, SEED + 2,
                                       limit="attenuated_feller", compare_unit_noise=False)
    neg_ok = (not neg.passed) and max(neg.ks) > 0.1
    ok &= neg_ok
    parts.append(f"negative control alpha=1/4 b=3 vs attenuated KS={_fmt(neg.ks)} (must exceed 0.1)")
    record_criterion("#5", "process scaling", ok, "; ".join(parts))
    assert ok


def test_criterion_6_size_law():
    r = verify.check_size_law(EpidemicParams(10_000, 0.5, 1.0, 0.0), 10_000, SEED)
    trend = verify.check_size_law_trend(1.0, 0.0, [100, 10_000], 10, 10_000, SEED + 100)
    xi_ok = r.xi_gap is not None and r.xi_gap < 0.05
    ok = r.passed and trend.passed and xi_ok
    record_criterion(
        "#6", "size law", ok,
        f"KS={r.ks:.4f} (unit-noise OU {r.ks_unit_noise:.4f}), capped={r.n_capped}; "
        f"median KS N=1e2/1e4 = {trend.median_ks[0]:.4f}/{trend.median_ks[1]:.4f}; "
        f"xi gap={r.xi_gap:.4f}",
    )
    assert ok


def test_criterion_7_reflection_formula():
    n = 1_000_000
    spec = DiffusionSpec("ou", y0=1.0, time_cap=10.0)
    out = sample_batch(spec, n, SEED, level=0.0, stop_at_passage=True, bridge=True)
    grid = np.linspace(0.05, 5.0, 100)
    exact = ou_survival(1.0, grid)

    def sup_error(times):
        t = np.sort(np.where(np.isnan(times), np.inf, times))
        surv = 1.0 - np.searchsorted(t, grid, side="right") / n
        return float(np.max(np.abs(surv - exact)))

    bridged, plain = sup_error(out["passage_bridge"]), sup_error(out["passage"])
    ok = bridged < 0.01
    record_criterion("#7", "reflection formula", ok,
                     f"sup error={bridged:.4f} bridge-corrected (grid-crossing only: {plain:.4f}), "
                     f"{n} paths")
    assert ok


def test_criterion_8_sir_martin_lof():
    r = verify.check_sir_scaling_and_ml(EpidemicParams(10_000, 1 / 3, 1.0, 0.0), 10_000, SEED)
    unit = r.ks_unit_noise
    record_criterion(
        "#8", "SIR and Martin-Löf size", r.passed,
        f"KS I={r.ks_infected:.4f} R={r.ks_removed:.4f} size={r.ks_size:.4f} capped={r.n_capped} "
        f"(unit-noise I={unit['infected']:.4f} R={unit['removed']:.4f} size={unit['size']:.4f})",
    )
    assert r.passed


DETERMINISM_CONFIGS = {
    "sis": ("simulate", {"N": 400, "alpha": 0.5, "b": 1.0, "lambda": 1.0}, 200),
    "sir": ("simulate", {"N": 1000, "alpha": 1 / 3, "b": 1.0}, 200),
    "envelope": ("simulate", {"beta": 1.0, "z0": 5, "time_cap": 200.0}, 200),
    "coupled": ("simulate", {"N": 400, "alpha": 0.5, "b": 1.0}, 200),
    "diffusion": ("diffuse", {"kind": "attenuated_feller", "lambda": 1.0, "y0": 1.0, "time_cap": 2.0}, 200),
    "generator": ("verify", {"alpha": 0.5, "lambda": 1.0, "N_values": [100, 10_000, 1_000_000]}, 1),
    "scaling": ("verify", {"N": 400, "alpha": 0.5, "b": 1.0, "checkpoints": [0.5, 1.0]}, 1000),
    "size_law": ("verify", {"N": 400, "alpha": 0.5, "b": 1.0}, 1000),
    "envelope_scaling": ("verify", {"b": 1.0, "lambda": 1.0, "m_values": [100, 1000]}, 1000),
    "sir_ml": ("verify", {"N": 1000, "alpha": 1 / 3, "b": 1.0}, 1000),
}


def test_criterion_9_determinism(tmp_path):
    mismatched = []
    for experiment, (verb, params, reps) in DETERMINISM_CONFIGS.items():
        outputs = []
        for tag, workers in (("a", 1), ("b", 1), ("c", 2)):
            cfg = {"experiment": experiment, "replicates": reps, "master_seed": SEED,
                   "output": str(tmp_path / f"{experiment}-{tag}"), "params": params,
                   "workers": workers, "record_paths": experiment in ("sis", "diffusion")}
            path = tmp_path / f"{experiment}-{tag}.yaml"
            path.write_text(yaml.safe_dump(cfg))
            assert cli.main([verb, "--config", str(path)]) in (0, 3)
            files = cli.output_paths(cfg["output"])
            outputs.append([files[k].read_bytes() for k in ("samples", "paths") if files[k].exists()])
        if not outputs[0] == outputs[1] == outputs[2]:
            mismatched.append(experiment)
    ok = not mismatched
    record_criterion("#9", "determinism", ok,
                     f"{len(DETERMINISM_CONFIGS)} experiments re-run at workers 1, 1, 2; "
                     f"byte-identical CSVs for all" if ok else f"mismatch in {mismatched}")
    assert ok
