"""Command-line experiment runner.

Every verifier is a subcommand. Options come from three layers, lowest
first: built-in defaults, a YAML config file (``--config``), explicit flags.
Outputs land in ``--out-dir``: verdict records (JSON lines or CSV), one CSV
plus gnuplot script per table, and a summary JSON. Nothing time-dependent is
written, so identical inputs give byte-identical files.

Exit codes: 0 all hard verdicts pass, 1 a hard verdict failed, 2 usage or
config error, 3 runtime error inside an experiment.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
import traceback
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import yaml

from . import bounds, entropies, moments, outputstats, rdist
from . import suite as suite_mod
from .ensembles import EnsembleSampler, split_spec, make_hamiltonian, make_rho
from .hilbert import DensityMatrix, Partition
from .suite import Result, VerdictRecord, verdict

log = logging.getLogger("scrooge")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3

GLOBAL_KEYS = ("seed", "workers", "out_dir", "fail_fast", "format")
DEFAULTS = {"seed": None, "workers": 1, "out_dir": "results", "fail_fast": False, "format": "json"}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- config


def load_config(path: str) -> tuple[dict, dict]:
    """Parse a YAML mapping; returns (values, line numbers per top-level key)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"{path}{where}: {getattr(exc, 'problem', exc)}") from exc
    if data is None:
        return {}, {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    lines = {k.value: k.start_mark.line + 1 for k, _ in node.value}
    return {str(k).replace("-", "_"): v for k, v in data.items()}, {str(k).replace("-", "_"): v for k, v in lines.items()}


def merge_options(args: argparse.Namespace, known: Sequence[str], defaults: dict) -> dict:
    """Layer defaults < config < explicit flags; unknown config keys are errors."""
    opts = dict(DEFAULTS)
    opts.update(defaults)
    if args.config:
        cfg, lines = load_config(args.config)
        cfg.pop("command", None)
        allowed = set(known) | set(GLOBAL_KEYS)
        for key, val in cfg.items():
            if key not in allowed:
                raise ConfigError(f"{args.config}:{lines.get(key, '?')}: unknown key {key!r} for '{args.command}'")
            opts[key] = val
    for key in set(known) | set(GLOBAL_KEYS):
        val = getattr(args, key, None)
        if val is not None and val is not False:
            opts[key] = val
    if opts.get("seed") is None:
        raise ConfigError("a seed is required: pass --seed or set 'seed' in the config")
    if int(opts["workers"]) < 1:
        raise ConfigError("workers must be >= 1")
    return opts


# ---------------------------------------------------------------- outputs


def _dumps(obj) -> str:
    return json.dumps(suite_mod._clean(obj), sort_keys=True, separators=(",", ":"))


def emit_plot_data(name: str, rows: list[dict], out_dir: Path, columns: Sequence[str] | None = None) -> tuple[Path, Path]:
    """Write ``name.csv`` and a gnuplot script ``name.gp`` plotting every column against the first."""
    out_dir = Path(out_dir)
    cols = list(columns) if columns else (list(rows[0].keys()) if rows else [])
    csv_path = out_dir / f"{name}.csv"
    gp_path = out_dir / f"{name}.gp"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in cols])
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set output '{name}.png'",
        "set terminal pngcairo size 800,600",
    ]
    if len(cols) >= 2:
        plots = ", ".join(f"'{name}.csv' using 1:{i} with linespoints" for i in range(2, len(cols) + 1))
        lines.append(f"plot {plots}")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path.write_text(buf.getvalue())
        gp_path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write plot data to {out_dir}: {exc}") from exc
    return csv_path, gp_path


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        return ";".join(str(x) for x in v)
    return v


def write_records(records: list[VerdictRecord], out_dir: Path, stem: str, fmt: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        path = out_dir / f"{stem}.csv"
        cols = ["claim", "measured", "target", "tolerance", "sigma", "pass", "hard", "relation", "provenance"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in records:
            d = r.to_dict()
            w.writerow([_fmt(d[c]) for c in cols])
        path.write_text(buf.getvalue())
    else:
        path = out_dir / f"{stem}.jsonl"
        path.write_text("".join(_dumps(r.to_dict()) + "\n" for r in records))
    return path


# ---------------------------------------------------------------- helpers


def _rho(o: dict, key: str = "rho") -> DensityMatrix:
    try:
        return make_rho(o[key])
    except ValueError as exc:
        raise ConfigError(f"option '{key}': {exc}") from exc


def _sampler(kind: str, rho: DensityMatrix, seed: int) -> EnsembleSampler:
    if kind == "haar":
        return EnsembleSampler.haar(rho.dim, seed)
    if kind == "gaussian":
        return EnsembleSampler.gaussian(rho.dim, seed, rho)
    if kind in ("distortion", "purification"):
        return EnsembleSampler.scrooge(rho, seed, kind)
    raise ConfigError(f"unknown sampler {kind!r}")


def _partition(rho: DensityMatrix, regions: str | None, spec: str | None = None) -> Partition:
    if regions is None:
        if spec and spec.strip().startswith("product("):
            labels = []
            for i, sub in enumerate(split_spec(spec.strip()[len("product(") : -1])):
                labels += [chr(ord("A") + i)] * len(make_rho(sub).factor_dims)
            return Partition(rho.factor_dims, tuple(labels))
        raise ConfigError("a region string is required (e.g. --regions AAB)")
    regions = regions.replace(",", "").replace(" ", "")
    if len(regions) != len(rho.factor_dims):
        raise ConfigError(f"region string {regions!r} has {len(regions)} sites, rho has {len(rho.factor_dims)}")
    return Partition(rho.factor_dims, tuple(regions))


def _floats(v) -> list[float]:
    if isinstance(v, (list, tuple)):
        return [float(x) for x in v]
    return [float(x) for x in str(v).split(",") if x.strip()]


def _ints(v) -> list[int]:
    return [int(x) for x in _floats(v)]


# ---------------------------------------------------------------- experiments
#
# Each experiment takes the merged options and returns a Result.


def exp_sample(o: dict) -> Result:
    rho = _rho(o)
    s = _sampler(o["sampler"], rho, int(o["seed"]))
    n = int(o["n_samples"])
    batch = s.draw(0, n)
    rows = [
        {"index": i, "weight": float(w), "re": [float(x) for x in v.real], "im": [float(x) for x in v.imag]}
        for i, (v, w) in enumerate(zip(batch.states, batch.weights))
    ]
    Path(o["out_dir"]).mkdir(parents=True, exist_ok=True)
    (Path(o["out_dir"]) / "samples.jsonl").write_text("".join(_dumps(r) + "\n" for r in rows))
    w = batch.weights
    ess = float(w.sum() ** 2 / np.sum(w * w))
    return Result([verdict("sample-ess", ess, n, n, "effective sample size of the drawn batch (logged)", hard=False)])


def exp_moments(o: dict) -> Result:
    rho = _rho(o)
    k = int(o["k"])
    s = _sampler(o["sampler"], rho, int(o["seed"]))
    mc, appr = moments.full_moment_matrices(rho, s, k, int(o["n_samples"]), prefactor=True, workers=int(o["workers"]))
    dist = moments.trace_norm_distance(mc, appr)
    rel = moments.relative_error_psd(appr, mc)
    return Result(
        [
            verdict(f"moments-trace-distance-k{k}", dist, 0.0, math.inf, "trace distance of MC moments to the prefactored approximation (logged)", hard=False),
            verdict(f"moments-relative-psd-k{k}", rel, 0.0, math.inf, "operator relative error (logged)", hard=False),
        ]
    )


def exp_relerr(o: dict) -> Result:
    rho = _rho(o)
    k = int(o["k"])
    s = _sampler(o["sampler"], rho, int(o["seed"]))
    probes = moments.default_probes(rho.dim, int(o["seed"]))
    rep = moments.relative_error_probes(rho, s, k, probes, int(o["n_samples"]), workers=int(o["workers"]))
    rows = [dict(p) for p in rep.details]
    rec = verdict(
        f"relerr-k{k}",
        rep.epsilon_measured,
        rep.epsilon_bound,
        4 * rep.epsilon_sigma,
        "relative error at most c k^2 / sqrt(m), c = 11",
        relation="le",
        sigma=rep.epsilon_sigma,
        **rep.to_dict(),
    )
    return Result([rec], {"relerr_probes": rows})


def exp_subsys(o: dict) -> Result:
    rho = _rho(o)
    part = _partition(rho, o.get("regions"), o["rho"])
    k = int(o["k"])
    kept = [x.strip() for x in str(o["kept"]).split(",")]
    s = _sampler(o["sampler"], rho, int(o["seed"]))
    rep = moments.subsystem_moment_error(rho, s, k, part, kept, int(o["n_samples"]), int(o["workers"]))
    return Result(
        [
            verdict(
                f"subsystem-relerr-k{k}",
                rep.epsilon_measured,
                rep.epsilon_bound,
                4 * rep.epsilon_sigma,
                "subsystem relative error at most k^2 2^{-S*(B)}",
                relation="le",
                sigma=rep.epsilon_sigma,
            )
        ]
    )


def exp_entropies(o: dict) -> Result:
    rho = _rho(o)
    part = _partition(rho, o["regions"], o["rho"]) if o.get("regions") or o["rho"].startswith("product(") else None
    rep = entropies.entropy_report(rho, part)
    Path(o["out_dir"]).mkdir(parents=True, exist_ok=True)
    (Path(o["out_dir"]) / "entropies.json").write_text(rep.to_json() + "\n")
    lines = [f"S_inf {rep.S_inf:.6f}", *(f"S_{a} {v:.6f}" for a, v in rep.S_alpha.items()), f"Q {rep.Q_subentropy:.6f}"]
    lines += [f"S_hat({key}) {v:.6f}" for key, v in rep.S_hat.items()]
    lines += [f"S_star({b}) {v['value']:.6f}" for b, v in rep.S_star.items()]
    print("\n".join(lines))
    recs = [verdict("entropy-renyi-half-s2", rep.S_inf, rep.S_alpha["2.0"] / 2, 1e-9, "S_inf >= S_2 / 2", relation="ge")]
    for key, v in rep.S_hat.items():
        b = key.split("|")[0]
        recs.append(verdict(f"entropy-chain-{b}", v, rep.S_star[b]["value"], 1e-6, "hat S(B|A) <= S*(B)", relation="le"))
    return Result(recs)


def exp_pt(o: dict) -> Result:
    rho = _rho(o)
    k = int(o["k"])
    rng = np.random.default_rng(suite_mod.child_seed(int(o["seed"]), 4))
    support = np.flatnonzero(np.real(np.diag(rho.entries)) > 1e-12)
    count = min(int(o["strings"]), support.size)
    strings = np.sort(rng.choice(support, size=count, replace=False))
    s = _sampler(o["sampler"], rho, int(o["seed"]))
    rep = moments.relative_error_probes(
        rho, s, k, moments.ProbeSet(strings, None, f"{count} support strings"), int(o["n_samples"]), prefactor=False, workers=int(o["workers"])
    )
    delta = moments.relerr_scale(rho, k)
    rows = [dict(p) for p in rep.details]
    return Result(
        [
            verdict(
                f"pt-k{k}",
                rep.epsilon_measured,
                0.0,
                4 * rep.epsilon_sigma + 10 * delta,
                "rescaled Porter-Thomas: E p(x)^k = k! p_rho(x)^k",
                sigma=rep.epsilon_sigma,
            )
        ],
        {f"pt_k{k}": rows},
    )


def exp_wishart(o: dict) -> Result:
    rho = _rho(o)
    x, xp = _ints(o["pair"])
    a, b, c = _ints(o["orders"])
    s = _sampler(o["sampler"], rho, int(o["seed"]))
    mc = outputstats.wishart_joint_moment_mc(s, x, xp, a, b, c, int(o["n_samples"]), int(o["workers"]))
    closed = outputstats.wishart_joint_moment_closed(rho, x, xp, a, b, c)
    hard = o["sampler"] == "gaussian"
    return Result(
        [
            verdict(
                f"wishart-{a}{b}{c}",
                mc.value,
                closed,
                4 * mc.std_error,
                "joint moments of two output probabilities follow the 2x2 complex Wishart law",
                sigma=mc.std_error,
                hard=hard,
                r_abs=outputstats.coherence_r(rho, x, xp).magnitude,
            )
        ]
    )


def exp_tvd(o: dict) -> Result:
    rho = _rho(o)
    gammas = _floats(o["gammas"])
    s = _sampler(o["sampler"], rho, int(o["seed"]))
    ests = outputstats.mean_tvd_to_background(s, rho, int(o["n_samples"]), gammas, int(o["workers"]))
    rows = [{"gamma": g, "tvd": e.value, "stderr": e.std_error} for g, e in zip(gammas, ests)]
    recs = []
    if 0.0 in gammas:
        e0 = ests[gammas.index(0.0)]
        recs.append(verdict("tvd-far", e0.value, 1 / 3 - 0.05, 0.0, "noiseless Scrooge outputs are far from the background", relation="ge", sigma=e0.std_error))
    vals = [e.value for e in ests]
    if len(vals) > 1:
        step = float(np.max(np.diff(vals)))
        recs.append(verdict("tvd-noise-monotone", step, 0.0, 0.0, "noisy TVD decreases with noise strength (soft)", relation="le", hard=False))
    return Result(recs, {"tvd_vs_gamma": rows})


def exp_cmi(o: dict) -> Result:
    rho = _rho(o)
    part = _partition(rho, o.get("regions"), o["rho"])
    est, target = outputstats.avg_cmi_scrooge(rho, part, int(o["n_samples"]), int(o["seed"]), o["method"], workers=int(o["workers"]))
    return Result(
        [
            verdict("cmi-formula", est.value, target, 4 * est.std_error, "mean output CMI equals Q(rho_A) + Q(rho_C) - Q(rho_AC)", sigma=est.std_error),
            verdict(
                "cmi-quantized-0.61",
                est.value,
                0.61,
                0.05,
                "CMI of maximally mixed factors near 0.61 bits (soft outside the acceptance suite)",
                sigma=est.std_error,
                hard=False,
            ),
        ]
    )


def exp_noise(o: dict) -> Result:
    rho = _rho(o)
    s = _sampler(o["sampler"], rho, int(o["seed"]))
    est = outputstats.noise_sensitivity(s, int(o["n_samples"]), int(o["workers"]))
    pred = outputstats.sensitivity_prediction(rho)
    delta = moments.relerr_scale(rho, 2)
    return Result(
        [
            verdict(
                "noise-sensitivity",
                est.value,
                pred,
                4 * est.std_error + delta * pred,
                "bit-flip overlap of Scrooge outputs: sum_x p(x)p(x^i) + |<x|rho|x^i>|^2",
                sigma=est.std_error,
                hard=False,
            )
        ]
    )


def exp_rdist(o: dict) -> Result:
    rho = _rho(o)
    n = int(o["n_samples"])
    seed = int(o["seed"])
    r = rdist.sample_r(rho, n, seed)
    recs = []
    lam = rho.spectrum[::-1]
    m = int(np.sum(lam > 1e-12))
    if m < rho.dim and np.allclose(lam[:m], 1.0 / m, atol=1e-12):
        ks = rdist.BetaReference(m, rho.dim).ks_test(r * m / rho.dim)
        recs.append(verdict("rdist-ks-beta", ks["statistic"], 2 * ks["critical"], 0.0, "u = (m/d) r is Beta(m, d - m)", relation="le"))
    if math.floor(1.0 / rho.max_eig + 1e-9) >= 8:
        for row in rdist.moment_bounds_check(rho, n, seed + 1):
            recs.append(
                verdict(
                    f"rdist-bound-{row['kind']}-{row['order']:g}",
                    row["empirical"],
                    row["bound"],
                    3 * row["stderr"],
                    "raw, reciprocal and central moment bounds on r",
                    relation="le",
                    sigma=row["stderr"],
                )
            )
    tables = {"rdist_pdf": rdist.pdf_table(rho, r)} if rho.dim <= 12 else {}
    return Result(recs, tables)


def exp_bounds(o: dict) -> Result:
    inp = bounds.BoundInputs(float(o["s_inf"]), int(o["k"]), float(o["epsilon"]), float(o["eta"]), int(o["n"]))
    bits = bounds.bits_lower_bound(inp)
    recs = [
        verdict("bits-lower-bound", bits.value, 0.0, math.inf, "k (S_inf - log k) - log(1 - eps - 2 delta) bits (order of magnitude)", hard=False, vacuous=bits.vacuous),
        verdict("temporal-time-bound", bounds.temporal_time_bound(inp), 0.0, math.inf, "2^{kS} (1 - eps/2)^2 / (k! n) (order of magnitude)", hard=False),
    ]
    if inp.k * inp.s_inf > 1:
        cb = bounds.complexity_bound(inp)
        recs.append(verdict("complexity-bound", cb["refined"], 0.0, math.inf, "[k (S - log k) - log eta] / log(k S) gates", hard=False, basic=cb["basic"]))
    if o.get("rho"):
        rho = _rho(o)
        res = bounds.cardinality_check(rho, inp.k, int(o["r_states"]), int(o["seed"]))
        recs.append(
            verdict("cardinality-bound", res["required"] - res["r_states"], 0.0, 1e-6, "r >= (1 - eps/2) 2^{k S_inf} / k!", relation="le", epsilon=res["epsilon"])
        )
    return Result(recs)


def exp_temporal(o: dict) -> Result:
    kind, size, hseed = str(o["hamiltonian"]).split(":")
    h = make_hamiltonian(kind, int(size), int(hseed), target_norm=1.0)
    psi0 = np.zeros(h.dim, dtype=complex)
    psi0[int(o["psi0_index"])] = 1.0
    times = _floats(o["times"])
    rows = bounds.temporal_additive_error_sweep(h, psi0, int(o["k"]), times, int(o["n_samples"]), int(o["seed"]))
    recs = []
    if len(rows) >= 2:
        first, last = rows[0], rows[-1]
        recs.append(
            verdict(
                "temporal-error-trend",
                last["additive_error"],
                first["additive_error"],
                0.0,
                "temporal ensembles approach their approximate moments at long times (soft)",
                relation="le",
                hard=False,
            )
        )
    return Result(recs, {"temporal_sweep": rows})


# ---------------------------------------------------------------- command table

# name -> (function, {option: (default, type, help)})
COMMANDS: dict[str, tuple[Callable[[dict], Result], dict]] = {
    "sample": (exp_sample, {"rho": ("mixed:4", str, "rho spec"), "sampler": ("distortion", str, "haar|distortion|purification|gaussian"), "n_samples": (16, int, "states to draw")}),
    "moments": (exp_moments, {"rho": ("mixed:4", str, "rho spec"), "k": (2, int, "moment order"), "sampler": ("distortion", str, "sampler kind"), "n_samples": (20000, int, "samples")}),
    "relerr": (exp_relerr, {"rho": ("flat:64:16", str, "rho spec"), "k": (2, int, "moment order"), "sampler": ("distortion", str, "sampler kind"), "n_samples": (100000, int, "samples")}),
    "subsys": (
        exp_subsys,
        {
            "rho": ("random:16:16:1", str, "rho spec"),
            "regions": ("AAAB", str, "region label per site"),
            "kept": ("A,A", str, "kept region per copy, comma separated"),
            "k": (2, int, "moment order"),
            "sampler": ("distortion", str, "sampler kind"),
            "n_samples": (100000, int, "samples"),
        },
    ),
    "entropies": (exp_entropies, {"rho": ("random:8:8:1", str, "rho spec"), "regions": (None, str, "region label per site")}),
    "pt": (
        exp_pt,
        {"rho": ("flat:256:64", str, "rho spec"), "k": (2, int, "moment order"), "strings": (16, int, "bitstrings"), "sampler": ("distortion", str, "sampler kind"), "n_samples": (100000, int, "samples")},
    ),
    "wishart": (
        exp_wishart,
        {
            "rho": ("random:8:8:1", str, "rho spec"),
            "pair": ("0,1", str, "bitstring pair x,x'"),
            "orders": ("0,1,1", str, "a,b,c"),
            "sampler": ("gaussian", str, "sampler kind"),
            "n_samples": (200000, int, "samples"),
        },
    ),
    "tvd": (
        exp_tvd,
        {"rho": ("flat:256:64", str, "rho spec"), "gammas": ("0,0.05,0.1,0.2,0.4", str, "noise strengths"), "sampler": ("purification", str, "sampler kind"), "n_samples": (500, int, "samples")},
    ),
    "cmi": (
        exp_cmi,
        {
            "rho": ("product(mixed:4,mixed:4,mixed:4)", str, "product rho spec"),
            "regions": (None, str, "A/B/C label per site (default: one region per product factor)"),
            "method": ("distortion", str, "distortion|purification"),
            "n_samples": (2000, int, "samples"),
        },
    ),
    "noise": (exp_noise, {"rho": ("random:16:16:1", str, "rho spec"), "sampler": ("distortion", str, "sampler kind"), "n_samples": (20000, int, "samples")}),
    "rdist": (exp_rdist, {"rho": ("flat:64:8", str, "rho spec"), "n_samples": (100000, int, "samples")}),
    "bounds": (
        exp_bounds,
        {
            "s_inf": (4.0, float, "min-entropy in bits"),
            "k": (1, int, "moment order"),
            "epsilon": (0.0, float, "additive error"),
            "eta": (1.0, float, "failure probability"),
            "n": (4, int, "qubits"),
            "rho": (None, str, "rho spec for the cardinality check"),
            "r_states": (1, int, "discrete ensemble size"),
        },
    ),
    "temporal": (
        exp_temporal,
        {
            "hamiltonian": ("gue:16:1", str, "kind:size:seed"),
            "psi0_index": (0, int, "basis index of the initial state"),
            "k": (2, int, "moment order"),
            "times": ("0,1,10,10000", str, "evolution windows T"),
            "n_samples": (20000, int, "samples"),
        },
    ),
}

SUITE_OPTS = {"level": ("desk", str, "desk|smoke"), "only": (None, str, "comma-separated criterion ids")}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML file with option values")
    common.add_argument("--seed", type=int, help="master seed (required here or in the config)")
    common.add_argument("--workers", type=int, help="worker threads (default 1)")
    common.add_argument("--out-dir", dest="out_dir", help="output directory (default results)")
    common.add_argument("--fail-fast", dest="fail_fast", action="store_true", help="stop at the first failure")
    common.add_argument("--format", choices=("json", "csv"), help="record format (default json)")
    p = argparse.ArgumentParser(prog="scrooge", description="Scrooge ensemble verifiers")
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, opts) in list(COMMANDS.items()) + [("suite", (None, SUITE_OPTS))]:
        sp = sub.add_parser(name, parents=[common])
        for key, (_, typ, hlp) in opts.items():
            sp.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, help=hlp)
    return p


# ---------------------------------------------------------------- runner


def _print_records(records: list[VerdictRecord]) -> None:
    for r in records:
        tag = "PASS" if r.passed else "FAIL"
        kind = "" if r.hard else " (soft)"
        print(f"{tag}{kind} {r.claim}: measured={r.measured:.6g} target={r.target:.6g} tol={r.tolerance:.3g}")


def _finish(command: str, opts: dict, results: list[tuple[str, Result | None, str | None]]) -> int:
    out = Path(opts["out_dir"])
    records = [r for _, res, _ in results if res for r in res.records]
    write_records(records, out, command, opts["format"])
    for _, res, _ in results:
        if res:
            for name, rows in res.tables.items():
                emit_plot_data(name, rows, out)
    errors = {name: err for name, _, err in results if err}
    hard_fail = [r.claim for r in records if r.hard and not r.passed]
    summary = {
        "command": command,
        "options": {k: v for k, v in sorted(opts.items()) if k != "out_dir"},
        "n_records": len(records),
        "hard_failures": hard_fail,
        "soft_failures": [r.claim for r in records if not r.hard and not r.passed],
        "errors": errors,
        "pass": not hard_fail and not errors,
    }
    (out / f"{command}_summary.json").write_text(_dumps(summary) + "\n")
    _print_records(records)
    if errors:
        for name, err in errors.items():
            print(f"ERROR {name}: {err.splitlines()[-1] if err else ''}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_FAIL if hard_fail else EXIT_OK


def run_suite(opts: dict) -> list[tuple[str, Result | None, str | None]]:
    level = opts["level"]
    if level not in suite_mod.LEVELS:
        raise ConfigError(f"level must be one of {suite_mod.LEVELS}")
    names = list(suite_mod.CRITERIA)
    if opts.get("only"):
        want = [x.strip() for x in str(opts["only"]).split(",")]
        bad = [w for w in want if w not in suite_mod.CRITERIA]
        if bad:
            raise ConfigError(f"unknown criteria {bad}; choose from {names}")
        names = want
    results = []
    for name in names:
        t0 = time.perf_counter()
        try:
            res = suite_mod.CRITERIA[name](int(opts["seed"]), level, int(opts["workers"]))
            results.append((name, res, None))
        except Exception:
            results.append((name, None, traceback.format_exc()))
        log.info("%s finished in %.1f s", name, time.perf_counter() - t0)
        res, err = results[-1][1], results[-1][2]
        if opts["fail_fast"] and (err or any(r.hard and not r.passed for r in res.records)):
            break
    return results


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if args.command == "suite":
            opts = merge_options(args, SUITE_OPTS, {k: v[0] for k, v in SUITE_OPTS.items()})
        else:
            spec = COMMANDS[args.command][1]
            opts = merge_options(args, spec, {k: v[0] for k, v in spec.items()})
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "suite":
            results = run_suite(opts)
        else:
            fn = COMMANDS[args.command][0]
            try:
                results = [(args.command, fn(opts), None)]
            except ConfigError:
                raise
            except Exception:
                results = [(args.command, None, traceback.format_exc())]
        return _finish(args.command, opts, results)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
