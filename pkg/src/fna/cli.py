"""Command-line entry point: ``fna <command> [--config F] [--seed S] [--out D]``.

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import (
    GRAPH_THRESHOLD,
    MIXTURE_EPSILON,
    circle_spectrum,
    cluster_connectivity,
    mean_path_vs_length,
    mixture_attention,
    mixture_diffusion_map,
)
from .graph import build_graph
from .io import (
    ConfigError,
    atomic_write,
    config_hash,
    envelope_meta,
    load_config,
    parse_assignment,
    write_csv,
    write_json,
)
from .levy import StableParams, characteristic_function, empirical_cf, sample_sas
from .model import EncoderSpec, TrainConfig, ablation_sweep, make_synthetic_task, sweep, train
from .model.checkpoint import dump_checkpoint
from .model.training import summarize

log = logging.getLogger("fna")

TASK_KEYS = {"task": "long_range_pair", "n": 8, "vocab": 8, "n_samples": 2000, "task_seed": 0}
MODEL_KEYS = {
    "d": 8, "depth": 1, "heads": 1, "hidden": 64, "variant": "fna", "alpha": 1.2,
    "kappa": None, "projection": "tied",
}
OPT_KEYS = {
    "epochs": 25, "batch_size": 16, "lr": 3e-3, "decay_epoch": 19, "decay_factor": 5.0,
    "dtype": "float32",
}

DEFAULTS = {
    "spectrum": {"n": 500, "alpha": [1.2, 2.0], "epsilon": 1e-4, "fit_lo": 5, "fit_hi": 50},
    "connectivity": {
        "n": 18, "alpha": [1.2, 2.0], "seed": 0, "theta": GRAPH_THRESHOLD,
        "kappa": math.sqrt(MIXTURE_EPSILON), "diffmap_kappa": None, "tau": 1, "m": 2,
    },
    "paths": {"lengths": [50, 100, 200], "seeds": 5, "d": 8, "sigma": 2.0,
              "theta": GRAPH_THRESHOLD},
    "train": {**TASK_KEYS, **MODEL_KEYS, **OPT_KEYS, "seed": 0},
    "sweep": {
        **TASK_KEYS, **MODEL_KEYS, **OPT_KEYS, "dims": [8], "depths": [1],
        "variants": ["fna:1.2", "dot_product:2"], "projections": ["tied"], "seeds": 5,
        "workers": 1,
    },
    "ablate": {
        **TASK_KEYS, **MODEL_KEYS, **OPT_KEYS, "variants": ["fna:1.2", "dot_product:2"],
        "seeds": 5, "p_grid": [round(0.1 * i, 1) for i in range(11)], "mode": "nodes",
        "ablation_seed": 0,
    },
    "sample-levy": {"alpha": 1.2, "sigma": 1.0, "n": 10000, "seed": 0,
                    "u": [0.0, 0.25, 0.5, 1.0, 2.0, 4.0]},
}

LIST_KEYS = {"lengths", "alpha", "dims", "depths", "variants", "projections", "p_grid", "u"}


def _coerce(key, value, default):
    if key in LIST_KEYS:
        if not isinstance(value, list):
            value = [value]
        if key == "alpha" and not isinstance(default, list):
            if len(value) != 1:
                raise ConfigError(f"{key} takes a single value")
            return float(value[0])
        return value
    if isinstance(value, list):
        raise ConfigError(f"{key} takes a single value, got a list")
    if value is None:
        return value
    if default is None:
        if isinstance(value, (str, bool)):
            raise ConfigError(f"{key} must be a number or none, got {value!r}")
        return float(value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not float(value).is_integer():
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, str):
            raise ConfigError(f"{key} must be a number, got {value!r}")
        return float(value)
    return str(value)


def resolve_config(command, file_cfg=None, overrides=(), seed=None) -> dict:
    defaults = DEFAULTS[command]
    cfg = dict(defaults)
    recorded = []
    layers = [(file_cfg or {}).items()]
    over = []
    for item in overrides:
        key, value = parse_assignment(item)
        over.append((key, value))
        recorded.append(f"{key}={value}")
    layers.append(over)
    if seed is not None:
        layers.append([("seed", seed)])
    for layer in layers:
        for key, value in layer:
            if key not in defaults:
                raise ConfigError(f"unknown key {key!r} for command {command!r}")
            try:
                cfg[key] = _coerce(key, value, defaults[key])
            except (TypeError, ValueError) as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError(f"bad value for {key}: {value!r}") from exc
    cfg["command"] = command
    cfg["overrides"] = recorded
    return cfg


def _variant_pairs(items):
    out = []
    for item in items:
        name, _, alpha = str(item).partition(":")
        if name not in ("fna", "dot_product"):
            raise ConfigError(f"variant must be fna:<alpha> or dot_product, got {item!r}")
        try:
            out.append((name, float(alpha) if alpha else 2.0))
        except ValueError as exc:
            raise ConfigError(f"bad alpha in variant {item!r}") from exc
    return out


def _seed_list(value):
    return list(range(value)) if isinstance(value, int) else [int(s) for s in value]


def _model_parts(cfg):
    task = make_synthetic_task(cfg["task"], cfg["n"], cfg["vocab"], seed=cfg["task_seed"],
                               n_samples=cfg["n_samples"])
    spec = EncoderSpec(
        d=cfg["d"], depth=cfg["depth"], heads=cfg["heads"], hidden=cfg["hidden"],
        vocab_size=cfg["vocab"], max_len=cfg["n"], n_classes=task.n_classes,
        variant=cfg["variant"], alpha=cfg["alpha"], kappa=cfg["kappa"],
        projection=cfg["projection"],
    )
    train_cfg = TrainConfig(
        epochs=cfg["epochs"], batch_size=cfg["batch_size"], lr=cfg["lr"],
        decay_epoch=cfg["decay_epoch"], decay_factor=cfg["decay_factor"],
        seed=cfg.get("seed", 0), dtype=cfg["dtype"],
    )
    np.dtype(train_cfg.dtype)
    return task, spec, train_cfg


def _check_alpha(values):
    for a in values:
        if not 1.0 <= a <= 2.0:
            raise ConfigError(f"alpha must lie in [1, 2], got {a}")


def validate(cfg):
    """Build every object the command needs; any failure is a config error."""
    cmd = cfg["command"]
    try:
        if cmd in ("spectrum", "connectivity"):
            _check_alpha(cfg["alpha"])
            if cfg["n"] < 3:
                raise ConfigError("n must be at least 3")
        if cmd == "spectrum":
            if not cfg["epsilon"] > 0:
                raise ConfigError("epsilon must be positive")
            if not 1 <= cfg["fit_lo"] < cfg["fit_hi"] < cfg["n"]:
                raise ConfigError("need 1 <= fit_lo < fit_hi < n")
            return None
        if cmd == "connectivity":
            if not 1 <= cfg["m"] <= cfg["n"] - 1 or cfg["tau"] < 0:
                raise ConfigError("need 1 <= m <= n - 1 and tau >= 0")
            for key in ("kappa", "diffmap_kappa"):
                if cfg[key] is not None and not cfg[key] > 0:
                    raise ConfigError(f"{key} must be positive")
            return None
        if cmd == "paths":
            if any(int(n) < 2 for n in cfg["lengths"]) or cfg["d"] < 1 or not cfg["sigma"] > 0:
                raise ConfigError("need lengths >= 2, d >= 1 and sigma > 0")
            if not _seed_list(cfg["seeds"]):
                raise ConfigError("seeds must be a positive count or a list")
            return None
        if cmd == "sample-levy":
            StableParams(cfg["alpha"], sigma=cfg["sigma"])
            if cfg["n"] < 1:
                raise ConfigError("n must be positive")
            np.asarray(cfg["u"], dtype=float)
            return None
        parts = _model_parts(cfg)
        if cmd in ("sweep", "ablate"):
            variants = _variant_pairs(cfg["variants"])
            _check_alpha([a for _, a in variants])
            seeds = _seed_list(cfg["seeds"])
            if not seeds:
                raise ConfigError("seeds must be a positive count or a list")
            if cmd == "sweep":
                for d in cfg["dims"]:
                    replace(parts[1], d=int(d))
                for proj in cfg["projections"]:
                    replace(parts[1], projection=str(proj))
                for L in cfg["depths"]:
                    replace(parts[1], depth=int(L))
            else:
                ps = [float(p) for p in cfg["p_grid"]]
                if any(not 0 <= p <= 1 for p in ps) or cfg["mode"] not in ("edges", "nodes"):
                    raise ConfigError("p_grid must lie in [0, 1] and mode in {edges, nodes}")
            return parts + (variants, seeds)
        return parts
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def cmd_spectrum(cfg, out, meta):
    fit = {"config_hash": meta["config_hash"], "n": cfg["n"], "epsilon": cfg["epsilon"],
           "window": [cfg["fit_lo"], cfg["fit_hi"]], "slopes": {}}
    for a in cfg["alpha"]:
        t0 = time.perf_counter()
        spec, slope, r2 = circle_spectrum(cfg["n"], a, cfg["epsilon"], (cfg["fit_lo"], cfg["fit_hi"]))
        eta = np.sort(spec.eigenvalues)[::-1]
        rows = [{"index": j, "eta": eta[j],
                 "lambda": spec.lambdas[j] if j < len(spec.lambdas) else math.nan}
                for j in range(len(eta))]
        write_csv(out / f"spectrum_alpha{a:g}.csv", ["index", "eta", "lambda"], rows,
                  {**meta, "duration_s": f"{time.perf_counter() - t0:.3f}"})
        fit["slopes"][f"{a:g}"] = {"slope": slope, "r2": r2, "dropped": spec.dropped}
        print(f"alpha={a:g} slope={slope:.4f} r2={r2:.5f}")
    write_json(out / "fit.json", fit)


def cmd_connectivity(cfg, out, meta):
    summary = []
    for a in cfg["alpha"]:
        X, comp, A = mixture_attention(a, cfg["n"], cfg["seed"], cfg["kappa"])
        G = build_graph(A, cfg["theta"])
        rows = [{"src": s, "dst": t, "weight": w, "length": ln,
                 "inter_cluster": bool(comp[s] != comp[t])} for s, t, w, ln in G.edges()]
        write_csv(out / f"edges_alpha{a:g}.csv",
                  ["src", "dst", "weight", "length", "inter_cluster"], rows, meta)
        emb, _ = mixture_diffusion_map(a, cfg["n"], cfg["seed"], cfg["tau"], cfg["m"],
                                       cfg["diffmap_kappa"])
        coord_cols = [f"psi{k + 1}" for k in range(emb.m)]
        rows = []
        for i in range(cfg["n"]):
            r = {"index": i, "component": int(comp[i]), "x": X[i, 0], "y": X[i, 1]}
            r.update({c: emb.coordinates[i, k] for k, c in enumerate(coord_cols)})
            rows.append(r)
        write_csv(out / f"diffmap_alpha{a:g}.csv",
                  ["index", "component", "x", "y"] + coord_cols, rows, meta)
        stats = cluster_connectivity(a, cfg["n"], cfg["seed"], cfg["theta"], cfg["kappa"])
        summary.append(stats)
        print(f"alpha={a:g} edges={stats['edges']} inter={stats['inter_edges']} "
              f"gap={stats['spectral_gap']:.4f}")
    write_csv(out / "connectivity.csv",
              ["alpha", "seed", "edges", "inter_edges", "inter_mass", "spectral_gap"],
              summary, meta)


def cmd_paths(cfg, out, meta):
    table, per_seed = mean_path_vs_length(
        [int(n) for n in cfg["lengths"]], _seed_list(cfg["seeds"]), d=cfg["d"],
        sigma=cfg["sigma"], theta=cfg["theta"])
    write_csv(out / "paths.csv",
              ["n", "seed", "variant", "mean_hops", "max_hops", "unreachable"], per_seed, meta)
    write_csv(out / "paths_summary.csv", ["n", "variant", "mean_hops", "std_hops", "seeds"],
              table, meta)
    for r in table:
        print(f"n={r['n']} {r['variant']} mean hops {r['mean_hops']:.4f}")


HISTORY_COLS = ["epoch", "split", "loss", "accuracy", "lr"]


def cmd_train(cfg, out, meta, parts):
    task, spec, train_cfg = parts
    t0 = time.perf_counter()
    res = train(spec, task, train_cfg)
    write_csv(out / "metrics.csv", HISTORY_COLS, res.history,
              {**meta, "duration_s": f"{time.perf_counter() - t0:.3f}"})
    atomic_write(out / "checkpoint.json", dump_checkpoint(spec, res.params, meta["config_hash"]))
    print(f"{spec.label} test accuracy {res.test_accuracy:.4f}")


SWEEP_COLS = ["variant", "projection", "d", "depth", "seed", "test_accuracy", "spectral_gap"]


def cmd_sweep(cfg, out, meta, parts):
    task, spec, train_cfg, variants, seeds = parts
    t0 = time.perf_counter()
    rows = sweep(spec, task, train_cfg, [int(d) for d in cfg["dims"]],
                 [int(L) for L in cfg["depths"]], variants,
                 projections=[str(p) for p in cfg["projections"]], seeds=seeds,
                 workers=cfg["workers"])
    timing = {**meta, "duration_s": f"{time.perf_counter() - t0:.3f}"}
    write_csv(out / "sweep.csv", SWEEP_COLS, rows, timing)
    write_csv(out / "sweep_summary.csv",
              ["variant", "projection", "d", "depth", "mean", "std", "count"],
              summarize(rows), meta)
    print(f"{len(rows)} cells trained")


def cmd_ablate(cfg, out, meta, parts):
    task, spec, train_cfg, variants, seeds = parts
    rows = []
    for variant, alpha in variants:
        vspec = replace(spec, variant=variant, alpha=alpha)
        for seed in seeds:
            res = train(vspec, task, replace(train_cfg, seed=seed))
            for r in ablation_sweep(res, task, [float(p) for p in cfg["p_grid"]], cfg["mode"],
                                    cfg["ablation_seed"]):
                rows.append({"variant": vspec.label, "seed": seed, **r})
            log.info("%s seed %d done", vspec.label, seed)
    write_csv(out / "ablation.csv", ["variant", "seed", "p", "mode", "loss", "accuracy"],
              rows, meta)
    for r in rows:
        if r["p"] == 1.0:
            print(f"{r['variant']} seed={r['seed']} accuracy@p=1 {r['accuracy']:.4f}")


def cmd_sample_levy(cfg, out, meta):
    x = sample_sas(cfg["alpha"], cfg["sigma"], cfg["n"], seed=cfg["seed"])
    write_csv(out / "samples.csv", ["index", "value"],
              [{"index": i, "value": v} for i, v in enumerate(x)], meta)
    u = np.asarray(cfg["u"], dtype=float)
    emp = empirical_cf(x, u)
    ref = characteristic_function(u, StableParams(cfg["alpha"], sigma=cfg["sigma"]))
    ref = np.atleast_1d(ref)
    rows = [{"u": u[k], "empirical_re": emp[k].real, "empirical_im": emp[k].imag,
             "theory_re": ref[k].real, "theory_im": ref[k].imag,
             "abs_error": abs(emp[k] - ref[k])} for k in range(len(u))]
    write_csv(out / "cf.csv", list(rows[0]), rows, meta)
    print(f"max |cf error| {max(r['abs_error'] for r in rows):.4g}")


COMMANDS = {
    "spectrum": cmd_spectrum,
    "connectivity": cmd_connectivity,
    "paths": cmd_paths,
    "train": cmd_train,
    "sweep": cmd_sweep,
    "ablate": cmd_ablate,
    "sample-levy": cmd_sample_levy,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value file (or a flat JSON object)")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--override", action="append", default=[], metavar="K=V",
                        help="set one config key; repeatable and recorded")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="fna", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fna {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=f"run the {name} experiment")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.seed is not None and args.seed < 0:
        print("error: seed must be nonnegative", file=sys.stderr)
        return 2
    try:
        file_cfg = load_config(args.config) if args.config else {}
        cfg = resolve_config(args.command, file_cfg, args.override, args.seed)
        parts = validate(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out = Path(args.out)
    meta = envelope_meta(config_hash(cfg), command=args.command)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "config.json", {**cfg, "config_hash": meta["config_hash"]})
        handler = COMMANDS[args.command]
        if parts is None:
            handler(cfg, out, meta)
        else:
            handler(cfg, out, meta, parts)
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
