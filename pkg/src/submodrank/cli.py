"""Command-line entry point: ``submodrank <command> [--config FILE] [--section.key VALUE ...]``.

Exit codes: 0 success, 1 input error, 2 usage error, 3 property-check failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from pathlib import Path

import numpy as np
import tomli

from . import errors
from .curvature import certify, curvature_sweep, sweep_to_csv
from .data import (
    FactorModel,
    RatingsDataset,
    factorize_wnmf,
    load_ratings,
    split_holdout,
    synthesize_ratings,
    write_movielens,
)
from .experiment import (
    SweepConfig,
    run_split,
    run_sweep,
    sweep_rows_to_csv,
    user_context,
)
from .greedy import greedy_maximize
from .instances import MODULAR_FAMILIES, MONOTONE_FAMILIES, guarantee_suite

logger = logging.getLogger("submodrank")

SCHEMA = 1
EXIT_INPUT, EXIT_USAGE, EXIT_PROPERTY = 1, 2, 3

DEFAULTS = {
    "data": {"path": "", "format": "movielens-dat"},
    "split": {"fraction": 0.05, "n_splits": 5, "seed": 0},
    "wnmf": {"rank": 32, "reg": 0.1, "unobserved_weight": 0.05, "iters": 200, "seed": 0},
    "objective": {
        "algorithm": "interest-coverage",
        "lambda": 0.5,
        "lambda_grid": [0.0, 0.25, 0.5, 0.75, 1.0],
    },
    "rerank": {
        "k": 10,
        "k_grid": [5, 10, 20],
        "pool_size": 100,
        "graph_neighbors": 10,
        "n_users": 200,
        "user_seed": 0,
    },
    "output": {"dir": "out"},
}


class UsageError(Exception):
    pass


def _parse_value(text: str, default):
    if isinstance(default, bool):
        return text.lower() in ("1", "true", "yes")
    if isinstance(default, list):
        kind = type(default[0]) if default else float
        return [kind(x) for x in text.split(",") if x.strip()]
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


def load_config(path=None, overrides=None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path:
        with open(path, "rb") as fh:
            user = tomli.load(fh)
        for section, values in user.items():
            if section not in cfg or not isinstance(values, dict):
                raise UsageError(f"unknown config section [{section}]")
            for key, value in values.items():
                if key not in cfg[section]:
                    raise UsageError(f"unknown config key {section}.{key}")
                cfg[section][key] = value
    for dotted, text in (overrides or {}).items():
        section, key = dotted.split(".", 1)
        cfg[section][key] = _parse_value(text, DEFAULTS[section][key])
    return cfg


def sweep_config(cfg: dict) -> SweepConfig:
    r = cfg["rerank"]
    return SweepConfig(
        fraction=float(cfg["split"]["fraction"]),
        n_splits=int(cfg["split"]["n_splits"]),
        split_seed=int(cfg["split"]["seed"]),
        rank=int(cfg["wnmf"]["rank"]),
        reg=float(cfg["wnmf"]["reg"]),
        unobserved_weight=float(cfg["wnmf"]["unobserved_weight"]),
        iters=int(cfg["wnmf"]["iters"]),
        wnmf_seed=int(cfg["wnmf"]["seed"]),
        algorithm=cfg["objective"]["algorithm"],
        lambda_grid=tuple(float(x) for x in cfg["objective"]["lambda_grid"]),
        k_grid=tuple(int(x) for x in r["k_grid"]),
        pool_size=int(r["pool_size"]) if r["pool_size"] else None,
        graph_neighbors=int(r["graph_neighbors"]),
        n_users=int(r["n_users"]),
        user_seed=int(r["user_seed"]),
    )


# --------------------------------------------------------------------------
# dataset / model plumbing
# --------------------------------------------------------------------------


def _out(cfg) -> Path:
    d = Path(cfg["output"]["dir"])
    d.mkdir(parents=True, exist_ok=True)
    return d


def save_dataset(ds: RatingsDataset, path: Path) -> None:
    np.savez(
        path,
        users=ds.users,
        items=ds.items,
        ratings=ds.ratings,
        user_labels=np.array(ds.user_labels),
        item_labels=np.array(ds.item_labels),
        duplicates_dropped=np.array(ds.duplicates_dropped),
    )


def load_dataset(path: Path) -> RatingsDataset:
    with np.load(path, allow_pickle=False) as z:
        ul, il = tuple(z["user_labels"].tolist()), tuple(z["item_labels"].tolist())
        return RatingsDataset(
            z["users"], z["items"], z["ratings"], len(ul), len(il), ul, il, int(z["duplicates_dropped"])
        )


def dataset(cfg) -> RatingsDataset:
    cache = Path(cfg["output"]["dir"]) / "dataset.npz"
    if cache.exists():
        return load_dataset(cache)
    if not cfg["data"]["path"]:
        raise UsageError("no dataset: set data.path or run `ingest` first")
    return load_ratings(cfg["data"]["path"], cfg["data"]["format"])


def _fit(cfg, train) -> FactorModel:
    w = cfg["wnmf"]
    return factorize_wnmf(
        train, int(w["rank"]), float(w["reg"]), float(w["unobserved_weight"]), int(w["iters"]), int(w["seed"])
    )


def model_for(cfg, ds) -> FactorModel:
    d = Path(cfg["output"]["dir"]) / "model"
    if (d / "model.json").exists():
        return FactorModel.load(d)
    return _fit(cfg, ds)


def _emit(obj: dict, path: Path = None) -> None:
    text = json.dumps(dict(schema=SCHEMA, **obj), indent=2, sort_keys=True) + "\n"
    if path is not None:
        path.write_text(text)
    sys.stdout.write(text)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_ingest(cfg, args) -> int:
    if not cfg["data"]["path"]:
        raise UsageError("ingest needs data.path")
    ds = load_ratings(cfg["data"]["path"], cfg["data"]["format"])
    out = _out(cfg)
    save_dataset(ds, out / "dataset.npz")
    summary = {
        "n_users": ds.n_users,
        "n_items": ds.n_items,
        "n_ratings": len(ds),
        "duplicates_dropped": ds.duplicates_dropped,
    }
    _emit(summary, out / "ingest.json")
    return 0


def cmd_synth(cfg, args) -> int:
    ds = synthesize_ratings(args.users, args.items, args.ratings, seed=args.seed)
    target = Path(args.path or cfg["data"]["path"] or _out(cfg) / "ratings.dat")
    target.parent.mkdir(parents=True, exist_ok=True)
    write_movielens(ds, target)
    _emit({"path": str(target), "n_users": ds.n_users, "n_items": ds.n_items, "n_ratings": len(ds)})
    return 0


def cmd_factorize(cfg, args) -> int:
    ds = dataset(cfg)
    model = _fit(cfg, ds)
    d = _out(cfg) / "model"
    model.save(d)
    _emit({"model_dir": str(d), "rank": model.rank, "final_loss": model.loss_history[-1]})
    return 0


def _user_ctx(cfg, args):
    ds = dataset(cfg)
    user = ds.user_index(args.user)
    model = model_for(cfg, ds)
    r = cfg["rerank"]
    ctx = user_context(model, ds, user, int(r["pool_size"]) or None, int(r["graph_neighbors"]))
    return ds, ctx


def cmd_rerank(cfg, args) -> int:
    ds, ctx = _user_ctx(cfg, args)
    algo, lam = cfg["objective"]["algorithm"], float(cfg["objective"]["lambda"])
    k = int(args.k if args.k is not None else cfg["rerank"]["k"])
    obj = ctx.objective(algo, lam)
    trace = greedy_maximize(obj, None, k)
    cert = certify(obj, trace, check_monotone=False)
    picks = [
        {
            "item": int(ctx.pool[i]),
            "label": ds.item_labels[int(ctx.pool[i])],
            "gain": g,
            "value": v,
        }
        for i, g, v in zip(trace.selected, trace.gains, trace.values)
    ]
    _emit(
        {
            "user": ds.user_labels[ctx.user],
            "algorithm": algo,
            "lambda": lam,
            "k": k,
            "selected": picks,
            **cert.to_dict(),
        }
    )
    return 0


def cmd_curvature(cfg, args) -> int:
    _, ctx = _user_ctx(cfg, args)
    algo = cfg["objective"]["algorithm"]
    rows = curvature_sweep(lambda lam: ctx.objective(algo, lam), cfg["objective"]["lambda_grid"], check_monotone=False)
    text = sweep_to_csv(rows)
    (_out(cfg) / "curvature.csv").write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_sweep(cfg, args) -> int:
    rows = run_sweep(dataset(cfg), sweep_config(cfg))
    text = sweep_rows_to_csv(rows)
    (_out(cfg) / "sweep.csv").write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_evaluate(cfg, args) -> int:
    sc = sweep_config(cfg)
    lam, k = float(cfg["objective"]["lambda"]), int(cfg["rerank"]["k"])
    sc.lambda_grid, sc.k_grid = (lam,), (k,)
    split = split_holdout(dataset(cfg), sc.fraction, 1, sc.split_seed)[0]
    (row,) = run_split(0, split, sc)
    _emit(
        {
            "algorithm": sc.algorithm,
            "lambda": lam,
            "k": k,
            "alpha": row.alpha,
            "dcg": row.dcg,
            "ss": row.ss,
            "fd": row.fd,
            "reason": row.reason,
        },
        _out(cfg) / "evaluate.json",
    )
    return 0


def cmd_oracle_check(cfg, args) -> int:
    families = MODULAR_FAMILIES if args.modular_only else MONOTONE_FAMILIES
    results, rejected = guarantee_suite(args.n, args.k, args.trials, args.seed, families)
    failures = 0
    for i, r in enumerate(results):
        ok = r.passed and r.classical_passed
        failures += not ok
        print(
            f"{i:4d} {r.family:<20s} alpha={r.alpha:.6f} bound={r.bound:.6f} "
            f"ratio={r.ratio:.6f} {'PASS' if ok else 'FAIL'}"
        )
    worst = min(results, key=lambda r: r.ratio - r.bound)
    print(
        f"instances={len(results)} rejected={rejected} failures={failures} "
        f"min_ratio={min(r.ratio for r in results):.6f} tightest_margin={worst.ratio - worst.bound:.6f}"
    )
    return 0 if failures == 0 else EXIT_PROPERTY


COMMANDS = {
    "ingest": cmd_ingest,
    "synth": cmd_synth,
    "factorize": cmd_factorize,
    "rerank": cmd_rerank,
    "curvature": cmd_curvature,
    "sweep": cmd_sweep,
    "evaluate": cmd_evaluate,
    "oracle-check": cmd_oracle_check,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file")
    common.add_argument("-v", "--verbose", action="store_true")
    for section, values in DEFAULTS.items():
        for key in values:
            common.add_argument(f"--{section}.{key}", dest=f"set:{section}.{key}", metavar="VALUE")

    parser = argparse.ArgumentParser(prog="submodrank", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name in ("rerank", "curvature"):
            p.add_argument("--user", required=True, help="user label as it appears in the data")
        if name == "rerank":
            p.add_argument("--k", type=int)
        if name == "synth":
            p.add_argument("--path")
            p.add_argument("--users", type=int, default=943)
            p.add_argument("--items", type=int, default=1682)
            p.add_argument("--ratings", type=int, default=100_000)
            p.add_argument("--seed", type=int, default=0)
        if name == "oracle-check":
            p.add_argument("--n", type=int, default=10)
            p.add_argument("--k", type=int, default=3)
            p.add_argument("--trials", type=int, default=200)
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--modular-only", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    overrides = {
        dest[4:]: value
        for dest, value in vars(args).items()
        if dest.startswith("set:") and value is not None
    }
    try:
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg, args)
    except (UsageError, errors.BudgetTooLarge, errors.TooLarge, errors.BadParameter) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (errors.SubmodrankError, OSError, tomli.TOMLDecodeError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
