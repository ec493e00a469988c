"""Command line entry point: ingest, split, train, eval, isotest, gen."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .graph import chronological_split, ingest_events

DEFAULTS = {
    "ingest": {"directed": False},
    "split": {"directed": False, "ratios": "0.7,0.15,0.15", "mask_fraction": 0.1, "seed": 0},
    "train": {"seed": None, "out": "run"},
    "eval": {"out": "run", "split": "test", "mode": "transductive"},
    "isotest": {"engines": "t1wl,rtr,rtr-hetero,pint-pos"},
    "gen": {"task": "oscillating-csl", "n": 11, "pairs": 60, "seed": 0, "out": "corpus",
            "users": 50, "items": 20, "period": 5, "events": 20000, "noise": 0.1},
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tgrev", description="Temporal graph revision toolkit")
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON file; its keys fill options not given on the command line")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
        return sp

    sp = common(sub.add_parser("ingest", help="parse an event CSV and write it with dense ids"))
    sp.add_argument("path")
    sp.add_argument("--directed", action="store_true", default=None)

    sp = common(sub.add_parser("split", help="chronological split with masked nodes"))
    sp.add_argument("path")
    sp.add_argument("--directed", action="store_true", default=None)
    sp.add_argument("--ratios")
    sp.add_argument("--mask-fraction", type=float, dest="mask_fraction")

    common(sub.add_parser("train", help="train a model; writes checkpoint, metrics and manifest"))

    sp = common(sub.add_parser("eval", help="evaluate a trained run"))
    sp.add_argument("--checkpoint")
    sp.add_argument("--split", choices=["val", "test"])
    sp.add_argument("--mode", choices=["transductive", "inductive"])

    sp = common(sub.add_parser("isotest", help="run isomorphism engines over a pair manifest"))
    sp.add_argument("--engines")
    sp.add_argument("--manifest")

    sp = common(sub.add_parser("gen", help="generate a synthetic corpus"))
    sp.add_argument("--task", choices=["oscillating-csl", "cuneiform", "periodic"])
    sp.add_argument("--n", type=int, help="cycle length for oscillating-csl")
    sp.add_argument("--pairs", type=int)
    for name, typ in (("users", int), ("items", int), ("period", int), ("events", int), ("noise", float)):
        sp.add_argument(f"--{name}", type=typ)
    return p


def _resolve(args) -> dict:
    opts = {k: v for k, v in vars(args).items() if k not in ("cmd", "config")}
    cfg = {}
    if args.config:
        cfg = json.loads(Path(args.config).read_text())
        if not isinstance(cfg, dict):
            raise ValueError("config file must hold a JSON object")
    base = dict(DEFAULTS[args.cmd])
    for k in set(opts) | set(base):
        if opts.get(k) is None:
            opts[k] = cfg.get(k, base.get(k)) if args.cmd != "train" else base.get(k)
    return opts, cfg


def _emit(obj, out: str | None = None, name: str | None = None) -> None:
    text = json.dumps(obj, indent=1, sort_keys=True)
    if out and name:
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        (d / name).write_text(text)
    print(text)


def cmd_ingest(o, cfg):
    g = ingest_events(o["path"], directed=bool(o["directed"]))
    summary = {"nodes": g.num_nodes, "events": g.num_events, "feat_dim": g.feat_dim, "directed": g.directed,
               "time_range": [float(g.time[0]), float(g.time[-1])] if g.num_events else None}
    if o["out"]:
        out = Path(o["out"])
        out.mkdir(parents=True, exist_ok=True)
        dense = g.relabel(np.arange(g.num_nodes))
        dense.to_csv(out / "events.csv")
        (out / "id_map.json").write_text(json.dumps(g.id_map))
    _emit(summary, o["out"], "ingest.json")


def cmd_split(o, cfg):
    g = ingest_events(o["path"], directed=bool(o["directed"]))
    ratios = tuple(float(x) for x in str(o["ratios"]).split(","))
    sp = chronological_split(g, ratios, float(o["mask_fraction"]), rng_seed=int(o["seed"]))
    _emit(json.loads(sp.to_json()), o["out"], "split.json")


def cmd_train(o, cfg):
    from .harness import RunConfig, train
    rc = RunConfig.from_dict(cfg)
    if o["seed"] is not None:
        rc.seed = o["seed"]
    rc.out = o["out"] if o["out"] is not None else (rc.out or "run")
    res = train(rc, log=lambda m: print(m, file=sys.stderr))
    m = dict(res.metrics)
    m.pop("batch_losses", None)
    _emit(m)


def cmd_eval(o, cfg):
    from .harness import evaluate
    path = o["checkpoint"] or str(Path(o["out"]) / "checkpoint.json")
    _emit(evaluate(path, o["split"], o["mode"]))


def cmd_isotest(o, cfg):
    from .harness import run_isotest
    if not o["manifest"]:
        raise ValueError("--manifest is required")
    engines = [e.strip() for e in str(o["engines"]).split(",") if e.strip()]
    rep = run_isotest(o["manifest"], engines)
    _emit(rep, o["out"], "isotest.json")


def cmd_gen(o, cfg):
    from . import datasets as ds
    out = Path(o["out"])
    out.mkdir(parents=True, exist_ok=True)
    seed = int(o["seed"])
    task = o["task"]
    if task == "periodic":
        g, meta = ds.gen_periodic_bipartite(o["users"], o["items"], o["period"], o["events"], o["noise"],
                                            np.random.default_rng(seed))
        g.to_csv(out / "events.csv")
        man = {"task": task, "seed": seed, "directed": True, "events": "events.csv",
               "params": {k: o[k] for k in ("users", "items", "period", "events", "noise")},
               "cycles": meta.cycles.tolist()}
    else:
        n_pairs = int(o["pairs"])
        if task == "oscillating-csl":
            n_iso = max(1, n_pairs // 6)
            corpus = ds.oscillating_corpus(N=int(o["n"]), n_noniso=n_pairs - n_iso, n_iso=n_iso, seed=seed)
        else:
            corpus = ds.cuneiform_corpus(n_pairs=n_pairs, seed=seed)
        (out / "pairs").mkdir(exist_ok=True)
        pairs = []
        for entry, ga, gb in corpus:
            pid = entry["pair_id"]
            ga.to_csv(out / "pairs" / f"{pid}_a.csv")
            gb.to_csv(out / "pairs" / f"{pid}_b.csv")
            pairs.append({**entry, "a": f"pairs/{pid}_a.csv", "b": f"pairs/{pid}_b.csv"})
        man = {"task": task, "seed": seed, "directed": False, "pairs": pairs}
    (out / "manifest.json").write_text(json.dumps(man, indent=1, sort_keys=True))
    print(json.dumps({"manifest": str(out / "manifest.json"),
                      "files": len(man.get("pairs", [])) * 2 or 1}, sort_keys=True))


COMMANDS = {"ingest": cmd_ingest, "split": cmd_split, "train": cmd_train, "eval": cmd_eval,
            "isotest": cmd_isotest, "gen": cmd_gen}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)  # exits 2 with usage on unknown flags
    try:
        opts, cfg = _resolve(args)
        COMMANDS[args.cmd](opts, cfg)
    except Exception as exc:  # noqa: BLE001 - reported as JSON
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "command": args.cmd}),
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
