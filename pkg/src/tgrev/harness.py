"""Training loop, link-prediction evaluation and the isomorphism-test runner."""
from __future__ import annotations

import json
import platform
import subprocess
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .datasets import gen_periodic_bipartite
from .expressive import NON_ISO, OracleBudgetError, make_engine
from .graph import (ConfigError, DataSplit, GraphError, TemporalGraph, chronological_split, ingest_events,
                    sample_negatives)
from .metrics import average_precision, confusion_report, roc_auc
from .model import RTRConfig, RTRModel
from .nn import Adam, Tensor, no_grad
from .nn import checkpoint as ckpt
from .nn import tensor as T


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class RunConfig:
    data: dict = field(default_factory=lambda: {"generator": "periodic"})
    model: dict = field(default_factory=dict)
    lr: float = 1e-3
    betas: tuple = (0.9, 0.999)
    batch_size: int = 200
    epochs: int = 20
    patience: int = 5
    seed: int = 0
    ratios: tuple = (0.70, 0.15, 0.15)
    mask_fraction: float = 0.10
    out: str | None = None

    def validate(self) -> None:
        if not ("path" in self.data) ^ ("generator" in self.data):
            raise ConfigError("data needs exactly one of 'path' or 'generator'")
        if self.lr <= 0 or self.batch_size < 1 or self.epochs < 1 or self.patience < 1:
            raise ConfigError("lr, batch_size, epochs and patience must be positive")
        if len(self.betas) != 2 or not all(0 <= b < 1 for b in self.betas):
            raise ConfigError(f"betas must be two numbers in [0, 1), got {self.betas}")
        try:
            RTRConfig.from_dict(self.model).validate()
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"model config: {exc}") from exc

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown run config keys: {sorted(extra)}")
        d = dict(d)
        for key in ("betas", "ratios"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"], d["ratios"] = list(self.betas), list(self.ratios)
        return d


# ------------------------------------------------------------------- data
def load_graph(data: dict, seed: int) -> TemporalGraph:
    if "path" in data:
        return ingest_events(data["path"], directed=bool(data.get("directed", False)))
    gen = data["generator"]
    params = {k: v for k, v in data.items() if k not in ("generator", "seed")}
    if gen == "periodic":
        g, _ = gen_periodic_bipartite(rng=np.random.default_rng(data.get("seed", seed)), **params)
        return g
    raise ConfigError(f"unknown generator {gen!r}")


def _median_gaps(g: TemporalGraph, idx: np.ndarray) -> tuple[float, float]:
    """Median gap between consecutive events of the same node, in time and in sequence."""
    if len(idx) < 2:
        return 1.0, 1.0
    nodes = np.concatenate([g.src[idx], g.dst[idx]])
    tt = np.concatenate([g.time[idx], g.time[idx]])
    ss = np.concatenate([idx, idx]).astype(np.float64)
    order = np.lexsort((ss, nodes))
    same = nodes[order][1:] == nodes[order][:-1]
    dt = np.diff(tt[order])[same]
    ds = np.diff(ss[order])[same]
    mt = float(np.median(dt[dt > 0])) if (dt > 0).any() else 1.0
    ms = float(np.median(ds[ds > 0])) if (ds > 0).any() else 1.0
    return mt, ms


def candidate_pools(g: TemporalGraph, split: DataSplit) -> dict[str, np.ndarray]:
    """Negative pools. Directed graphs only draw from nodes seen as destinations."""
    masked = split.masked_array(g.num_nodes)
    base = np.unique(g.dst) if g.directed else np.arange(g.num_nodes)
    trans = base[~masked[base]]
    ind = base[masked[base]]
    if ind.size < 2:
        ind = base
    return {"transductive": trans, "inductive": ind}


def build_model(cfg: RunConfig, g: TemporalGraph, split: DataSplit) -> RTRModel:
    mcfg = RTRConfig.from_dict(cfg.model)
    mcfg.validate()
    mt, ms = _median_gaps(g, split.event_indices(g, "train"))
    model = RTRModel(mcfg, g.num_nodes, g.feat_dim, seed=cfg.seed, median_gap=mt, median_seq_gap=ms)
    return model.bind(g)


# ---------------------------------------------------------------- scoring
def _batches(idx: np.ndarray, size: int):
    for a in range(0, len(idx), size):
        yield idx[a:a + size]


def pair_logits(model: RTRModel, src, dst, neg, t, s) -> tuple[Tensor, Tensor]:
    """Logits of (src, dst) and (src, neg) at the events' own time and seq."""
    n = len(src)
    nodes = np.concatenate([src, dst, neg]).astype(np.int64)
    tt = np.tile(np.asarray(t, dtype=np.float64), 3)
    ss = np.tile(np.asarray(s, dtype=np.int64), 3)
    keys = np.stack([nodes, tt.view(np.int64), ss], axis=1)
    first, inv = kernels.unique_rows(keys)
    h = T.take_rows(model.embed(nodes[first], tt[first], ss[first]), inv)
    return model.logits(h[:n], h[n:2 * n]), model.logits(h[:n], h[2 * n:])


def batch_loss(model: RTRModel, eids: np.ndarray, neg: np.ndarray) -> Tensor:
    g_src, g_dst, g_t = model._events
    pos, ng = pair_logits(model, g_src[eids], g_dst[eids], neg, g_t[eids], eids)
    target = np.r_[np.ones(len(eids)), np.zeros(len(eids))]
    return T.bce_with_logits(T.concat([pos, ng], axis=0), target)


def replay(model: RTRModel, idx: np.ndarray, batch_size: int) -> None:
    for b in _batches(idx, batch_size):
        model.commit(b)


def score_part(model: RTRModel, g: TemporalGraph, idx: np.ndarray, split: DataSplit,
               pools: dict, rng: np.random.Generator, batch_size: int) -> dict:
    """Score each event against one negative, then commit the batch. Parameters stay frozen."""
    masked = split.masked_array(g.num_nodes)
    ys = {"transductive": [], "inductive": []}
    ps = {"transductive": [], "inductive": []}
    with no_grad():
        for b in _batches(idx, batch_size):
            src, dst, t = g.src[b], g.dst[b], g.time[b]
            ind = masked[src] | masked[dst]
            neg = np.empty_like(dst)
            for mode, sel in (("transductive", ~ind), ("inductive", ind)):
                if sel.any():
                    neg[sel] = sample_negatives(dst[sel], pools[mode], rng)
            pos, ng = pair_logits(model, src, dst, neg, t, b)
            pos, ng = pos.data, ng.data
            for mode, sel in (("transductive", ~ind), ("inductive", ind)):
                if sel.any():
                    ys[mode].append(np.r_[np.ones(sel.sum()), np.zeros(sel.sum())])
                    ps[mode].append(np.r_[pos[sel], ng[sel]])
            model.commit(b)
    out = {}
    for mode in ys:
        if ys[mode]:
            y, p = np.concatenate(ys[mode]), np.concatenate(ps[mode])
            out[mode] = {"ap": average_precision(y, p), "auc": roc_auc(y, p), "pairs": int(len(y) // 2)}
        else:
            out[mode] = None
    return out


def _eval_rng(seed: int, part: str) -> np.random.Generator:
    # independent of the training stream so every config sees the same negatives
    return np.random.default_rng([seed, 7919, {"val": 1, "test": 2}[part]])


# ---------------------------------------------------------------- manifest
def _version_string() -> str:
    try:
        rev = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True, text=True,
                             cwd=Path(__file__).resolve().parent, timeout=5).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        rev = ""
    return f"{__version__}+{rev}" if rev else __version__


def run_manifest(cfg: RunConfig) -> dict:
    return {"config": cfg.to_dict(), "version": _version_string(), "loss": "binary_cross_entropy",
            "optimizer": {"name": "adam", "lr": cfg.lr, "betas": list(cfg.betas), "eps": 1e-8},
            "environment": {"python": platform.python_version(), "numpy": np.__version__,
                            "platform": platform.platform(), "kernels": kernels.BACKEND}}


# ------------------------------------------------------------------- train
@dataclass
class TrainResult:
    model: RTRModel
    split: DataSplit
    metrics: dict
    manifest: dict


def train(cfg: RunConfig, log=None) -> TrainResult:
    cfg.validate()
    g = load_graph(cfg.data, cfg.seed)
    try:
        split = chronological_split(g, cfg.ratios, cfg.mask_fraction, rng_seed=cfg.seed)
    except GraphError as exc:
        raise ConfigError(f"split: {exc}") from exc
    model = build_model(cfg, g, split)
    opt = Adam(model.store, lr=cfg.lr, betas=cfg.betas)
    pools = candidate_pools(g, split)
    tr_idx = split.event_indices(g, "train")
    va_idx = split.event_indices(g, "val")
    if len(tr_idx) == 0 or len(va_idx) == 0:
        raise ConfigError("train or validation part is empty after masking")
    epochs, best, best_ap, stale = [], None, -np.inf, 0
    for ep in range(cfg.epochs):
        t0 = time.perf_counter()
        model.reset_state()
        rng = np.random.default_rng([cfg.seed, 104729, ep])
        losses = []
        for b in _batches(tr_idx, cfg.batch_size):
            neg = sample_negatives(model._events[1][b], pools["transductive"], rng)
            loss = batch_loss(model, b, neg)
            val = float(loss.data)
            if not np.isfinite(val):
                raise TrainingDiverged(f"loss became {val} at epoch {ep}, batch starting at event {int(b[0])}")
            model.store.zero_grad()
            loss.backward()
            opt.step()
            model.commit(b)
            losses.append(val)
        v = score_part(model, g, va_idx, split, pools, _eval_rng(cfg.seed, "val"), cfg.batch_size)
        rec = {"epoch": ep, "loss": float(np.mean(losses)), "batch_losses": losses,
               "val_ap": v["transductive"]["ap"], "val_auc": v["transductive"]["auc"],
               "seconds": round(time.perf_counter() - t0, 3)}
        epochs.append(rec)
        if log:
            log(f"epoch {ep} loss {rec['loss']:.4f} val_ap {rec['val_ap']:.4f}")
        if rec["val_ap"] > best_ap:
            best_ap, best, stale = rec["val_ap"], model.store.snapshot(), 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    model.store.restore(best)
    metrics = test_metrics(model, g, split, pools, cfg)
    metrics["epochs"] = [{k: v for k, v in e.items() if k != "batch_losses"} for e in epochs]
    metrics["batch_losses"] = [e["batch_losses"] for e in epochs]
    metrics["best_val_ap"] = best_ap
    res = TrainResult(model, split, metrics, run_manifest(cfg))
    if cfg.out:
        save_run(res, cfg, cfg.out)
    return res


def test_metrics(model: RTRModel, g: TemporalGraph, split: DataSplit, pools: dict, cfg: RunConfig,
                 part: str = "test") -> dict:
    model.reset_state()
    replay(model, split.event_indices(g, "train"), cfg.batch_size)
    if part == "test":
        replay(model, split.event_indices(g, "val"), cfg.batch_size)
    res = score_part(model, g, split.event_indices(g, part), split, pools, _eval_rng(cfg.seed, part),
                     cfg.batch_size)
    return {"transductive": res["transductive"], "inductive": res["inductive"]}


def save_run(res: TrainResult, cfg: RunConfig, out) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    tensors = {f"param.{k}": v for k, v in res.model.store.snapshot().items()}
    meta = {"run_config": cfg.to_dict(), "model_config": json.loads(res.model.cfg.to_json()),
            "split": json.loads(res.split.to_json())}
    ckpt.save(out / "checkpoint.json", tensors, meta)
    (out / "metrics.json").write_text(json.dumps(res.metrics, indent=1, sort_keys=True))
    (out / "manifest.json").write_text(json.dumps(res.manifest, indent=1, sort_keys=True))
    (out / "split.json").write_text(res.split.to_json())
    return out / "checkpoint.json"


def evaluate(checkpoint, split: str = "test", mode: str = "transductive") -> dict:
    """AP/AUC of a saved run on `split` ('val' or 'test') for one mode."""
    if split not in ("val", "test"):
        raise ConfigError(f"split must be 'val' or 'test', got {split!r}")
    if mode not in ("transductive", "inductive"):
        raise ConfigError(f"mode must be 'transductive' or 'inductive', got {mode!r}")
    tensors, meta = ckpt.load(checkpoint)
    cfg = RunConfig.from_dict(meta["run_config"])
    g = load_graph(cfg.data, cfg.seed)
    sp = DataSplit.from_json(json.dumps(meta["split"]))
    model = build_model(cfg, g, sp)
    model.store.restore({k[len("param."):]: v for k, v in tensors.items() if k.startswith("param.")})
    if len(sp.event_indices(g, split)) == 0:
        raise ConfigError(f"{split} part is empty")
    res = test_metrics(model, g, sp, candidate_pools(g, sp), cfg, part=split)[mode]
    if res is None:
        raise ConfigError(f"no {mode} events in the {split} part")
    return {"split": split, "mode": mode, **res}


# ------------------------------------------------------------ periodic oracle
def periodic_table_scores(meta, src, cand, eids) -> np.ndarray:
    """Lookup-table oracle that knows every user's cycle and current phase:
    2 for the due item, 1 for another item of the cycle, 0 otherwise. Its AP
    is the ceiling a learned model can approach on this data."""
    src = np.asarray(src, dtype=np.int64)
    cand = np.asarray(cand, dtype=np.int64)
    due = meta.cycles[src, meta.phase[np.asarray(eids, dtype=np.int64)]]
    member = (meta.cycles[src] == cand[:, None]).any(axis=1)
    return np.where(cand == due, 2.0, member.astype(np.float64))


# ----------------------------------------------------------------- isotest
def run_isotest(manifest, engines: list[str]) -> dict:
    """Per-engine confusion report over a pair manifest written by `gen`."""
    if isinstance(manifest, (str, Path)):
        base = Path(manifest).parent
        manifest = json.loads(Path(manifest).read_text())
    else:
        base = Path(".")
    pairs = manifest["pairs"]
    directed = bool(manifest.get("directed", False))
    graphs = []
    for p in pairs:
        if p["label"] not in ("isomorphic", NON_ISO):
            raise ConfigError(f"pair {p['pair_id']}: bad label {p['label']!r}")
        ga = ingest_events(base / p["a"], directed=directed)
        gb = ingest_events(base / p["b"], directed=directed)
        graphs.append((p, ga, gb))
    report = {"corpus_size": len(pairs), "engines": {}}
    for name in engines:
        fn = make_engine(name)
        labels, verdicts, skipped = [], [], []
        t0 = time.perf_counter()
        for p, ga, gb in graphs:
            try:
                v = fn(ga, gb)
            except OracleBudgetError:
                skipped.append(p["pair_id"])
                continue
            labels.append(p["label"] == NON_ISO)
            verdicts.append(v == NON_ISO)
        rep = confusion_report(labels, verdicts)
        rep["skipped"] = len(skipped)
        rep["skipped_ids"] = skipped
        rep["seconds"] = round(time.perf_counter() - t0, 3)
        report["engines"][name] = rep
    return report
