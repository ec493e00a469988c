"""RTR layer stack: base embeddings, temporal revision, revising messages, updates."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .encoding import EventEncoder
from .graph import NeighborStore, TemporalGraph
from .nn import tensor as T
from .nn.layers import GRUCell, Linear, MultiHeadAttention, ParamStore
from .nn.tensor import Tensor

ABLATIONS = frozenset({"no_prev_state", "no_revision", "no_h_v", "no_delta_h", "no_r_v",
                       "no_self_h", "no_msg_event"})


class CausalityError(RuntimeError):
    pass


@dataclass
class RTRConfig:
    K: int = 1
    d: int = 10
    dims: int | list = 32
    heads: int = 2
    hetero: bool = True
    base_mode: str = "implicit"
    ablations: list = field(default_factory=list)
    batch_multi_event: str = "mean"
    aggregator: str = "rtr"
    d_t: int = 16
    d_s: int = 16
    count_feature: bool = False
    symmetric_decoder: bool = False

    def __post_init__(self):
        self.ablations = sorted(set(self.ablations))
        self.validate()

    @property
    def layer_dims(self) -> list[int]:
        if isinstance(self.dims, int):
            return [self.dims] * (self.K + 1)
        return list(self.dims)

    def has(self, flag: str) -> bool:
        return flag in self.ablations

    def validate(self) -> None:
        errs = []
        if self.K < 0:
            errs.append("K must be >= 0")
        if self.d < 1:
            errs.append("d must be >= 1")
        dims = self.layer_dims
        if len(dims) != self.K + 1:
            errs.append(f"dims needs K+1={self.K + 1} entries, got {len(dims)}")
        if any(x < 1 or x % self.heads for x in dims):
            errs.append(f"every dim must be a positive multiple of heads={self.heads}")
        if self.base_mode not in ("implicit", "explicit"):
            errs.append(f"unknown base_mode {self.base_mode!r}")
        if self.batch_multi_event not in ("mean", "sum"):
            errs.append(f"unknown batch_multi_event {self.batch_multi_event!r}")
        if self.aggregator not in ("rtr", "classic"):
            errs.append(f"unknown aggregator {self.aggregator!r}")
        bad = set(self.ablations) - ABLATIONS
        if bad:
            errs.append(f"unknown ablation flags {sorted(bad)}")
        if self.aggregator == "classic" and self.ablations:
            errs.append("ablation flags apply to the rtr aggregator only")
        if self.d_t < 0 or self.d_s < 0:
            errs.append("encoding dims must be >= 0")
        if errs:
            raise ValueError("; ".join(errs))

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RTRConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


class LayerState:
    """Committed per-node, per-layer states plus the inputs of each node's last update."""

    def __init__(self, num_nodes: int, dims: list[int], in_dims: list[int]):
        self.h_cur = [np.zeros((num_nodes, d)) for d in dims]
        self.h_prev = [np.zeros((num_nodes, d)) for d in dims]
        self.x_cache = [np.zeros((num_nodes, d)) for d in in_dims]
        self.seen = np.zeros(num_nodes, dtype=bool)
        self.t_last = np.zeros(num_nodes)
        self.s_last = np.zeros(num_nodes, dtype=np.int64)
        self.count = np.zeros(num_nodes, dtype=np.int64)
        # counterparts of each node's last update, -1 padded (explicit base only)
        self.others = np.full((num_nodes, 1), -1, dtype=np.int64)

    def delta(self, k: int) -> np.ndarray:
        return self.h_cur[k] - self.h_prev[k]

    def arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for k in range(len(self.h_cur)):
            out[f"state.h_cur.{k}"] = self.h_cur[k]
            out[f"state.h_prev.{k}"] = self.h_prev[k]
        for k in range(len(self.x_cache)):
            out[f"state.x_cache.{k}"] = self.x_cache[k]
        out["state.seen"] = self.seen.astype(np.float64)
        out["state.t_last"] = self.t_last
        out["state.s_last"] = self.s_last.astype(np.float64)
        out["state.count"] = self.count.astype(np.float64)
        out["state.others"] = self.others.astype(np.float64)
        return out

    def load(self, arrs: dict[str, np.ndarray]) -> None:
        for k in range(len(self.h_cur)):
            self.h_cur[k] = arrs[f"state.h_cur.{k}"].copy()
            self.h_prev[k] = arrs[f"state.h_prev.{k}"].copy()
        for k in range(len(self.x_cache)):
            self.x_cache[k] = arrs[f"state.x_cache.{k}"].copy()
        self.seen = arrs["state.seen"] > 0
        self.t_last = arrs["state.t_last"].copy()
        self.s_last = arrs["state.s_last"].astype(np.int64)
        self.count = arrs["state.count"].astype(np.int64)
        if "state.others" in arrs:
            self.others = arrs["state.others"].astype(np.int64)


def _pad_take(x: Tensor, idx: np.ndarray) -> Tensor:
    """Rows of x by idx, where idx == -1 selects a zero row."""
    zero = Tensor(np.zeros((1,) + x.shape[1:]))
    ext = T.concat([x, zero], axis=0)
    j = np.where(idx < 0, x.shape[0], idx)
    return T.take_rows(ext, j)


class RTRModel:
    """Trainable model. Call bind(graph) before commit/embed."""

    def __init__(self, cfg: RTRConfig, num_nodes: int, edge_dim: int = 0, seed: int = 0,
                 median_gap: float = 1.0, median_seq_gap: float = 1.0):
        self.cfg = cfg
        self.num_nodes = num_nodes
        self.edge_dim = edge_dim
        self.store = ParamStore(seed)
        ps = self.store
        self.dims = cfg.layer_dims
        D = self.dims
        K = cfg.K
        self.phi = EventEncoder(ps, cfg.d_t, cfg.d_s, edge_dim, median_gap, median_seq_gap, cfg.count_feature)
        P = self.phi.dim
        if cfg.base_mode == "implicit":
            self.base = GRUCell(ps, "base.gru", 2 * D[0] + P, D[0])
        else:
            self.base_table = ps.uniform("base.table", (num_nodes, D[0]), 0.1)
        self.tr, self.rmsg, self.upd, self.att, self.comb = {}, {}, {}, {}, {}
        self.z_width = {}
        for k in range(1, K + 1):
            if cfg.aggregator == "rtr":
                zw = 3 * D[k - 1] + P + (1 if cfg.hetero else 0)
                self.z_width[k] = zw
                self.tr[k] = MultiHeadAttention(ps, f"tr{k}", zw, D[k], cfg.heads)
                self.rmsg[k] = GRUCell(ps, f"rmsg{k}", D[k] + D[k - 1] + P, D[k - 1])
                self.upd[k] = GRUCell(ps, f"upd{k}", D[k - 1], D[k])
            else:
                self.z_width[k] = D[k - 1] + P
                self.att[k] = MultiHeadAttention(ps, f"agg{k}", D[k - 1] + P, D[k], cfg.heads)
                self.comb[k] = Linear(ps, f"combine{k}", D[k - 1] + D[k], D[k])
        self.dec1 = Linear(ps, "dec.l1", 2 * D[K], D[K])
        self.dec2 = Linear(ps, "dec.l2", D[K], 1)
        # last-update inputs: base message for k=0, [h^{k-1} | RMSG input] above
        in_dims = [2 * D[0] + P] + [D[k - 1] + D[k] + D[k - 1] + P for k in range(1, K + 1)]
        if cfg.aggregator == "classic":
            in_dims = in_dims[:1]
        self.in_dims = in_dims
        self.edge_feat = np.zeros((0, edge_dim))
        self.attention_calls = 0
        self.recorder = None  # list to capture Z matrices, or None
        self.reset_state()

    # ------------------------------------------------------------------ state
    def bind(self, g: TemporalGraph) -> "RTRModel":
        if g.num_nodes > self.num_nodes:
            raise ValueError(f"graph has {g.num_nodes} nodes, model sized for {self.num_nodes}")
        if g.feat_dim != self.edge_dim:
            raise ValueError(f"edge feature arity {g.feat_dim} != {self.edge_dim}")
        self.edge_feat = g.edge_feat
        self._events = (g.src, g.dst, g.time)
        return self

    def reset_state(self) -> None:
        self.state = LayerState(self.num_nodes, self.dims, self.in_dims)
        self.nbrs = NeighborStore(self.num_nodes, self.cfg.d)
        self.last_time = -np.inf
        self.next_seq = 0

    def _read_h(self, k: int, nodes: np.ndarray) -> Tensor:
        if k == 0 and self.cfg.base_mode == "explicit":
            return T.take_rows(self.base_table, nodes)
        return Tensor(self.state.h_cur[k][nodes])

    def _neighbor_h(self, k: int, nbr: np.ndarray) -> Tensor:
        """h^k of a padded neighbor grid; traced back under grad so upper
        layers train the lower updaters too."""
        if k == 0 or not T.grad_enabled():
            return self._read_h(k, nbr)
        uniq, inv = np.unique(nbr.reshape(-1), return_inverse=True)
        h = T.take_rows(self.traceback(k, uniq), inv.reshape(-1))
        return T.reshape(h, nbr.shape + (self.dims[k],))

    def _read_dh(self, k: int, nodes: np.ndarray) -> np.ndarray:
        if k == 0 and self.cfg.base_mode == "explicit":
            return np.zeros(nodes.shape + (self.dims[0],))
        return self.state.delta(k)[nodes]

    def traceback(self, k: int, nodes: np.ndarray) -> Tensor:
        """Committed h^k of nodes; under grad mode recomputed from the cached
        last-update inputs so the updater GRU receives a gradient."""
        nodes = np.asarray(nodes, dtype=np.int64)
        if k == 0 and self.cfg.base_mode == "explicit":
            return T.take_rows(self.base_table, nodes)
        if not T.grad_enabled():
            return Tensor(self.state.h_cur[k][nodes])
        st = self.state
        x = st.x_cache[k][nodes]
        prev = st.h_prev[k][nodes]
        if k == 0:
            h = self.base(prev, x)
        else:
            if self.cfg.has("no_prev_state"):
                prev = np.zeros_like(prev)
            Dp = self.dims[k - 1]
            if k == 1 and self.cfg.base_mode == "explicit":
                m = self.rmsg[1](*self._live_base_inputs(nodes, x))
            else:
                m = self.rmsg[k](x[:, :Dp], x[:, Dp:])
            h = self.upd[k](prev, m)
        return h * st.seen[nodes].astype(np.float64)[:, None]

    def _live_base_inputs(self, nodes, x):
        """Layer-1 update inputs with the base-table rows read live, not cached."""
        cfg = self.cfg
        D0, D1 = self.dims[0], self.dims[1]
        if cfg.has("no_self_h"):
            below = Tensor(x[:, :D0])
        else:
            below = T.take_rows(self.base_table, nodes)
        c = x[:, D0:]
        if cfg.has("no_msg_event"):
            return below, Tensor(c)
        oth = self.state.others[nodes]
        valid = oth >= 0
        rows, cols = np.nonzero(valid)
        if len(rows) == 0:
            return below, Tensor(c)
        agg = T.segment_sum(T.take_rows(self.base_table, oth[rows, cols]), rows, len(nodes))
        if cfg.batch_multi_event == "mean":
            agg = agg * (1.0 / np.maximum(valid.sum(axis=1), 1))[:, None]
        live = T.concat([Tensor(c[:, :D1]), agg, Tensor(c[:, D1 + D0:])], axis=-1)
        return below, live

    def _phi_rows(self, t, s, nt, ns, eid, nodes=None, nbr=None) -> Tensor:
        counts = None
        if self.cfg.count_feature:
            cu = self.state.count[nodes]
            counts = np.stack([np.broadcast_to(cu[:, None], nbr.shape), self.state.count[nbr]], axis=-1)
        ef = self.edge_feat[eid] if self.edge_dim else np.zeros(nt.shape + (0,))
        return self.phi(np.asarray(t)[:, None] - nt, (np.asarray(s)[:, None] - ns).astype(np.float64), ef, counts)

    # --------------------------------------------------------------- revision
    def revision(self, nodes, level: int, t, s, S0=None) -> Tensor:
        """Batched r^level(t, S) for each (node, t, s) request; returns (B, D_level)."""
        cfg = self.cfg
        nodes = np.asarray(nodes, dtype=np.int64)
        B = len(nodes)
        if cfg.has("no_revision") or B == 0:
            return Tensor(np.zeros((B, self.dims[level])))
        t = np.asarray(t, dtype=np.float64).reshape(B)
        s = np.asarray(s, dtype=np.int64).reshape(B)
        S = np.full((B, 0), -1, dtype=np.int64) if S0 is None else np.asarray(S0, dtype=np.int64)
        recurse = not cfg.has("no_r_v")
        frames = []
        req = (nodes, t, s, S)
        for depth in range(level):
            lv = level - depth
            rn, rt, rs, rS = req
            nbr, nt, ns, neid, mask = self.nbrs.gather(rn, before=rt)
            frame = {"nodes": rn, "t": rt, "s": rs, "S": rS, "nbr": nbr, "nt": nt, "ns": ns,
                     "eid": neid, "mask": mask, "child": None}
            frames.append(frame)
            if lv < 2 or not recurse:
                break
            r_idx, slot = np.nonzero(mask)
            if len(r_idx) == 0:
                break
            cn = nbr[r_idx, slot]
            ct, cs = rt[r_idx], rs[r_idx]
            parent = rn[r_idx]
            Sp = rS[r_idx]
            dup = (Sp == parent[:, None]).any(axis=1)
            cS = np.sort(np.concatenate([Sp, np.where(dup, -1, parent)[:, None]], axis=1), axis=1)
            cols = [cn[:, None], ct.view(np.int64)[:, None], cs[:, None]]
            if cfg.hetero:
                cols.append(cS)
            first, inv = kernels.unique_rows(np.ascontiguousarray(np.concatenate(cols, axis=1)))
            child = np.full(mask.shape, -1, dtype=np.int64)
            child[r_idx, slot] = inv
            frame["child"] = child
            req = (cn[first], ct[first], cs[first], cS[first])
        out = None
        for depth in range(len(frames) - 1, -1, -1):
            out = self._tr_frame(frames[depth], level - depth, out)
        return out

    def _tr_frame(self, fr: dict, lv: int, child_out: Tensor | None) -> Tensor:
        cfg = self.cfg
        nbr, mask = fr["nbr"], fr["mask"]
        R, d = nbr.shape
        Dp = self.dims[lv - 1]
        dh = self._read_dh(lv - 1, nbr)
        if child_out is not None:
            r_child = _pad_take(child_out, fr["child"])
        elif lv == 1 and cfg.has("no_h_v") and cfg.has("no_delta_h"):
            r_child = Tensor(dh)
        else:
            r_child = Tensor(np.zeros((R, d, Dp)))
        hv = self._neighbor_h(lv - 1, nbr)
        phi = self._phi_rows(fr["t"], fr["s"], fr["nt"], fr["ns"], fr["eid"], fr["nodes"], nbr)
        if cfg.has("no_delta_h"):
            dh = np.zeros_like(dh)
        if cfg.has("no_h_v"):
            hv = Tensor(np.zeros((R, d, Dp)))
        parts = [r_child, Tensor(dh), hv, phi]
        if cfg.hetero:
            ind = (nbr[:, :, None] == fr["S"][:, None, :]).any(axis=2) & mask
            parts.append(Tensor(ind.astype(np.float64)[:, :, None]))
        Z = T.concat(parts, axis=-1)
        if self.recorder is not None:
            self.recorder.append({"level": lv, "Z": Z.data.copy(), "mask": mask.copy(),
                                  "nodes": fr["nodes"].copy(), "S": fr["S"].copy(),
                                  "nbr": nbr.copy(), "dims": (Dp, self.phi.dim)})
        return self._attend(self.tr[lv], Z, mask, self.dims[lv])

    def _attend(self, att: MultiHeadAttention, Z: Tensor, mask: np.ndarray, out_dim: int) -> Tensor:
        active = np.nonzero(mask.any(axis=1))[0]
        R = mask.shape[0]
        if len(active) == 0:
            return Tensor(np.zeros((R, out_dim)))
        self.attention_calls += len(active)
        if len(active) == R:
            return att(Z, mask)
        pooled = att(T.take_rows(Z, active), mask[active])
        pos = np.full(R, -1, dtype=np.int64)
        pos[active] = np.arange(len(active))
        return _pad_take(pooled, pos)

    # ---------------------------------------------------------------- classic
    def _classic(self, nodes, level, t, s) -> Tensor:
        if level == 0:
            return self.traceback(0, nodes)
        self_h = self._classic(nodes, level - 1, t, s)
        nbr, nt, ns, neid, mask = self.nbrs.gather(nodes, before=t)
        R, d = nbr.shape
        r_idx, slot = np.nonzero(mask)
        D = self.dims[level - 1]
        if len(r_idx):
            ch = self._classic(nbr[r_idx, slot], level - 1, t[r_idx], s[r_idx])
            pos = np.full((R, d), -1, dtype=np.int64)
            pos[r_idx, slot] = np.arange(len(r_idx))
            child = _pad_take(ch, pos)
        else:
            child = Tensor(np.zeros((R, d, D)))
        phi = self._phi_rows(t, s, nt, ns, neid, nodes, nbr)
        Z = T.concat([child, phi], axis=-1)
        if self.recorder is not None:
            self.recorder.append({"level": level, "Z": Z.data.copy(), "mask": mask.copy(),
                                  "nodes": np.asarray(nodes).copy(), "nbr": nbr.copy(),
                                  "dims": (D, self.phi.dim), "classic": True})
        a = self._attend(self.att[level], Z, mask, self.dims[level])
        return T.tanh(self.comb[level](T.concat([self_h, a], axis=-1)))

    # ------------------------------------------------------------------ embed
    def embed(self, nodes, t, s=None) -> Tensor:
        """h^K(t) for prediction without committing anything.

        Lower layers use the committed states; the top layer applies a fresh
        revision and a placeholder message (no event at t).
        """
        cfg = self.cfg
        nodes = np.asarray(nodes, dtype=np.int64).reshape(-1)
        B = len(nodes)
        t = np.broadcast_to(np.asarray(t, dtype=np.float64), (B,)).copy()
        s = np.broadcast_to(np.asarray(self.next_seq if s is None else s, dtype=np.int64), (B,)).copy()
        K = cfg.K
        if K == 0:
            return self.traceback(0, nodes)
        if cfg.aggregator == "classic":
            return self._classic(nodes, K, t, s)
        below = self.traceback(K - 1, nodes)
        r = self.revision(nodes, K, t, s)
        inp = T.concat([r, Tensor(np.zeros((B, self.dims[K - 1] + self.phi.dim)))], axis=-1)
        state = Tensor(np.zeros((B, self.dims[K - 1]))) if cfg.has("no_self_h") else below
        m = self.rmsg[K](state, inp)
        prev = Tensor(np.zeros((B, self.dims[K]))) if cfg.has("no_prev_state") else self.traceback(K, nodes)
        return self.upd[K](prev, m)

    # ----------------------------------------------------------------- decode
    def logits(self, hu: Tensor, hv: Tensor) -> Tensor:
        def mlp(a, b):
            return self.dec2(T.relu(self.dec1(T.concat([a, b], axis=-1))))
        out = mlp(hu, hv)
        if self.cfg.symmetric_decoder:
            out = out + mlp(hv, hu)
        return T.reshape(out, (hu.shape[0],))

    def score(self, u, v, t, s=None) -> np.ndarray:
        """Link probabilities for aligned arrays of (u, v) at query time t."""
        u = np.atleast_1d(np.asarray(u, dtype=np.int64))
        v = np.atleast_1d(np.asarray(v, dtype=np.int64))
        n = len(u)
        tt = np.broadcast_to(np.asarray(t, dtype=np.float64), (n,))
        ss = None if s is None else np.broadcast_to(np.asarray(s, dtype=np.int64), (n,))
        with T.no_grad():
            h = self.embed(np.concatenate([u, v]), np.concatenate([tt, tt]),
                           None if ss is None else np.concatenate([ss, ss]))
            z = self.logits(h[:n], h[n:]).data
        return 1.0 / (1.0 + np.exp(-z))

    # ----------------------------------------------------------------- commit
    def _combine(self, x: Tensor, seg: np.ndarray, n: int) -> Tensor:
        out = T.segment_sum(x, seg, n)
        if self.cfg.batch_multi_event == "mean":
            cnt = np.bincount(seg, minlength=n).astype(np.float64)
            out = out * (1.0 / cnt)[:, None]
        return out

    def commit(self, eids) -> None:
        """Apply a batch of events (global event ids, chronological) to all layers."""
        cfg = self.cfg
        eids = np.asarray(eids, dtype=np.int64)
        if len(eids) == 0:
            return
        g_src, g_dst, g_t = self._events
        src, dst, tt = g_src[eids], g_dst[eids], g_t[eids]
        if np.any(np.diff(tt) < 0) or tt[0] < self.last_time:
            raise CausalityError("events committed out of chronological order")
        with T.no_grad():
            self._commit(src, dst, tt, eids)
        self.last_time = float(tt[-1])
        self.next_seq = max(self.next_seq, int(eids[-1]) + 1)

    def _commit(self, src, dst, tt, eids):
        cfg = self.cfg
        st = self.state
        D = self.dims
        # endpoint instances in event order; a self-loop contributes once
        keep_dst = src != dst
        n_ev = len(src)
        node = np.stack([src, dst], axis=1).reshape(-1)
        other = np.stack([dst, src], axis=1).reshape(-1)
        sel = np.stack([np.ones(n_ev, dtype=bool), keep_dst], axis=1).reshape(-1)
        node, other = node[sel], other[sel]
        it = np.repeat(tt, 2)[sel]
        iseq = np.repeat(eids, 2)[sel]
        ieid = iseq
        touched, seg = kernels.unique_rows(node[:, None])
        touched = node[touched]
        U = len(touched)
        seen = st.seen[node]
        dt = np.where(seen, it - st.t_last[node], 0.0)
        ds = np.where(seen, iseq - st.s_last[node], 0).astype(np.float64)
        counts = np.stack([st.count[node], st.count[other]], axis=1) if cfg.count_feature else None
        ef = self.edge_feat[ieid] if self.edge_dim else np.zeros((len(node), 0))
        phi = self.phi(dt, ds, ef, counts)
        if cfg.base_mode == "implicit":
            h0 = st.h_cur[0]
            x = self._combine(T.concat([Tensor(h0[node]), Tensor(h0[other]), phi], axis=-1), seg, U)
            new = self.base(h0[touched], x).data
            self._rotate(0, touched, new, x.data)
        if cfg.aggregator == "rtr":
            for k in range(1, cfg.K + 1):
                r = self.revision(node, k, it, iseq)
                if cfg.has("no_msg_event"):
                    c = T.concat([r, Tensor(np.zeros((len(node), D[k - 1] + self.phi.dim)))], axis=-1)
                else:
                    c = T.concat([r, self._read_h(k - 1, other), phi], axis=-1)
                c = self._combine(c, seg, U)
                below = self._read_h(k - 1, touched).data
                if cfg.has("no_self_h"):
                    below = np.zeros_like(below)
                m = self.rmsg[k](below, c).data
                prev = np.zeros((U, D[k])) if cfg.has("no_prev_state") else st.h_cur[k][touched]
                new = self.upd[k](prev, m).data
                self._rotate(k, touched, new, np.concatenate([below, c.data], axis=1))
            if cfg.base_mode == "explicit" and cfg.K >= 1:
                self._record_others(touched, seg, other)
        last = np.zeros(U)
        lasts = np.zeros(U, dtype=np.int64)
        last[seg] = it  # later instances overwrite earlier ones
        lasts[seg] = iseq
        st.t_last[touched] = last
        st.s_last[touched] = lasts
        st.count += np.bincount(node, minlength=self.num_nodes)
        st.seen[touched] = True
        self.nbrs.push(src, dst, tt, eids, eids)

    def _record_others(self, touched, seg, other):
        st = self.state
        order = np.argsort(seg, kind="stable")
        cnt = np.bincount(seg, minlength=len(touched))
        w = int(cnt.max())
        if w > st.others.shape[1]:
            st.others = np.concatenate(
                [st.others, np.full((self.num_nodes, w - st.others.shape[1]), -1, dtype=np.int64)], axis=1)
        pos = np.arange(len(seg)) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        st.others[touched] = -1
        st.others[touched[seg[order]], pos] = other[order]

    def _rotate(self, k, nodes, new, x):
        st = self.state
        st.h_prev[k][nodes] = st.h_cur[k][nodes]
        st.h_cur[k][nodes] = new
        st.x_cache[k][nodes] = x

    # ------------------------------------------------------------- checkpoint
    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {f"param.{k}": v.data for k, v in self.store}
        out.update(self.state.arrays())
        for name in ("nbr", "t", "s", "eid", "count"):
            out[f"store.{name}"] = getattr(self.nbrs, name).astype(np.float64)
        out["store.last_time"] = np.array([self.last_time, float(self.next_seq)])
        return out

    def load_arrays(self, arrs: dict[str, np.ndarray]) -> None:
        for k, p in self.store:
            p.data = arrs[f"param.{k}"].copy()
        self.state.load(arrs)
        for name in ("nbr", "s", "eid", "count"):
            setattr(self.nbrs, name, arrs[f"store.{name}"].astype(np.int64))
        self.nbrs.t = arrs["store.t"].copy()
        self.last_time = float(arrs["store.last_time"][0])
        self.next_seq = int(arrs["store.last_time"][1])
