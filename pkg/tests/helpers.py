"""Shared test utilities: finite differences and small graph builders."""
import numpy as np

from tgrev.graph import from_edges


def rel_err(a, b, floor=1e-9):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    den = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return np.abs(a - b) / den


def fd_check(params, loss_fn, eps=1e-4, abs_tol=1e-9):
    """Worst relative error between analytic and central-difference grads.

    params: iterable of (name, Tensor). loss_fn() rebuilds the graph and returns a
    scalar Tensor. Entries where both gradients are below abs_tol count as equal.
    """
    params = list(params)
    for _, p in params:
        p.grad = None
    loss_fn().backward()
    worst, where = 0.0, None
    for name, p in params:
        an = p.grad if p.grad is not None else np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + eps
            lp = float(loss_fn().data)
            flat[i] = old - eps
            lm = float(loss_fn().data)
            flat[i] = old
            fd = (lp - lm) / (2 * eps)
            a = an.reshape(-1)[i]
            if abs(fd) < abs_tol and abs(a) < abs_tol:
                continue
            e = float(rel_err(fd, a))
            if e > worst:
                worst, where = e, (name, i, fd, a)
    return worst, where


def random_graph(rng, n, n_events, n_times=None, directed=False):
    n_times = n_times or n_events
    ev = []
    times = np.sort(rng.integers(1, n_times + 1, size=n_events)).astype(float)
    for t in times:
        a, b = rng.choice(n, size=2, replace=False)
        ev.append((int(a), int(b), float(t)))
    return from_edges(ev, n, directed=directed)


def commit_all(model, g, batch=4):
    for a in range(0, g.num_events, batch):
        model.commit(np.arange(a, min(a + batch, g.num_events)))
