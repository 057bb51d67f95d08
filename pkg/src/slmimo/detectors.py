"""Detection on the eigen-channel observations: exhaustive ML, exact
per-layer marginalization, and the iterative message-passing (MP) detector on
the layer / eigen-channel factor graph.

All likelihood work is done in the log domain with max-normalization; message
vectors are kept normalized (sum 1 in the probability domain) after every
update.  Batched variants (leading axis = words) are provided for the Monte
Carlo harness; the scalar API wraps them.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .structure import CodebookSet, SLMatrix

ML_CAP = 2 ** 22


class DetectionCapError(ValueError):
    """M^L exceeds the exhaustive-detection cap."""


@dataclass(frozen=True)
class DetectorInput:
    z: np.ndarray         # (n,) complex observation
    lambdas: np.ndarray   # (n,) eigenvalues
    n0: float
    sl: SLMatrix
    books: CodebookSet


@dataclass
class MessageTable:
    """Final factor-graph state: probability-domain messages per edge."""
    channel_to_layer: dict   # (m, l) -> (M,) message
    layer_to_channel: dict   # (l, m) -> (M,) message
    iteration: int
    operations: int          # channel-update work sum_m d_m M^{d_m} per iter


class FactorGraph:
    """Precomputed per-channel combination tables for one (A, codebooks)."""

    def __init__(self, sl: SLMatrix, books: CodebookSet):
        self.sl = sl
        self.books = books
        self.m = books.m
        # per channel: layers in D_m, and the (M^{d_m},) superposed channel
        # values with layer axes in ascending-layer order
        self.chan_layers = sl.d_sets
        self.chan_sums = []
        for chan in range(sl.n):
            layers = sl.d_sets[chan]
            shape = (self.m,) * len(layers)
            total = np.zeros(shape, dtype=complex)
            for axis, l in enumerate(layers):
                book = books.books[l]
                col = book.words[:, book.support.index(chan)]
                idx = [None] * len(layers)
                idx[axis] = slice(None)
                total = total + col[tuple(idx)]
            self.chan_sums.append(total)

    def channel_update_ops(self) -> int:
        return sum(len(ls) * self.m ** len(ls) for ls in self.chan_layers)


def _log_normalize(logp: np.ndarray, axis: int = -1) -> np.ndarray:
    logp = logp - logp.max(axis=axis, keepdims=True)
    with np.errstate(divide="ignore"):
        return logp - np.log(np.exp(logp).sum(axis=axis, keepdims=True))


def _channel_loglik(graph: FactorGraph, z: np.ndarray, lambdas: np.ndarray,
                    n0: float) -> list:
    """Per channel: (B,) + combo-shape log P(z_m | combo), max-normalized."""
    tables = []
    for chan in range(graph.sl.n):
        s = graph.chan_sums[chan]
        amp = np.sqrt(lambdas[:, chan]).reshape((-1,) + (1,) * s.ndim)
        resid = z[:, chan].reshape(amp.shape) - amp * s
        ll = -(np.abs(resid) ** 2) / n0
        flat = ll.reshape(ll.shape[0], -1)
        tables.append((ll - flat.max(axis=1).reshape(amp.shape)))
    return tables


def _logsumexp(arr: np.ndarray, axis) -> np.ndarray:
    mx = arr.max(axis=axis, keepdims=True)
    out = np.log(np.exp(arr - mx).sum(axis=axis)) + np.squeeze(mx, axis=axis)
    return out


def mp_detect_batch(graph: FactorGraph, z: np.ndarray, lambdas: np.ndarray,
                    n0: float, mp_iters: int, damping: float = 0.0):
    """Flooding-schedule MP over a batch.  Returns (decisions (B, L),
    beliefs list of (B, M) log tables, operations count)."""
    if mp_iters < 1:
        raise ValueError("mp_iters must be >= 1")
    sl, m = graph.sl, graph.m
    big_l = sl.num_layers
    batch = z.shape[0]
    loglik = _channel_loglik(graph, z, lambdas, n0)
    # log messages, initialized uniform
    l2c = {(l, chan): np.full((batch, m), -np.log(m))
           for l in range(big_l) for chan in graph.sl.nl_sets[l]}
    c2l = {(chan, l): np.full((batch, m), -np.log(m))
           for chan in range(sl.n) for l in graph.chan_layers[chan]}
    ops = 0
    for _ in range(mp_iters):
        # channel-to-layer updates (marginalize interferers)
        new_c2l = {}
        for chan in range(sl.n):
            layers = graph.chan_layers[chan]
            t = loglik[chan].copy()
            for axis, l in enumerate(layers):
                shape = [batch] + [1] * len(layers)
                shape[axis + 1] = m
                t = t + l2c[(l, chan)].reshape(shape)
            for axis, l in enumerate(layers):
                shape = [batch] + [1] * len(layers)
                shape[axis + 1] = m
                partial = t - l2c[(l, chan)].reshape(shape)
                other = tuple(ax + 1 for ax in range(len(layers))
                              if ax != axis)
                msg = _logsumexp(partial, other) if other else partial.reshape(
                    batch, m)
                new_c2l[(chan, l)] = _log_normalize(msg)
            ops += len(layers) * m ** len(layers)
        c2l = new_c2l
        # layer-to-channel updates (product over the other channels)
        for l in range(big_l):
            chans = graph.sl.nl_sets[l]
            total = np.zeros((batch, m))
            for chan in chans:
                total = total + c2l[(chan, l)]
            for chan in chans:
                if damping > 0.0:
                    raw = _log_normalize(total - c2l[(chan, l)])
                    l2c[(l, chan)] = _log_normalize(np.logaddexp(
                        np.log1p(-damping) + raw,
                        np.log(damping) + l2c[(l, chan)]))
                else:
                    l2c[(l, chan)] = _log_normalize(total - c2l[(chan, l)])
    beliefs = []
    decisions = np.empty((batch, big_l), dtype=np.int64)
    for l in range(big_l):
        total = np.zeros((batch, m))
        for chan in graph.sl.nl_sets[l]:
            total = total + c2l[(chan, l)]
        total = _log_normalize(total)
        beliefs.append(total)
        decisions[:, l] = np.argmax(total, axis=1)  # argmax: lowest index wins
    return decisions, beliefs, ops, (c2l, l2c)


def ml_detect_batch(sl: SLMatrix, books: CodebookSet, z: np.ndarray,
                    lambdas: np.ndarray, choices: np.ndarray,
                    words: np.ndarray) -> np.ndarray:
    """Exhaustive ML over the precomputed superposed alphabet.

    ``choices``/``words`` come from structure.superposed_alphabet (their
    row order is lexicographic, so np.argmin tie-breaks to the lowest index
    tuple).  Returns (B, L) decisions.
    """
    amp = np.sqrt(lambdas)          # (B, n)
    # |z - amp*s|^2 summed over channels, for all candidates
    scores = (np.abs(z[:, None, :] - amp[:, None, :] * words[None, :, :])
              ** 2).sum(axis=2)
    best = np.argmin(scores, axis=1)
    return choices[best]


def exact_marginals_batch(sl: SLMatrix, books: CodebookSet, z: np.ndarray,
                          lambdas: np.ndarray, n0: float,
                          choices: np.ndarray, words: np.ndarray) -> list:
    """Exact per-layer posteriors by full enumeration; list of (B, M)."""
    amp = np.sqrt(lambdas)
    loglik = -((np.abs(z[:, None, :] - amp[:, None, :] * words[None, :, :])
                ** 2).sum(axis=2)) / n0
    loglik -= loglik.max(axis=1, keepdims=True)
    post = np.exp(loglik)
    out = []
    for l in range(sl.num_layers):
        tbl = np.zeros((z.shape[0], books.m))
        for w in range(books.m):
            tbl[:, w] = post[:, choices[:, l] == w].sum(axis=1)
        tbl /= tbl.sum(axis=1, keepdims=True)
        out.append(tbl)
    return out


# ---------------------------------------------------------------------------
# Scalar API
# ---------------------------------------------------------------------------

def _alphabet(inp: DetectorInput):
    from .structure import superposed_alphabet

    total = inp.books.m ** inp.sl.num_layers
    if total > ML_CAP:
        raise DetectionCapError(f"M^L = {total} exceeds cap {ML_CAP}")
    return superposed_alphabet(inp.sl, inp.books, cap=ML_CAP)


def ml_detect(inp: DetectorInput) -> tuple:
    """Max-likelihood layer indices (lowest lexicographic tuple on ties)."""
    choices, words = _alphabet(inp)
    dec = ml_detect_batch(inp.sl, inp.books, inp.z[None, :],
                          inp.lambdas[None, :], choices, words)
    return tuple(int(v) for v in dec[0])


def exact_marginals(inp: DetectorInput) -> list:
    """Exact per-layer posterior tables P(s_l | z), each summing to 1."""
    choices, words = _alphabet(inp)
    tables = exact_marginals_batch(inp.sl, inp.books, inp.z[None, :],
                                   inp.lambdas[None, :], inp.n0,
                                   choices, words)
    return [t[0] for t in tables]


def mp_detect(inp: DetectorInput, mp_iters: int, damping: float = 0.0):
    """MP decisions plus the final state (probability-domain beliefs)."""
    graph = FactorGraph(inp.sl, inp.books)
    dec, beliefs, ops, (c2l, l2c) = mp_detect_batch(
        graph, inp.z[None, :], inp.lambdas[None, :], inp.n0, mp_iters,
        damping)
    table = MessageTable(
        channel_to_layer={k: np.exp(v[0]) for k, v in c2l.items()},
        layer_to_channel={k: np.exp(v[0]) for k, v in l2c.items()},
        iteration=mp_iters, operations=ops)
    probs = [np.exp(b[0]) for b in beliefs]
    return tuple(int(v) for v in dec[0]), probs, table
