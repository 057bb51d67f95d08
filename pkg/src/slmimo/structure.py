"""Sparse layering structure: the binary SL matrix with its derived index
sets, per-layer codebooks, superposition, the design (sum-injectivity)
condition, and difference-vector sets.

Index conventions: rows (eigen-channels) and columns (layers) are 0-based in
code; the on-disk codebook format stores 1-based support indices.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product

import numpy as np

ZERO_TOL = 1e-9          # magnitude below which an entry counts as zero
DEDUP_DECIMALS = 12      # rounding used to deduplicate difference vectors
PAIR_CHECK_CAP = 2 ** 26  # ordered-pair budget for the exhaustive Eq-check
RANDOM_PAIR_SAMPLES = 10 ** 7


class InvalidLayeringError(ValueError):
    """The SL matrix has an all-zero column (a layer using no channel)."""


class DifferenceSetTooLargeError(ValueError):
    """Enumerating the difference set would exceed the configured cap."""

    def __init__(self, count):
        self.count = count
        super().__init__(f"difference set would hold ~{count} vectors")


@dataclass(frozen=True)
class SLMatrix:
    a: np.ndarray          # (n, L) int8
    nl_sets: tuple         # per layer: tuple of channel indices (ascending)
    d_sets: tuple          # per channel: tuple of layer indices (ascending)
    big_n: int             # max leading zeros over columns

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def num_layers(self) -> int:
        return self.a.shape[1]

    @property
    def n_l(self) -> tuple:
        return tuple(len(s) for s in self.nl_sets)

    @property
    def d_m(self) -> tuple:
        return tuple(len(s) for s in self.d_sets)

    @property
    def d_max(self) -> int:
        return max(self.d_m)

    def column_leading_zeros(self, l: int) -> int:
        return self.nl_sets[l][0]


def analyze_matrix(a) -> SLMatrix:
    """Build an SLMatrix with all derived index sets from a 0/1 matrix."""
    a = np.asarray(a, dtype=np.int8)
    if a.ndim != 2:
        raise ValueError("SL matrix must be 2-D")
    if not np.all((a == 0) | (a == 1)):
        raise ValueError("SL matrix entries must be 0 or 1")
    if np.any(a.sum(axis=0) == 0):
        bad = int(np.argmin(a.sum(axis=0)))
        raise InvalidLayeringError(f"layer {bad} uses no eigen-channel")
    a.setflags(write=False)
    nl = tuple(tuple(np.nonzero(a[:, l])[0]) for l in range(a.shape[1]))
    dm = tuple(tuple(np.nonzero(a[m, :])[0]) for m in range(a.shape[0]))
    big_n = max(s[0] for s in nl)
    return SLMatrix(a=a, nl_sets=nl, d_sets=dm, big_n=big_n)


def leading_zeros(psi, tol: float = ZERO_TOL) -> int:
    """Number of (near-)zero entries before the first nonzero one."""
    psi = np.asarray(psi)
    nz = np.nonzero(np.abs(psi) > tol)[0]
    if nz.size == 0:
        raise ValueError("leading_zeros is undefined for the zero vector")
    return int(nz[0])


@dataclass(frozen=True)
class Codebook:
    layer: int
    support: tuple             # channel indices, ascending
    words: np.ndarray          # (M, n_l) complex
    energy: float              # E_s

    def __post_init__(self):
        m, n_l = self.words.shape
        if n_l != len(self.support):
            raise ValueError("word length must match support size")
        mean_e = float(np.mean(np.sum(np.abs(self.words) ** 2, axis=1)))
        if abs(mean_e - self.energy) > 1e-9 * max(1.0, self.energy):
            raise ValueError(
                f"layer {self.layer}: mean word energy {mean_e} != "
                f"E_s {self.energy}")
        rounded = np.round(self.words, DEDUP_DECIMALS)
        if len({tuple(w) for w in map(tuple, rounded)}) != m:
            raise ValueError(f"layer {self.layer}: duplicate codewords")
        self.words.setflags(write=False)

    @property
    def m(self) -> int:
        return self.words.shape[0]

    def embedded(self, n: int) -> np.ndarray:
        """(M, n) words placed on the full eigen-channel vector."""
        out = np.zeros((self.m, n), dtype=complex)
        out[:, list(self.support)] = self.words
        return out


@dataclass(frozen=True)
class CodebookSet:
    books: tuple  # one Codebook per layer, in layer order

    def __post_init__(self):
        ms = {b.m for b in self.books}
        if len(ms) != 1:
            raise ValueError("all layers must have the same codebook size")

    @property
    def m(self) -> int:
        return self.books[0].m

    @property
    def num_layers(self) -> int:
        return len(self.books)

    @property
    def e_s(self) -> float:
        return self.books[0].energy

    def bits_per_word(self) -> float:
        """eta = L log2 M, the payload of one superposed word."""
        return self.num_layers * np.log2(self.m)

    def embedded_words(self, n: int) -> list:
        return [b.embedded(n) for b in self.books]


def superpose(sl: SLMatrix, choices, books: CodebookSet) -> np.ndarray:
    """Superposed word s with s_m = sum of the chosen codewords on channel m."""
    choices = list(choices)
    if len(choices) != sl.num_layers:
        raise ValueError("need one codeword index per layer")
    s = np.zeros(sl.n, dtype=complex)
    for l, c in enumerate(choices):
        book = books.books[l]
        if not 0 <= c < book.m:
            raise IndexError(f"layer {l}: codeword index {c} out of range")
        s[list(book.support)] += book.words[c]
    return s


def superposed_alphabet(sl: SLMatrix, books: CodebookSet,
                        cap: int = 2 ** 20):
    """All M^L superposed words.

    Returns (choices (M^L, L) int array, words (M^L, n) complex), with layer
    L-1 varying fastest.
    """
    m, big_l = books.m, sl.num_layers
    total = m ** big_l
    if total > cap:
        raise DifferenceSetTooLargeError(total)
    choices = np.array(list(product(range(m), repeat=big_l)), dtype=np.int64)
    words = np.zeros((total, sl.n), dtype=complex)
    for l in range(big_l):
        words += books.books[l].embedded(sl.n)[choices[:, l]]
    return choices, words


@dataclass(frozen=True)
class DesignCheckResult:
    passed: bool
    witness: tuple | None   # (choices_1, choices_2) full layer-index tuples
    exhaustive: bool
    coverage: float         # fraction of ordered pairs examined


def check_design_condition(sl: SLMatrix, books: CodebookSet,
                           cap: int = PAIR_CHECK_CAP,
                           seed: int = 0) -> DesignCheckResult:
    """Verify the sum-injectivity design condition.

    On every channel m the map (chosen codewords of layers in D_m) -> s_m
    must be injective; otherwise two words differing in some layer of D_m
    would collide on channel m.  Checking each channel exhaustively over its
    M^{d_m} local combinations is equivalent to the all-pairs statement.  If
    the per-channel pair count exceeds ``cap``, random pairs are sampled.
    """
    m_sz = books.m
    for chan in range(sl.n):
        layers = sl.d_sets[chan]
        combos = m_sz ** len(layers)
        exhaustive = combos * combos <= cap
        values = {}
        if exhaustive:
            it = product(range(m_sz), repeat=len(layers))
            coverage = 1.0
        else:
            rng = np.random.default_rng(seed)
            draws = rng.integers(m_sz, size=(RANDOM_PAIR_SAMPLES,
                                             len(layers)))
            it = map(tuple, draws)
            coverage = min(1.0, RANDOM_PAIR_SAMPLES / combos)
        for combo in it:
            total = complex(sum(
                books.books[l].words[c][books.books[l].support.index(chan)]
                for l, c in zip(layers, combo)))
            key = (round(total.real, DEDUP_DECIMALS),
                   round(total.imag, DEDUP_DECIMALS))
            prev = values.get(key)
            if prev is not None and prev != combo:
                full1 = [0] * sl.num_layers
                full2 = [0] * sl.num_layers
                for l, c1, c2 in zip(layers, prev, combo):
                    full1[l], full2[l] = c1, c2
                return DesignCheckResult(False, (tuple(full1), tuple(full2)),
                                         exhaustive, coverage)
            values[key] = combo
    return DesignCheckResult(True, None, True, 1.0)


@dataclass(frozen=True)
class DifferenceSet:
    vectors: np.ndarray        # (K, n) complex, deduplicated, no zero row
    multiplicities: np.ndarray  # (K,) ordered-pair counts
    f_values: np.ndarray       # (K,) leading-zero counts
    # memo for derived views/profiles (ignored for equality)
    cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def n(self) -> int:
        return self.vectors.shape[1]

    def by_leading_zeros(self) -> dict:
        return {int(f): np.nonzero(self.f_values == f)[0]
                for f in np.unique(self.f_values)}

    def with_f_at_least(self, n_prime: int) -> "DifferenceSet":
        key = ("f_ge", n_prime)
        if key not in self.cache:
            keep = self.f_values >= n_prime
            self.cache[key] = DifferenceSet(
                self.vectors[keep], self.multiplicities[keep],
                self.f_values[keep])
        return self.cache[key]

    def with_f_equal(self, n_prime: int) -> "DifferenceSet":
        keep = self.f_values == n_prime
        return DifferenceSet(self.vectors[keep], self.multiplicities[keep],
                             self.f_values[keep])


def _dedup(vectors: np.ndarray, weights: np.ndarray):
    keys = np.round(vectors, DEDUP_DECIMALS)
    keys = keys.view(float).reshape(keys.shape[0], -1)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    mult = np.zeros(uniq.shape[0], dtype=np.int64)
    np.add.at(mult, inverse, weights)
    vecs = np.zeros((uniq.shape[0], vectors.shape[1]), dtype=complex)
    vecs[inverse] = vectors
    return vecs, mult


def _layer_differences(book: Codebook, n: int):
    emb = book.embedded(n)
    diffs = (emb[:, None, :] - emb[None, :, :]).reshape(-1, n)
    return _dedup(diffs, np.ones(diffs.shape[0], dtype=np.int64))


def difference_set(books: CodebookSet, sl: SLMatrix,
                   layers=None, cap: int = 2 ** 24) -> DifferenceSet:
    """Difference vectors psi = s - s_hat with ordered-pair multiplicities.

    ``layers`` restricts the enumeration to pairs that agree on every other
    layer (used by the per-step design objectives); default is all layers.
    Built as the layer-wise sum of per-layer difference values — every
    ordered word pair factors into one ordered codeword pair per layer — with
    deduplication after each combination stage.
    """
    if layers is None:
        layers = range(sl.num_layers)
    vecs = np.zeros((1, sl.n), dtype=complex)
    mult = np.ones(1, dtype=np.int64)
    for l in layers:
        lv, lm = _layer_differences(books.books[l], sl.n)
        if vecs.shape[0] * lv.shape[0] > cap:
            raise DifferenceSetTooLargeError(vecs.shape[0] * lv.shape[0])
        combined = (vecs[:, None, :] + lv[None, :, :]).reshape(-1, sl.n)
        weights = (mult[:, None] * lm[None, :]).reshape(-1)
        vecs, mult = _dedup(combined, weights)
    nonzero = np.abs(vecs).max(axis=1) > ZERO_TOL
    vecs, mult = vecs[nonzero], mult[nonzero]
    f_vals = np.argmax(np.abs(vecs) > ZERO_TOL, axis=1).astype(np.int64)
    return DifferenceSet(vectors=vecs, multiplicities=mult, f_values=f_vals)


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def save_sl_matrix(sl: SLMatrix, path) -> None:
    """Plain text: first line "n L", then n rows of 0/1."""
    with open(path, "w") as fh:
        fh.write(f"{sl.n} {sl.num_layers}\n")
        for row in sl.a:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")


def load_sl_matrix(path) -> SLMatrix:
    with open(path) as fh:
        first = fh.readline().split()
        if len(first) != 2:
            raise ValueError("first line must be 'n L'")
        n, big_l = int(first[0]), int(first[1])
        rows = [[int(v) for v in fh.readline().split()] for _ in range(n)]
    a = np.array(rows, dtype=np.int8)
    if a.shape != (n, big_l):
        raise ValueError("matrix body does not match declared shape")
    return analyze_matrix(a)


def save_codebooks(books: CodebookSet, path) -> None:
    """JSON: per layer 1-based support and words as [re, im] pairs."""
    data = {
        "e_s": books.e_s,
        "m": books.m,
        "layers": [
            {
                "layer": b.layer + 1,
                "support": [int(i) + 1 for i in b.support],
                "words": [[[float(x.real), float(x.imag)] for x in w]
                          for w in b.words],
            }
            for b in books.books
        ],
    }
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1)


def load_codebooks(path) -> CodebookSet:
    with open(path) as fh:
        data = json.load(fh)
    books = []
    for entry in sorted(data["layers"], key=lambda e: e["layer"]):
        words = np.array([[complex(re, im) for re, im in w]
                          for w in entry["words"]])
        books.append(Codebook(
            layer=entry["layer"] - 1,
            support=tuple(i - 1 for i in entry["support"]),
            words=words,
            energy=data["e_s"]))
    return CodebookSet(books=tuple(books))
