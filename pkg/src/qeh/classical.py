"""Exact measure-preserving maps, correlations and the classical level tests.

Two set representations keep every measure exact:

* :class:`ArcSet` -- finite unions of half-open arcs of the circle [0, 1),
  moved by rotations.
* :class:`CellSet` -- bitsets over the ``2**k x 2**k`` dyadic grid of the
  unit torus, moved by maps that permute grid cells exactly (the cat map on
  the lattice ``Z_M x Z_M`` and the baker / Bernoulli shift as a rotation of
  the digit ring).

Cells are indexed ``i * M + j`` with ``i`` the x index and ``j`` the y index,
``M = 2**k``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Union

import numpy as np

from .errors import InsufficientSets, InvalidSpec, ResolutionMismatch, UnsupportedCombination
from .rng import make_rng
from .verdict import HierarchyVerdict, LevelResult

MAX_RESOLUTION = 12


# ---------------------------------------------------------------- arc sets

def _normalize_arcs(arcs) -> tuple[tuple[float, float], ...]:
    cleaned = []
    for a, b in arcs:
        a, b = float(a), float(b)
        if not (0.0 <= a <= b <= 1.0):
            raise ValueError(f"arc [{a}, {b}) not inside [0, 1)")
        if b > a:
            cleaned.append((a, b))
    cleaned.sort()
    merged: list[list[float]] = []
    for a, b in cleaned:
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return tuple((a, b) for a, b in merged)


@dataclass(frozen=True)
class ArcSet:
    """Sorted disjoint union of arcs ``[a, b)`` on the circle [0, 1)."""

    arcs: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "arcs", _normalize_arcs(self.arcs))

    @classmethod
    def full(cls) -> "ArcSet":
        return cls(((0.0, 1.0),))

    @classmethod
    def empty(cls) -> "ArcSet":
        return cls(())

    @property
    def measure(self) -> float:
        return float(sum(b - a for a, b in self.arcs))

    def complement(self) -> "ArcSet":
        out, prev = [], 0.0
        for a, b in self.arcs:
            out.append((prev, a))
            prev = b
        out.append((prev, 1.0))
        return ArcSet(out)

    def __and__(self, other: "ArcSet") -> "ArcSet":
        _same_kind(self, other)
        out, i, j = [], 0, 0
        x, y = self.arcs, other.arcs
        while i < len(x) and j < len(y):
            lo, hi = max(x[i][0], y[j][0]), min(x[i][1], y[j][1])
            if hi > lo:
                out.append((lo, hi))
            if x[i][1] < y[j][1]:
                i += 1
            else:
                j += 1
        return ArcSet(out)

    def __or__(self, other: "ArcSet") -> "ArcSet":
        _same_kind(self, other)
        return ArcSet(self.arcs + other.arcs)

    def __sub__(self, other: "ArcSet") -> "ArcSet":
        _same_kind(self, other)
        return self & other.complement()

    def shifted(self, s: float) -> "ArcSet":
        s = s % 1.0
        out = []
        for a, b in self.arcs:
            a2, b2 = a + s, b + s
            if a2 >= 1.0:
                out.append((a2 - 1.0, b2 - 1.0))
            elif b2 > 1.0:
                out.extend([(a2, 1.0), (0.0, b2 - 1.0)])
            else:
                out.append((a2, b2))
        return ArcSet([(min(max(a, 0.0), 1.0), min(max(b, 0.0), 1.0)) for a, b in out])


# ---------------------------------------------------------------- cell sets

class CellSet:
    """Subset of the ``2**k x 2**k`` cells of the unit torus, stored as a bitset."""

    __slots__ = ("resolution", "cells")

    def __init__(self, resolution: int, cells):
        cells = np.array(cells, dtype=bool, copy=True).reshape(-1)
        if not 0 <= resolution <= MAX_RESOLUTION:
            raise ValueError(f"resolution must be in [0, {MAX_RESOLUTION}]")
        if cells.size != 4**resolution:
            raise ValueError(f"expected {4**resolution} cells, got {cells.size}")
        cells.flags.writeable = False
        object.__setattr__(self, "resolution", resolution)
        object.__setattr__(self, "cells", cells)

    def __setattr__(self, name, value):
        raise AttributeError("CellSet is immutable")

    @classmethod
    def from_mask(cls, mask) -> "CellSet":
        mask = np.asarray(mask, dtype=bool)
        k = int(round(np.log2(mask.shape[0])))
        if mask.shape != (2**k, 2**k):
            raise ValueError("mask must be 2**k x 2**k")
        return cls(k, mask)

    @classmethod
    def from_predicate(cls, resolution: int, pred) -> "CellSet":
        """Cells whose integer indices ``(i, j)`` satisfy ``pred(i, j)`` (vectorized)."""
        m = 2**resolution
        i, j = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
        return cls(resolution, np.broadcast_to(pred(i, j), i.shape))

    @classmethod
    def full(cls, resolution: int) -> "CellSet":
        return cls(resolution, np.ones(4**resolution, dtype=bool))

    @classmethod
    def empty(cls, resolution: int) -> "CellSet":
        return cls(resolution, np.zeros(4**resolution, dtype=bool))

    @property
    def side(self) -> int:
        return 2**self.resolution

    @property
    def mask(self) -> np.ndarray:
        return self.cells.reshape(self.side, self.side)

    def count(self) -> int:
        return int(np.count_nonzero(self.cells))

    @property
    def measure(self) -> Fraction:
        return Fraction(self.count(), 4**self.resolution)

    def indicator(self) -> np.ndarray:
        return self.cells.astype(float)

    def _check(self, other):
        _same_kind(self, other)
        if other.resolution != self.resolution:
            raise ResolutionMismatch(f"resolutions {self.resolution} and {other.resolution}")

    def __and__(self, other):
        self._check(other)
        return CellSet(self.resolution, self.cells & other.cells)

    def __or__(self, other):
        self._check(other)
        return CellSet(self.resolution, self.cells | other.cells)

    def __sub__(self, other):
        self._check(other)
        return CellSet(self.resolution, self.cells & ~other.cells)

    def complement(self):
        return CellSet(self.resolution, ~self.cells)

    def __eq__(self, other):
        return (
            isinstance(other, CellSet)
            and other.resolution == self.resolution
            and bool(np.array_equal(self.cells, other.cells))
        )

    def __hash__(self):
        return hash((self.resolution, self.cells.tobytes()))

    def __repr__(self):
        return f"CellSet(resolution={self.resolution}, measure={self.measure})"

    def to_hex(self) -> str:
        """Big-endian bitset: cell 0 is the most significant bit of the first byte."""
        return np.packbits(self.cells).tobytes().hex()

    @classmethod
    def from_hex(cls, resolution: int, text: str) -> "CellSet":
        n = 4**resolution
        raw = bytes.fromhex(text.strip())
        bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
        if bits.size < n or bits[n:].any():
            raise ValueError("hex bitset length does not match resolution")
        return cls(resolution, bits[:n].astype(bool))


SetType = Union[ArcSet, CellSet]


def _same_kind(a, b):
    if type(a) is not type(b):
        raise UnsupportedCombination(f"cannot combine {type(a).__name__} with {type(b).__name__}")


# ---------------------------------------------------------------- maps

MAP_KINDS = ("rotation", "cat", "baker", "bernoulli_shift", "identity")


@dataclass(frozen=True)
class MapSpec:
    """A discrete-time measure-preserving automorphism.

    ``rotation`` (angle ``alpha``) acts on :class:`ArcSet`; ``cat``, ``baker``
    and ``bernoulli_shift`` (``p`` a power of two) act on :class:`CellSet`;
    ``identity`` acts on both.
    """

    kind: str
    alpha: float = 0.0
    p: int = 2

    def __post_init__(self):
        if self.kind not in MAP_KINDS:
            raise InvalidSpec(f"unknown map kind {self.kind!r}")
        if self.kind == "bernoulli_shift" and (self.p < 2 or self.p & (self.p - 1)):
            raise InvalidSpec("bernoulli_shift needs p a power of two (exact on the dyadic grid)")

    @classmethod
    def rotation(cls, alpha: float) -> "MapSpec":
        return cls("rotation", alpha=float(alpha))

    @classmethod
    def cat(cls) -> "MapSpec":
        return cls("cat")

    @classmethod
    def baker(cls) -> "MapSpec":
        return cls("baker")

    @classmethod
    def bernoulli_shift(cls, p: int = 2) -> "MapSpec":
        return cls("bernoulli_shift", p=int(p))

    @classmethod
    def identity(cls) -> "MapSpec":
        return cls("identity")

    @property
    def acts_on_grid(self) -> bool:
        return self.kind in ("cat", "baker", "bernoulli_shift", "identity")

    def permutation(self, resolution: int, n: int = 1) -> np.ndarray:
        """Cell permutation of ``T**n``: cell ``c`` is carried to ``perm[c]``."""
        if not self.acts_on_grid:
            raise UnsupportedCombination(f"{self.kind} does not act on CellSet")
        return _permutation(self.kind, self.p, resolution, int(n))


def _mat_pow_mod(m, n, mod):
    result = ((1, 0), (0, 1))
    base = m
    while n:
        if n & 1:
            result = _mat_mul_mod(result, base, mod)
        base = _mat_mul_mod(base, base, mod)
        n >>= 1
    return result


def _mat_mul_mod(a, b, mod):
    return (
        ((a[0][0] * b[0][0] + a[0][1] * b[1][0]) % mod, (a[0][0] * b[0][1] + a[0][1] * b[1][1]) % mod),
        ((a[1][0] * b[0][0] + a[1][1] * b[1][0]) % mod, (a[1][0] * b[0][1] + a[1][1] * b[1][1]) % mod),
    )


@lru_cache(maxsize=64)
def _digit_reversal(resolution: int, bits: int) -> np.ndarray:
    m = 2**resolution
    ndig = resolution // bits
    j = np.arange(m, dtype=np.int64)
    out = np.zeros(m, dtype=np.int64)
    mask = (1 << bits) - 1
    for d in range(ndig):
        digit = (j >> (d * bits)) & mask
        out |= digit << ((ndig - 1 - d) * bits)
    return out


@lru_cache(maxsize=256)
def _permutation(kind: str, p: int, resolution: int, n: int) -> np.ndarray:
    m = 2**resolution
    idx = np.arange(m * m, dtype=np.int64)
    if kind == "identity":
        perm = idx
    elif kind == "cat":
        if n < 0:
            # (2,1;1,1)^-1 = (1,-1;-1,2)
            mat = _mat_pow_mod(((1, m - 1), (m - 1, 2)), -n, m)
        else:
            mat = _mat_pow_mod(((2, 1), (1, 1)), n, m)
        i, j = idx // m, idx % m
        perm = ((mat[0][0] * i + mat[0][1] * j) % m) * m + (mat[1][0] * i + mat[1][1] * j) % m
    else:
        bits = 1 if kind == "baker" else int(p).bit_length() - 1
        if resolution % bits:
            raise UnsupportedCombination(f"resolution {resolution} is not a whole number of base-{p} digits")
        width = 2 * resolution
        if width == 0:
            perm = idx
        else:
            rev = _digit_reversal(resolution, bits)
            i, j = idx // m, idx % m
            word = (i << resolution) | rev[j]
            s = (n * bits) % width
            full = (1 << width) - 1
            word = ((word << s) | (word >> (width - s))) & full if s else word
            perm = (word >> resolution) * m + rev[word & (m - 1)]
    perm = np.asarray(perm, dtype=np.int64)
    perm.flags.writeable = False
    return perm


def apply_map(map: MapSpec, s: SetType, n: int = 1) -> SetType:
    """Exact image ``T**n S``.

    Raises
    ------
    UnsupportedCombination
        If the map kind does not act on the given set type.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if isinstance(s, ArcSet):
        if map.kind == "identity":
            return s
        if map.kind != "rotation":
            raise UnsupportedCombination(f"{map.kind} map does not act on ArcSet")
        return s.shifted((n * map.alpha) % 1.0)
    if isinstance(s, CellSet):
        perm = map.permutation(s.resolution, n)
        out = np.zeros_like(s.cells)
        out[perm] = s.cells
        return CellSet(s.resolution, out)
    raise UnsupportedCombination(f"unsupported set type {type(s).__name__}")


def _measure(s: SetType):
    return s.measure


def set_correlation(map: MapSpec, a: SetType, b: SetType, n: int = 0) -> float:
    """``mu(T**n B & A) - mu(A) mu(B)``, exact for cell sets."""
    _same_kind(a, b)
    tb = apply_map(map, b, n)
    value = _measure(tb & a) - _measure(a) * _measure(b)
    return float(value)


def _orbit(map: MapSpec, b: SetType, count: int):
    """``T**k B`` for ``k = 0 .. count-1``, stepping cell sets one map application at a time."""
    if isinstance(b, ArcSet):
        for k in range(count):
            yield apply_map(map, b, k)
        return
    current = b
    for k in range(count):
        yield current
        current = apply_map(map, current, 1)


def correlation_series(map: MapSpec, a: SetType, b: SetType, count: int) -> np.ndarray:
    """``C(T**k B, A)`` for ``k = 0 .. count-1``."""
    _same_kind(a, b)
    ma, mb = _measure(a), _measure(b)
    return np.array([float(_measure(tb & a) - ma * mb) for tb in _orbit(map, b, count)])


def cesaro_correlation(map: MapSpec, a: SetType, b: SetType, horizon: int) -> float:
    """Running average ``(1/N) sum_{k<N} C(T**k B, A)``."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    return float(np.mean(correlation_series(map, a, b, horizon)))


# ---------------------------------------------------------------- densities

@dataclass(frozen=True, eq=False)
class GridDensity:
    """Nonnegative cell values with mean one, i.e. integral one on the torus."""

    resolution: int
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True).reshape(-1)
        if v.size != 4**self.resolution:
            raise ValueError(f"expected {4**self.resolution} values, got {v.size}")
        if v.min(initial=0.0) < 0:
            raise ValueError("density values must be nonnegative")
        if abs(v.mean() - 1.0) > 1e-12:
            raise ValueError(f"density mean must be 1 (got {v.mean():.15g})")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_set(cls, s: CellSet) -> "GridDensity":
        """Normalized indicator ``1_S / mu(S)``."""
        if s.count() == 0:
            raise ValueError("empty set has no normalized density")
        return cls(s.resolution, s.indicator() * (4**s.resolution / s.count()))

    @classmethod
    def uniform(cls, resolution: int) -> "GridDensity":
        return cls(resolution, np.ones(4**resolution))


def _grid_values(f) -> tuple[int, np.ndarray]:
    if isinstance(f, GridDensity):
        return f.resolution, f.values
    if isinstance(f, CellSet):
        return f.resolution, f.indicator()
    v = np.asarray(f, dtype=float).reshape(-1)
    k = int(round(np.log(v.size) / np.log(4))) if v.size else 0
    if 4**k != v.size:
        raise ValueError("grid function length must be a power of 4")
    return k, v


def grid_inner(f, g) -> float:
    """``<f, g> = (1/4**k) sum_c f_c g_c``."""
    kf, vf = _grid_values(f)
    kg, vg = _grid_values(g)
    if kf != kg:
        raise ResolutionMismatch(f"resolutions {kf} and {kg}")
    return float(np.dot(vf, vg) / vf.size)


def density_correlation(f, g) -> float:
    """``<f, g> - <f, 1><1, g>`` for grid functions (densities, indicators or arrays)."""
    kf, vf = _grid_values(f)
    kg, vg = _grid_values(g)
    if kf != kg:
        raise ResolutionMismatch(f"resolutions {kf} and {kg}")
    return float(np.dot(vf, vg) / vf.size - vf.mean() * vg.mean())


def frobenius_perron(map: MapSpec, f, steps: int = 1):
    """Push-forward ``P f = f o T**-1``; returns the input's type."""
    k, v = _grid_values(f)
    perm = map.permutation(k, steps)
    out = np.empty_like(v)
    out[perm] = v
    return GridDensity(k, out) if isinstance(f, GridDensity) else out


def koopman(map: MapSpec, g, steps: int = 1):
    """Composition ``U g = g o T**steps``; ``steps`` may be negative."""
    k, v = _grid_values(g)
    out = v[map.permutation(k, steps)]
    return GridDensity(k, out) if isinstance(g, GridDensity) else out


# ---------------------------------------------------------------- sigma sample

@dataclass(frozen=True)
class SigmaSample:
    """Truncated enumeration of the future sub-sigma-algebra of the generators.

    ``produced`` holds ``(label, set)`` pairs: the single images
    ``T**(n+j) A_i`` (``j < max_terms``), their pairwise intersections and
    differences, and a seeded choice of triple combinations.
    """

    generators: tuple
    n: int
    max_terms: int
    seed: int
    produced: tuple = field(default=())

    @property
    def sets(self):
        return [s for _, s in self.produced]

    @property
    def labels(self):
        return [lab for lab, _ in self.produced]


def generate_sigma_sample(base_sets, map: MapSpec, n: int, J: int, seed: int = 0,
                          max_sets: int = 64, n_triples: int = 8) -> SigmaSample:
    base_sets = list(base_sets)
    if J < 1:
        raise ValueError("J must be >= 1")
    singles = []
    for i, a in enumerate(base_sets):
        for j in range(J):
            singles.append((f"T^{n + j}A{i + 1}", apply_map(map, a, n + j)))
    produced = list(singles)
    for (la, a), (lb, b) in itertools.combinations(singles, 2):
        produced += [(f"({la} & {lb})", a & b), (f"({la} - {lb})", a - b), (f"({lb} - {la})", b - a)]
    triples = list(itertools.combinations(range(len(singles)), 3))
    if triples:
        rng = make_rng(seed)
        picks = rng.choice(len(triples), size=min(n_triples, len(triples)), replace=False)
        for t in sorted(int(x) for x in picks):
            (la, a), (lb, b), (lc, c) = (singles[q] for q in triples[t])
            produced += [
                (f"({la} & {lb} & {lc})", a & b & c),
                (f"(({la} - {lb}) | {lc})", (a - b) | c),
            ]
    return SigmaSample(tuple(base_sets), int(n), int(J), int(seed), tuple(produced[:max_sets]))


# ---------------------------------------------------------------- classifier

@dataclass(frozen=True)
class ClassifierParams:
    N_cesaro: int = 10_000
    N_mix: int = 10_000
    n0_K: int = 3
    r: int | None = None
    J: int = 2
    eps: float = 1e-2
    seed: int = 0

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def classify_set_level(map: MapSpec, base_sets, params: ClassifierParams | None = None) -> HierarchyVerdict:
    """Run the four classical level tests on ``base_sets``.

    Pairs are ``(A_i, A_j)`` with ``i < j``; the later set is evolved:
    ``C(T**n A_j, A_i)``. For the Kolmogorov test ``A_0 = base_sets[0]`` and
    the generators are the next ``r`` base sets. Every verdict means "not
    falsified at this truncation". A level's residual is never below the
    residual of the level it implies.
    """
    p = params or ClassifierParams()
    base_sets = list(base_sets)
    if len(base_sets) < 2:
        raise InsufficientSets("need at least two base sets")
    for s in base_sets[1:]:
        _same_kind(base_sets[0], s)
    pairs = list(itertools.combinations(range(len(base_sets)), 2))
    horizon = max(p.N_mix, p.N_cesaro) + 1

    ergodic_res = mixing_res = bernoulli_res = 0.0
    for i, j in pairs:
        series = correlation_series(map, base_sets[i], base_sets[j], horizon)
        ergodic_res = max(ergodic_res, abs(float(np.mean(series[: p.N_cesaro]))))
        tail = series[p.N_mix // 2 : p.N_mix + 1]
        mixing_res = max(mixing_res, float(np.abs(tail).max()))
        bernoulli_res = max(bernoulli_res, float(np.abs(series[: p.N_mix + 1]).max()))

    r = p.r if p.r is not None else len(base_sets) - 1
    a0, gens = base_sets[0], base_sets[1 : 1 + r]
    sample = generate_sigma_sample(gens, map, p.n0_K, p.J, seed=p.seed)
    k_res = max(abs(set_correlation(map, a0, b, 0)) for b in sample.sets)

    # Each level's condition implies the one below it, so each residual
    # folds in the one below; the raw per-level values stay in parameters.
    mix_f = max(mixing_res, ergodic_res)
    k_f = max(k_res, mix_f)
    ber_f = max(bernoulli_res, k_f)
    params = p.as_dict()
    trunc = {"n0": p.n0_K, "r": len(gens), "J": p.J, "sample_size": len(sample.produced), "seed": p.seed,
             "sample_residual": k_res}
    levels = (
        LevelResult.from_residual("ergodic", ergodic_res, p.eps, {"N_cesaro": p.N_cesaro, "pairs": len(pairs)}),
        LevelResult.from_residual("mixing", mix_f, p.eps,
                                  {"window": [p.N_mix // 2, p.N_mix], "pairs": len(pairs), "tail_residual": mixing_res}),
        LevelResult.from_residual("kolmogorov", k_f, p.eps, trunc,
                                  notes=("not falsified at truncation (n0, r, J)",)),
        LevelResult.from_residual("bernoulli", ber_f, p.eps,
                                  {"range": [0, p.N_mix], "pairs": len(pairs), "series_residual": bernoulli_res}),
    )
    return HierarchyVerdict(levels, p.eps, notes=(f"map={map.kind}", f"params={params}"))
