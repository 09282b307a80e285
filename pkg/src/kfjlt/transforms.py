"""Random sketching operators built from subsampled, sign-flipped DFTs.

Three constructions share the mixing stage ``F D_xi`` (unitary DFT after a
random sign flip):

* ``FjltOperator``    -- ``sqrt(n/m) S F D_xi`` on a flat space of size n.
* ``KfjltOperator``   -- ``sqrt(N/m) S (F_d D_d (x) ... (x) F_1 D_1)`` on a
  product space; rows are sampled from the full Kronecker mixing, and the
  fast path on Kronecker vectors mixes each factor once and traces sampled
  linear indices back to per-factor indices.
* ``FactoredKfjltOperator`` -- the sample-before-Kronecker alternative
  ``(x)_k sqrt(n_k/m_k) S_k F_k D_k``; its output is the Kronecker product of
  the per-factor sketches.

Randomness: an operator built via ``from_seed`` expands one seed into d+1
deterministic sub-streams (factor k's signs use sub-stream k, the row sample
uses sub-stream d+1), so a degree-1 KFJLT and an FJLT built from the same
seed share signs and rows exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kron import (
    KroneckerVector,
    Shape,
    _check_cap,
    kron_materialize,
    multi_index_array,
)


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def seed_children(seed, count: int) -> list[np.random.SeedSequence]:
    """First ``count`` spawn children of a seed, derived statelessly.

    Unlike ``SeedSequence.spawn`` this never mutates the parent, so building
    two operators from the same seed object yields identical randomness.
    """
    ss = as_seed_sequence(seed)
    key = tuple(ss.spawn_key)
    return [
        np.random.SeedSequence(entropy=ss.entropy, spawn_key=key + (k,))
        for k in range(count)
    ]


def _generator(seed_seq: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_seq))


@dataclass(frozen=True)
class SignVector:
    """Vector of independent uniform +-1 entries, with seed provenance."""

    signs: np.ndarray
    provenance: str | None = None

    def __post_init__(self):
        signs = np.asarray(self.signs, dtype=np.float64)
        if signs.ndim != 1 or not np.all(np.abs(signs) == 1.0):
            raise ValueError("signs must be a 1-D vector of +-1 entries")
        object.__setattr__(self, "signs", signs)

    def __len__(self):
        return self.signs.size


def rademacher(n: int, rng: np.random.Generator, provenance: str | None = None) -> SignVector:
    """Draw a fresh +-1 sign vector of length n."""
    return SignVector(rng.integers(0, 2, size=n).astype(np.float64) * 2.0 - 1.0, provenance)


def unitary_dft(x) -> np.ndarray:
    """Unitary DFT: ``y[j] = n**-0.5 * sum_k x[k] exp(-2 pi i j k / n)``."""
    x = np.asarray(x)
    if x.shape[-1] == 0:
        raise ValueError("empty input")
    return np.fft.fft(x, norm="ortho")


def unitary_idft(y) -> np.ndarray:
    """Inverse of :func:`unitary_dft` (conjugate kernel, same scaling)."""
    y = np.asarray(y)
    if y.shape[-1] == 0:
        raise ValueError("empty input")
    return np.fft.ifft(y, norm="ortho")


def dft_matrix(n: int) -> np.ndarray:
    """Dense unitary DFT matrix (oracle helper)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return np.fft.fft(np.eye(n), axis=0, norm="ortho")


def mix_factor(x, sv: SignVector) -> np.ndarray:
    """``F D_xi x``: sign-flip then unitary DFT. Norm-preserving."""
    x = np.asarray(x)
    if x.shape[0] != len(sv):
        raise ValueError(f"length mismatch: vector {x.shape[0]} vs signs {len(sv)}")
    if x.ndim == 1:
        return unitary_dft(sv.signs * x)
    # Column-wise mixing of a matrix (each column is one vector).
    return np.fft.fft(sv.signs[:, None] * x, axis=0, norm="ortho")


def _sample_rows(n_total: int, m: int, rng: np.random.Generator, replacement: bool) -> np.ndarray:
    if m < 1:
        raise ValueError("m must be >= 1")
    if replacement:
        return rng.integers(0, n_total, size=m)
    if m > n_total:
        raise ValueError(f"cannot sample {m} rows from {n_total} without replacement")
    return rng.choice(n_total, size=m, replace=False)


def _check_scale(scale: float, m: int, n_total: int):
    if abs(scale * scale * m - n_total) > 1e-14 * n_total:
        raise ValueError("scale must satisfy scale^2 * m == N")


@dataclass(frozen=True)
class FjltOperator:
    """``sqrt(n/m) S F D_xi`` acting on vectors of length n."""

    n: int
    sign_vector: SignVector
    rows: np.ndarray
    scale: float

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.intp)
        object.__setattr__(self, "rows", rows)
        if len(self.sign_vector) != self.n:
            raise ValueError("sign vector length must equal n")
        if rows.ndim != 1 or rows.size < 1:
            raise ValueError("need at least one sampled row")
        if rows.min() < 0 or rows.max() >= self.n:
            raise ValueError("row indices out of range")
        _check_scale(self.scale, rows.size, self.n)

    @property
    def m(self) -> int:
        return self.rows.size

    @classmethod
    def from_seed(cls, seed, n: int, m: int, replacement: bool = True) -> "FjltOperator":
        kids = seed_children(seed, 2)
        sv = rademacher(n, _generator(kids[0]), "sub-stream 1")
        rows = _sample_rows(n, m, _generator(kids[1]), replacement)
        return cls(n, sv, rows, math.sqrt(n / m))

    @classmethod
    def exhaustive(cls, seed, n: int) -> "FjltOperator":
        """Every row sampled exactly once (scale 1); the map is unitary."""
        sv = rademacher(n, _generator(seed_children(seed, 2)[0]), "sub-stream 1")
        return cls(n, sv, np.arange(n), 1.0)


def fjlt_apply(op: FjltOperator, x) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (op.n,):
        raise ValueError(f"expected vector of length {op.n}, got {x.shape}")
    return op.scale * mix_factor(x, op.sign_vector)[op.rows]


@dataclass(frozen=True)
class KfjltOperator:
    """``sqrt(N/m) S ((x)_{k=d}^1 F_k D_k)`` on a product space."""

    shape: Shape
    sign_vectors: tuple[SignVector, ...]
    rows: np.ndarray
    scale: float

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.intp)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "sign_vectors", tuple(self.sign_vectors))
        if len(self.sign_vectors) != self.shape.ndim:
            raise ValueError("need one sign vector per factor")
        for sv, n in zip(self.sign_vectors, self.shape.dims):
            if len(sv) != n:
                raise ValueError("sign vector lengths must match the shape")
        if rows.ndim != 1 or rows.size < 1:
            raise ValueError("need at least one sampled row")
        if rows.min() < 0 or rows.max() >= self.shape.total:
            raise ValueError("row indices out of range")
        _check_scale(self.scale, rows.size, self.shape.total)

    @property
    def degree(self) -> int:
        return self.shape.ndim

    @property
    def m(self) -> int:
        return self.rows.size

    @classmethod
    def from_seed(cls, seed, shape: Shape, m: int, replacement: bool = True) -> "KfjltOperator":
        d = shape.ndim
        kids = seed_children(seed, d + 1)
        svs = tuple(
            rademacher(n, _generator(kids[k]), f"sub-stream {k + 1}")
            for k, n in enumerate(shape.dims)
        )
        rows = _sample_rows(shape.total, m, _generator(kids[d]), replacement)
        return cls(shape, svs, rows, math.sqrt(shape.total / m))

    @classmethod
    def exhaustive(cls, seed, shape: Shape) -> "KfjltOperator":
        """All N rows once each (scale 1): full unitary mixing, no sketching."""
        d = shape.ndim
        kids = seed_children(seed, d + 1)
        svs = tuple(
            rademacher(n, _generator(kids[k]), f"sub-stream {k + 1}")
            for k, n in enumerate(shape.dims)
        )
        return cls(shape, svs, np.arange(shape.total), 1.0)


def kfjlt_apply_kron(op: KfjltOperator, v: KroneckerVector) -> np.ndarray:
    """Fast path on Kronecker vectors.

    Mixes each factor once (cost ``sum_k n_k log n_k``), then for each sampled
    row traces the linear index back to per-factor indices and multiplies the
    d looked-up mixed entries. The length-N vector is never formed.
    """
    if v.shape != op.shape:
        raise ValueError(f"shape mismatch: vector {v.shape.dims} vs operator {op.shape.dims}")
    mixed = [mix_factor(x, sv) for x, sv in zip(v.factors, op.sign_vectors)]
    coords = multi_index_array(op.shape, op.rows)
    out = mixed[0][coords[0]]
    for y, c in zip(mixed[1:], coords[1:]):
        out = out * y[c]
    return op.scale * out


def kfjlt_apply_dense(op: KfjltOperator, x) -> np.ndarray:
    """Apply the operator to an arbitrary vector of length N.

    Reshapes x as a d-way tensor (mode 1 fastest), mixes along every mode,
    and gathers the sampled entries.
    """
    x = np.asarray(x)
    if x.shape != (op.shape.total,):
        raise ValueError(f"expected vector of length {op.shape.total}, got {x.shape}")
    t = x.reshape(op.shape.dims, order="F")
    for axis, sv in enumerate(op.sign_vectors):
        bshape = [1] * op.degree
        bshape[axis] = op.shape.dims[axis]
        t = np.fft.fft(t * sv.signs.reshape(bshape), axis=axis, norm="ortho")
    return op.scale * t.reshape(-1, order="F")[op.rows]


@dataclass(frozen=True)
class FactoredKfjltOperator:
    """Sample-before-Kronecker variant: per-factor FJLTs, output Kronecker'd."""

    operators: tuple[FjltOperator, ...]
    shape: Shape = field(init=False)

    def __post_init__(self):
        ops = tuple(self.operators)
        if not ops:
            raise ValueError("need at least one factor operator")
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "shape", Shape(tuple(op.n for op in ops)))

    @property
    def m(self) -> int:
        return math.prod(op.m for op in self.operators)

    @classmethod
    def from_seed(cls, seed, shape: Shape, ms, replacement: bool = True) -> "FactoredKfjltOperator":
        ms = list(ms)
        d = shape.ndim
        if len(ms) != d:
            raise ValueError("need one row count per factor")
        kids = seed_children(seed, d + 1)
        row_kids = seed_children(kids[d], d)
        ops = []
        for k, (n, mk) in enumerate(zip(shape.dims, ms)):
            sv = rademacher(n, _generator(kids[k]), f"sub-stream {k + 1}")
            rows = _sample_rows(n, mk, _generator(row_kids[k]), replacement)
            ops.append(FjltOperator(n, sv, rows, math.sqrt(n / mk)))
        return cls(tuple(ops))


def factored_apply(op: FactoredKfjltOperator, v: KroneckerVector) -> np.ndarray:
    """Kronecker product of the per-factor FJLT outputs (length prod m_k)."""
    if v.shape != op.shape:
        raise ValueError(f"shape mismatch: vector {v.shape.dims} vs operator {op.shape.dims}")
    out = fjlt_apply(op.operators[0], v.factors[0])
    for fop, x in zip(op.operators[1:], v.factors[1:]):
        out = np.kron(fjlt_apply(fop, x), out)
    return out


def distortion_ratio(embedded_norm_sq: float, original_norm_sq: float) -> float:
    """``|embedded - original| / original``, the embedding figure of merit."""
    if original_norm_sq <= 0:
        raise ValueError("distortion undefined for the zero vector")
    return abs(embedded_norm_sq - original_norm_sq) / original_norm_sq


def _materialize_fjlt(op: FjltOperator) -> np.ndarray:
    return op.scale * dft_matrix(op.n)[op.rows] * op.sign_vector.signs[None, :]


def materialize_operator(op, cap: int | None = None) -> np.ndarray:
    """Dense ``m x N`` matrix of a sketching operator (oracle-only path)."""
    if isinstance(op, FjltOperator):
        _check_cap(op.n * op.m, cap, "materialized operator")
        return _materialize_fjlt(op)
    if isinstance(op, KfjltOperator):
        _check_cap(op.shape.total * op.m, cap, "materialized operator")
        u = dft_matrix(op.shape.dims[0])
        for n in op.shape.dims[1:]:
            u = np.kron(dft_matrix(n), u)
        zeta = kron_materialize(
            KroneckerVector(tuple(sv.signs for sv in op.sign_vectors)), cap=cap
        )
        return op.scale * u[op.rows] * zeta[None, :]
    if isinstance(op, FactoredKfjltOperator):
        _check_cap(op.shape.total * op.m, cap, "materialized operator")
        full = _materialize_fjlt(op.operators[0])
        for fop in op.operators[1:]:
            full = np.kron(_materialize_fjlt(fop), full)
        return full
    raise TypeError(f"cannot materialize {type(op).__name__}")
