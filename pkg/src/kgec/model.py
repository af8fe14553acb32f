"""Complex-valued entity/relation embeddings: storage, the bilinear score,
box projection, and the binary checkpoint format.

Embeddings are kept as four separate real matrices (real and imaginary
components of entities and relations) so the four-term score expansion reads
each component contiguously.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CHECKPOINT_MAGIC = b"KGEC1"
_HEADER = struct.Struct("<4I")  # n, m, d, precision bits


@dataclass
class ModelParams:
    """Entity and relation embedding matrices.

    ``re_e``/``im_e`` are (n, d) real/imaginary entity components; after any
    projection call their entries lie in [0, 1]. ``re_r``/``im_r`` are (m, d)
    unconstrained relation components.
    """

    re_e: np.ndarray
    im_e: np.ndarray
    re_r: np.ndarray
    im_r: np.ndarray

    @property
    def n_entities(self) -> int:
        return self.re_e.shape[0]

    @property
    def n_relations(self) -> int:
        return self.re_r.shape[0]

    @property
    def d(self) -> int:
        return self.re_e.shape[1]

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.re_e.copy(), self.im_e.copy(), self.re_r.copy(), self.im_r.copy()
        )

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(
            self.re_e.astype(dtype),
            self.im_e.astype(dtype),
            self.re_r.astype(dtype),
            self.im_r.astype(dtype),
        )


def init_params(n: int, m: int, d: int, seed: int) -> ModelParams:
    """Draw initial embeddings deterministically from ``seed``.

    Entity components are uniform in [0, 1], so the box constraint holds from
    the first step. Relation components are zero-mean normal with scale
    1/sqrt(d), keeping initial scores O(1).
    """
    if n < 1 or m < 1 or d < 1:
        raise ValueError(f"sizes must be at least 1, got n={n}, m={m}, d={d}")
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(d)
    return ModelParams(
        re_e=rng.uniform(0.0, 1.0, size=(n, d)),
        im_e=rng.uniform(0.0, 1.0, size=(n, d)),
        re_r=rng.normal(0.0, scale, size=(m, d)),
        im_r=rng.normal(0.0, scale, size=(m, d)),
    )


def _check_entity(params: ModelParams, idx: int) -> None:
    if not 0 <= idx < params.n_entities:
        raise IndexError(f"entity id {idx} out of range [0, {params.n_entities})")


def _check_relation(params: ModelParams, idx: int) -> None:
    if not 0 <= idx < params.n_relations:
        raise IndexError(f"relation id {idx} out of range [0, {params.n_relations})")


def score_triple(params: ModelParams, triple) -> float:
    """Bilinear score of one triple.

    Equals Re(<head, rel, conj(tail)>), computed as the four-term expansion
    over real and imaginary components. Higher scores mean the triple is more
    likely to hold; the function is asymmetric in head and tail.
    """
    head, rel, tail = triple
    _check_entity(params, head)
    _check_relation(params, rel)
    _check_entity(params, tail)
    h_re, h_im = params.re_e[head], params.im_e[head]
    r_re, r_im = params.re_r[rel], params.im_r[rel]
    t_re, t_im = params.re_e[tail], params.im_e[tail]
    return float(
        np.dot(h_re * r_re, t_re)
        + np.dot(h_im * r_re, t_im)
        + np.dot(h_re * r_im, t_im)
        - np.dot(h_im * r_im, t_re)
    )


def score_batch(
    params: ModelParams,
    heads: np.ndarray,
    rels: np.ndarray,
    tails: np.ndarray,
) -> np.ndarray:
    """Vectorized :func:`score_triple` over id arrays of equal length."""
    h_re, h_im = params.re_e[heads], params.im_e[heads]
    r_re, r_im = params.re_r[rels], params.im_r[rels]
    t_re, t_im = params.re_e[tails], params.im_e[tails]
    return (
        (h_re * r_re * t_re)
        + (h_im * r_re * t_im)
        + (h_re * r_im * t_im)
        - (h_im * r_im * t_re)
    ).sum(axis=1)


def score_all_heads(params: ModelParams, rel: int, tail: int) -> np.ndarray:
    """Scores of (e, rel, tail) for every entity e, as an (n,) vector."""
    _check_relation(params, rel)
    _check_entity(params, tail)
    r_re, r_im = params.re_r[rel], params.im_r[rel]
    t_re, t_im = params.re_e[tail], params.im_e[tail]
    coeff_re = r_re * t_re + r_im * t_im
    coeff_im = r_re * t_im - r_im * t_re
    return params.re_e @ coeff_re + params.im_e @ coeff_im


def score_all_tails(params: ModelParams, head: int, rel: int) -> np.ndarray:
    """Scores of (head, rel, e) for every entity e, as an (n,) vector."""
    _check_entity(params, head)
    _check_relation(params, rel)
    h_re, h_im = params.re_e[head], params.im_e[head]
    r_re, r_im = params.re_r[rel], params.im_r[rel]
    coeff_re = h_re * r_re - h_im * r_im
    coeff_im = h_im * r_re + h_re * r_im
    return params.re_e @ coeff_re + params.im_e @ coeff_im


def inverse_relation_rep(params: ModelParams, rel: int) -> tuple[np.ndarray, np.ndarray]:
    """Representation of the inverse relation: the complex conjugate of ``rel``.

    Returns copies of (real part, negated imaginary part); scoring a triple
    with the conjugate and swapped entities reproduces the original score.
    """
    _check_relation(params, rel)
    return params.re_r[rel].copy(), -params.im_r[rel]


def project_entities(params: ModelParams, rows: np.ndarray | None = None) -> ModelParams:
    """Clamp entity components into [0, 1] in place (truncation projection).

    Relation components are untouched. ``rows`` restricts the projection to a
    subset of entity ids, which is enough after a sparse gradient step.
    """
    if rows is None:
        np.clip(params.re_e, 0.0, 1.0, out=params.re_e)
        np.clip(params.im_e, 0.0, 1.0, out=params.im_e)
    else:
        params.re_e[rows] = np.clip(params.re_e[rows], 0.0, 1.0)
        params.im_e[rows] = np.clip(params.im_e[rows], 0.0, 1.0)
    return params


_PRECISION_DTYPES = {64: np.dtype("<f8"), 32: np.dtype("<f4")}


def save_checkpoint(
    params: ModelParams,
    path: str | Path,
    entity_vocab_path: str | None = None,
    relation_vocab_path: str | None = None,
) -> None:
    """Write a binary checkpoint plus a JSON sidecar manifest.

    Layout: magic ``KGEC1``, then n, m, d and the precision in bits as
    little-endian uint32, then the four embedding blocks (entity real,
    entity imaginary, relation real, relation imaginary) row-major in
    little-endian floats of the stored precision. Vocabulary dumps are
    referenced by path in ``<path>.manifest.json``, not embedded.
    """
    itemsize = params.re_e.dtype.itemsize
    precision = itemsize * 8
    if precision not in _PRECISION_DTYPES:
        raise ValueError(f"unsupported parameter dtype {params.re_e.dtype}")
    dtype = _PRECISION_DTYPES[precision]
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(_HEADER.pack(params.n_entities, params.n_relations, params.d, precision))
        for block in (params.re_e, params.im_e, params.re_r, params.im_r):
            fh.write(np.ascontiguousarray(block, dtype=dtype).tobytes())
    sidecar = {
        "checkpoint": path.name,
        "precision": precision,
        "entity_vocab": entity_vocab_path,
        "relation_vocab": relation_vocab_path,
    }
    with open(str(path) + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")


def load_checkpoint(path: str | Path) -> tuple[ModelParams, dict]:
    """Read a checkpoint written by :func:`save_checkpoint`.

    Returns the parameters in their stored precision and the sidecar manifest
    (an empty dict when the sidecar is missing).
    """
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a kgec checkpoint (bad magic {magic!r})")
        n, m, d, precision = _HEADER.unpack(fh.read(_HEADER.size))
        if precision not in _PRECISION_DTYPES:
            raise ValueError(f"{path}: unsupported precision flag {precision}")
        dtype = _PRECISION_DTYPES[precision]
        blocks = []
        for rows in (n, n, m, m):
            count = rows * d
            buf = fh.read(count * dtype.itemsize)
            if len(buf) != count * dtype.itemsize:
                raise ValueError(f"{path}: truncated checkpoint")
            blocks.append(np.frombuffer(buf, dtype=dtype).reshape(rows, d).copy())
    params = ModelParams(*blocks)
    sidecar_path = Path(str(path) + ".manifest.json")
    sidecar: dict = {}
    if sidecar_path.exists():
        with open(sidecar_path, "r", encoding="utf-8") as fh:
            sidecar = json.load(fh)
    return params, sidecar
