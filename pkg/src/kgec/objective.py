"""Training objective: logistic triple loss, entailment penalties on relation
representations, batch-local L2, and their exact sparse gradients.

The entailment constraints enter as closed-form penalties: for a constraint
p -> q with confidence c, the penalty is
``c * sum(max(0, Re(p*) - Re(q))) + c * sum((Im(p*) - Im(q))**2)``
where p* is p itself, or its complex conjugate when the premise is inverted.
This is the analytic optimum of the slack-variable formulation, so no slack
variables are materialized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit

from .data import Entailment, Triple
from .model import ModelParams


@dataclass(frozen=True)
class TrainingExample:
    """A triple with a +1 (observed) or -1 (corrupted) label."""

    triple: Triple
    label: int

    def __post_init__(self) -> None:
        if self.label not in (1, -1):
            raise ValueError(f"label must be +1 or -1, got {self.label}")


@dataclass
class LossBreakdown:
    """Loss components of one batch.

    ``entailment_penalty`` and ``l2`` are stored unweighted; ``total``
    applies the penalty coefficient and the L2 coefficient.
    """

    logistic: float
    entailment_penalty: float
    l2: float
    total: float


@dataclass
class SparseGrads:
    """Gradients restricted to the touched entity and relation rows.

    ``ent_ids``/``rel_ids`` are sorted unique id vectors; the value arrays
    hold one gradient row per id for the real and imaginary components.
    """

    ent_ids: np.ndarray
    ent_re: np.ndarray
    ent_im: np.ndarray
    rel_ids: np.ndarray
    rel_re: np.ndarray
    rel_im: np.ndarray

    def blocks(self):
        return (self.ent_re, self.ent_im, self.rel_re, self.rel_im)

    def global_norm(self) -> float:
        """Euclidean norm over every stored gradient entry."""
        total = 0.0
        for block in self.blocks():
            total += float(np.sum(block * block))
        return float(np.sqrt(total))

    def clip_global_norm_(self, cap: float) -> float:
        """Rescale in place so the global norm is at most ``cap``.

        Returns the norm before clipping.
        """
        norm = self.global_norm()
        if norm > cap:
            factor = cap / norm
            for block in self.blocks():
                block *= factor
        return norm


def softplus(z: np.ndarray) -> np.ndarray:
    """log(1 + exp(z)) without overflow for large |z|."""
    z = np.asarray(z, dtype=float)
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _examples_to_arrays(examples: Sequence[TrainingExample]):
    heads = np.fromiter((ex.triple.head for ex in examples), dtype=np.int64, count=len(examples))
    rels = np.fromiter((ex.triple.rel for ex in examples), dtype=np.int64, count=len(examples))
    tails = np.fromiter((ex.triple.tail for ex in examples), dtype=np.int64, count=len(examples))
    labels = np.fromiter((ex.label for ex in examples), dtype=np.float64, count=len(examples))
    return heads, rels, tails, labels


def logistic_term(params: ModelParams, examples: Sequence[TrainingExample]) -> float:
    """Sum of log(1 + exp(-label * score)) over the examples."""
    if not examples:
        return 0.0
    heads, rels, tails, labels = _examples_to_arrays(examples)
    phi = _scores(params, heads, rels, tails)
    return float(softplus(-labels * phi).sum())


def _scores(params, heads, rels, tails):
    h_re, h_im = params.re_e[heads], params.im_e[heads]
    r_re, r_im = params.re_r[rels], params.im_r[rels]
    t_re, t_im = params.re_e[tails], params.im_e[tails]
    return (
        h_re * r_re * t_re
        + h_im * r_re * t_im
        + h_re * r_im * t_im
        - h_im * r_im * t_re
    ).sum(axis=1)


def _premise_components(params: ModelParams, ent: Entailment):
    """Real/imaginary parts of the premise representation, conjugated when
    the premise is inverted."""
    re_p = params.re_r[ent.premise_rel]
    im_p = params.im_r[ent.premise_rel]
    if ent.premise_inverted:
        im_p = -im_p
    return re_p, im_p


def entailment_penalty(params: ModelParams, ents: Iterable[Entailment]) -> float:
    """Total constraint violation over the entailment set (unweighted).

    Zero exactly when every constraint satisfies the sufficient ordering
    condition: premise real part entrywise at most the conclusion real part,
    imaginary parts equal (after conjugating inverted premises).
    """
    total = 0.0
    for ent in ents:
        re_p, im_p = _premise_components(params, ent)
        d_re = re_p - params.re_r[ent.conclusion_rel]
        d_im = im_p - params.im_r[ent.conclusion_rel]
        total += ent.confidence * (
            float(np.maximum(d_re, 0.0).sum()) + float(np.dot(d_im, d_im))
        )
    return total


def l2_term(
    params: ModelParams,
    entity_rows: Iterable[int],
    relation_rows: Iterable[int],
) -> float:
    """Sum of squares over the given entity and relation rows (unweighted)."""
    ent_ids = np.asarray(sorted(set(entity_rows)), dtype=np.int64)
    rel_ids = np.asarray(sorted(set(relation_rows)), dtype=np.int64)
    total = 0.0
    if ent_ids.size:
        total += float(np.sum(params.re_e[ent_ids] ** 2))
        total += float(np.sum(params.im_e[ent_ids] ** 2))
    if rel_ids.size:
        total += float(np.sum(params.re_r[rel_ids] ** 2))
        total += float(np.sum(params.im_r[rel_ids] ** 2))
    return total


def loss_and_gradient(
    params: ModelParams,
    batch: Sequence[TrainingExample],
    ents: Sequence[Entailment],
    mu: float,
    eta: float,
) -> tuple[LossBreakdown, SparseGrads]:
    """Batch loss and its exact gradient over the touched parameter rows.

    The touched set is every entity/relation row appearing in the batch plus
    every relation row named by an entailment; L2 regularization covers
    exactly that set. Rows outside it are absent from the sparse gradient.
    The hinge-like real-part penalty uses subgradient 0 at the kink, so
    satisfied constraints stay inert.
    """
    heads, rels, tails, labels = _examples_to_arrays(batch)
    return loss_and_gradient_arrays(params, heads, rels, tails, labels, ents, mu, eta)


def loss_and_gradient_arrays(
    params: ModelParams,
    heads: np.ndarray,
    rels: np.ndarray,
    tails: np.ndarray,
    labels: np.ndarray,
    ents: Sequence[Entailment],
    mu: float,
    eta: float,
) -> tuple[LossBreakdown, SparseGrads]:
    """Array-native core of :func:`loss_and_gradient` (hot path)."""
    d = params.d
    ent_rel_ids = [e.premise_rel for e in ents] + [e.conclusion_rel for e in ents]
    ent_ids = np.unique(np.concatenate([heads, tails])) if heads.size else np.empty(0, np.int64)
    rel_ids = np.unique(
        np.concatenate([rels, np.asarray(ent_rel_ids, dtype=np.int64)])
        if ent_rel_ids
        else rels
    )

    g_ent_re = np.zeros((ent_ids.size, d))
    g_ent_im = np.zeros((ent_ids.size, d))
    g_rel_re = np.zeros((rel_ids.size, d))
    g_rel_im = np.zeros((rel_ids.size, d))

    logistic = 0.0
    if heads.size:
        pos_h = np.searchsorted(ent_ids, heads)
        pos_t = np.searchsorted(ent_ids, tails)
        pos_r = np.searchsorted(rel_ids, rels)

        h_re, h_im = params.re_e[heads], params.im_e[heads]
        r_re, r_im = params.re_r[rels], params.im_r[rels]
        t_re, t_im = params.re_e[tails], params.im_e[tails]

        # Per-example score derivatives; the relation pair doubles as the
        # score itself: phi = <d_rel_re, r_re> + <d_rel_im, r_im>.
        d_rel_re = h_re * t_re
        d_rel_re += h_im * t_im
        d_rel_im = h_re * t_im
        d_rel_im -= h_im * t_re
        phi = np.einsum("bd,bd->b", d_rel_re, r_re)
        phi += np.einsum("bd,bd->b", d_rel_im, r_im)

        z = -labels * phi
        logistic = float(softplus(z).sum())
        dphi = (-labels * expit(z))[:, None]

        d_head_re = r_re * t_re
        d_head_re += r_im * t_im
        d_head_im = r_re * t_im
        d_head_im -= r_im * t_re
        d_tail_re = h_re * r_re
        d_tail_re -= h_im * r_im
        d_tail_im = h_im * r_re
        d_tail_im += h_re * r_im
        for block in (d_rel_re, d_rel_im, d_head_re, d_head_im, d_tail_re, d_tail_im):
            block *= dphi
        np.add.at(g_ent_re, pos_h, d_head_re)
        np.add.at(g_ent_im, pos_h, d_head_im)
        np.add.at(g_ent_re, pos_t, d_tail_re)
        np.add.at(g_ent_im, pos_t, d_tail_im)
        np.add.at(g_rel_re, pos_r, d_rel_re)
        np.add.at(g_rel_im, pos_r, d_rel_im)

    penalty = 0.0
    for ent in ents:
        sign = -1.0 if ent.premise_inverted else 1.0
        p = int(np.searchsorted(rel_ids, ent.premise_rel))
        q = int(np.searchsorted(rel_ids, ent.conclusion_rel))
        d_re = params.re_r[ent.premise_rel] - params.re_r[ent.conclusion_rel]
        d_im = sign * params.im_r[ent.premise_rel] - params.im_r[ent.conclusion_rel]
        penalty += ent.confidence * (
            float(np.maximum(d_re, 0.0).sum()) + float(np.dot(d_im, d_im))
        )
        if mu != 0.0:
            active = (d_re > 0.0).astype(float)
            g_rel_re[p] += mu * ent.confidence * active
            g_rel_re[q] -= mu * ent.confidence * active
            g_rel_im[p] += mu * ent.confidence * 2.0 * d_im * sign
            g_rel_im[q] -= mu * ent.confidence * 2.0 * d_im

    l2 = 0.0
    if ent_ids.size:
        l2 += float(np.sum(params.re_e[ent_ids] ** 2))
        l2 += float(np.sum(params.im_e[ent_ids] ** 2))
        if eta != 0.0:
            g_ent_re += 2.0 * eta * params.re_e[ent_ids]
            g_ent_im += 2.0 * eta * params.im_e[ent_ids]
    if rel_ids.size:
        l2 += float(np.sum(params.re_r[rel_ids] ** 2))
        l2 += float(np.sum(params.im_r[rel_ids] ** 2))
        if eta != 0.0:
            g_rel_re += 2.0 * eta * params.re_r[rel_ids]
            g_rel_im += 2.0 * eta * params.im_r[rel_ids]

    breakdown = LossBreakdown(
        logistic=logistic,
        entailment_penalty=penalty,
        l2=l2,
        total=logistic + mu * penalty + eta * l2,
    )
    grads = SparseGrads(ent_ids, g_ent_re, g_ent_im, rel_ids, g_rel_re, g_rel_im)
    return breakdown, grads
