"""Prompt contrastive loss over a batch of augmented embeddings.

For an anchor ``i`` of class ``y`` with positives ``S+`` (same class,
anchor excluded) and negatives ``S-`` (other classes), similarities
``s(a, b) = cos(a, b) / tau`` and

    L_i = -(alpha_y * log L1 + beta_y / |S+| * sum_{j in S+} log L2_ij)
    L1    = e^{s(z_i, mu_y)} / (e^{s(z_i, mu_y)} + sum_{j in S-} e^{s(z_i, mu_{y_j})})
    L2_ij = e^{s(z_i, z_j)} / (sum_{j' in S+} e^{s(z_i, z_j')} + sum_{k in S-} e^{s(z_i, z_k)})

The prototype term sums over negative *samples*, so a class with several
samples in the batch contributes once per sample. Prototypes are constants.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigurationError, InputError, StateError
from .similarity import normalize


@dataclass(frozen=True)
class LossWeights:
    alpha: float
    beta: float


def class_weights(n_prev: int, n_batch: int) -> LossWeights:
    """Weight of the prototype term grows with the samples the prototype already holds."""
    if n_batch < 1:
        raise InputError("a class in the batch must have at least one sample")
    if n_prev < 0:
        raise InputError("historical count cannot be negative")
    total = n_prev + n_batch
    return LossWeights(n_prev / total, n_batch / total)


@dataclass(frozen=True)
class BatchView:
    embeddings: np.ndarray  # (B, d)
    labels: np.ndarray  # (B,)

    def positives(self, i: int) -> np.ndarray:
        mask = self.labels == self.labels[i]
        mask[i] = False
        return np.flatnonzero(mask)

    def negatives(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.labels != self.labels[i])


def _check_tau(tau):
    if not tau > 0:
        raise ConfigurationError(f"temperature must be positive, got {tau}")


def loss_for_anchor(
    batch: BatchView,
    i: int,
    prototypes: Mapping[int, np.ndarray],
    weights: Mapping[int, LossWeights],
    tau: float,
) -> float:
    _check_tau(tau)
    z = batch.embeddings
    y = int(batch.labels[i])
    if y not in prototypes:
        raise StateError(f"anchor class {y} has no prototype")
    w = weights[y]
    pos, neg = batch.positives(i), batch.negatives(i)
    zi = normalize(z[i])

    def s(v):
        return float(zi @ normalize(v)) / tau

    own = s(prototypes[y])
    log_l1 = own - logsumexp([own] + [s(prototypes[int(batch.labels[j])]) for j in neg])
    loss = -w.alpha * log_l1
    if len(pos):
        sims = {j: s(z[j]) for j in np.concatenate([pos, neg])}
        denom = logsumexp(list(sims.values()))
        loss -= w.beta / len(pos) * sum(sims[j] - denom for j in pos)
    return float(loss)


def batch_loss_and_embedding_grads(
    batch: BatchView,
    prototypes: Mapping[int, np.ndarray],
    weights: Mapping[int, LossWeights],
    tau: float,
) -> tuple[float, np.ndarray]:
    """Mean anchor loss and its exact gradient with respect to every embedding.

    Returns:
        (loss, dL/dz) with dL/dz of shape (B, d).
    """
    _check_tau(tau)
    z = np.asarray(batch.embeddings, dtype=np.float64)
    labels = np.asarray(batch.labels)
    B = z.shape[0]
    missing = set(map(int, labels)) - set(map(int, prototypes))
    if missing:
        raise StateError(f"classes {sorted(missing)} have no prototype")

    norms = np.linalg.norm(z, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise InputError("zero-norm embedding")
    zh = z / norms
    mh = normalize(np.stack([prototypes[int(c)] for c in labels]))  # row j: prototype of sample j's class
    alpha = np.array([weights[int(c)].alpha for c in labels])
    beta = np.array([weights[int(c)].beta for c in labels])

    same = labels[:, None] == labels[None, :]
    eye = np.eye(B, dtype=bool)
    pos = same & ~eye
    n_pos = pos.sum(1)

    # prototype term: logits over {own prototype} U {prototypes of negative samples}
    P = zh @ mh.T / tau
    p_mask = ~same | eye
    p_logits = np.where(p_mask, P, -np.inf)
    p_lse = logsumexp(p_logits, axis=1)
    log_l1 = np.diag(P) - p_lse
    p_soft = np.where(p_mask, np.exp(p_logits - p_lse[:, None]), 0.0)

    # sample term: logits over every other sample in the batch
    S = zh @ zh.T / tau
    s_logits = np.where(eye, -np.inf, S)
    s_lse = logsumexp(s_logits, axis=1) if B > 1 else np.zeros(B)
    s_soft = np.where(eye, 0.0, np.exp(s_logits - s_lse[:, None])) if B > 1 else np.zeros((B, B))
    coef = np.divide(beta, n_pos, out=np.zeros(B), where=n_pos > 0)
    term2 = coef * np.where(pos, S - s_lse[:, None], 0.0).sum(1)

    loss = float(np.mean(-alpha * log_l1 - term2))

    # dL/dP and dL/dS, scaled by 1/B for the mean
    gP = -alpha[:, None] * (eye - p_soft) / B
    gS = -coef[:, None] * (pos - n_pos[:, None] * s_soft) / B
    dzh = ((gS + gS.T) @ zh + gP @ mh) / tau
    dz = (dzh - np.sum(dzh * zh, axis=1, keepdims=True) * zh) / norms
    return loss, dz
