"""Exact (non-approximated) t-SNE projection to two dimensions.

Per-point Gaussian bandwidths are calibrated by binary search so every
conditional distribution hits the target perplexity; affinities are
symmetrized and normalized, low-dimensional similarities use a Student-t
kernel with one degree of freedom, and optimization is plain gradient descent
with early exaggeration and a momentum switch. Deterministic given the seed.
"""

from __future__ import annotations

import logging

import numpy as np

from .errors import ValidationError

logger = logging.getLogger(__name__)

_P_MIN = 1e-12


def _squared_distances(x: np.ndarray) -> np.ndarray:
    sq = (x * x).sum(1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.fill_diagonal(d2, 0.0)
    return np.maximum(d2, 0.0)


def _entropy_and_probs(dist_row: np.ndarray, beta: float):
    p = np.exp(-dist_row * beta)
    sum_p = p.sum()
    if sum_p <= 0.0:
        return 0.0, np.zeros_like(p)
    h = np.log(sum_p) + beta * float((dist_row * p).sum()) / sum_p
    return h, p / sum_p

def joint_probabilities(
    x: np.ndarray,
    perplexity: float,
    tol: float = 1e-5,
    max_steps: int = 50,
) -> np.ndarray:
    """Symmetrized, normalized pairwise affinities for the given perplexity.

    Each point's Gaussian precision is found by bisection until the entropy
    of its conditional distribution matches log(perplexity) within ``tol``
    (at most ``max_steps`` halvings/doublings).
    """
    n = x.shape[0]
    d2 = _squared_distances(x)
    target = np.log(perplexity)
    cond = np.zeros((n, n))
    for i in range(n):
        row = np.delete(d2[i], i)
        beta, beta_min, beta_max = 1.0, -np.inf, np.inf
        h, p = _entropy_and_probs(row, beta)
        for _ in range(max_steps):
            if abs(h - target) < tol:
                break
            if h > target:
                beta_min = beta
                beta = beta * 2.0 if np.isinf(beta_max) else (beta + beta_max) / 2.0
            else:
                beta_max = beta
                beta = beta / 2.0 if np.isinf(beta_min) else (beta + beta_min) / 2.0
            h, p = _entropy_and_probs(row, beta)
        cond[i, np.arange(n) != i] = p
    p_joint = cond + cond.T
    p_joint /= p_joint.sum()
    p_joint = np.maximum(p_joint, _P_MIN)
    p_joint /= p_joint.sum()
    return p_joint


def _student_t_q(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    num = 1.0 / (1.0 + _squared_distances(y))
    np.fill_diagonal(num, 0.0)
    q = np.maximum(num / num.sum(), _P_MIN)
    return q, num


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    mask = ~np.eye(p.shape[0], dtype=bool)
    return float((p[mask] * np.log(p[mask] / q[mask])).sum())


def tsne(
    embeddings: np.ndarray,
    perplexity: float = 10.0,
    iterations: int = 1000,
    seed: int = 0,
    learning_rate: float = 200.0,
    early_exaggeration: float = 12.0,
    exaggeration_iters: int = 250,
    momentum_switch: int = 250,
) -> tuple[np.ndarray, list[float]]:
    """Project points to 2-D; returns (coords [n, 2], KL trace).

    The KL trace holds the divergence against the true (non-exaggerated)
    affinities, starting at the initial layout, one entry per iteration
    thereafter. Requires n >= 4; perplexity above (n-1)/3 is clamped with a
    notice; duplicate points get a seeded epsilon jitter.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError("embeddings must be a 2-D matrix")
    n = x.shape[0]
    if n < 4:
        raise ValidationError(f"t-SNE needs at least 4 points, got {n}")
    rng = np.random.default_rng(seed)

    d2 = _squared_distances(x)
    off_diag = d2 + np.eye(n)
    if (off_diag == 0.0).any():
        logger.warning("duplicate points detected; applying seeded jitter")
        scale = max(float(np.sqrt(d2.max())), 1.0)
        x = x + rng.normal(0.0, 1e-8 * scale, x.shape)

    max_perplexity = (n - 1) / 3.0
    if perplexity > max_perplexity:
        logger.warning(
            "perplexity %.1f too large for %d points; clamped to %.2f",
            perplexity, n, max_perplexity,
        )
        perplexity = max_perplexity

    p = joint_probabilities(x, perplexity)
    y = rng.normal(0.0, 1e-4, (n, 2))
    update = np.zeros_like(y)

    q, _ = _student_t_q(y)
    kl_trace = [_kl(p, q)]
    for t in range(1, iterations + 1):
        p_eff = p * early_exaggeration if t <= exaggeration_iters else p
        q, num = _student_t_q(y)
        pq = (p_eff - q) * num
        grad = 4.0 * ((np.diag(pq.sum(1)) - pq) @ y)
        momentum = 0.5 if t <= momentum_switch else 0.8
        update = momentum * update - learning_rate * grad
        y = y + update
        y = y - y.mean(0)
        q, _ = _student_t_q(y)
        kl_trace.append(_kl(p, q))
    if not np.isfinite(y).all():
        raise ValidationError("t-SNE diverged to non-finite coordinates")
    return y, kl_trace
