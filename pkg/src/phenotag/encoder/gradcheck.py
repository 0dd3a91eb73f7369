"""Numerical validation of the analytic gradients against central finite
differences, for both training losses.

Every parameter tensor is probed at sampled coordinates (at least 64, or all
of them for small tensors). The reported figure per coordinate is
|analytic - numeric| / max(1, |analytic| + |numeric|), so near-zero gradients
are compared absolutely and large ones relatively.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from .config import ModelConfig
from .model import init_params, mlm_loss_and_grads, ner_loss_and_grads

DEFAULT_TINY_CONFIG = ModelConfig(
    vocab_size=32,
    n_layers=2,
    d_model=16,
    n_heads=2,
    d_ff=32,
    max_positions=12,
    seed=0,
)


@dataclass(frozen=True)
class GradCheckResult:
    max_rel_error: float
    per_tensor: dict[str, float]

    def passed(self, tolerance: float = 1e-4) -> bool:
        return self.max_rel_error <= tolerance


def _rel_errors(
    params: dict[str, np.ndarray],
    loss_fn,
    grads: dict[str, np.ndarray],
    epsilon: float,
    coords_per_tensor: int,
    rng: np.random.Generator,
) -> dict[str, float]:
    out: dict[str, float] = {}
    for name, tensor in params.items():
        flat = tensor.reshape(-1)
        n = flat.size
        if n <= coords_per_tensor:
            coords = np.arange(n)
        else:
            coords = rng.choice(n, size=coords_per_tensor, replace=False)
        worst = 0.0
        gflat = grads[name].reshape(-1)
        for c in coords:
            original = flat[c]
            flat[c] = original + epsilon
            f_plus = loss_fn()
            flat[c] = original - epsilon
            f_minus = loss_fn()
            flat[c] = original
            numeric = (f_plus - f_minus) / (2.0 * epsilon)
            analytic = gflat[c]
            denom = max(1.0, abs(analytic) + abs(numeric))
            worst = max(worst, abs(analytic - numeric) / denom)
        out[name] = worst
    return out


def grad_check(
    config: ModelConfig | None = None,
    epsilon: float = 1e-5,
    coords_per_tensor: int = 64,
    seed: int = 0,
) -> GradCheckResult:
    """Compare analytic and central-difference gradients for both losses.

    Requires a tiny configuration (n_layers <= 2, d_model <= 16) so the full
    probe finishes in seconds. Returns the worst error over all tensors for
    both the masked-LM and the tag-classification loss.
    """
    cfg = config if config is not None else DEFAULT_TINY_CONFIG
    cfg.validate()
    if cfg.n_layers > 2 or cfg.d_model > 16:
        raise ConfigurationError(
            "grad_check requires a tiny config (n_layers <= 2, d_model <= 16)"
        )
    if cfg.dropout_rate > 0:
        raise ConfigurationError("grad_check requires dropout_rate = 0")
    rng = np.random.default_rng(seed)
    params = init_params(cfg)

    b, s = 2, min(10, cfg.max_positions)
    ids = rng.integers(0, cfg.vocab_size, size=(b, s))
    mask = np.ones((b, s), dtype=np.float64)
    mask[1, s - 2 :] = 0.0  # exercise the attention-mask path

    # masked-LM probe: a handful of supervised positions on unmasked tokens
    flat_positions = [(r, p) for r in range(b) for p in range(s) if mask[r, p] == 1.0]
    take = rng.choice(len(flat_positions), size=4, replace=False)
    pos_b = np.array([flat_positions[int(i)][0] for i in take])
    pos_s = np.array([flat_positions[int(i)][1] for i in take])
    labels = rng.integers(0, cfg.vocab_size, size=4)

    _, _, mlm_grads = mlm_loss_and_grads(params, cfg, ids, mask, pos_b, pos_s, labels)
    mlm_errors = _rel_errors(
        params,
        lambda: mlm_loss_and_grads(params, cfg, ids, mask, pos_b, pos_s, labels)[0],
        mlm_grads,
        epsilon,
        coords_per_tensor,
        rng,
    )

    # tag probe: random tags with IGNORE sprinkled in
    tag_ids = rng.integers(0, cfg.n_tags, size=(b, s))
    tag_ids[mask == 0.0] = -1
    tag_ids[0, 0] = -1
    _, _, ner_grads = ner_loss_and_grads(params, cfg, ids, mask, tag_ids)
    ner_errors = _rel_errors(
        params,
        lambda: ner_loss_and_grads(params, cfg, ids, mask, tag_ids)[0],
        ner_grads,
        epsilon,
        coords_per_tensor,
        rng,
    )

    per_tensor = {f"mlm:{k}": v for k, v in mlm_errors.items()}
    per_tensor.update({f"ner:{k}": v for k, v in ner_errors.items()})
    return GradCheckResult(max(per_tensor.values()), per_tensor)
