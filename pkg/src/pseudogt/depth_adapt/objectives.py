"""Adversarial and cycle-consistency terms of the depth adaptation objective."""

import math

import numpy as np

from ..errors import EmptyBatch, NonFinite, ShapeMismatch

EPS = 1e-7


def clamp_scores(scores, eps=EPS):
    return np.clip(np.asarray(scores, dtype=np.float64), eps, 1.0 - eps)


def gan_loss(real_scores, fake_scores, eps=EPS):
    """``mean(log D(real)) + mean(log(1 - D(fake)))`` on clamped scores.

    Serves both the noise term (real sensor maps vs. mapped synthetic ones)
    and the restore term (clean synthetic maps vs. restored real ones).
    """
    real = np.ravel(real_scores)
    fake = np.ravel(fake_scores)
    if real.size == 0 or fake.size == 0:
        raise EmptyBatch("gan_loss needs at least one real and one fake score")
    return float(np.mean(np.log(clamp_scores(real, eps))) + np.mean(np.log1p(-clamp_scores(fake, eps))))


def _values(x):
    return np.asarray(getattr(x, "values", x), dtype=np.float64)


def _mean_l1(pairs_a, pairs_b):
    if len(pairs_a) != len(pairs_b):
        raise ShapeMismatch(f"{len(pairs_a)} originals vs {len(pairs_b)} roundtrips")
    if not pairs_a:
        return 0.0
    total = 0.0
    for a, b in zip(pairs_a, pairs_b):
        a, b = _values(a), _values(b)
        if a.shape != b.shape:
            raise ShapeMismatch(f"roundtrip shape {b.shape} != original {a.shape}")
        total += float(np.mean(np.abs(b - a)))
    return total / len(pairs_a)


def cycle_loss(x_syn, x_syn_roundtrip, x_real, x_real_roundtrip):
    """Mean per-pixel L1 between each map and its two-way mapped version, summed over both directions."""
    return _mean_l1(list(x_syn), list(x_syn_roundtrip)) + _mean_l1(list(x_real), list(x_real_roundtrip))


def total_objective(noise_term, restore_term, cycle_term):
    terms = (float(noise_term), float(restore_term), float(cycle_term))
    if not all(math.isfinite(t) for t in terms):
        raise NonFinite(f"objective terms must be finite, got {terms}")
    return terms[0] + terms[1] + terms[2]
