"""Joint noise/restore objective with hand-written backpropagation.

Given normalized synthetic maps ``s`` and normalized real maps ``t``::

    a = N(s)      a_n = eta(a)       (re-normalized after the mapping)
    b = R(t)      b_n = eta(b)
    L_noise   = mean_t log D_N(t) + mean_s log(1 - D_N(a_n))
    L_restore = mean_s log D_R(s) + mean_t log(1 - D_R(b_n))
    L_cycle   = mean_s |R(a_n) - s|_1 + mean_t |N(b_n) - t|_1
    L         = L_noise + L_restore + L_cycle

Discriminators ascend their own adversarial term.  The mappings descend
either ``L`` itself (``generator_form="minimax"``) or the non-saturating
surrogate ``-mean log D_N(a_n) - mean log D_R(b_n) + L_cycle``.
"""

from dataclasses import dataclass, field

import numpy as np

from .mapping import (
    mapping_backward,
    mapping_forward,
    n_params,
    patch_mlp_backward,
    patch_mlp_forward,
)
from .normalize import eta, eta_backward
from .objectives import EPS

GENERATOR_FORMS = ("minimax", "non_saturating")


@dataclass
class Discriminator:
    """Patch-perceptron critic: ``sigmoid(mean over pixels of g(patch))``."""

    hidden: int
    vector: np.ndarray = field(repr=False)

    @classmethod
    def random(cls, hidden, rng, scale=0.3):
        return cls(hidden, rng.normal(0.0, scale, n_params(hidden)))

    def copy(self):
        return Discriminator(self.hidden, self.vector.copy())


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def disc_forward(disc, x):
    delta, cache = patch_mlp_forward(disc.vector, disc.hidden, x)
    logit = float(delta.mean())
    raw = float(_sigmoid(logit))
    score = min(max(raw, EPS), 1.0 - EPS)
    return score, (cache, delta.shape, raw == score)


def disc_backward(disc, cache, g_logit):
    inner, shape, unclamped = cache
    if not unclamped:
        g_logit = 0.0
    gdelta = np.full(shape, g_logit / (shape[0] * shape[1]))
    return patch_mlp_backward(disc.vector, disc.hidden, inner, gdelta)


def disc_score(disc, x):
    return disc_forward(disc, x)[0]


@dataclass
class ObjectiveResult:
    l_noise: float
    l_restore: float
    l_cycle: float
    generator_loss: float
    grads: dict = field(default_factory=dict, repr=False)

    @property
    def total(self):
        return self.l_noise + self.l_restore + self.l_cycle


def _maybe_eta(x, renormalize):
    if renormalize:
        return eta(x)
    return x, None


def _maybe_eta_backward(cache, g):
    return g if cache is None else eta_backward(cache, g)


def evaluate_objective(
    noise, restore, d_noise, d_restore, syn, real, *, renormalize=True, generator_form="minimax"
):
    """Evaluate all terms and every gradient in one pass.

    ``grads`` holds ``"noise"``/``"restore"`` (gradients of the generator
    loss) and ``"d_noise"``/``"d_restore"`` (gradients of the respective
    adversarial term, to be ascended).
    """
    if generator_form not in GENERATOR_FORMS:
        raise ValueError(f"generator_form must be one of {GENERATOR_FORMS}")
    non_sat = generator_form == "non_saturating"
    ns, nt = len(syn), len(real)
    g_n = np.zeros_like(noise.vector)
    g_r = np.zeros_like(restore.vector)
    g_dn = np.zeros_like(d_noise.vector)
    g_dr = np.zeros_like(d_restore.vector)
    l_noise = l_restore = l_cycle = gen_adv = 0.0

    # real side of each adversarial term: depends on discriminators only
    for t in real:
        score, cache = disc_forward(d_noise, t)
        l_noise += np.log(score) / nt
        gv, _ = disc_backward(d_noise, cache, (1.0 - score) / nt)
        g_dn += gv
    for s in syn:
        score, cache = disc_forward(d_restore, s)
        l_restore += np.log(score) / ns
        gv, _ = disc_backward(d_restore, cache, (1.0 - score) / ns)
        g_dr += gv

    # synthetic -> sensor-like -> back
    for s in syn:
        s = np.asarray(s, dtype=np.float64)
        a, c_map = mapping_forward(noise, s)
        a_n, c_eta = _maybe_eta(a, renormalize)
        score, c_d = disc_forward(d_noise, a_n)
        l_noise += np.log1p(-score) / ns
        # d log(1-D)/d logit = -D ; d(-log D)/d logit = -(1-D)
        gv, _ = disc_backward(d_noise, c_d, -score / ns)
        g_dn += gv
        if non_sat:
            gen_adv -= np.log(score) / ns
            _, g_an = disc_backward(d_noise, c_d, -(1.0 - score) / ns)
        else:
            _, g_an = disc_backward(d_noise, c_d, -score / ns)

        back, c_back = mapping_forward(restore, a_n)
        diff = back - s
        l_cycle += np.abs(diff).mean() / ns
        gr, g_an_cyc = mapping_backward(restore, c_back, np.sign(diff) / (diff.size * ns))
        g_r += gr
        gn, _ = mapping_backward(noise, c_map, _maybe_eta_backward(c_eta, g_an + g_an_cyc))
        g_n += gn

    # real -> clean -> back
    for t in real:
        t = np.asarray(t, dtype=np.float64)
        b, c_map = mapping_forward(restore, t)
        b_n, c_eta = _maybe_eta(b, renormalize)
        score, c_d = disc_forward(d_restore, b_n)
        l_restore += np.log1p(-score) / nt
        gv, _ = disc_backward(d_restore, c_d, -score / nt)
        g_dr += gv
        if non_sat:
            gen_adv -= np.log(score) / nt
            _, g_bn = disc_backward(d_restore, c_d, -(1.0 - score) / nt)
        else:
            _, g_bn = disc_backward(d_restore, c_d, -score / nt)

        back, c_back = mapping_forward(noise, b_n)
        diff = back - t
        l_cycle += np.abs(diff).mean() / nt
        gn, g_bn_cyc = mapping_backward(noise, c_back, np.sign(diff) / (diff.size * nt))
        g_n += gn
        gr, _ = mapping_backward(restore, c_map, _maybe_eta_backward(c_eta, g_bn + g_bn_cyc))
        g_r += gr

    if non_sat:
        generator_loss = gen_adv + l_cycle
    else:
        generator_loss = l_noise + l_restore + l_cycle
    return ObjectiveResult(
        float(l_noise),
        float(l_restore),
        float(l_cycle),
        float(generator_loss),
        {"noise": g_n, "restore": g_r, "d_noise": g_dn, "d_restore": g_dr},
    )


def discriminator_accuracy(disc, positives, negatives):
    """Fraction classified correctly at the 0.5 decision boundary."""
    hits = sum(disc_score(disc, x) > 0.5 for x in positives)
    hits += sum(disc_score(disc, x) <= 0.5 for x in negatives)
    return hits / (len(positives) + len(negatives))


__all__ = [
    "Discriminator",
    "ObjectiveResult",
    "disc_score",
    "discriminator_accuracy",
    "evaluate_objective",
]
