import numpy as np

from ..errors import NonFiniteGradient


FLOOR = 1e-3


def grad_check(loss_and_grad, params, h=1e-5, floor=FLOOR):
    """Max relative discrepancy between analytic and central-difference gradients.

    ``loss_and_grad(vector) -> (loss, gradient)``.  ``params`` is a flat
    vector or anything with a ``.vector`` attribute; it is not modified.
    The error per coordinate is ``|g - g_fd| / max(|g|, |g_fd|, floor)``,
    so a fractional fault reads the same at any gradient scale above
    ``floor`` while near-zero coordinates do not amplify difference noise.
    """
    if not 1e-7 <= h <= 1e-3:
        raise ValueError(f"step h={h} outside [1e-7, 1e-3]")
    p0 = np.array(getattr(params, "vector", params), dtype=np.float64)
    _, analytic = loss_and_grad(p0.copy())
    analytic = np.asarray(analytic, dtype=np.float64)
    if analytic.shape != p0.shape:
        raise ValueError(f"gradient shape {analytic.shape} != parameter shape {p0.shape}")
    if not np.all(np.isfinite(analytic)):
        raise NonFiniteGradient("analytic gradient has non-finite entries")
    worst = 0.0
    for i in range(p0.size):
        p = p0.copy()
        p[i] = p0[i] + h
        up, _ = loss_and_grad(p)
        p[i] = p0[i] - h
        down, _ = loss_and_grad(p)
        fd = (up - down) / (2.0 * h)
        if not np.isfinite(fd):
            raise NonFiniteGradient(f"finite difference for parameter {i} is {fd}")
        worst = max(worst, abs(analytic[i] - fd) / max(abs(analytic[i]), abs(fd), floor))
    return worst


def objective_evaluator(noise, restore, d_noise, d_restore, syn, real, wrt="noise", **kwargs):
    """``loss_and_grad`` closure over one mapping's parameters for the full objective."""
    from .adversarial import evaluate_objective

    target = noise if wrt == "noise" else restore

    def fn(vector):
        saved = target.vector
        target.vector = vector
        try:
            res = evaluate_objective(noise, restore, d_noise, d_restore, syn, real, **kwargs)
        finally:
            target.vector = saved
        return res.generator_loss, res.grads[wrt]

    return fn
