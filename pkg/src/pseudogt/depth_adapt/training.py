"""Alternating min-max training of the toy noise/restore mappings."""

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..core.rng import stream
from ..errors import DivergenceDetected, EmptyBatch
from .adversarial import Discriminator, evaluate_objective
from .mapping import MappingParams


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 2000
    lr_mapping: float = 0.02
    lr_disc: float = 0.2
    batch_size: int = 8
    hidden: int = 4
    disc_hidden: int = 4
    disc_init_scale: float = 0.3
    # L2 decay on critic weights; damps the rotation of plain simultaneous GAN dynamics
    disc_weight_decay: float = 0.01
    renormalize: bool = True
    generator_form: str = "non_saturating"
    seed: int = 0


@dataclass(frozen=True)
class TraceRecord:
    step: int
    l_noise: float
    l_restore: float
    l_cycle: float
    total: float


TRACE_HEADER = "step,l_noise,l_restore,l_cycle,total"


def format_trace(trace):
    lines = [TRACE_HEADER]
    lines += [f"{r.step},{r.l_noise!r},{r.l_restore!r},{r.l_cycle!r},{r.total!r}" for r in trace]
    return "\n".join(lines) + "\n"


@dataclass
class TrainResult:
    noise: MappingParams
    restore: MappingParams
    d_noise: Discriminator
    d_restore: Discriminator
    trace: list
    config: TrainConfig

    def config_dict(self):
        return asdict(self.config)


def init_state(config):
    rng = stream(config.seed, "train", "init")
    return (
        MappingParams.identity("noise", config.hidden),
        MappingParams.identity("restore", config.hidden),
        Discriminator.random(config.disc_hidden, rng, config.disc_init_scale),
        Discriminator.random(config.disc_hidden, rng, config.disc_init_scale),
    )


def train_minmax(syn, real, config=TrainConfig()):
    """Fit N (synthetic -> sensor-like) and R (sensor-like -> clean) adversarially.

    Both mappings start at the identity.  Each step draws a minibatch from
    each (unpaired) set, takes one gradient-ascent step for both critics on
    their adversarial terms, then one descent step for both mappings against
    the updated critics.  Inputs must already be min-max normalized.
    """
    syn = [np.asarray(getattr(x, "values", x), dtype=np.float64) for x in syn]
    real = [np.asarray(getattr(x, "values", x), dtype=np.float64) for x in real]
    if not syn or not real:
        raise EmptyBatch("training needs non-empty synthetic and real sets")
    noise, restore, d_noise, d_restore = init_state(config)
    rng = stream(config.seed, "train", "batches")
    kw = dict(renormalize=config.renormalize, generator_form=config.generator_form)
    trace = []
    for step in range(config.steps):
        bs = [syn[i] for i in rng.integers(0, len(syn), config.batch_size)]
        br = [real[i] for i in rng.integers(0, len(real), config.batch_size)]

        res = evaluate_objective(noise, restore, d_noise, d_restore, bs, br, **kw)
        rec = TraceRecord(step, res.l_noise, res.l_restore, res.l_cycle, res.total)
        if not all(math.isfinite(v) for v in (rec.l_noise, rec.l_restore, rec.l_cycle)):
            raise DivergenceDetected(f"non-finite loss at step {step}: {rec}")
        trace.append(rec)
        decay = 1.0 - config.lr_disc * config.disc_weight_decay
        d_noise.vector = decay * d_noise.vector + config.lr_disc * res.grads["d_noise"]
        d_restore.vector = decay * d_restore.vector + config.lr_disc * res.grads["d_restore"]

        res = evaluate_objective(noise, restore, d_noise, d_restore, bs, br, **kw)
        new_n = noise.vector - config.lr_mapping * res.grads["noise"]
        new_r = restore.vector - config.lr_mapping * res.grads["restore"]
        if not (np.all(np.isfinite(new_n)) and np.all(np.isfinite(new_r))):
            raise DivergenceDetected(f"non-finite mapping parameters at step {step}")
        noise.vector, restore.vector = new_n, new_r
    return TrainResult(noise, restore, d_noise, d_restore, trace, config)


def bias_shift_fixture(n, width=32, bias=0.3, seed=0, name="fixture"):
    """Unpaired 1-row maps: source profiles, and independent profiles shifted by ``bias``.

    Source values stay inside [-1, 1 - bias] so shifted targets stay in [-1, 1].
    """
    rng = stream(seed, "bias-shift", name)
    xs = np.linspace(0.0, 2.0 * np.pi, width)

    def profile():
        level = rng.uniform(-0.45, -0.15)
        amp = rng.uniform(0.1, 0.25)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        freq = rng.uniform(0.5, 2.0)
        v = level + amp * np.sin(freq * xs + phase) + rng.normal(0.0, 0.02, width)
        return np.clip(v, -1.0, 1.0 - bias)[None, :]

    source = [profile() for _ in range(n)]
    target = [profile() + bias for _ in range(n)]
    return source, target
