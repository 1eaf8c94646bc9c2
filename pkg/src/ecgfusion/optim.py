"""Cross-entropy objective, momentum SGD, training loop and gradient checking."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import dsp
from .errors import DivergenceDetected, EmptyDataset, LabelOutOfRange, NonFiniteGradient, ShapeMismatch
from .nn.layers import NetworkSpec
from .nn.network import Model, forward, init_model, loss_and_grads

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    total_iters: int = 20_000
    lr0: float = 0.01
    lr_halve_every: int = 5_000
    lr_floor: float = 6.25e-4
    momentum: float = 0.9
    weight_decay: float = 5e-6
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.lr_halve_every < 1:
            raise ValueError("batch_size and lr_halve_every must be positive")
        if self.total_iters < 0:
            raise ValueError("total_iters must be non-negative")
        if not (self.lr0 > 0 and self.lr_floor > 0 and self.weight_decay >= 0):
            raise ValueError("learning rates must be positive and weight_decay non-negative")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if self.lr_floor > self.lr0:
            raise ValueError("lr_floor must not exceed lr0")


@dataclass
class MomentumState:
    velocity: dict

    @classmethod
    def zeros_like(cls, model: Model) -> "MomentumState":
        return cls({k: np.zeros_like(v) for k, v in model.params.items()})


@dataclass
class TrainHistory:
    loss: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    eval_acc: dict = field(default_factory=dict)  # iteration -> accuracy

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "loss", "lr", "eval_acc"])
            for t, (loss, lr) in enumerate(zip(self.loss, self.lr)):
                acc = self.eval_acc.get(t)
                w.writerow([t, repr(float(loss)), repr(float(lr)), "" if acc is None else repr(float(acc))])


# --------------------------------------------------------------------------
# objective

def cross_entropy(probs, label: int):
    """``-log p[label]`` and the softmax-cross-entropy gradient ``p - onehot``."""
    p = np.asarray(probs, dtype=float)
    if not 0 <= label < p.shape[-1]:
        raise LabelOutOfRange(f"label {label} outside 0..{p.shape[-1] - 1}")
    loss = -math.log(max(p[label], PROB_FLOOR))
    grad = p.copy()
    grad[label] -= 1.0
    return loss, grad


def cross_entropy_batch(probs, labels):
    """Mean loss over a batch and the per-sample ``p - onehot`` rows."""
    labels = np.asarray(labels)
    n, c = probs.shape
    if labels.shape != (n,):
        raise ShapeMismatch(f"{labels.shape[0] if labels.ndim else 1} labels for {n} samples")
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise LabelOutOfRange(f"labels must lie in 0..{c - 1}")
    picked = probs[np.arange(n), labels]
    loss = float(-np.log(np.maximum(picked, PROB_FLOOR)).mean())
    grad = probs.copy()
    grad[np.arange(n), labels] -= 1
    return loss, grad


# --------------------------------------------------------------------------
# optimiser

def lr_at(t: int, cfg: TrainConfig = TrainConfig()) -> float:
    """Learning rate for the 0-based iteration ``t``.

    Halvings are counted on 1-based iteration numbers, so with the defaults
    the rate halves at iterations 5,000, 10,000, 15,000 and 20,000 and the
    last of 20,000 iterations runs at ``lr0 / 16``.
    """
    if t < 0:
        raise ValueError("iteration index must be non-negative")
    return max(cfg.lr_floor, cfg.lr0 * 2.0 ** -((t + 1) // cfg.lr_halve_every))


def sgd_momentum_step(model: Model, grads: dict, state: MomentumState, t: int, cfg: TrainConfig):
    """One classical momentum step with L2 decay folded into the gradient."""
    lr = lr_at(t, cfg)
    new_params, new_vel = {}, {}
    for name, theta in model.params.items():
        g = grads.get(name)
        if g is None or g.shape != theta.shape:
            raise ShapeMismatch(f"gradient for {name} missing or mis-shaped")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"non-finite gradient in {name}")
        g = g + cfg.weight_decay * theta
        v = cfg.momentum * state.velocity[name] - lr * g
        new_vel[name] = v.astype(theta.dtype, copy=False)
        new_params[name] = (theta + v).astype(theta.dtype, copy=False)
    return model.with_params(new_params), MomentumState(new_vel)


# --------------------------------------------------------------------------
# training loop

def _level_of(spec: NetworkSpec) -> int:
    frames = spec.input_dims[2]
    level = int(round(math.log2(frames / dsp.expected_frames(1)))) + 1
    return level


def prepare_inputs(dataset, level: int, cfg: dsp.StftConfig = dsp.StftConfig()):
    """Preprocess every record of a dataset into ``(inputs, labels)`` arrays."""
    records = dataset.records
    if not records:
        raise EmptyDataset("dataset has no records")
    samples = np.stack([r.samples for r in records])
    labels = np.array([r.label for r in records], dtype=np.int64)
    return dsp.preprocess_batch(samples, level, cfg), labels


def _batches(n: int, batch: int, rng: np.random.Generator):
    """Endless stream of index batches drawn from successive shuffled epochs."""
    buf = np.empty(0, dtype=np.int64)
    while True:
        while buf.size < batch:
            buf = np.concatenate([buf, rng.permutation(n)])
        yield buf[:batch]
        buf = buf[batch:]


def accuracy_of(model: Model, inputs, labels, batch_size: int = 512) -> float:
    preds = np.concatenate([forward(model, inputs[i : i + batch_size]).argmax(axis=1)
                            for i in range(0, len(inputs), batch_size)])
    return float((preds == labels).mean())


def train(spec: NetworkSpec, dataset, level: int | None = None, cfg: TrainConfig = TrainConfig(),
          eval_data=None, eval_every: int = 0, init: Model | None = None):
    """Mini-batch momentum SGD on the cross-entropy loss.

    ``dataset`` is a :class:`~ecgfusion.data.Dataset` whose records all have
    the level's segment length, or an already prepared ``(inputs, labels)``
    pair.  ``eval_data`` takes the same forms.  Returns the final-iteration
    model and its history.
    """
    if level is None:
        level = _level_of(spec)
    inputs, labels = dataset if isinstance(dataset, tuple) else prepare_inputs(dataset, level)
    if len(inputs) == 0:
        raise EmptyDataset("dataset has no records")
    if eval_data is not None and not isinstance(eval_data, tuple):
        eval_data = prepare_inputs(eval_data, level)

    seeds = np.random.SeedSequence(cfg.seed).spawn(2)
    model = init if init is not None else init_model(spec, seed=int(seeds[0].generate_state(1)[0]))
    inputs = np.asarray(inputs, dtype=model.dtype)
    state = MomentumState.zeros_like(model)
    hist = TrainHistory()
    stream = _batches(len(inputs), cfg.batch_size, np.random.Generator(np.random.PCG64(seeds[1])))
    for t in range(cfg.total_iters):
        idx = next(stream)
        loss, grads, _ = loss_and_grads(model, inputs[idx], labels[idx])
        if not math.isfinite(loss):
            raise DivergenceDetected(f"loss became {loss} at iteration {t}")
        hist.loss.append(loss)
        hist.lr.append(lr_at(t, cfg))
        model, state = sgd_momentum_step(model, grads, state, t, cfg)
        if eval_every and eval_data is not None and ((t + 1) % eval_every == 0 or t + 1 == cfg.total_iters):
            hist.eval_acc[t] = accuracy_of(model, *eval_data)
            log.info("iter %d loss %.4f eval acc %.4f", t + 1, loss, hist.eval_acc[t])
    return model, hist


# --------------------------------------------------------------------------
# gradient checking

def _exact_nll(logits, label):
    # unclamped log-softmax; p - onehot is the gradient of this, not of the clamped loss
    z = np.asarray(logits, dtype=np.float64)
    m = z.max()
    return float(m + math.log(np.exp(z - m).sum()) - z[label])


def _signature(tr):
    relu = [tr.relu_inputs[i] > 0 for i in sorted(tr.relu_inputs)]
    pools = [tr.pool_args[i] for i in sorted(tr.pool_args)]
    return relu, pools


def _same_signature(a, b) -> bool:
    return all(np.array_equal(p, q) for p, q in zip(a[0] + a[1], b[0] + b[1]))


def grad_check(spec_or_model, x, label: int, seed: int = 0, eps: float = 1e-5,
               coords_per_tensor: int | None = 24, backward_scale: dict | None = None,
               floor: float | None = None) -> float:
    """Max relative error between analytic and central-difference gradients.

    Runs in double precision.  Coordinates whose +/- perturbation flips a
    ReLU sign or moves a pooling argmax are skipped (the loss is not
    differentiable there).  ``coords_per_tensor=None`` checks every scalar.
    Relative error is ``|a - n| / max(|a|, |n|, floor)``.  The default
    floor is ``1e5`` times the roundoff quantum of a central difference,
    ``eps_mach * max(1, |loss|, max|logit|) / eps``; entries below it are
    not resolvable to 1e-4 relative accuracy by differencing in float64.
    """
    if isinstance(spec_or_model, Model):
        model = spec_or_model.astype(np.float64)
    else:
        model = init_model(spec_or_model, seed=seed, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    _, analytic, _ = loss_and_grads(model, x, [label], backward_scale=backward_scale)
    logits = forward(model, x, trace=True)[1].logits
    if floor is None:
        scale = max(1.0, abs(_exact_nll(logits, label)), float(np.abs(logits).max()))
        floor = 1e5 * np.finfo(np.float64).eps * scale / eps
    base_sig = _signature(forward(model, x, trace=True)[1])
    rng = np.random.default_rng(seed + 1)
    worst = 0.0
    for name, theta in model.params.items():
        flat_size = theta.size
        if coords_per_tensor is None or coords_per_tensor >= flat_size:
            coords = np.arange(flat_size)
        else:
            coords = rng.choice(flat_size, size=coords_per_tensor, replace=False)
        for c in coords:
            vals = []
            sigs_ok = True
            for sign in (1.0, -1.0):
                p = {k: (v.copy() if k == name else v) for k, v in model.params.items()}
                p[name].reshape(-1)[c] += sign * eps
                m = Model(model.spec, p)
                _, tr = forward(m, x, trace=True)
                if not _same_signature(base_sig, _signature(tr)):
                    sigs_ok = False
                    break
                vals.append(_exact_nll(tr.logits, label))
            if not sigs_ok:
                continue
            numeric = (vals[0] - vals[1]) / (2 * eps)
            a = float(analytic[name].reshape(-1)[c])
            err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            worst = max(worst, err)
    return worst
