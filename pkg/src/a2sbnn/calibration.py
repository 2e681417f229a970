"""Composite calibration loss, Wasserstein critic with gradient penalty, Adam
and the calibration loop."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .copula import A2Params, init_bias, init_weights
from .errors import DegenerateInputError, DomainError, NumericError, ShapeError
from .field import TargetField
from .model import ModelParams, embed, forward_features
from .stats import RngStream, pearson, rmse

log = logging.getLogger(__name__)

BATCH_STREAM = 31
GP_STREAM = 32
CRITIC_INIT_STREAM = 33


@dataclass(frozen=True)
class CalibrationConfig:
    lambda_w: float = 0.1
    lambda_moment: float = 1.0
    lambda_corr: float = 1.0
    gp_coefficient: float = 10.0
    critic_steps_per_update: int = 5
    learning_rate: float = 1e-3
    critic_learning_rate: float = 1e-4
    iterations: int = 2000
    batch_size: int = 256
    seed: int = 0
    eval_every: int = 100
    match_variance: bool = False

    def __post_init__(self):
        for name in ("lambda_w", "lambda_moment", "lambda_corr", "gp_coefficient"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be non-negative")
        if self.iterations < 1:
            raise DomainError("iterations must be >= 1")
        if self.batch_size < 2:
            raise DomainError("batch_size must be >= 2")
        if self.critic_steps_per_update < 1:
            raise DomainError("critic_steps_per_update must be >= 1")
        if not (self.learning_rate > 0 and self.critic_learning_rate > 0):
            raise DomainError("learning rates must be positive")


@dataclass(frozen=True)
class LossBreakdown:
    iteration: int
    l_sup: float
    l_w: float
    l_moment: float
    l_corr: float
    l_total: float


TRAJECTORY_COLUMNS = ("iteration", "l_sup", "l_w", "l_moment", "l_corr", "l_total")


def write_trajectory_csv(path, trajectory) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        for row in trajectory:
            d = asdict(row)
            w.writerow([d["iteration"]] + [format(d[c], ".17g") for c in TRAJECTORY_COLUMNS[1:]])


# ---- loss components -----------------------------------------------------------

def _pair(pred, target):
    pred = ad._wrap(pred)
    target = ad._wrap(target)
    if pred.shape != target.shape:
        raise ShapeError(f"pred {pred.shape} vs target {target.shape}")
    return pred, target


def loss_sup(pred, target) -> ad.Tensor:
    pred, target = _pair(pred, target)
    return ad.mean(ad.square(pred - target))


def loss_moment(pred, target, match_variance: bool = False) -> ad.Tensor:
    pred, target = _pair(pred, target)
    out = ad.square(ad.mean(pred) - ad.mean(target))
    if match_variance:
        vp = ad.mean(ad.square(pred - ad.mean(pred)))
        vt = float(np.var(target.data))
        out = out + ad.square(vp - vt)
    return out


def loss_corr(pred, target) -> ad.Tensor:
    """1 - Pearson(pred, target); a constant prediction scores 1 with zero gradient."""
    pred, target = _pair(pred, target)
    if pred.size < 2:
        raise ShapeError("correlation loss needs at least 2 values")
    tc = target.data - target.data.mean()
    tn = math.sqrt(float(np.dot(tc, tc)))
    if tn == 0.0:
        raise DegenerateInputError("correlation loss undefined for a constant target")
    if np.ptp(pred.data) == 0.0:
        return ad.tensor(1.0)
    pc = pred - ad.mean(pred)
    r = ad.sum_(pc * (tc / tn)) / ad.sqrt(ad.sum_(ad.square(pc)))
    return 1.0 - r


# ---- critic ------------------------------------------------------------------------------

@dataclass
class CriticParams:
    """Scalar-in, scalar-out MLP: 1 -> H -> H -> 1 with leaky-ReLU."""

    W1: ad.Tensor
    b1: ad.Tensor
    W2: ad.Tensor
    b2: ad.Tensor
    W3: ad.Tensor
    b3: ad.Tensor
    slope: float = 0.2

    def parameters(self) -> list:
        return [self.W1, self.b1, self.W2, self.b2, self.W3, self.b3]

    def copy(self) -> "CriticParams":
        return CriticParams(*(ad.tensor(p.data.copy(), True) for p in self.parameters()), slope=self.slope)


def init_critic(theta: float, seed: int, hidden: int = 64, slope: float = 0.2,
                rng: RngStream | None = None) -> CriticParams:
    rng = rng or RngStream(seed, CRITIC_INIT_STREAM)
    a2 = A2Params(theta)
    w = lambda fo, fi: ad.tensor(init_weights(rng, (fo, fi), a2), True)
    b = lambda fo: ad.tensor(init_bias(fo), True)
    return CriticParams(w(hidden, 1), b(hidden), w(hidden, hidden), b(hidden), w(1, hidden), b(1), slope)


def critic_forward(values, critic: CriticParams) -> ad.Tensor:
    v = ad._wrap(values)
    shape = v.shape
    h = ad.reshape(v, (-1, 1))
    h = ad.leaky_relu(h @ critic.W1.T + critic.b1, critic.slope)
    h = ad.leaky_relu(h @ critic.W2.T + critic.b2, critic.slope)
    out = h @ critic.W3.T + critic.b3
    return ad.reshape(out, shape)


def gradient_penalty(fake: np.ndarray, real: np.ndarray, critic: CriticParams,
                     rng: RngStream) -> ad.Tensor:
    """mean((|dD/dv| - 1)^2) at per-element random interpolates of real and fake."""
    u = rng.uniform(real.shape)
    v = ad.tensor(u * real + (1.0 - u) * fake, requires_grad=True)
    g = ad.grad_wrt_input(critic_forward(v, critic), v)
    norms = ad.norm2(ad.reshape(g, (-1, 1)), axis=1, eps=1e-12)
    return ad.mean(ad.square(norms - 1.0))


def critic_objective(fake, real, critic: CriticParams, rng: RngStream,
                     gp_coefficient: float) -> ad.Tensor:
    """Critic loss: mean D(fake) - mean D(real) + gp * penalty. Inputs are treated as constants."""
    fake = np.asarray(ad._wrap(fake).data)
    real = np.asarray(ad._wrap(real).data)
    if fake.shape != real.shape:
        raise ShapeError(f"fake {fake.shape} vs real {real.shape}")
    # one stacked pass: mean over the fake half minus mean over the real half
    n = fake.size
    sign = np.concatenate([np.full(n, 1.0 / n), np.full(real.size, -1.0 / real.size)])
    scores = critic_forward(np.concatenate([fake.ravel(), real.ravel()]), critic)
    loss = ad.sum_(scores * sign)
    if gp_coefficient:
        loss = loss + gp_coefficient * gradient_penalty(fake, real, critic, rng)
    return loss


def loss_wasserstein_and_gp(pred, target, critic: CriticParams, rng: RngStream,
                            gp_coefficient: float = 10.0):
    """Returns ``(l_w, critic_loss)``; ``l_w = -mean D(pred)`` keeps ``pred``'s graph."""
    pred, target = _pair(pred, target)
    l_w = -ad.mean(critic_forward(pred, critic))
    return l_w, critic_objective(pred.data, target.data, critic, rng, gp_coefficient)


def wasserstein_estimate(a, b, critic: CriticParams) -> float:
    """Critic's W1 estimate mean D(b) - mean D(a)."""
    with ad.no_grad():
        return float(np.mean(critic_forward(b, critic).data) - np.mean(critic_forward(a, critic).data))


# ---- optimizer ---------------------------------------------------------------------------

class Adam:
    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, grads):
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            g = g.data if isinstance(g, ad.Tensor) else g
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data = p.data - self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def train_critic(critic: CriticParams, fake, real, steps: int, rng: RngStream,
                 lr: float = 1e-4, betas=(0.5, 0.9), gp_coefficient: float = 10.0,
                 opt: Adam | None = None) -> CriticParams:
    """Critic-only updates on fixed samples (in place)."""
    opt = opt or Adam(critic.parameters(), lr, betas)
    for _ in range(steps):
        loss = critic_objective(fake, real, critic, rng, gp_coefficient)
        opt.step(ad.grad(loss, critic.parameters()))
    return critic


# ---- calibration loop --------------------------------------------------------------

def composite_loss(pred: ad.Tensor, target: np.ndarray, critic: CriticParams, cfg: CalibrationConfig):
    """Weighted loss and its components. A zero weight keeps that term off the graph."""
    tgt = ad.tensor(target)
    parts = {}
    weights = {"l_w": cfg.lambda_w, "l_moment": cfg.lambda_moment, "l_corr": cfg.lambda_corr}
    fns = {
        "l_w": lambda p: -ad.mean(critic_forward(p, critic)),
        "l_moment": lambda p: loss_moment(p, tgt, cfg.match_variance),
        "l_corr": lambda p: loss_corr(p, tgt),
    }
    total = loss_sup(pred, tgt)
    parts["l_sup"] = float(total.data)
    for name, fn in fns.items():
        if weights[name] == 0.0:
            with ad.no_grad():
                parts[name] = float(fn(pred.detach()).data)
            continue
        term = fn(pred)
        parts[name] = float(term.data)
        total = total + weights[name] * term
    return total, parts


def calibrate(target: TargetField, model: ModelParams, critic: CriticParams,
              cfg: CalibrationConfig):
    """Calibrate a copy of ``model`` against ``target``; returns ``(model, trajectory)``."""
    model, _, trajectory = run_calibration(target, model, critic, cfg)
    return model, trajectory


def run_calibration(target: TargetField, model: ModelParams, critic: CriticParams,
                    cfg: CalibrationConfig):
    """Like :func:`calibrate` but also returns the trained critic.

    Inputs are copied, never mutated. Each outer step trains the critic for
    ``critic_steps_per_update`` steps against the current batch prediction,
    then takes one Adam step on the composite loss.
    """
    n = target.grid.size
    if cfg.batch_size > n:
        raise DomainError(f"batch_size {cfg.batch_size} exceeds grid size {n}")
    model = model.copy()
    critic = critic.copy()
    y = np.asarray(target.values, dtype=np.float64)
    phi = embed(target.grid.coords, model.embedding)
    rng_batch = RngStream(cfg.seed, BATCH_STREAM)
    rng_gp = RngStream(cfg.seed, GP_STREAM)
    params = model.parameters()
    opt = Adam(params, cfg.learning_rate, (0.9, 0.999))
    copt = Adam(critic.parameters(), cfg.critic_learning_rate, (0.5, 0.9))
    trajectory = []

    for it in range(cfg.iterations):
        idx = np.sort(rng_batch.choice(n, cfg.batch_size))
        yb = y[idx]
        pred = ad.reshape(forward_features(phi[idx], model, train=True), (-1,))
        if cfg.lambda_w > 0:
            train_critic(critic, pred.data, yb, cfg.critic_steps_per_update, rng_gp,
                         gp_coefficient=cfg.gp_coefficient, opt=copt)
        total, parts = composite_loss(pred, yb, critic, cfg)
        l_total = float(total.data)
        if not math.isfinite(l_total):
            raise NumericError(f"non-finite calibration loss at iteration {it}")
        opt.step(ad.grad(total, params))
        trajectory.append(LossBreakdown(it, parts["l_sup"], parts["l_w"], parts["l_moment"],
                                        parts["l_corr"], l_total))
        if cfg.eval_every and (it % cfg.eval_every == 0 or it == cfg.iterations - 1):
            with ad.no_grad():
                full = forward_features(phi, model, train=False).data.ravel()
            log.info("iter %d loss %.5f rmse %.4f corr %.4f", it, l_total, rmse(full, y),
                     pearson(full, y) if np.ptp(full) > 0 else float("nan"))
    return model, critic, trajectory
