"""Meta-training of the preference model over a simulated user population.

Each user is one task: predict that user's per-situation preference targets
from the feature vector.  Two meta-algorithms learn an initialization that
adapts to a new user in a couple of gradient steps -- an interpolation-style
update toward per-task adapted weights (reptile) and a first-order
adapted-gradient method (maml) -- plus a pooled-SGD baseline trained with the
same total gradient-step budget for fair speed comparisons.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .network import (
    FEATURE_DIM,
    LabeledSample,
    ModelParams,
    batch_loss_arrays,
    gradient_arrays,
    samples_to_arrays,
    sgd_step_arrays,
)
from .users import UserProfile
from .world import SITUATIONS

# Per-algorithm training-schedule defaults, calibrated on the desk-scale
# population (2,000 users).  The anchored schedule keeps meta checkpoints'
# zero-shot output at the population mean while shaping fast adaptation;
# epoch counts are set so every algorithm consumes the same 219k-gradient
# budget (reptile lands at 203k, slightly below the baseline's, which keeps
# the comparison generous to the baseline).
ALGO_DEFAULTS = {
    "maml": {"meta_lr": 0.25, "epochs": 4000, "anchor_steps": 24, "cooldown_steps": 0},
    "reptile": {"meta_lr": 0.25, "epochs": 10000, "anchor_steps": 0, "cooldown_steps": 0},
    "baseline": {"meta_lr": 0.0, "epochs": 7200, "anchor_steps": 0, "cooldown_steps": 0},
}

# Distinct seed streams per algorithm so runs don't share draws.
_ALGO_STREAM = {"maml": 1, "reptile": 2, "baseline": 3}


@dataclass(frozen=True)
class MetaConfig:
    """Hyperparameters shared by the meta algorithms and the baseline.

    ``meta_lr``, ``epochs`` and ``anchor_steps`` default per algorithm (see
    ALGO_DEFAULTS) when left None.
    """

    algo: str = "maml"
    inner_lr: float = 0.1
    meta_lr: float | None = None
    inner_steps: int = 2
    epochs: int | None = None
    batch_size: int = 10
    support_size: int = 10
    query_size: int = 10
    warmup_steps: int = 3000
    anchor_steps: int | None = None
    cooldown_steps: int | None = None
    calibration_steps: int = 2000
    calibration_batch: int = 200
    seed: int = 7

    def __post_init__(self):
        if self.algo not in ("maml", "reptile", "baseline"):
            raise ValueError(f"unknown algo {self.algo!r}")
        for field_name in ("meta_lr", "epochs", "anchor_steps", "cooldown_steps"):
            if getattr(self, field_name) is None:
                object.__setattr__(self, field_name, ALGO_DEFAULTS[self.algo][field_name])
        # Zero rates are legal: they are the degenerate identities (no inner
        # adaptation / no meta movement) that the algorithm contracts pin down.
        if self.inner_lr < 0 or self.inner_steps < 1 or self.batch_size < 1:
            raise ValueError("invalid meta config")
        if self.support_size < 1 or self.query_size < 1 or self.epochs < 0:
            raise ValueError("invalid meta config")
        if self.warmup_steps < 0 or self.anchor_steps < 0 or self.cooldown_steps < 0:
            raise ValueError("invalid meta config")
        if self.calibration_steps < 0 or self.calibration_batch < 1:
            raise ValueError("invalid meta config")
        if self.meta_lr < 0:
            raise ValueError("meta_lr must be nonnegative")

    @property
    def grad_evals_per_epoch(self) -> int:
        """Gradient evaluations one meta epoch spends (baseline budget parity)."""
        return self.batch_size * (self.inner_steps + 1) + self.anchor_steps


@dataclass(frozen=True)
class TaskBatch:
    """One epoch's sampled users plus the dataset seed for their tasks."""

    users: tuple[UserProfile, ...]
    support_size: int
    query_size: int
    seed: int

    def task_seed(self, index: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(entropy=(self.seed, index))


def _target_matrix(user: UserProfile) -> np.ndarray:
    return np.stack([user.target_array(code) for code in SITUATIONS])


def task_arrays(user: UserProfile, m: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Sample ``m`` (features, label) rows for one user's task.

    Situations are drawn uniformly; status entries are uniform noise; the two
    distance entries are drawn consistently with the situation flags (near
    means a normalized distance at or below 0.5).  Labels are the user's
    target for the drawn situation.
    """
    rng = np.random.default_rng(seed)
    situations = rng.integers(0, len(SITUATIONS), size=m)
    statuses = rng.uniform(size=(m, 4))
    u_obs = rng.uniform(size=m)
    u_tgt = rng.uniform(size=m)

    near_obstacle = np.array([SITUATIONS[s][0] == "T" for s in situations])
    near_target = np.array([SITUATIONS[s][1] == "T" for s in situations])
    x = np.zeros((m, FEATURE_DIM))
    x[:, :4] = statuses
    x[np.arange(m), 4 + situations] = 1.0
    x[:, 8] = np.where(near_obstacle, 0.5 * u_obs, 0.5 + 0.5 * u_obs)
    x[:, 9] = np.where(near_target, 0.5 * u_tgt, 0.5 + 0.5 * u_tgt)
    y = _target_matrix(user)[situations]
    return x, y


def make_task_dataset(user: UserProfile, m: int, seed) -> list[LabeledSample]:
    """Labeled task samples for one user (list form of :func:`task_arrays`)."""
    if m < 2:
        raise ValueError("task dataset needs m >= 2")
    x, y = task_arrays(user, m, seed)
    return [LabeledSample(input=x[i], label=y[i]) for i in range(m)]


def inner_adapt_arrays(
    params: ModelParams, x: np.ndarray, y: np.ndarray, lr: float, steps: int
) -> ModelParams:
    for _ in range(steps):
        params = sgd_step_arrays(params, x, y, lr)
    return params


def inner_adapt(params: ModelParams, support: list[LabeledSample], lr: float, steps: int) -> ModelParams:
    """``steps`` successive full-batch SGD steps on the support set."""
    if not support:
        raise ValueError("empty batch")
    x, y = samples_to_arrays(support)
    return inner_adapt_arrays(params, x, y, lr, steps)


def _batch_tasks(params: ModelParams, batch: TaskBatch):
    """Yield per-user (support arrays, query arrays) for the batch."""
    m = batch.support_size + batch.query_size
    for i, user in enumerate(batch.users):
        x, y = task_arrays(user, m, batch.task_seed(i))
        yield (x[: batch.support_size], y[: batch.support_size],
               x[batch.support_size:], y[batch.support_size:])


def maml_epoch_stats(params: ModelParams, batch: TaskBatch, cfg: MetaConfig):
    """First-order meta update: query gradients taken at adapted parameters."""
    grads = []
    support_losses = []
    query_pre = []
    query_post = []
    for xs, ys, xq, yq in _batch_tasks(params, batch):
        adapted = inner_adapt_arrays(params, xs, ys, cfg.inner_lr, cfg.inner_steps)
        grads.append(gradient_arrays(adapted, xq, yq))
        support_losses.append(batch_loss_arrays(params, xs, ys))
        query_pre.append(batch_loss_arrays(params, xq, yq))
        query_post.append(batch_loss_arrays(adapted, xq, yq))
    meta_grad = np.mean(np.stack(grads), axis=0)
    new_params = params.with_theta(params.theta - cfg.meta_lr * meta_grad)
    stats = {
        "mean_support_loss": float(np.mean(support_losses)),
        "mean_query_loss_pre": float(np.mean(query_pre)),
        "mean_query_loss_post": float(np.mean(query_post)),
    }
    return new_params, stats


def maml_epoch(params: ModelParams, batch: TaskBatch, cfg: MetaConfig) -> ModelParams:
    return maml_epoch_stats(params, batch, cfg)[0]


def reptile_epoch_stats(params: ModelParams, batch: TaskBatch, cfg: MetaConfig):
    """Move the initialization toward per-task adapted parameters:
    theta <- theta + beta * mean(theta_i' - theta)."""
    adapted_thetas = []
    support_losses = []
    query_pre = []
    query_post = []
    for xs, ys, xq, yq in _batch_tasks(params, batch):
        # Reptile has no support/query distinction: adapt on the full task set.
        x_all = np.concatenate([xs, xq])
        y_all = np.concatenate([ys, yq])
        adapted = inner_adapt_arrays(params, x_all, y_all, cfg.inner_lr, cfg.inner_steps)
        adapted_thetas.append(adapted.theta)
        support_losses.append(batch_loss_arrays(params, xs, ys))
        query_pre.append(batch_loss_arrays(params, xq, yq))
        query_post.append(batch_loss_arrays(adapted, xq, yq))
    beta = cfg.meta_lr
    if beta == 1.0 and len(adapted_thetas) == 1:
        # a full step onto a single task must land exactly on its adapted
        # parameters; theta + (theta' - theta) can be off by an ulp
        new_theta = adapted_thetas[0]
    else:
        displacement = np.mean(np.stack([t - params.theta for t in adapted_thetas]), axis=0)
        new_theta = params.theta + beta * displacement
    new_params = params.with_theta(new_theta)
    stats = {
        "mean_support_loss": float(np.mean(support_losses)),
        "mean_query_loss_pre": float(np.mean(query_pre)),
        "mean_query_loss_post": float(np.mean(query_post)),
    }
    return new_params, stats


def reptile_epoch(params: ModelParams, batch: TaskBatch, cfg: MetaConfig) -> ModelParams:
    return reptile_epoch_stats(params, batch, cfg)[0]


def _pooled_batch(users, target_tensor, size, rng):
    """Pooled sample batch drawn uniformly across the whole population."""
    m = size
    user_idx = rng.integers(0, len(users), size=m)
    situations = rng.integers(0, len(SITUATIONS), size=m)
    statuses = rng.uniform(size=(m, 4))
    u_obs = rng.uniform(size=m)
    u_tgt = rng.uniform(size=m)
    near_obstacle = np.array([SITUATIONS[s][0] == "T" for s in situations])
    near_target = np.array([SITUATIONS[s][1] == "T" for s in situations])
    x = np.zeros((m, FEATURE_DIM))
    x[:, :4] = statuses
    x[np.arange(m), 4 + situations] = 1.0
    x[:, 8] = np.where(near_obstacle, 0.5 * u_obs, 0.5 + 0.5 * u_obs)
    x[:, 9] = np.where(near_target, 0.5 * u_tgt, 0.5 + 0.5 * u_tgt)
    y = target_tensor[user_idx, situations]
    return x, y


def baseline_epoch_stats(params: ModelParams, users, target_tensor, cfg: MetaConfig, rng):
    losses = []
    for _ in range(cfg.grad_evals_per_epoch):
        x, y = _pooled_batch(users, target_tensor, cfg.support_size, rng)
        losses.append(batch_loss_arrays(params, x, y))
        params = sgd_step_arrays(params, x, y, cfg.inner_lr)
    mean_loss = float(np.mean(losses))
    stats = {
        "mean_support_loss": mean_loss,
        "mean_query_loss_pre": mean_loss,
        "mean_query_loss_post": mean_loss,
    }
    return params, stats


def _pooled_warmup(params, users, target_tensor, cfg: MetaConfig, rng) -> ModelParams:
    """cfg.warmup_steps pooled SGD steps; anchors the zero-shot prediction at
    the population's conditional mean before (or as part of) training."""
    for _ in range(cfg.warmup_steps):
        x, y = _pooled_batch(users, target_tensor, cfg.support_size, rng)
        params = sgd_step_arrays(params, x, y, cfg.inner_lr)
    return params


def _calibration_batch(users, target_tensor, size, rng):
    """Pooled batch with boundary-emphasized feature sampling.

    Plain uniform sampling gives the closed feature-box corners (a flock at
    rest, or far from everything, pins several entries to exactly 0 or 1)
    vanishing probability, leaving the readout poorly fit right where
    deployments start.  Each status entry therefore lands exactly on 0 or 1
    with probability 0.2 apiece, and each distance entry on its situation's
    boundary value with probability 0.25.
    """
    m = size
    user_idx = rng.integers(0, len(users), size=m)
    situations = rng.integers(0, len(SITUATIONS), size=m)
    statuses = rng.uniform(size=(m, 4))
    edges = rng.uniform(size=(m, 4))
    statuses = np.where(edges < 0.2, 0.0, np.where(edges > 0.8, 1.0, statuses))
    u_obs = rng.uniform(size=m)
    u_tgt = rng.uniform(size=m)
    pin_obs = rng.uniform(size=m) < 0.25
    pin_tgt = rng.uniform(size=m) < 0.25
    near_obstacle = np.array([SITUATIONS[s][0] == "T" for s in situations])
    near_target = np.array([SITUATIONS[s][1] == "T" for s in situations])
    x = np.zeros((m, FEATURE_DIM))
    x[:, :4] = statuses
    x[np.arange(m), 4 + situations] = 1.0
    x[:, 8] = np.where(near_obstacle, 0.5 * u_obs, 0.5 + 0.5 * u_obs)
    x[:, 8] = np.where(pin_obs, np.where(near_obstacle, 0.0, 1.0), x[:, 8])
    x[:, 9] = np.where(near_target, 0.5 * u_tgt, 0.5 + 0.5 * u_tgt)
    x[:, 9] = np.where(pin_tgt, np.where(near_target, 0.0, 1.0), x[:, 9])
    y = target_tensor[user_idx, situations]
    return x, y


def _calibrate_output_layer(params, users, target_tensor, cfg: MetaConfig, rng) -> ModelParams:
    """Fit the readout layer to the pooled population, hidden layers frozen.

    Large-batch SGD on the last (W, b) block only, with a decaying step size,
    lands the zero-shot prediction on the population's conditional mean while
    preserving the adaptation geometry accumulated in the hidden layers.
    Applied identically to every algorithm, baseline included.
    """
    if cfg.calibration_steps == 0:
        return params
    dims = params.layer_dims
    head = (dims[-2] + 1) * dims[-1]
    for step in range(cfg.calibration_steps):
        x, y = _calibration_batch(users, target_tensor, cfg.calibration_batch, rng)
        grad = gradient_arrays(params, x, y)
        grad[:-head] = 0.0
        lr = cfg.inner_lr * (1.0 - step / cfg.calibration_steps)
        params = params.with_theta(params.theta - lr * grad)
    return params


def train_baseline(params: ModelParams, users: list[UserProfile], cfg: MetaConfig) -> ModelParams:
    """Pooled SGD with the same gradient-step budget as a meta run."""
    if not users:
        raise ValueError("empty user population")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(cfg.seed, _ALGO_STREAM["baseline"])))
    target_tensor = np.stack([_target_matrix(u) for u in users])
    params = _pooled_warmup(params, users, target_tensor, cfg, rng)
    for _ in range(cfg.epochs):
        params, _ = baseline_epoch_stats(params, users, target_tensor, cfg, rng)
    return params


def meta_train(
    params: ModelParams, users: list[UserProfile], cfg: MetaConfig
) -> tuple[ModelParams, list[dict]]:
    """Run the configured algorithm for cfg.epochs; returns params and log rows.

    Every algorithm starts with the same pooled warmup so the meta phase
    shapes adaptability around an initialization that already predicts the
    population's per-situation mean; the baseline spends its whole budget
    (warmup plus the same per-epoch gradient-evaluation count) on pooled SGD.
    """
    if not users:
        raise ValueError("empty user population")
    log = []
    target_tensor = np.stack([_target_matrix(u) for u in users])
    if cfg.algo == "baseline":
        rng = np.random.default_rng(np.random.SeedSequence(entropy=(cfg.seed, _ALGO_STREAM["baseline"])))
        params = _pooled_warmup(params, users, target_tensor, cfg, rng)
        for epoch in range(cfg.epochs):
            params, stats = baseline_epoch_stats(params, users, target_tensor, cfg, rng)
            log.append({"epoch": epoch, **stats})
        params = _calibrate_output_layer(params, users, target_tensor, cfg, rng)
        return params, log

    epoch_fn = maml_epoch_stats if cfg.algo == "maml" else reptile_epoch_stats
    master = np.random.default_rng(np.random.SeedSequence(entropy=(cfg.seed, _ALGO_STREAM[cfg.algo])))
    params = _pooled_warmup(params, users, target_tensor, cfg, master)
    n = min(cfg.batch_size, len(users))
    for epoch in range(cfg.epochs):
        picks = master.choice(len(users), size=n, replace=False)
        batch = TaskBatch(
            users=tuple(users[int(i)] for i in picks),
            support_size=cfg.support_size,
            query_size=cfg.query_size,
            seed=int(master.integers(0, 2**62)),
        )
        params, stats = epoch_fn(params, batch, cfg)
        # pooled anchor steps after each meta update hold the zero-shot
        # prediction at the population mean while the meta epochs shape
        # few-step adaptability around it (and the run ends re-centered)
        for _ in range(cfg.anchor_steps):
            x, y = _pooled_batch(users, target_tensor, cfg.support_size, master)
            params = sgd_step_arrays(params, x, y, cfg.inner_lr)
        log.append({"epoch": epoch, **stats})
    # terminal cooldown: re-center the finished checkpoint on the pooled
    # objective without fighting the meta epochs while they run
    for _ in range(cfg.cooldown_steps):
        x, y = _pooled_batch(users, target_tensor, cfg.support_size, master)
        params = sgd_step_arrays(params, x, y, cfg.inner_lr)
    params = _calibrate_output_layer(params, users, target_tensor, cfg, master)
    return params, log


def few_shot_query_loss(
    params: ModelParams,
    users: list[UserProfile],
    cfg: MetaConfig,
    adapt_steps: int = 2,
    eval_seed: int = 9001,
) -> float:
    """Mean query loss over users after ``adapt_steps`` SGD steps on support."""
    losses = []
    for user in users:
        seq = np.random.SeedSequence(entropy=(eval_seed, user.id))
        x, y = task_arrays(user, cfg.support_size + cfg.query_size, seq)
        xs, ys = x[: cfg.support_size], y[: cfg.support_size]
        xq, yq = x[cfg.support_size:], y[cfg.support_size:]
        adapted = inner_adapt_arrays(params, xs, ys, cfg.inner_lr, adapt_steps)
        losses.append(batch_loss_arrays(adapted, xq, yq))
    return float(np.mean(losses))


def write_training_log(path, log_rows: list[dict]) -> None:
    fields = ["epoch", "mean_support_loss", "mean_query_loss_pre", "mean_query_loss_post"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in log_rows:
            writer.writerow({k: row[k] for k in fields})
