"""Training: multi-task refinement, single-task training and fine-tuning,
toy masked-LM pretraining, and the Adamax/schedule stack.

The multi-task loop merges per-dataset mini-batches into one shuffled
epoch schedule; every batch is single-task and each optimizer step updates
exactly the shared parameters plus that task's head. Training is a
deterministic function of (configs, seeds, data): all randomness is drawn
from generators derived by ``seeding.rng_from``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import tensor as T
from .checkpoint import ModelCheckpoint
from .encoder import EncoderConfig, encode, init_params
from .errors import (ConfigError, ContractError, DataError, MetricError,
                     NumericError, TrainingDiverged)
from .heads import TaskSpec, batch_loss, new_head, predict, token_ce_loss
from .metrics import compute_metric
from .seeding import rng_from
from .tokenizer import IGNORE_TAG, EncodedInput, Vocab

ADAMAX_BETA1 = 0.9
ADAMAX_BETA2 = 0.999
ADAMAX_EPS = 1e-8

# last name component decides weight-decay exclusion: biases and norm params
_NO_DECAY_LEAVES = frozenset(
    {"b", "b1", "b2", "bq", "bk", "bv", "bo", "beta", "gamma", "bias"})


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings; defaults are the refinement-stage values."""

    learning_rate: float = 5e-5
    batch_size: int = 32
    warmup: float = 0.1
    weight_decay: float = 0.01
    clip_norm: float = 1.0
    max_epochs: int = 100
    dropout: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0 or self.batch_size < 1 or self.max_epochs < 0:
            raise ConfigError(
                "learning_rate/max_epochs must be >= 0 and batch_size >= 1")
        if not 0.0 <= self.warmup < 1.0:
            raise ConfigError("warmup fraction must be in [0, 1)")
        if self.weight_decay < 0 or self.clip_norm <= 0:
            raise ConfigError("weight_decay must be >= 0 and clip_norm > 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")

    @classmethod
    def refinement(cls, **overrides) -> "TrainConfig":
        return cls(**overrides)

    @classmethod
    def fine_tuning(cls, **overrides) -> "TrainConfig":
        base = dict(learning_rate=1e-5, max_epochs=10)
        base.update(overrides)
        return cls(**base)


class TrainResult(NamedTuple):
    checkpoint: ModelCheckpoint
    log: list  # (epoch, task, mean train loss, dev metric) rows


# ---------------------------------------------------------------------------
# schedule
# ---------------------------------------------------------------------------

def build_epoch_schedule(dataset_sizes: dict, batch_size: int,
                         epoch_seed) -> list[tuple[str, list[int]]]:
    """One epoch's merged batch order: per dataset, shuffle example indices
    and chunk into ceil(n/batch) batches (last may be partial), then pool
    all batches and shuffle the pool. Deterministic in ``epoch_seed``."""
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    seed_parts = epoch_seed if isinstance(epoch_seed, tuple) else (epoch_seed,)
    pool = []
    for name, size in dataset_sizes.items():
        if size < 1:
            raise ConfigError(f"dataset {name!r} is empty")
        order = rng_from("schedule", *seed_parts, name).permutation(size)
        for i in range(0, size, batch_size):
            pool.append((name, [int(j) for j in order[i:i + batch_size]]))
    pool_order = rng_from("schedule-pool", *seed_parts).permutation(len(pool))
    return [pool[i] for i in pool_order]


def batches_per_epoch(dataset_sizes: dict, batch_size: int) -> int:
    return sum(math.ceil(n / batch_size) for n in dataset_sizes.values())


def lr_at(step: int, total_steps: int, warmup_fraction: float, peak: float) -> float:
    """Linear 0 -> peak over the warmup steps, then linear peak -> 0."""
    if not 0 <= step <= total_steps:
        raise ContractError(f"step {step} outside [0, {total_steps}]")
    warmup_steps = max(1, round(warmup_fraction * total_steps))
    if step <= warmup_steps:
        return peak * step / warmup_steps
    return peak * (total_steps - step) / (total_steps - warmup_steps)


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

@dataclass
class AdamaxState:
    """Per-parameter first moment, infinity-norm accumulator, step count."""

    m: np.ndarray
    u: np.ndarray
    t: int = 0


def adamax_update(param: np.ndarray, grad: np.ndarray, state: AdamaxState,
                  lr: float, weight_decay: float = 0.0):
    """One Adamax step; returns (new param, new state).

    g = grad + wd*param; m = b1*m + (1-b1)*g; u = max(b2*u, |g|);
    param' = param - lr*m / ((1 - b1^t) * (u + eps)).
    """
    if not np.isfinite(grad).all():
        raise NumericError("adamax_update received a non-finite gradient")
    t = state.t + 1
    g = grad + weight_decay * param if weight_decay else grad
    m = ADAMAX_BETA1 * state.m + (1.0 - ADAMAX_BETA1) * g
    u = np.maximum(ADAMAX_BETA2 * state.u, np.abs(g))
    correction = 1.0 - ADAMAX_BETA1 ** t
    new_param = param - lr * m / (correction * (u + ADAMAX_EPS))
    return new_param, AdamaxState(m, u, t)


def decay_applies(name: str) -> bool:
    return name.rsplit("/", 1)[-1] not in _NO_DECAY_LEAVES


class Adamax:
    """Adamax over a named parameter dict; per-parameter state is created on
    first update, so heads untouched in a step keep their state untouched."""

    def __init__(self):
        self.states: dict[str, AdamaxState] = {}

    def step(self, params: dict, grads: dict, lr: float,
             weight_decay: float = 0.0) -> None:
        for name, grad in grads.items():
            state = self.states.get(name)
            if state is None:
                state = AdamaxState(np.zeros_like(params[name]),
                                    np.zeros_like(params[name]))
            wd = weight_decay if decay_applies(name) else 0.0
            params[name], self.states[name] = adamax_update(
                params[name], grad, state, lr, wd)


def clip_gradients(grads: dict, max_norm: float = 1.0) -> dict:
    """Scale every gradient by max_norm/norm when the global L2 norm exceeds
    max_norm; returns the same dict."""
    total_sq = sum(float((g * g).sum()) for g in grads.values())
    total = math.sqrt(total_sq)
    if total > max_norm:
        scale = max_norm / total
        for name in grads:
            grads[name] = grads[name] * scale
    return grads


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _eval_batches(data, batch_size):
    for i in range(0, len(data), batch_size):
        yield data[i:i + batch_size]


def evaluate_task(task: TaskSpec, params: dict, config: EncoderConfig,
                  data: list[EncodedInput], batch_size: int = 32) -> float:
    """Dev/test metric for one task; NaN when the metric is undefined on the
    given set (e.g. Pearson on a single example)."""
    if not data:
        return float("nan")
    preds, golds = [], []
    for batch in _eval_batches(data, batch_size):
        hidden = encode(params, config, batch, mode="eval")
        out = predict(task, params, hidden)
        if task.kind == "tagging":
            for row, enc in zip(out, batch):
                keep = [i for i, t in enumerate(enc.label) if t != IGNORE_TAG]
                preds.append([task.tags[row[i]] for i in keep])
                golds.append([task.tags[enc.label[i]] for i in keep])
        elif task.kind == "similarity":
            preds.extend(float(v) for v in out)
            golds.extend(float(e.label) for e in batch)
        else:
            preds.extend(int(v) for v in out)
            golds.extend(int(e.label) for e in batch)
    positives = ()
    if task.metric == "micro_f1":
        positives = {i for i, name in enumerate(task.labels)
                     if name != task.negative_label}
    try:
        return compute_metric(task.metric, preds, golds, positives).value
    except MetricError:
        return float("nan")


# ---------------------------------------------------------------------------
# training loops
# ---------------------------------------------------------------------------

def _copy_params(params: dict) -> dict:
    return {k: v.copy() for k, v in params.items()}


def _shared_names(params: dict) -> list[str]:
    return [k for k in params if k.startswith("shared/")]


def _make_checkpoint(config: EncoderConfig, params: dict,
                     tasks: list[TaskSpec], seeds: dict) -> ModelCheckpoint:
    return ModelCheckpoint(
        encoder_config=config,
        tensors=_copy_params(params),
        tasks=[{"name": t.name, "kind": t.kind} for t in tasks],
        seeds=dict(seeds))


def _train_step(params, tracked_names, task, batch, econfig, config,
                optimizer, lr, epoch, step_in_epoch):
    """Forward + backward + clipped Adamax update for one batch."""
    rng = rng_from("dropout", config.seed, epoch, step_in_epoch)
    tape = T.GradientTape()
    tracked = {name: tape.parameter(name, params[name]) for name in tracked_names}
    hidden = encode(tracked, econfig, batch, mode="train", dropout_rng=rng)
    loss = batch_loss(task, tracked, hidden, batch, mode="train",
                      dropout=config.dropout, rng=rng)
    grads = T.backward(tape, loss)
    clip_gradients(grads, config.clip_norm)
    optimizer.step(params, grads, lr, config.weight_decay)
    return float(loss.data)


def mtl_refine(encoder_params: dict, econfig: EncoderConfig,
               tasks: list[TaskSpec], train_data: dict, config: TrainConfig,
               dev_data: Optional[dict] = None) -> TrainResult:
    """Joint training over the merged, shuffled batch schedule.

    Fresh heads are created for every task; each epoch rebuilds the
    schedule with a new shuffle. The returned checkpoint is the epoch with
    the best unweighted mean dev metric across tasks (the final epoch when
    no dev data is given). Raises TrainingDiverged, carrying the last
    finite checkpoint, if a loss goes non-finite.
    """
    if not tasks:
        raise ConfigError("mtl_refine needs at least one task")
    for task in tasks:
        if not train_data.get(task.name):
            raise ConfigError(f"no training data for task {task.name!r}")

    params = {k: v.copy() for k, v in encoder_params.items()
              if k.startswith("shared/")}
    head_names: dict[str, list[str]] = {}
    for task in tasks:
        head = new_head(task, econfig.hidden_size, config.seed)
        params.update(head)
        head_names[task.name] = list(head)
    shared = _shared_names(params)
    by_name = {t.name: t for t in tasks}

    sizes = {t.name: len(train_data[t.name]) for t in tasks}
    total_steps = config.max_epochs * batches_per_epoch(sizes, config.batch_size)
    optimizer = Adamax()
    step = 0
    log: list[tuple] = []
    best_score = -math.inf
    best_params = None

    for epoch in range(1, config.max_epochs + 1):
        schedule = build_epoch_schedule(sizes, config.batch_size,
                                        (config.seed, epoch))
        loss_sum = {t.name: 0.0 for t in tasks}
        loss_count = {t.name: 0 for t in tasks}
        for j, (task_name, idxs) in enumerate(schedule):
            step += 1
            lr = lr_at(step, total_steps, config.warmup, config.learning_rate)
            batch = [train_data[task_name][i] for i in idxs]
            try:
                loss = _train_step(params, shared + head_names[task_name],
                                   by_name[task_name], batch, econfig, config,
                                   optimizer, lr, epoch, j)
            except NumericError as e:
                raise TrainingDiverged(
                    f"loss diverged at epoch {epoch}, batch {j} "
                    f"(task {task_name}): {e}",
                    last_good=_make_checkpoint(econfig, params, tasks,
                                               {"seed": config.seed}))
            loss_sum[task_name] += loss
            loss_count[task_name] += 1

        epoch_metrics = []
        for task in tasks:
            dev = (dev_data or {}).get(task.name)
            metric = evaluate_task(task, params, econfig, dev or [],
                                   config.batch_size)
            epoch_metrics.append(metric)
            log.append((epoch, task.name,
                        loss_sum[task.name] / max(1, loss_count[task.name]),
                        metric))
        valid = [m for m in epoch_metrics if not math.isnan(m)]
        if valid:
            score = sum(valid) / len(valid)
            if score > best_score:
                best_score = score
                best_params = _copy_params(params)

    final = best_params if best_params is not None else params
    return TrainResult(
        _make_checkpoint(econfig, final, tasks, {"seed": config.seed}), log)


def _single_task_loop(params: dict, econfig: EncoderConfig, task: TaskSpec,
                      train_data: list, config: TrainConfig,
                      dev_data: Optional[list]) -> TrainResult:
    """Plain one-task trainer used for baselines and fine-tuning."""
    if not train_data:
        raise ConfigError(f"no training data for task {task.name!r}")
    tracked_names = _shared_names(params) + list(
        k for k in params if k.startswith(f"task/{task.name}/"))
    sizes = {task.name: len(train_data)}
    total_steps = config.max_epochs * batches_per_epoch(sizes, config.batch_size)
    optimizer = Adamax()
    step = 0
    log: list[tuple] = []
    best_score = -math.inf
    best_params = None

    for epoch in range(1, config.max_epochs + 1):
        schedule = build_epoch_schedule(sizes, config.batch_size,
                                        (config.seed, epoch))
        loss_sum, loss_count = 0.0, 0
        for j, (_, idxs) in enumerate(schedule):
            step += 1
            lr = lr_at(step, total_steps, config.warmup, config.learning_rate)
            batch = [train_data[i] for i in idxs]
            try:
                loss = _train_step(params, tracked_names, task, batch, econfig,
                                   config, optimizer, lr, epoch, j)
            except NumericError as e:
                raise TrainingDiverged(
                    f"loss diverged at epoch {epoch}, batch {j} "
                    f"(task {task.name}): {e}",
                    last_good=_make_checkpoint(econfig, params, [task],
                                               {"seed": config.seed}))
            loss_sum += loss
            loss_count += 1

        metric = evaluate_task(task, params, econfig, dev_data or [],
                               config.batch_size)
        log.append((epoch, task.name, loss_sum / max(1, loss_count), metric))
        if not math.isnan(metric) and metric > best_score:
            best_score = metric
            best_params = _copy_params(params)

    final = best_params if best_params is not None else params
    return TrainResult(
        _make_checkpoint(econfig, final, [task], {"seed": config.seed}), log)


def train_single_task(encoder_params: dict, econfig: EncoderConfig,
                      task: TaskSpec, train_data: list, config: TrainConfig,
                      dev_data: Optional[list] = None) -> TrainResult:
    """Single-task baseline: fresh head on the given encoder, then train all
    layers on that one dataset."""
    params = {k: v.copy() for k, v in encoder_params.items()
              if k.startswith("shared/")}
    params.update(new_head(task, econfig.hidden_size, config.seed))
    return _single_task_loop(params, econfig, task, train_data, config, dev_data)


def fine_tune(ckpt: ModelCheckpoint, task: TaskSpec, train_data: list,
              config: TrainConfig, dev_data: Optional[list] = None) -> TrainResult:
    """Continue training a refined checkpoint on one task after replacing
    that task's head with a fresh one (shared parameters carried over
    verbatim; other tasks' heads are dropped from the result)."""
    econfig = ckpt.encoder_config
    shared = ckpt.shared_tensors()
    # validates presence and shapes of every shared tensor
    params = init_params(econfig, checkpoint_tensors=shared)
    params.update(new_head(task, econfig.hidden_size, config.seed))
    if config.max_epochs == 0:
        return TrainResult(
            _make_checkpoint(econfig, params, [task], {"seed": config.seed}),
            [])
    return _single_task_loop(params, econfig, task, train_data, config, dev_data)


# ---------------------------------------------------------------------------
# masked-LM pretraining
# ---------------------------------------------------------------------------

def _mask_batch(batch: list[EncodedInput], vocab: Vocab, mask_prob: float,
                rng: np.random.Generator, replace_pool: np.ndarray):
    """BERT-style masking: each real non-special position is selected with
    probability mask_prob (at least one per sequence when possible); of the
    selected, 80% become [MASK], 10% a random token, 10% stay unchanged.
    Returns the corrupted batch and the (B, T) target matrix holding the
    original ids at selected positions and IGNORE_TAG elsewhere."""
    corrupted = []
    targets = np.full((len(batch), len(batch[0])), IGNORE_TAG, dtype=np.intp)
    special = (vocab.cls_id, vocab.sep_id, vocab.pad_id)
    for row, enc in enumerate(batch):
        ids = list(enc.token_ids)
        candidates = [i for i, (tok, m) in enumerate(zip(ids, enc.attention_mask))
                      if m and tok not in special]
        if candidates:
            selected = [i for i in candidates if rng.random() < mask_prob]
            if not selected:
                selected = [candidates[rng.integers(len(candidates))]]
            for i in selected:
                targets[row, i] = ids[i]
                roll = rng.random()
                if roll < 0.8:
                    ids[i] = vocab.mask_id
                elif roll < 0.9:
                    ids[i] = int(replace_pool[rng.integers(len(replace_pool))])
        corrupted.append(EncodedInput(ids, list(enc.segment_ids),
                                      list(enc.attention_mask)))
    return corrupted, targets


def _mlm_loss(tracked: dict, econfig: EncoderConfig, batch, targets,
              mode: str, rng) -> T.Tensor:
    hidden = encode(tracked, econfig, batch, mode=mode, dropout_rng=rng)
    emb = tracked["shared/emb/token"]
    emb_t = emb if isinstance(emb, T.Tensor) else T.Tensor(emb)
    bias = tracked["mlm/bias"]
    bias_t = bias if isinstance(bias, T.Tensor) else T.Tensor(bias)
    logits = hidden @ T.transpose(emb_t, (1, 0)) + bias_t
    probs = T.softmax(logits, axis=-1)
    return token_ce_loss(probs, targets)


def _replace_pool(vocab: Vocab) -> np.ndarray:
    special = {vocab.pad_id, vocab.unk_id, vocab.cls_id, vocab.sep_id, vocab.mask_id}
    return np.array([i for i in range(len(vocab)) if i not in special], dtype=np.intp)


def mlm_pretrain(econfig: EncoderConfig, corpus: list[EncodedInput],
                 vocab: Vocab, config: TrainConfig,
                 mask_prob: float = 0.15) -> TrainResult:
    """Masked-LM pretraining of a randomly initialized encoder on a (toy)
    corpus, with the output projection tied to the token embedding."""
    if not corpus:
        raise ConfigError("mlm_pretrain needs a non-empty corpus")
    if not 0.0 < mask_prob < 1.0:
        raise ConfigError("mask_prob must be in (0, 1)")

    params = init_params(econfig, seed=config.seed)
    params["mlm/bias"] = np.zeros(econfig.vocab_size)
    tracked_names = list(params)
    pool = _replace_pool(vocab)
    n = len(corpus)
    steps_per_epoch = math.ceil(n / config.batch_size)
    total_steps = config.max_epochs * steps_per_epoch
    optimizer = Adamax()
    step = 0
    log: list[tuple] = []

    for epoch in range(1, config.max_epochs + 1):
        order = rng_from("mlm-order", config.seed, epoch).permutation(n)
        loss_sum, loss_count = 0.0, 0
        for j in range(steps_per_epoch):
            step += 1
            lr = lr_at(step, total_steps, config.warmup, config.learning_rate)
            idxs = order[j * config.batch_size:(j + 1) * config.batch_size]
            batch = [corpus[i] for i in idxs]
            mask_rng = rng_from("mlm-mask", config.seed, epoch, j)
            corrupted, targets = _mask_batch(batch, vocab, mask_prob, mask_rng, pool)
            if (targets == IGNORE_TAG).all():
                continue
            drop_rng = rng_from("dropout", config.seed, epoch, j)
            tape = T.GradientTape()
            tracked = {name: tape.parameter(name, params[name])
                       for name in tracked_names}
            try:
                loss = _mlm_loss(tracked, econfig, corrupted, targets, "train",
                                 drop_rng)
                grads = T.backward(tape, loss)
            except NumericError as e:
                raise TrainingDiverged(
                    f"MLM loss diverged at epoch {epoch}, batch {j}: {e}",
                    last_good=_make_checkpoint(econfig, params, [],
                                               {"seed": config.seed}))
            clip_gradients(grads, config.clip_norm)
            optimizer.step(params, grads, lr, config.weight_decay)
            loss_sum += float(loss.data)
            loss_count += 1
        log.append((epoch, "mlm", loss_sum / max(1, loss_count), float("nan")))

    return TrainResult(
        _make_checkpoint(econfig, params, [], {"seed": config.seed}), log)


def mlm_eval_loss(params: dict, econfig: EncoderConfig,
                  corpus: list[EncodedInput], vocab: Vocab,
                  mask_prob: float = 0.15, seed: int = 0,
                  batch_size: int = 32) -> float:
    """Mean masked-LM loss over the corpus with seeded masking, no training."""
    pool = _replace_pool(vocab)
    losses = []
    for j, start in enumerate(range(0, len(corpus), batch_size)):
        batch = corpus[start:start + batch_size]
        rng = rng_from("mlm-eval", seed, j)
        corrupted, targets = _mask_batch(batch, vocab, mask_prob, rng, pool)
        if (targets == IGNORE_TAG).all():
            continue
        loss = _mlm_loss(params, econfig, corrupted, targets, "eval", None)
        losses.append(float(loss.data))
    if not losses:
        raise DataError("corpus has no maskable positions")
    return sum(losses) / len(losses)


def write_training_log(rows: list, path) -> None:
    """Tab-separated log: epoch, task, loss, metric (one line per task-epoch)."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("epoch\ttask\tloss\tmetric\n")
        for epoch, task, loss, metric in rows:
            f.write(f"{epoch}\t{task}\t{loss:.10g}\t{metric:.10g}\n")
