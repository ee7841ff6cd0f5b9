"""Online training of one expert and the checkpoint container."""
from __future__ import annotations

import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..datagen import GenConfig, Sample, SampleStream
from ..kinematics import TypeConfig
from ..metrics import InvalidDims, simulation_metric
from .lstm import ExpertHyperParams, ExpertModel, init_params, loss_and_grad, predict_batch
from .optim import AdamState, adam_step, lr_at

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "fourbar-expert/1"

# Sub-seeds derived from the run seed, one generator per consumer.
_DATA, _PROBE, _DROPOUT, _INIT = 0, 1, 2, 3


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainReport:
    epoch_loss: list[float] = field(default_factory=list)
    probe_s_simul: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"epoch_loss": self.epoch_loss, "probe_s_simul": self.probe_s_simul, "lr": self.lr}

    def write_csv(self, path) -> None:
        lines = ["epoch,loss,probe_s_simul,lr"]
        for i, (a, b, c) in enumerate(zip(self.epoch_loss, self.probe_s_simul, self.lr)):
            lines.append(f"{i},{a!r},{b!r},{c!r}")
        Path(path).write_text("\n".join(lines) + "\n")


@dataclass
class TrainState:
    """Everything needed to continue a run exactly where it stopped."""

    model: ExpertModel
    adam: AdamState
    data: SampleStream
    dropout_rng: np.random.Generator
    epoch: int = 0
    report: TrainReport = field(default_factory=TrainReport)


def gen_config_for(cfg: TypeConfig, hyper: ExpertHyperParams, which: int = _DATA) -> GenConfig:
    return GenConfig(cfg, m=hyper.m, n_points=tuple(hyper.n_range), seed=hyper.seed * 4 + which)


def _seeded(hyper: ExpertHyperParams, which: int) -> np.random.Generator:
    return np.random.default_rng([hyper.seed, which])


def new_state(cfg: TypeConfig, hyper: ExpertHyperParams, data: SampleStream | None = None) -> TrainState:
    model = ExpertModel(cfg, hyper, init_params(hyper.layers, hyper.hidden, _seeded(hyper, _INIT)))
    if data is None:
        data = SampleStream(gen_config_for(cfg, hyper), _seeded(hyper, _DATA))
    return TrainState(model, AdamState.zeros_like(model.params), data, _seeded(hyper, _DROPOUT))


def probe_set(cfg: TypeConfig, hyper: ExpertHyperParams, size: int | None = None) -> list[list[Sample]]:
    """Held-out samples drawn from an independent generator, in equal-length batches."""
    size = hyper.probe_size if size is None else size
    stream = SampleStream(gen_config_for(cfg, hyper, _PROBE), _seeded(hyper, _PROBE))
    batches = []
    while size > 0:
        k = min(size, hyper.batch_size)
        batches.append(stream.batch(k))
        size -= k
    return batches


def batch_arrays(samples: list[Sample]) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([s.points for s in samples])
    y = np.array([s.r for s in samples], dtype=float)
    return x, y


def score_samples(model: ExpertModel, batches: list[list[Sample]]) -> list[float]:
    """S_simul of the model's prediction on each sample; invalid lengths score 2."""
    scores = []
    for batch in batches:
        x, _ = batch_arrays(batch)
        rs = predict_batch(model, x)
        for s, r in zip(batch, rs):
            try:
                scores.append(simulation_metric(tuple(r.tolist()), model.cfg, s.points).s_simul)
            except InvalidDims:
                scores.append(2.0)
    return scores


def run_epochs(state: TrainState, until: int, probe=None, checkpoint_path=None) -> TrainState:
    """Advance training to epoch ``until`` (exclusive count of completed epochs)."""
    hyper = state.model.hyper
    model = state.model
    steps = hyper.samples_per_epoch // hyper.batch_size
    for epoch in range(state.epoch, until):
        lr = lr_at(epoch, hyper.lr, hyper.schedule_milestones, hyper.gamma)
        total = 0.0
        for _ in range(steps):
            x, y = batch_arrays(state.data.batch(hyper.batch_size))
            loss, grads, _ = loss_and_grad(model, x, y, True, state.dropout_rng)
            if not math.isfinite(loss):
                raise TrainingDiverged(
                    f"{model.cfg.label}: non-finite loss at epoch {epoch} (lr={lr:g}); "
                    f"max |w| = {max(float(np.abs(w).max()) for w in model.params.values()):.3g}"
                )
            adam_step(model.params, grads, state.adam, lr, hyper.weight_decay)
            total += loss
        probe_s = float(np.mean(score_samples(model, probe))) if probe else float("nan")
        state.report.epoch_loss.append(total / steps)
        state.report.probe_s_simul.append(probe_s)
        state.report.lr.append(lr)
        state.epoch = epoch + 1
        logger.info("%s epoch %d loss %.5f probe S %.5f lr %.2e", model.cfg.label, epoch, total / steps, probe_s, lr)
        if checkpoint_path and hyper.checkpoint_every and state.epoch % hyper.checkpoint_every == 0:
            save_checkpoint(checkpoint_path, state)
    return state


def train_expert(
    cfg: TypeConfig,
    hyper: ExpertHyperParams,
    data: SampleStream | None = None,
    checkpoint_path=None,
    resume: TrainState | None = None,
) -> tuple[ExpertModel, TrainReport]:
    """Train one expert on fresh samples for ``hyper.epochs`` epochs."""
    state = resume if resume is not None else new_state(cfg, hyper, data)
    probe = probe_set(cfg, hyper) if hyper.probe_size else None
    run_epochs(state, hyper.epochs, probe, checkpoint_path)
    if checkpoint_path:
        save_checkpoint(checkpoint_path, state)
    return state.model, state.report


# -- checkpoint container ----------------------------------------------------
#
# A numpy .npz archive. Arrays:
#   param/<name>, adam_m/<name>, adam_v/<name>   float64, shapes in meta
#   meta                                        0-d unicode array holding JSON
# meta keys: format, type_config, hyper, epoch, adam_t, shapes,
#            data_gen_config, data_rng_state, dropout_rng_state, report


def _jsonable_state(state: dict) -> dict:
    return json.loads(json.dumps(state, default=int))


def save_checkpoint(path, state: TrainState) -> None:
    model = state.model
    meta = {
        "format": CHECKPOINT_FORMAT,
        "type_config": {"type_id": model.cfg.type_id, "inversion": model.cfg.inversion},
        "hyper": model.hyper.to_json(),
        "epoch": state.epoch,
        "adam_t": state.adam.t,
        "shapes": {k: list(v.shape) for k, v in model.params.items()},
        "data_gen_config": state.data.cfg.to_json(),
        "data_rng_state": _jsonable_state(state.data.get_state()),
        "dropout_rng_state": _jsonable_state(state.dropout_rng.bit_generator.state),
        "report": state.report.to_json(),
    }
    arrays = {"meta": np.array(json.dumps(meta))}
    for k, v in model.params.items():
        arrays[f"param/{k}"] = v
        arrays[f"adam_m/{k}"] = state.adam.m[k]
        arrays[f"adam_v/{k}"] = state.adam.v[k]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(buf.getvalue())
    tmp.replace(path)


def load_checkpoint(path) -> TrainState:
    with np.load(Path(path), allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: unsupported checkpoint format {meta.get('format')!r}")
        names = list(meta["shapes"])
        params = {k: z[f"param/{k}"].copy() for k in names}
        adam = AdamState(
            {k: z[f"adam_m/{k}"].copy() for k in names},
            {k: z[f"adam_v/{k}"].copy() for k in names},
            int(meta["adam_t"]),
        )
    for k in names:
        if list(params[k].shape) != meta["shapes"][k]:
            raise ValueError(f"{path}: shape mismatch for {k}")
    tc = meta["type_config"]
    cfg = TypeConfig(tc["type_id"], tc["inversion"])
    hyper = ExpertHyperParams.from_json(meta["hyper"])
    model = ExpertModel(cfg, hyper, params)
    data = SampleStream(GenConfig.from_json(meta["data_gen_config"]), np.random.default_rng())
    data.set_state(meta["data_rng_state"])
    dropout = np.random.default_rng()
    dropout.bit_generator.state = meta["dropout_rng_state"]
    rep = meta["report"]
    report = TrainReport(list(rep["epoch_loss"]), list(rep["probe_s_simul"]), list(rep["lr"]))
    return TrainState(model, adam, data, dropout, int(meta["epoch"]), report)


def load_model(path) -> ExpertModel:
    return load_checkpoint(path).model
