"""Siamese and triplet energy objectives plus the training loop.

Both meta-architectures share one encoder parameter store (the "two
branches" are literally the same object). The siamese energy is the
exponential negative Manhattan distance with an MSE loss against the
genuine/impostor label; the triplet objective is the softmax triplet
loss over Euclidean positive-anchor / anchor-negative energies. A
margin-based triplet loss is available for comparison runs only.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .corpus import FeaturePipeline, Meeting
from .encoder import EncoderConfig, encode_batch, init_encoder_params
from .errors import ConfigurationError, TrainingError
from .nn import AdamState, ParamStore, adam_step, backward, save_checkpoint
from .nn import tensor as T
from .nn.tensor import Tensor
from .sampling import PairExample, TripletExample, epoch_resample

log = logging.getLogger(__name__)

_VAL_EPOCH_TAG = 0xFFFFFFFF  # sentinel epoch for the frozen validation sample


@dataclass(frozen=True)
class EnergyConfig:
    """Meta-architecture choice; the distance is tied to it."""

    meta: str = "triplet"
    margin: float | None = None  # enables the comparison margin loss

    def __post_init__(self):
        if self.meta not in ("siamese", "triplet"):
            raise ConfigurationError(f"unknown meta-architecture {self.meta!r}")
        if self.margin is not None:
            if self.meta != "triplet":
                raise ConfigurationError("margin loss applies to triplet mode only")
            if self.margin <= 0:
                raise ConfigurationError("margin must be > 0")

    @property
    def distance(self) -> str:
        return "manhattan" if self.meta == "siamese" else "euclidean"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 16
    dropout: float = 0.5
    examples_per_epoch: int = 15594
    val_examples: int = 1024
    seed: int = 0
    runs: int = 10
    lr: float = 1e-3

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.runs < 1:
            raise ConfigurationError("epochs, batch size and runs must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError("dropout must be in [0, 1)")
        if self.examples_per_epoch < 0 or self.val_examples < 0:
            raise ConfigurationError("example counts must be >= 0")


# ---------------------------------------------------------------------------
# energies and loss functionals (tape versions + scalar convenience wrappers)


def _manhattan_t(x: Tensor, y: Tensor) -> Tensor:
    return T.sum_(T.absolute(T.sub(x, y)), axis=-1)


def _euclidean_t(x: Tensor, y: Tensor) -> Tensor:
    diff = T.sub(x, y)
    # the 1e-300 floor only guards the d(sqrt)/dx singularity at exactly 0
    return T.sqrt(T.add(T.sum_(T.mul(diff, diff), axis=-1), 1e-300))


def _siamese_energy_t(gx: Tensor, gy: Tensor) -> Tensor:
    return T.sub(1.0, T.exp(T.mul(_manhattan_t(gx, gy), -1.0)))


def _siamese_loss_t(energies: Tensor, labels: np.ndarray) -> Tensor:
    diff = T.sub(energies, labels)
    return T.mean_(T.mul(diff, diff))


def _normalized_energies_t(e_pa: Tensor, e_an: Tensor) -> tuple[Tensor, Tensor]:
    # softmax over two energies, computed stably as a sigmoid of the gap;
    # ne_minus = 1 - ne_plus keeps the pair summing to 1 exactly
    ne_plus = T.sigmoid(T.sub(e_pa, e_an))
    ne_minus = T.sub(1.0, ne_plus)
    return ne_plus, ne_minus


def _triplet_loss_t(e_pa: Tensor, e_an: Tensor) -> Tensor:
    ne_plus, ne_minus = _normalized_energies_t(e_pa, e_an)
    gap = T.sub(ne_minus, 1.0)
    per_example = T.mul(0.5, T.add(T.mul(ne_plus, ne_plus), T.mul(gap, gap)))
    return T.mean_(per_example)


def _margin_loss_t(e_pa: Tensor, e_an: Tensor, margin: float) -> Tensor:
    return T.mean_(T.relu(T.add(T.sub(e_pa, e_an), margin)))


def siamese_energy(gx, gy) -> float:
    """1 - exp(-||gx - gy||_1); in [0, 1)."""
    with T.no_grad():
        return float(_siamese_energy_t(Tensor(gx), Tensor(gy)).data)


def euclidean_energy(gx, gy) -> float:
    with T.no_grad():
        return float(_euclidean_t(Tensor(gx), Tensor(gy)).data)


def siamese_loss(batch) -> float:
    """Mean squared error between energies and genuine/impostor labels.

    ``batch`` is a sequence of (energy, label) with label 0 (genuine) or
    1 (impostor).
    """
    if len(batch) == 0:
        raise ConfigurationError("siamese_loss: empty batch")
    energies = np.array([e for e, _ in batch], dtype=np.float64)
    labels = np.array([c for _, c in batch], dtype=np.float64)
    if not np.isin(labels, (0.0, 1.0)).all():
        raise ConfigurationError("siamese_loss: labels must be 0 or 1")
    return float(np.mean((energies - labels) ** 2))


def normalized_energies(e_pa, e_an) -> tuple[np.ndarray, np.ndarray]:
    with T.no_grad():
        p, m = _normalized_energies_t(Tensor(e_pa), Tensor(e_an))
    return p.data, m.data


def triplet_loss(e_pa, e_an) -> float:
    """Softmax triplet loss: MSE between [ne+, ne-] and [0, 1], averaged."""
    with T.no_grad():
        return float(_triplet_loss_t(Tensor(e_pa), Tensor(e_an)).data)


def margin_triplet_loss(e_pa, e_an, margin: float) -> float:
    """Comparison-only hinge loss: mean relu(e_pa - e_an + margin)."""
    if margin <= 0:
        raise ConfigurationError("margin must be > 0")
    with T.no_grad():
        return float(_margin_loss_t(Tensor(e_pa), Tensor(e_an), margin).data)


# ---------------------------------------------------------------------------
# batched example loss


def _tasks_for(examples, feats_by_meeting) -> list:
    tasks = []
    for ex in examples:
        if isinstance(ex, TripletExample):
            refs = (ex.positive, ex.anchor, ex.negative)
        else:
            refs = (ex.x, ex.y)
        for ref in refs:
            tasks.append((feats_by_meeting[ref.meeting_id], ref.index))
    return tasks


def example_batch_loss(store: ParamStore, examples, feats_by_meeting,
                       enc_cfg: EncoderConfig, energy_cfg: EnergyConfig,
                       rng=None, training: bool = False,
                       dropout_rate: float = 0.0) -> Tensor:
    """Scalar loss Tensor over a batch of pair or triplet examples."""
    if not examples:
        raise ConfigurationError("empty example batch")
    tasks = _tasks_for(examples, feats_by_meeting)
    emb = encode_batch(store, tasks, enc_cfg, rng=rng, training=training,
                       dropout_rate=dropout_rate)
    if energy_cfg.meta == "triplet":
        B = len(examples)
        pos, anc, neg = emb[0::3, :], emb[1::3, :], emb[2::3, :]
        e_pa = _euclidean_t(pos, anc)
        e_an = _euclidean_t(anc, neg)
        if energy_cfg.margin is not None:
            return _margin_loss_t(e_pa, e_an, energy_cfg.margin)
        return _triplet_loss_t(e_pa, e_an)
    labels = np.array([ex.label for ex in examples], dtype=np.float64)
    x, y = emb[0::2, :], emb[1::2, :]
    return _siamese_loss_t(_siamese_energy_t(x, y), labels)


# ---------------------------------------------------------------------------
# training


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    checkpoint: str


@dataclass
class TrainReport:
    records: list[EpochRecord] = field(default_factory=list)
    config_hash: str = ""

    @property
    def best_epoch(self) -> int:
        if not self.records:
            raise TrainingError("no epochs trained; best epoch is undefined")
        losses = [r.val_loss for r in self.records]
        return int(np.argmin(losses))

    @property
    def best_checkpoint(self) -> str:
        return self.records[self.best_epoch].checkpoint

    def to_dict(self) -> dict:
        out = {
            "config_hash": self.config_hash,
            "epochs": [asdict(r) for r in self.records],
        }
        if self.records:
            out["best_epoch"] = self.best_epoch
            out["best_checkpoint"] = self.best_checkpoint
        return out


def config_hash(enc_cfg: EncoderConfig, energy_cfg: EnergyConfig) -> str:
    blob = json.dumps(
        {"encoder": asdict(enc_cfg), "energy": asdict(energy_cfg)},
        sort_keys=True,
    )
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _chunks(seq, size):
    for i in range(0, len(seq), size):
        yield seq[i : i + size]


def _dataset_loss(store, examples, feats, enc_cfg, energy_cfg,
                  batch_size: int) -> float:
    total, count = 0.0, 0
    with T.no_grad():
        for chunk in _chunks(examples, batch_size):
            loss = example_batch_loss(store, chunk, feats, enc_cfg, energy_cfg)
            total += float(loss.data) * len(chunk)
            count += len(chunk)
    return total / count if count else float("nan")


def train(meetings, features: FeaturePipeline, enc_cfg: EncoderConfig,
          energy_cfg: EnergyConfig, train_cfg: TrainConfig,
          out_dir) -> TrainReport:
    """Full training run: per-epoch resampling, Adam over minibatches,
    frozen validation sample, one checkpoint per epoch, best epoch by
    minimum validation loss."""
    train_meetings = [m for m in meetings if m.partition == "train"]
    val_meetings = [m for m in meetings if m.partition == "validation"]
    if not train_meetings:
        raise TrainingError("corpus has no training meetings")
    if not val_meetings:
        raise TrainingError("corpus has no validation meetings")
    feats = {m.meeting_id: features.meeting_features(m)
             for m in train_meetings + val_meetings}

    seed = train_cfg.seed
    store = init_encoder_params(
        enc_cfg, np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, 0x1217]))
    )
    adam = AdamState(lr=train_cfg.lr)
    chash = config_hash(enc_cfg, energy_cfg)
    out_dir = Path(out_dir)
    ckpt_dir = out_dir / "checkpoints"

    val_sample = epoch_resample(val_meetings, energy_cfg.meta,
                                train_cfg.val_examples, seed, _VAL_EPOCH_TAG)

    extras_header = {
        "seed": seed,
        "oov_seed": features.oov_seed,
        "encoder": asdict(enc_cfg),
        "energy": asdict(energy_cfg),
    }
    extra_arrays = features.export_state()

    report = TrainReport(config_hash=chash)
    for epoch in range(train_cfg.epochs):
        examples = epoch_resample(train_meetings, energy_cfg.meta,
                                  train_cfg.examples_per_epoch, seed, epoch)
        drop_rng = np.random.default_rng(
            np.random.SeedSequence([seed & 0xFFFFFFFF, 0xD0, epoch])
        )
        total, count = 0.0, 0
        for b, chunk in enumerate(_chunks(examples, train_cfg.batch_size)):
            store.zero_grad()
            loss = example_batch_loss(
                store, chunk, feats, enc_cfg, energy_cfg,
                rng=drop_rng, training=True, dropout_rate=train_cfg.dropout,
            )
            value = float(loss.data)
            if not np.isfinite(value):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch {b}"
                )
            backward(loss)
            # parameters outside the graph this step (e.g. the context
            # machinery with empty windows) have an exactly-zero gradient
            for p in (store[n] for n in store.names()):
                if p.grad is None:
                    p.grad = np.zeros_like(p.data)
            adam_step(store, adam)
            total += value * len(chunk)
            count += len(chunk)
        train_loss = total / count if count else float("nan")
        val_loss = _dataset_loss(store, val_sample, feats, enc_cfg,
                                 energy_cfg, batch_size=64)
        ckpt_path = ckpt_dir / f"epoch_{epoch:03d}.ckpt"
        save_checkpoint(store, ckpt_path, config_hash=chash, epoch=epoch,
                        extras=extras_header, extra_arrays=extra_arrays)
        report.records.append(
            EpochRecord(epoch, train_loss, val_loss, str(ckpt_path))
        )
        log.info("epoch %d: train loss %.6f, val loss %.6f",
                 epoch, train_loss, val_loss)
    return report
