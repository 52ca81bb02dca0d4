"""Teacher-student latent prediction and the encoder-decoder baseline."""
from __future__ import annotations

import logging
import time
import warnings
from dataclasses import asdict, dataclass, field, fields
from typing import Callable

import numpy as np

from .. import tensorcore as tc
from ..encoder import Encoder, EncoderConfig, load_params, project_mlp, save_params
from ..graph import Graph
from ..tensorcore import DimensionError, NonFiniteError, Tensor
from .masking import MaskState, apply_mask

log = logging.getLogger(__name__)

# hyperparameter grids searched for the published results
SEARCH_SPACE = {
    "lr": (0.01, 0.005, 0.001),
    "weight_decay": (0.0, 1e-3, 5e-3, 8e-3, 1e-4, 5e-4, 8e-4),
    "dropout_filters": (0.1, 0.3, 0.5, 0.7, 0.8),
    "dropout_attention": (0.1, 0.3, 0.5, 0.7, 0.8),
    "token_dim": (128, 256, 512, 1024, 2048),
    "wgcn_hidden": (16, 32, 64, 128),
    "mask_ratio": (0.9, 0.8, 0.5, 0.3, 0.2, 0.1),
    "exploit_ratio": (0.9, 0.8, 0.5, 0.3, 0.2, 0.1),
    "momentum": (0.9, 0.99, 0.999),
}


class TrainingDiverged(NonFiniteError):
    def __init__(self, message: str, snapshot: dict):
        super().__init__(message)
        self.snapshot = snapshot


@dataclass
class TrainConfig:
    epochs: int = 200
    lr: float = 0.005
    weight_decay: float = 5e-4
    momentum: float = 0.99
    mask_ratio: float = 0.5
    exploit_ratio: float = 0.5
    strategy: str = "prob"
    warmup_epochs: int = 20
    seed: int = 0
    objective: str = "teacher_student"  # or "encoder_decoder"
    token_dim: int = 128
    heads: int = 4
    wgcn_hidden: int = 64
    dropout_filters: float = 0.5
    dropout_attention: float = 0.1
    attention: bool = True
    embed_source: str = "teacher"  # or "student"

    def __post_init__(self):
        if self.objective not in ("teacher_student", "encoder_decoder"):
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.embed_source not in ("teacher", "student"):
            raise ValueError(f"unknown embedding source {self.embed_source!r}")
        if not 0.0 <= self.momentum <= 1.0:
            raise ValueError("momentum must lie in [0, 1]")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")

    def encoder_config(self, input_dim: int) -> EncoderConfig:
        return EncoderConfig(input_dim, self.token_dim, self.heads, self.wgcn_hidden,
                             self.dropout_filters, self.dropout_attention, self.attention)

    def outside_search_space(self) -> list[str]:
        return [k for k, grid in SEARCH_SPACE.items() if getattr(self, k) not in grid]

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainLog:
    losses: list = field(default_factory=list)
    mask_sizes: list = field(default_factory=list)
    epoch_seconds: list = field(default_factory=list)

    @property
    def total_seconds(self) -> float:
        return float(sum(self.epoch_seconds))

    def normalized(self) -> np.ndarray:
        arr = np.asarray(self.losses, dtype=np.float64)
        return arr / arr[0] if len(arr) and arr[0] != 0 else arr

    def records(self):
        for i, (loss, m, t) in enumerate(zip(self.losses, self.mask_sizes, self.epoch_seconds)):
            yield {"epoch": i, "loss": loss, "mask_size": m, "seconds": t}


@dataclass
class StudentTeacher:
    student: Encoder
    teacher: Encoder | None
    momentum: float
    mask_token: Tensor
    total_epochs: int
    epoch: int = 0
    decoder: dict | None = None

    @classmethod
    def create(cls, student: Encoder, momentum: float, mask_token: Tensor, total_epochs: int) -> "StudentTeacher":
        teacher = student.copy()
        for p in teacher.parameters():
            p.requires_grad = False
        return cls(student, teacher, momentum, mask_token, total_epochs)

    def embedding_model(self, source: str = "teacher") -> Encoder:
        if source == "teacher" and self.teacher is not None:
            return self.teacher
        return self.student

    def parameter_gap(self) -> float:
        """||teacher - student|| / ||student|| over all encoder tensors."""
        num = sum(float(np.sum((self.teacher.params[k].data - p.data) ** 2)) for k, p in self.student.params.items())
        den = sum(float(np.sum(p.data ** 2)) for p in self.student.params.values())
        return float(np.sqrt(num / den))


@dataclass
class TrainResult:
    model: StudentTeacher
    log: TrainLog
    mask_state: MaskState
    config: TrainConfig
    optimizer: tc.Optimizer | None = None

    def embeddings(self, g: Graph, source: str | None = None) -> np.ndarray:
        return self.model.embedding_model(source or self.config.embed_source).embed(g.features)


def latent_loss(s, t) -> Tensor:
    """(1/N) sum_v ||S(v) - T(v)||^2 over every node; ``t`` is treated as constant."""
    s = tc.as_tensor(s)
    t = t.detach() if isinstance(t, Tensor) else Tensor(t)
    if s.shape != t.shape:
        raise DimensionError(f"student {s.shape} and teacher {t.shape} outputs differ in shape")
    return tc.mse_mean(s, t)


def difficulty_scores(s, t) -> np.ndarray:
    """Per-node ||S(v) - T(v)||^2."""
    return tc.row_sq_dist(s, t)


def ema_update(st: StudentTeacher) -> None:
    """teacher <- momentum * teacher + (1 - momentum) * student, tensor by tensor."""
    a = st.momentum
    for name, p in st.student.params.items():
        t = st.teacher.params[name]
        t.data = a * t.data + (1.0 - a) * p.data


def init_decoder(embed_dim: int, hidden: int, out_dim: int, rng) -> dict[str, Tensor]:
    return {
        "dec.W1": tc.glorot_init((embed_dim, hidden), rng, name="dec.W1"), "dec.b1": tc.zeros(hidden, "dec.b1"),
        "dec.W2": tc.glorot_init((hidden, out_dim), rng, name="dec.W2"), "dec.b2": tc.zeros(out_dim, "dec.b2"),
    }


def decode(decoder: dict, z) -> Tensor:
    return project_mlp(decoder, z, "dec")


def _snapshot(epoch: int, tlog: TrainLog, params: list[Tensor]) -> dict:
    return {
        "epoch": epoch,
        "recent_losses": tlog.losses[-5:],
        "param_norms": {p.name or str(i): float(np.linalg.norm(p.data)) for i, p in enumerate(params)},
        "nonfinite_params": [p.name for p in params if not np.all(np.isfinite(p.data))],
    }


def train(g: Graph, cfg: TrainConfig, callback: Callable[[int, TrainResult], None] | None = None) -> TrainResult:
    """Self-supervised training; ``cfg.objective`` picks latent prediction or raw reconstruction.

    Per epoch: draw the mask (uniform during warm-up), run the student on the
    masked graph, compute the loss, take one optimizer step, move the teacher
    by EMA and refresh the per-node difficulty scores for the next mask.
    """
    for key in cfg.outside_search_space():
        warnings.warn(f"{key}={getattr(cfg, key)} is outside the searched hyperparameter grid", stacklevel=2)
    rng = np.random.default_rng(cfg.seed)
    features = g.features
    n, d = features.shape
    enc_cfg = cfg.encoder_config(d)
    student = Encoder(enc_cfg, g.normalized_adjacency(), seed=rng)
    token = Tensor(rng.standard_normal((1, d)), requires_grad=True, name="mask_token")
    st = StudentTeacher.create(student, cfg.momentum, token, cfg.epochs)
    ed = cfg.objective == "encoder_decoder"
    if ed:
        st.teacher = None
        st.decoder = init_decoder(enc_cfg.embed_dim, enc_cfg.embed_dim, d, rng)
    params = student.parameters() + [token] + (list(st.decoder.values()) if ed else [])
    opt = tc.Optimizer(params, "adam", cfg.lr, cfg.weight_decay)
    masks = MaskState(cfg.strategy, cfg.mask_ratio, cfg.exploit_ratio, cfg.warmup_epochs, token)
    tlog = TrainLog()
    result = TrainResult(st, tlog, masks, cfg, opt)

    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        mask = masks.next_mask(epoch, n, rng)
        s = student(apply_mask(features, mask, token), training=True, rng=rng)
        if ed:
            pred = decode(st.decoder, s)
            loss = tc.mse_mean(pred, Tensor(features))
            target = Tensor(features)
        else:
            with tc.no_grad():
                target = st.teacher(features, training=False)
            loss = latent_loss(s, target)
            pred = s
        value = loss.item()
        if not np.isfinite(value):
            raise TrainingDiverged(f"non-finite loss at epoch {epoch}", _snapshot(epoch, tlog, params))
        tc.backward(loss)
        opt.step()
        if not ed:
            ema_update(st)
        masks.scores = difficulty_scores(pred, target)
        st.epoch = epoch + 1
        tlog.losses.append(value)
        tlog.mask_sizes.append(int(mask.sum()))
        tlog.epoch_seconds.append(time.perf_counter() - t0)
        if callback is not None:
            callback(epoch, result)
    return result


def train_encoder_decoder(g: Graph, cfg: TrainConfig, callback=None) -> TrainResult:
    """Same masking and encoder, but reconstruct raw features through an MLP decoder."""
    kw = cfg.to_dict()
    kw.update(objective="encoder_decoder", embed_source="student")
    return train(g, TrainConfig(**kw), callback)


def epochs_to_fraction(losses, fraction: float = 0.1) -> int:
    """First epoch whose loss is at most ``fraction`` of the epoch-0 loss; len(losses) if never."""
    arr = np.asarray(losses, dtype=np.float64)
    hits = np.flatnonzero(arr <= fraction * arr[0])
    return int(hits[0]) if len(hits) else len(arr)


@dataclass
class ConvergenceComparison:
    seeds: list
    ts_epochs: list
    ed_epochs: list
    ts_curves: list
    ed_curves: list

    @property
    def ts_mean(self) -> float:
        return float(np.mean(self.ts_epochs))

    @property
    def ed_mean(self) -> float:
        return float(np.mean(self.ed_epochs))


def compare_convergence(g: Graph, cfg: TrainConfig, seeds, fraction: float = 0.1) -> ConvergenceComparison:
    """Paired teacher-student vs encoder-decoder runs with identical seeds and settings."""
    out = ConvergenceComparison(list(seeds), [], [], [], [])
    for seed in seeds:
        kw = cfg.to_dict()
        kw["seed"] = seed
        ts = train(g, TrainConfig(**{**kw, "objective": "teacher_student"}))
        ed = train_encoder_decoder(g, TrainConfig(**kw))
        out.ts_curves.append(ts.log.normalized())
        out.ed_curves.append(ed.log.normalized())
        out.ts_epochs.append(epochs_to_fraction(ts.log.losses, fraction))
        out.ed_epochs.append(epochs_to_fraction(ed.log.losses, fraction))
    return out


def moving_average(values, window: int = 5) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if len(arr) < window:
        return arr.copy()
    return np.convolve(arr, np.ones(window) / window, mode="valid")


def trends_downward(values, window: int = 5) -> bool:
    """The moving average ends below where it starts and has a negative least-squares slope."""
    ma = moving_average(values, window)
    if len(ma) < 2:
        return False
    slope = np.polyfit(np.arange(len(ma)), ma, 1)[0]
    return bool(ma[-1] < ma[0] and slope < 0)


def save_checkpoint(path, result: TrainResult, extra: dict | None = None) -> None:
    """Student parameters plus teacher, mask token, decoder and optimizer state in one archive."""
    st = result.model
    arrays = {"mask_token": st.mask_token.data}
    if st.teacher is not None:
        arrays.update({f"teacher/{k}": v.data for k, v in st.teacher.params.items()})
    if st.decoder is not None:
        arrays.update({f"decoder/{k}": v.data for k, v in st.decoder.items()})
    if result.optimizer is not None:
        arrays.update({f"optimizer/{k}": v for k, v in result.optimizer.state_dict().items()})
    meta = {"epoch": st.epoch, "momentum": st.momentum, "config": result.config.to_dict(), **(extra or {})}
    save_params(path, st.student.params, meta, arrays)


def load_checkpoint(path, g: Graph) -> tuple[StudentTeacher, TrainConfig, dict]:
    """Rebuild the student/teacher pair saved by :func:`save_checkpoint` for graph ``g``."""
    params, meta, arrays = load_params(path)
    cfg = TrainConfig(**meta["config"])
    enc_cfg = cfg.encoder_config(g.num_features)
    adj = g.normalized_adjacency()
    student = Encoder(enc_cfg, adj, params)

    def group(prefix, grad):
        return {k[len(prefix):]: Tensor(v, requires_grad=grad, name=k[len(prefix):])
                for k, v in arrays.items() if k.startswith(prefix)}

    teacher_params = group("teacher/", False)
    teacher = Encoder(enc_cfg, adj, teacher_params) if teacher_params else None
    st = StudentTeacher(student, teacher, meta["momentum"], Tensor(arrays["mask_token"], requires_grad=True),
                        cfg.epochs, meta["epoch"], group("decoder/", True) or None)
    return st, cfg, meta
