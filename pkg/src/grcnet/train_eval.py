"""Training loop, optimizers, multiclass metrics and the ablation harness."""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import SignalRecord, SplitConfig
from .errors import DivergenceDetected, EmptyConfusion, ShapeMismatch
from .nn.model import GRCNet, ModelConfig, softmax_cross_entropy
from .pipeline import EncodedSet, build_sets

log = logging.getLogger(__name__)

VARIANTS = ("full", "no_gaf", "no_cot", "no_ru")
OPTIMIZERS = ("sgd", "sgd_momentum", "adam")

# Reference five-class BONN results in percent: (recall, accuracy, precision, F1).
# Compared against, never asserted; the no_cot F1 value looks like a typo at source.
REFERENCE_PERCENT = {
    "full": (93.24, 93.66, 93.16, 93.14),
    "no_gaf": (83.12, 83.62, 83.34, 83.22),
    "no_cot": (90.80, 91.60, 90.45, 96.28),
    "no_ru": (79.83, 80.16, 79.42, 79.62),
}


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    variant: str = "full"
    precision: str = "float32"

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be at least 1")
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.precision not in ("float32", "float64"):
            raise ValueError("precision must be float32 or float64")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


# metrics -------------------------------------------------------------------------


@dataclass
class Metrics:
    confusion: np.ndarray  # rows = true class, columns = predicted
    accuracy: float
    macro_recall: float
    macro_precision: float
    macro_f1: float
    per_class_recall: np.ndarray = field(repr=False, default=None)
    per_class_precision: np.ndarray = field(repr=False, default=None)
    per_class_f1: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "confusion": self.confusion.astype(int).tolist(),
            "accuracy": self.accuracy,
            "macro_recall": self.macro_recall,
            "macro_precision": self.macro_precision,
            "macro_f1": self.macro_f1,
        }


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num, dtype=np.float64)
    np.divide(num, den, out=out, where=den > 0)
    return out


def compute_metrics(confusion) -> Metrics:
    """Accuracy and macro-averaged recall/precision/F1 from a square confusion matrix.

    Classes with no predicted (or no true) instances contribute precision
    (or recall) 0; F1 is 0 whenever precision + recall is 0.
    """
    cm = np.asarray(confusion)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ShapeMismatch(f"confusion matrix must be square, got {cm.shape}")
    if np.any(cm < 0):
        raise ValueError("confusion counts must be non-negative")
    total = cm.sum()
    if total == 0:
        raise EmptyConfusion("confusion matrix is empty")
    tp = np.diag(cm).astype(np.float64)
    true_n = cm.sum(axis=1).astype(np.float64)
    pred_n = cm.sum(axis=0).astype(np.float64)
    recall = _safe_div(tp, true_n)
    precision = _safe_div(tp, pred_n)
    # 2PR/(P+R) in count form; avoids rounding through the two ratios
    f1 = _safe_div(2 * tp, true_n + pred_n)
    return Metrics(
        confusion=cm.copy(),
        accuracy=float(tp.sum() / total),
        macro_recall=float(recall.mean()),
        macro_precision=float(precision.mean()),
        macro_f1=float(f1.mean()),
        per_class_recall=recall,
        per_class_precision=precision,
        per_class_f1=f1,
    )


def confusion_matrix(y_true, y_pred, num_classes: int = 5) -> np.ndarray:
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true), np.asarray(y_pred)), 1)
    return cm


def _as_batch(images: np.ndarray) -> np.ndarray:
    return images[..., None] if images.ndim == 3 else images


def predict_logits(model: GRCNet, images: np.ndarray, batch_size: int = 64) -> np.ndarray:
    images = _as_batch(images)
    out = [model.forward(images[i : i + batch_size]) for i in range(0, images.shape[0], batch_size)]
    return np.concatenate(out) if out else np.zeros((0, model.cfg.num_classes))


def evaluate(model: GRCNet, data: EncodedSet, batch_size: int = 64) -> Metrics:
    if len(data) == 0:
        raise EmptyConfusion("cannot evaluate on an empty set")
    pred = predict_logits(model, data.images, batch_size).argmax(axis=1)
    return compute_metrics(confusion_matrix(data.labels, pred, model.cfg.num_classes))


# optimizers ----------------------------------------------------------------------


class SGD:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: dict, grads: dict) -> None:
        for name, p in params.items():
            p -= p.dtype.type(self.lr) * grads[name]


class MomentumSGD:
    def __init__(self, lr: float, momentum: float = 0.9):
        self.lr, self.momentum = lr, momentum
        self.velocity: dict[str, np.ndarray] = {}

    def step(self, params: dict, grads: dict) -> None:
        for name, p in params.items():
            v = self.velocity.setdefault(name, np.zeros_like(p))
            v *= p.dtype.type(self.momentum)
            v += grads[name]
            p -= p.dtype.type(self.lr) * v


class Adam:
    def __init__(self, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for name, p in params.items():
            g = grads[name]
            m = self.m.setdefault(name, np.zeros_like(p))
            v = self.v.setdefault(name, np.zeros_like(p))
            m *= p.dtype.type(self.beta1)
            m += p.dtype.type(1.0 - self.beta1) * g
            v *= p.dtype.type(self.beta2)
            v += p.dtype.type(1.0 - self.beta2) * g * g
            step = (m / c1) / (np.sqrt(v / c2) + p.dtype.type(self.eps))
            p -= p.dtype.type(self.lr) * step


def make_optimizer(cfg: TrainConfig):
    if cfg.optimizer == "sgd":
        return SGD(cfg.learning_rate)
    if cfg.optimizer == "sgd_momentum":
        return MomentumSGD(cfg.learning_rate, cfg.momentum)
    return Adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)


# training ------------------------------------------------------------------------


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    test_accuracy: float | None


@dataclass
class TrainHistory:
    epochs: list[EpochRecord] = field(default_factory=list)
    wall_seconds: float = 0.0

    def to_dict(self) -> list[dict]:
        return [dataclasses.asdict(r) for r in self.epochs]


def train(
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    train_set: EncodedSet,
    test_set: EncodedSet | None = None,
    model: GRCNet | None = None,
) -> tuple[GRCNet, TrainHistory]:
    """Mini-batch training with a seeded per-epoch shuffle.

    Gradients are averaged over each batch. Raises :class:`DivergenceDetected`
    (carrying the history so far) if the training loss becomes non-finite.
    """
    if len(train_set) == 0:
        raise ValueError("training set is empty")
    missing = sorted(set(range(model_cfg.num_classes)) - set(np.unique(train_set.labels).tolist()))
    if missing:
        raise ValueError(f"training set lacks classes {missing}")
    if tuple(model_cfg.input_size[:2]) != train_set.images.shape[1:3]:
        raise ShapeMismatch(
            f"images are {train_set.images.shape[1:3]}, model expects {model_cfg.input_size[:2]}"
        )
    dtype = np.dtype(train_cfg.precision)
    model = model or GRCNet(model_cfg, dtype=dtype)
    params = model.parameters()
    opt = make_optimizer(train_cfg)
    rng = np.random.default_rng(train_cfg.seed)
    images = _as_batch(train_set.images).astype(dtype, copy=False)
    labels = train_set.labels
    n = len(train_set)
    history = TrainHistory()
    start = time.perf_counter()
    for epoch in range(1, train_cfg.epochs + 1):
        order = rng.permutation(n)
        total_loss = 0.0
        correct = 0
        for lo in range(0, n, train_cfg.batch_size):
            idx = order[lo : lo + train_cfg.batch_size]
            model.zero_grad()
            logits = model.forward(images[idx])
            losses, dlogits = softmax_cross_entropy(logits, labels[idx])
            total_loss += float(losses.sum())
            correct += int((logits.argmax(axis=1) == labels[idx]).sum())
            if not math.isfinite(total_loss):
                history.wall_seconds = time.perf_counter() - start
                raise DivergenceDetected(f"training loss became non-finite in epoch {epoch}", history)
            model.backward(dlogits / idx.size)
            opt.step(params, model.gradients())
        test_acc = evaluate(model, test_set).accuracy if test_set is not None and len(test_set) else None
        rec = EpochRecord(epoch, total_loss / n, correct / n, test_acc)
        history.epochs.append(rec)
        log.info(
            "epoch %d/%d loss %.4f train acc %.4f test acc %s",
            epoch, train_cfg.epochs, rec.train_loss, rec.train_accuracy,
            "n/a" if test_acc is None else f"{test_acc:.4f}",
        )
    history.wall_seconds = time.perf_counter() - start
    return model, history


# ablation ------------------------------------------------------------------------


def matched_local_width(base: ModelConfig, max_width: int | None = None) -> int:
    """Local-path width for the no-CoT variant whose parameter count is closest to ``base``."""
    target = GRCNet(base).num_parameters()
    max_width = max_width or 4 * base.local_width
    best, best_gap = base.local_width, math.inf
    for w in range(1, max_width + 1):
        cfg = dataclasses.replace(base, num_cot_layers=0, local_channels=w)
        gap = abs(GRCNet(cfg).num_parameters() - target)
        if gap < best_gap:
            best, best_gap = w, gap
    return best


def variant_model_config(base: ModelConfig, variant: str) -> ModelConfig:
    if variant in ("full", "no_gaf"):
        return base
    if variant == "no_cot":
        if base.num_res_units == 0:
            raise ValueError("no_cot needs a local path to widen")
        return dataclasses.replace(base, num_cot_layers=0, local_channels=matched_local_width(base))
    if variant == "no_ru":
        if base.num_cot_layers == 0:
            raise ValueError("no_ru needs a global path")
        return dataclasses.replace(base, num_res_units=0, local_channels=0)
    raise ValueError(f"unknown variant {variant!r}")


@dataclass
class AblationRow:
    variant: str
    metrics: Metrics
    history: TrainHistory
    num_parameters: int

    def to_dict(self) -> dict:
        out = {"variant": self.variant, "num_parameters": self.num_parameters}
        out["epochs"] = self.history.to_dict()
        out.update(self.metrics.to_dict())
        return out


def ablate(
    base_model_cfg: ModelConfig,
    base_train_cfg: TrainConfig,
    records: Sequence[SignalRecord],
    split: SplitConfig,
    paa_target: int,
    variants: Sequence[str] = VARIANTS,
) -> list[AblationRow]:
    """Train and evaluate each variant with the same seed and budget."""
    encoded = {}
    rows = []
    for variant in variants:
        mode = "tiled" if variant == "no_gaf" else "gasf"
        if mode not in encoded:
            train_set, test_set, _ = build_sets(records, split, paa_target, mode)
            if len(test_set) == 0:
                raise EmptyConfusion(
                    f"train_fraction {split.train_fraction} leaves no test records; "
                    "lower it or add records"
                )
            encoded[mode] = (train_set, test_set)
        train_set, test_set = encoded[mode]
        mcfg = variant_model_config(base_model_cfg, variant)
        tcfg = dataclasses.replace(base_train_cfg, variant=variant)
        log.info("ablation variant %s", variant)
        model, history = train(mcfg, tcfg, train_set, test_set)
        rows.append(AblationRow(variant, evaluate(model, test_set), history, model.num_parameters()))
    return rows


def ablation_report(rows: Sequence[AblationRow]) -> dict:
    """JSON-ready report, including accuracy deltas against the full model."""
    out = {"variants": [r.to_dict() for r in rows]}
    full = next((r for r in rows if r.variant == "full"), None)
    if full is not None:
        deltas = {}
        for r in rows:
            if r.variant == "full":
                continue
            ref = REFERENCE_PERCENT[r.variant]
            ref_full = REFERENCE_PERCENT["full"]
            measured = full.metrics.accuracy - r.metrics.accuracy
            deltas[r.variant] = {
                "accuracy_drop": measured,
                "reference_accuracy_drop": (ref_full[1] - ref[1]) / 100.0,
                # None when the measured accuracies tie: no direction to compare
                "same_direction": None if measured == 0
                else bool(measured > 0) == bool(ref_full[1] - ref[1] > 0),
            }
        out["full_vs_variant"] = deltas
    out["reference_percent"] = {
        k: dict(zip(("recall", "accuracy", "precision", "f1"), v))
        for k, v in REFERENCE_PERCENT.items()
    }
    return out


def format_metrics_table(rows: Sequence[tuple[str, Metrics]], reference: bool = False) -> str:
    head = f"{'variant':<10}{'Rec(%)':>9}{'Acc(%)':>9}{'Prec(%)':>9}{'F1(%)':>9}"
    if reference:
        head += f"{'ref Acc(%)':>12}"
    lines = [head, "-" * len(head)]
    for name, m in rows:
        line = (
            f"{name:<10}{100 * m.macro_recall:>9.2f}{100 * m.accuracy:>9.2f}"
            f"{100 * m.macro_precision:>9.2f}{100 * m.macro_f1:>9.2f}"
        )
        if reference:
            ref = REFERENCE_PERCENT.get(name)
            line += f"{ref[1]:>12.2f}" if ref else f"{'-':>12}"
        lines.append(line)
    return "\n".join(lines)
