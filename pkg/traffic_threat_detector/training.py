"""
Supervised fine-tuning of the classifier with mini-batch cross-entropy.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
import torch
import torch.nn.functional as F
from tqdm import tqdm

from .constants import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_EPOCHS,
    DEFAULT_EVAL_EVERY,
    DEFAULT_LEARNING_RATE,
    DEFAULT_OPTIMIZER,
    DEFAULT_SEED,
)
from .errors import BadConfig, BadLabel, DataError, NonFiniteLoss
from .logger import Logger
from .model import ClassifierModel, as_tensors
from .tokenizer import EncodedBatch
from .utils import seed_everything

OPTIMIZERS = ("adamw", "adam", "sgd")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = DEFAULT_EPOCHS
    batch_size: int = DEFAULT_BATCH_SIZE
    learning_rate: float = DEFAULT_LEARNING_RATE
    optimizer: str = DEFAULT_OPTIMIZER
    weight_decay: float = 0.0
    betas: tuple[float, float] = (0.9, 0.999)
    momentum: float = 0.0
    seed: int = DEFAULT_SEED
    eval_every: int = DEFAULT_EVAL_EVERY
    target_accuracy: float | None = None

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise BadConfig(f"training.epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise BadConfig(f"training.batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate < 0 or not math.isfinite(self.learning_rate):
            raise BadConfig(f"training.learning_rate must be finite and >= 0, got {self.learning_rate}")
        if self.optimizer not in OPTIMIZERS:
            raise BadConfig(f"training.optimizer must be one of {', '.join(OPTIMIZERS)}, got {self.optimizer!r}")
        if self.eval_every < 0:
            raise BadConfig(f"training.eval_every must be >= 0, got {self.eval_every}")
        if self.target_accuracy is not None and not 0.0 < self.target_accuracy <= 1.0:
            raise BadConfig(f"training.target_accuracy must be in (0, 1], got {self.target_accuracy}")
        object.__setattr__(self, "betas", tuple(self.betas))


@dataclass(frozen=True)
class StepRecord:
    step: int
    epoch: int
    loss: float
    accuracy: float


@dataclass
class TrainHistory:
    steps: list[StepRecord] = field(default_factory=list)
    evals: list[StepRecord] = field(default_factory=list)

    def rows(self) -> list[dict]:
        """Flat records for export, training steps first then evaluations, each tagged with its split."""
        return [dict(asdict(r), split="train") for r in self.steps] + [
            dict(asdict(r), split="eval") for r in self.evals
        ]


def _label_tensor(labels: Sequence[int] | np.ndarray | torch.Tensor, n_classes: int, n_rows: int) -> torch.Tensor:
    tensor = torch.as_tensor(np.asarray(labels), dtype=torch.int64)
    if tensor.dim() != 1 or tensor.shape[0] != n_rows:
        raise BadLabel(f"Expected {n_rows} labels, got shape {tuple(tensor.shape)}")
    if tensor.numel() and (tensor.min() < 0 or tensor.max() >= n_classes):
        raise BadLabel(f"Labels must be in [0, {n_classes}), got range [{int(tensor.min())}, {int(tensor.max())}]")
    return tensor


def loss_and_grads(
    model: ClassifierModel, batch: EncodedBatch, labels: Sequence[int] | np.ndarray
) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
    """
    Mean cross-entropy of a batch and its gradient for every trainable tensor.

    Existing gradients on the model are cleared first.

    :raises BadLabel: If a label is outside [0, n_classes) or the count differs from the batch.
    """
    target = _label_tensor(labels, model.config.n_classes, len(batch))
    input_ids, attention_mask = as_tensors(batch)
    model.zero_grad(set_to_none=True)
    loss = F.cross_entropy(model(input_ids, attention_mask).logits, target)
    loss.backward()
    grads = {
        name: param.grad.detach().clone() if param.grad is not None else torch.zeros_like(param)
        for name, param in model.named_parameters()
        if param.requires_grad
    }
    return loss.detach(), grads


def _build_optimizer(model: ClassifierModel, tconfig: TrainConfig) -> torch.optim.Optimizer:
    params = model.parameters()
    if tconfig.optimizer == "adamw":
        return torch.optim.AdamW(params, lr=tconfig.learning_rate, betas=tconfig.betas, weight_decay=tconfig.weight_decay)
    if tconfig.optimizer == "adam":
        return torch.optim.Adam(params, lr=tconfig.learning_rate, betas=tconfig.betas, weight_decay=tconfig.weight_decay)
    return torch.optim.SGD(params, lr=tconfig.learning_rate, momentum=tconfig.momentum, weight_decay=tconfig.weight_decay)


class Trainer:
    """
    Runs the fine-tuning loop for one model.

    Training data is shuffled once per epoch with a generator seeded from
    the config, and the global torch seed is reset at the start of
    :meth:`train`, so equal seeds and configs give identical histories.
    """

    def __init__(self, model: ClassifierModel, tconfig: TrainConfig, progress: bool = False, debug: bool = False) -> None:
        self.model = model
        self.tconfig = tconfig
        self.progress = progress
        self.debug = debug
        self.log: logging.Logger = Logger(self.__class__.__name__, debug=debug)

    def train(
        self,
        train_data: EncodedBatch,
        train_labels: Sequence[int] | np.ndarray,
        eval_data: EncodedBatch | None = None,
        eval_labels: Sequence[int] | np.ndarray | None = None,
    ) -> tuple[ClassifierModel, TrainHistory]:
        tconfig = self.tconfig
        if len(train_data) == 0:
            raise DataError("Cannot train on an empty batch")
        n_classes = self.model.config.n_classes
        targets = _label_tensor(train_labels, n_classes, len(train_data))
        if eval_data is not None and len(eval_data) == 0:
            eval_data = None
        eval_targets = None
        if eval_data is not None:
            if eval_labels is None:
                raise BadLabel("eval_data was given without eval_labels")
            eval_targets = _label_tensor(eval_labels, n_classes, len(eval_data))
        input_ids, attention_mask = as_tensors(train_data)

        seed_everything(tconfig.seed)
        generator = torch.Generator().manual_seed(tconfig.seed)
        optimizer = _build_optimizer(self.model, tconfig)
        history = TrainHistory()
        steps_per_epoch = math.ceil(len(train_data) / tconfig.batch_size)
        self.log.info(
            f"Training for {tconfig.epochs} epoch(s), {steps_per_epoch} step(s) per epoch, "
            f"batch size {tconfig.batch_size}, {tconfig.optimizer} lr={tconfig.learning_rate}"
        )

        step = 0
        reached = False
        for epoch in range(1, tconfig.epochs + 1):
            self.model.train()
            order = torch.randperm(len(train_data), generator=generator)
            epoch_loss, epoch_correct, seen = 0.0, 0, 0
            batches = tqdm(
                range(steps_per_epoch),
                desc=f"Epoch {epoch}/{tconfig.epochs}",
                disable=not self.progress,
                leave=False,
            )
            for b in batches:
                index = order[b * tconfig.batch_size : (b + 1) * tconfig.batch_size]
                step += 1
                loss, correct = self._step(optimizer, step, input_ids[index], attention_mask[index], targets[index])
                epoch_loss += loss * len(index)
                epoch_correct += correct
                seen += len(index)
                history.steps.append(StepRecord(step=step, epoch=epoch, loss=loss, accuracy=correct / len(index)))
                batches.set_postfix(loss=f"{loss:.4f}")
                if eval_data is not None and tconfig.eval_every and step % tconfig.eval_every == 0:
                    record = self._evaluate(step, epoch, eval_data, eval_targets)
                    history.evals.append(record)
                    if self._reached_target(record):
                        reached = True
                        break

            message = (
                f"Epoch {epoch}/{tconfig.epochs}: train_loss={epoch_loss / seen:.4f} "
                f"train_accuracy={epoch_correct / seen:.4f}"
            )
            if eval_data is not None and not tconfig.eval_every:
                record = self._evaluate(step, epoch, eval_data, eval_targets)
                history.evals.append(record)
                message += f" eval_loss={record.loss:.4f} eval_accuracy={record.accuracy:.4f}"
                reached = self._reached_target(record)
            self.log.info(message)
            if reached:
                self.log.info(
                    f"Eval accuracy reached target {tconfig.target_accuracy} at step {step}; stopping after epoch {epoch}"
                )
                break

        self.model.eval()
        return self.model, history

    def _step(
        self,
        optimizer: torch.optim.Optimizer,
        step: int,
        input_ids: torch.Tensor,
        attention_mask: torch.Tensor,
        targets: torch.Tensor,
    ) -> tuple[float, int]:
        optimizer.zero_grad(set_to_none=True)
        logits = self.model(input_ids, attention_mask).logits
        loss = F.cross_entropy(logits, targets)
        loss.backward()
        grad_norm = float(torch.nn.utils.clip_grad_norm_(self.model.parameters(), max_norm=float("inf")))
        if not math.isfinite(loss.item()) or not math.isfinite(grad_norm):
            raise NonFiniteLoss(step=step, learning_rate=self.tconfig.learning_rate, grad_norm=grad_norm, loss=loss.item())
        optimizer.step()
        self.log.debug(f"step {step}: loss={loss.item():.6f} grad_norm={grad_norm:.4f}")
        return loss.item(), int((logits.argmax(dim=-1) == targets).sum())

    def _reached_target(self, record: StepRecord) -> bool:
        target = self.tconfig.target_accuracy
        return target is not None and record.accuracy >= target

    @torch.no_grad()
    def _evaluate(self, step: int, epoch: int, data: EncodedBatch, targets: torch.Tensor) -> StepRecord:
        was_training = self.model.training
        self.model.eval()
        input_ids, attention_mask = as_tensors(data)
        total_loss, correct = 0.0, 0
        for start in range(0, len(data), self.tconfig.batch_size):
            stop = start + self.tconfig.batch_size
            logits = self.model(input_ids[start:stop], attention_mask[start:stop]).logits
            total_loss += F.cross_entropy(logits, targets[start:stop], reduction="sum").item()
            correct += int((logits.argmax(dim=-1) == targets[start:stop]).sum())
        self.model.train(was_training)
        return StepRecord(step=step, epoch=epoch, loss=total_loss / len(data), accuracy=correct / len(data))


def train(
    model: ClassifierModel,
    train_data: EncodedBatch,
    train_labels: Sequence[int] | np.ndarray,
    tconfig: TrainConfig,
    eval_data: EncodedBatch | None = None,
    eval_labels: Sequence[int] | np.ndarray | None = None,
) -> tuple[ClassifierModel, TrainHistory]:
    return Trainer(model, tconfig).train(train_data, train_labels, eval_data, eval_labels)


@torch.no_grad()
def predict(model: ClassifierModel, batch: EncodedBatch, batch_size: int = DEFAULT_BATCH_SIZE) -> tuple[np.ndarray, np.ndarray]:
    """
    Predicted class indices and probability rows for every line of a batch.

    Runs in eval mode. Ties between equal maximal probabilities resolve to
    the lowest class index.
    """
    model.eval()
    input_ids, attention_mask = as_tensors(batch)
    blocks = [
        model(input_ids[start : start + batch_size], attention_mask[start : start + batch_size]).probabilities
        for start in range(0, len(batch), batch_size)
    ]
    if not blocks:
        return np.zeros(0, dtype=np.int64), np.zeros((0, model.config.n_classes))
    probabilities = torch.cat(blocks).cpu().numpy()
    return argmax_lowest(probabilities), probabilities


def argmax_lowest(probabilities: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximal index
    return np.argmax(probabilities, axis=1).astype(np.int64)


def history_to_csv(history: TrainHistory, path: Path | str) -> None:
    """Writes columns step, epoch, split, loss, accuracy."""
    frame = pd.DataFrame(history.rows(), columns=["step", "epoch", "split", "loss", "accuracy"])
    frame.to_csv(path, index=False, lineterminator="\n")
