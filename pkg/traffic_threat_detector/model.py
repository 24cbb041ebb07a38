"""
Compact BERT-style sequence classifier.

The network is word + position + token-type embeddings, a stack of
post-layernorm encoder layers (multi-head self-attention then a GELU
feed-forward block), a tanh pooler over the first token, and a linear
classification head.

Checkpoints are safetensors files. The header metadata carries the format
version and the model configuration as JSON, so a checkpoint is enough to
rebuild the model.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from safetensors import SafetensorError, safe_open
from safetensors.torch import save_file
from torch import nn

from .constants import (
    CHECKPOINT_FORMAT_VERSION,
    DEFAULT_DROPOUT,
    DEFAULT_HEADS,
    DEFAULT_HIDDEN,
    DEFAULT_INTERMEDIATE,
    DEFAULT_LAYERS,
    DEFAULT_MAX_POSITION,
    DEFAULT_TYPE_VOCAB,
    DEFAULT_VOCAB_SIZE,
    INIT_STD,
    LAYER_NORM_EPS,
    MASK_BIAS,
    NUM_CLASSES,
)
from .errors import (
    BadConfig,
    CorruptCheckpoint,
    IdOutOfRange,
    MissingFile,
    SequenceTooLong,
    ShapeMismatch,
    VersionMismatch,
)
from .tokenizer import EncodedBatch

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int = DEFAULT_VOCAB_SIZE
    hidden: int = DEFAULT_HIDDEN
    layers: int = DEFAULT_LAYERS
    heads: int = DEFAULT_HEADS
    intermediate: int = DEFAULT_INTERMEDIATE
    max_position: int = DEFAULT_MAX_POSITION
    type_vocab: int = DEFAULT_TYPE_VOCAB
    dropout: float = DEFAULT_DROPOUT
    n_classes: int = NUM_CLASSES

    def __post_init__(self) -> None:
        for name in ("vocab_size", "hidden", "layers", "heads", "intermediate", "max_position", "type_vocab", "n_classes"):
            if getattr(self, name) < 1:
                raise BadConfig(f"model.{name} must be >= 1, got {getattr(self, name)}")
        if self.hidden % self.heads:
            raise BadConfig(f"model.hidden ({self.hidden}) must be divisible by model.heads ({self.heads})")
        if not 0.0 <= self.dropout < 1.0:
            raise BadConfig(f"model.dropout must be in [0, 1), got {self.dropout}")

    @property
    def head_dim(self) -> int:
        return self.hidden // self.heads

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> ModelConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise BadConfig(f"model.{unknown[0]} is not a recognized key")
        return cls(**values)


@dataclass
class ForwardOutput:
    logits: torch.Tensor
    probabilities: torch.Tensor
    pooled: torch.Tensor


class Embeddings(nn.Module):
    def __init__(self, config: ModelConfig) -> None:
        super().__init__()
        self.word = nn.Embedding(config.vocab_size, config.hidden)
        self.position = nn.Embedding(config.max_position, config.hidden)
        self.token_type = nn.Embedding(config.type_vocab, config.hidden)
        self.layer_norm = nn.LayerNorm(config.hidden, eps=LAYER_NORM_EPS)
        self.dropout = nn.Dropout(config.dropout)

    def forward(self, input_ids: torch.Tensor, token_type_ids: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(input_ids.shape[1], device=input_ids.device).unsqueeze(0)
        summed = self.word(input_ids) + self.position(positions) + self.token_type(token_type_ids)
        return self.dropout(self.layer_norm(summed))


class SelfAttention(nn.Module):
    """Multi-head scaled dot-product self-attention with output projection, residual and layernorm."""

    def __init__(self, config: ModelConfig) -> None:
        super().__init__()
        self.heads = config.heads
        self.head_dim = config.head_dim
        self.query = nn.Linear(config.hidden, config.hidden)
        self.key = nn.Linear(config.hidden, config.hidden)
        self.value = nn.Linear(config.hidden, config.hidden)
        self.output = nn.Linear(config.hidden, config.hidden)
        self.layer_norm = nn.LayerNorm(config.hidden, eps=LAYER_NORM_EPS)
        self.dropout = nn.Dropout(config.dropout)

    def _split_heads(self, x: torch.Tensor) -> torch.Tensor:
        batch, seq, _ = x.shape
        return x.view(batch, seq, self.heads, self.head_dim).transpose(1, 2)

    def weights(self, hidden_states: torch.Tensor, attention_mask: torch.Tensor) -> torch.Tensor:
        """Attention probabilities, shape [batch, heads, query, key]."""
        q = self._split_heads(self.query(hidden_states))
        k = self._split_heads(self.key(hidden_states))
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.head_dim)
        bias = (1.0 - attention_mask[:, None, None, :].to(scores.dtype)) * MASK_BIAS
        return torch.softmax(scores + bias, dim=-1)

    def forward(self, hidden_states: torch.Tensor, attention_mask: torch.Tensor) -> torch.Tensor:
        batch, seq, hidden = hidden_states.shape
        probs = self.weights(hidden_states, attention_mask)
        v = self._split_heads(self.value(hidden_states))
        context = (probs @ v).transpose(1, 2).reshape(batch, seq, hidden)
        return self.layer_norm(hidden_states + self.dropout(self.output(context)))


class FeedForward(nn.Module):
    def __init__(self, config: ModelConfig) -> None:
        super().__init__()
        self.intermediate = nn.Linear(config.hidden, config.intermediate)
        self.output = nn.Linear(config.intermediate, config.hidden)
        self.layer_norm = nn.LayerNorm(config.hidden, eps=LAYER_NORM_EPS)
        self.dropout = nn.Dropout(config.dropout)

    def forward(self, hidden_states: torch.Tensor) -> torch.Tensor:
        projected = self.output(F.gelu(self.intermediate(hidden_states)))
        return self.layer_norm(hidden_states + self.dropout(projected))


class EncoderLayer(nn.Module):
    def __init__(self, config: ModelConfig) -> None:
        super().__init__()
        self.attention = SelfAttention(config)
        self.ffn = FeedForward(config)

    def forward(self, hidden_states: torch.Tensor, attention_mask: torch.Tensor) -> torch.Tensor:
        return self.ffn(self.attention(hidden_states, attention_mask))


class ClassifierModel(nn.Module):
    def __init__(self, config: ModelConfig) -> None:
        super().__init__()
        self.config = config
        self.embeddings = Embeddings(config)
        self.layers = nn.ModuleList(EncoderLayer(config) for _ in range(config.layers))
        self.pooler = nn.Linear(config.hidden, config.hidden)
        self.dropout = nn.Dropout(config.dropout)
        self.classifier = nn.Linear(config.hidden, config.n_classes)

    def embed(self, input_ids: torch.Tensor, token_type_ids: torch.Tensor | None = None) -> torch.Tensor:
        if input_ids.dim() != 2:
            raise ShapeMismatch(f"input_ids must be [batch, seq], got shape {tuple(input_ids.shape)}")
        if input_ids.shape[1] > self.config.max_position:
            raise SequenceTooLong(
                f"Sequence length {input_ids.shape[1]} exceeds max_position {self.config.max_position}"
            )
        if input_ids.numel() and (input_ids.min() < 0 or input_ids.max() >= self.config.vocab_size):
            raise IdOutOfRange(
                f"Token ids must be in [0, {self.config.vocab_size}), got range "
                f"[{int(input_ids.min())}, {int(input_ids.max())}]"
            )
        if token_type_ids is None:
            token_type_ids = torch.zeros_like(input_ids)
        return self.embeddings(input_ids, token_type_ids)

    def forward(
        self,
        input_ids: torch.Tensor,
        attention_mask: torch.Tensor,
        token_type_ids: torch.Tensor | None = None,
    ) -> ForwardOutput:
        if attention_mask.shape != input_ids.shape:
            raise ShapeMismatch(
                f"attention_mask shape {tuple(attention_mask.shape)} does not match input_ids {tuple(input_ids.shape)}"
            )
        hidden_states = self.embed(input_ids, token_type_ids)
        for layer in self.layers:
            hidden_states = layer(hidden_states, attention_mask)
        pooled = torch.tanh(self.pooler(hidden_states[:, 0]))
        logits = self.classifier(self.dropout(pooled))
        return ForwardOutput(logits=logits, probabilities=torch.softmax(logits, dim=-1), pooled=pooled)


def _init_weights(model: ClassifierModel, generator: torch.Generator) -> None:
    with torch.no_grad():
        for module in model.modules():
            if isinstance(module, nn.Linear):
                module.weight.normal_(0.0, INIT_STD, generator=generator)
                module.bias.zero_()
            elif isinstance(module, nn.Embedding):
                module.weight.normal_(0.0, INIT_STD, generator=generator)
            elif isinstance(module, nn.LayerNorm):
                module.weight.fill_(1.0)
                module.bias.zero_()


def build(config: ModelConfig, seed: int) -> ClassifierModel:
    """
    Builds and initializes a classifier.

    Linear and embedding weights are drawn from N(0, 0.02^2) with a
    generator seeded by ``seed``; biases are zero and layernorms start as
    the identity. Equal seeds give bit-identical weights.
    """
    model = ClassifierModel(config)
    _init_weights(model, torch.Generator().manual_seed(seed))
    logger.debug(f"Built classifier with {parameter_count(model):,} parameters")
    return model


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def parameter_count_formula(config: ModelConfig) -> int:
    """
    Closed-form parameter count.

    With V vocab, P positions, T token types, H hidden, I intermediate,
    L layers and C classes::

        (V + P + T + 2) H + L (4H^2 + 2HI + 9H + I) + H^2 + H + (H + 1) C
    """
    v, p, t = config.vocab_size, config.max_position, config.type_vocab
    h, i, n_layers, c = config.hidden, config.intermediate, config.layers, config.n_classes
    return (v + p + t + 2) * h + n_layers * (4 * h * h + 2 * h * i + 9 * h + i) + h * h + h + (h + 1) * c


def embed(model: ClassifierModel, input_ids: torch.Tensor, token_type_ids: torch.Tensor | None = None) -> torch.Tensor:
    return model.embed(input_ids, token_type_ids)


def attention(model: ClassifierModel, layer: int, hidden_states: torch.Tensor, attention_mask: torch.Tensor) -> torch.Tensor:
    if attention_mask.shape != hidden_states.shape[:2]:
        raise ShapeMismatch(
            f"attention_mask shape {tuple(attention_mask.shape)} does not match hidden states "
            f"{tuple(hidden_states.shape[:2])}"
        )
    return model.layers[layer].attention(hidden_states, attention_mask)


def ffn(model: ClassifierModel, layer: int, hidden_states: torch.Tensor) -> torch.Tensor:
    return model.layers[layer].ffn(hidden_states)


def as_tensors(batch: EncodedBatch) -> tuple[torch.Tensor, torch.Tensor]:
    return torch.from_numpy(np.ascontiguousarray(batch.input_ids)), torch.from_numpy(
        np.ascontiguousarray(batch.attention_masks)
    )


def forward(model: ClassifierModel, batch: EncodedBatch) -> ForwardOutput:
    input_ids, attention_mask = as_tensors(batch)
    return model(input_ids, attention_mask)


def summary_table(model: ClassifierModel) -> str:
    """Architecture summary: one line per setting, then parameter count and float32 size."""
    config = model.config
    total = parameter_count(model)
    rows = [
        ("Vocabulary size", f"{config.vocab_size:,}"),
        ("Hidden size", f"{config.hidden}"),
        ("Number of hidden layers", f"{config.layers}"),
        ("Number of attention heads", f"{config.heads}"),
        ("Intermediate size", f"{config.intermediate}"),
        ("Maximum position embeddings", f"{config.max_position}"),
        ("Type vocabulary size", f"{config.type_vocab}"),
        ("Dropout", f"{config.dropout}"),
        ("Number of classes", f"{config.n_classes}"),
        ("Total number of parameters", f"{total:,}"),
        ("Model size (float32)", f"{total * 4 / 1e6:.1f} MB"),
    ]
    width = max(len(name) for name, _ in rows)
    return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def save_checkpoint(model: ClassifierModel, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tensors = {name: tensor.detach().contiguous() for name, tensor in model.state_dict().items()}
    metadata = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": json.dumps(model.config.to_dict(), sort_keys=True),
    }
    save_file(tensors, str(path), metadata=metadata)
    logger.debug(f"Saved checkpoint with {parameter_count(model):,} parameters to {path}")


def load_checkpoint(path: Path | str) -> ClassifierModel:
    """
    Rebuilds a classifier from a checkpoint written by :func:`save_checkpoint`.

    :raises MissingFile: If the file does not exist.
    :raises VersionMismatch: If the checkpoint format version is not supported.
    :raises CorruptCheckpoint: If the file is truncated or malformed, or its tensors do not fit its config.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"Checkpoint not found: {path}")
    try:
        with safe_open(str(path), framework="pt", device="cpu") as handle:
            metadata = handle.metadata() or {}
            tensors = {name: handle.get_tensor(name) for name in handle.keys()}
    except (SafetensorError, OSError, ValueError) as e:
        raise CorruptCheckpoint(f"Failed to read checkpoint {path}: {e}") from e

    version = metadata.get("format_version")
    if version is None or "config" not in metadata:
        raise CorruptCheckpoint(f"Checkpoint {path} has no format version or config metadata")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise VersionMismatch(f"Checkpoint {path} has format version {version}, expected {CHECKPOINT_FORMAT_VERSION}")
    try:
        config = ModelConfig.from_dict(json.loads(metadata["config"]))
    except (json.JSONDecodeError, TypeError, BadConfig) as e:
        raise CorruptCheckpoint(f"Checkpoint {path} has an unreadable config: {e}") from e

    model = ClassifierModel(config)
    dtype = next(iter(tensors.values())).dtype if tensors else torch.float32
    model.to(dtype)
    try:
        model.load_state_dict(tensors, strict=True)
    except RuntimeError as e:
        raise CorruptCheckpoint(f"Checkpoint {path} does not match its config: {e}") from e
    return model
