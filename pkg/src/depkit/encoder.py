"""Fine-tuning of pretrained text encoders with a softmax head over CLS.

An :class:`EncoderRef` names either a real pretrained checkpoint (loaded
through the ``transformers`` package when installed) or a toy encoder: a
small randomly initialized transformer with a hashing word tokenizer,
cheap enough for CPU test runs. Both expose the same surface, so training,
prediction, ensembling and transfer code never branch on the family.

Training uses unweighted cross-entropy with adaptive-moment gradient
descent and a linear learning-rate decay to zero over all steps, no
warmup. One fine_tune call makes exactly ``num_epochs`` passes over
shuffled mini-batches of ``batch_size``.
"""

from __future__ import annotations

import copy
import json
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch
from torch import nn

from .corpus import LabeledDataset, LabelSchema, Post
from .errors import (
    DivergedLoss,
    EmptyInput,
    EmptyText,
    EncoderUnavailable,
    InvalidHyperParams,
    MalformedRow,
    SchemaMismatch,
)
from .probmatrix import ProbabilityMatrix

# Hyper-parameter grid used by the published experiments.
PUBLISHED_BATCH_SIZES = (8, 16, 32)
PUBLISHED_LEARNING_RATES = (1e-3, 1e-4, 5e-5, 1e-5)
PUBLISHED_EPOCH_COUNTS = (5, 10, 15)

ENCODER_FAMILIES = {
    "bert-base-cased": "general",
    "roberta-base": "general",
    "mental/mental-bert-base-uncased": "mental",
    "vinai/bertweet-base": "tweet",
}

# Short aliases accepted in configs and member specs.
LOGICAL_ENCODERS = {
    "bert": "bert-base-cased",
    "roberta": "roberta-base",
    "mentalbert": "mental/mental-bert-base-uncased",
    "bertweet": "vinai/bertweet-base",
}

FAMILY_TAGS = ("general", "mental", "tweet", "toy")

_PREDICT_BATCH = 64


@dataclass(frozen=True)
class EncoderRef:
    """Registry name plus a coarse family tag; toy refs need no download."""

    registry_name: str
    family_tag: str

    def __post_init__(self) -> None:
        if not self.registry_name:
            raise InvalidHyperParams("encoder registry name must be non-empty")
        if self.family_tag not in FAMILY_TAGS:
            raise InvalidHyperParams(
                f"family tag {self.family_tag!r} not one of {FAMILY_TAGS}"
            )

    @classmethod
    def from_name(cls, name: str, toy_mode: bool = False) -> "EncoderRef":
        registry = LOGICAL_ENCODERS.get(name, name)
        if toy_mode or registry.startswith("toy"):
            return cls(registry_name=registry, family_tag="toy")
        return cls(
            registry_name=registry,
            family_tag=ENCODER_FAMILIES.get(registry, "general"),
        )


@dataclass(frozen=True)
class HyperParams:
    """Batch size, learning rate, epoch count, seed, and input length cap."""

    batch_size: int
    learning_rate: float
    num_epochs: int
    seed: int = 1
    max_tokens: int = 512

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise InvalidHyperParams(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise InvalidHyperParams(
                f"learning_rate must be positive, got {self.learning_rate}"
            )
        if self.num_epochs < 1:
            raise InvalidHyperParams(f"num_epochs must be >= 1, got {self.num_epochs}")
        if self.max_tokens < 8:
            raise InvalidHyperParams(f"max_tokens must be >= 8, got {self.max_tokens}")

    def require_published_grid(self) -> None:
        """Enforce membership in the published search grid (faithful mode)."""
        if self.batch_size not in PUBLISHED_BATCH_SIZES:
            raise InvalidHyperParams(
                f"batch_size {self.batch_size} not in {PUBLISHED_BATCH_SIZES}"
            )
        if not any(
            math.isclose(self.learning_rate, lr) for lr in PUBLISHED_LEARNING_RATES
        ):
            raise InvalidHyperParams(
                f"learning_rate {self.learning_rate} not in {PUBLISHED_LEARNING_RATES}"
            )
        if self.num_epochs not in PUBLISHED_EPOCH_COUNTS:
            raise InvalidHyperParams(
                f"num_epochs {self.num_epochs} not in {PUBLISHED_EPOCH_COUNTS}"
            )

    def to_dict(self) -> dict:
        return {
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "num_epochs": self.num_epochs,
            "seed": self.seed,
            "max_tokens": self.max_tokens,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "HyperParams":
        return cls(
            batch_size=int(doc["batch_size"]),
            learning_rate=float(doc["learning_rate"]),
            num_epochs=int(doc["num_epochs"]),
            seed=int(doc.get("seed", 1)),
            max_tokens=int(doc.get("max_tokens", 512)),
        )


# --- toy encoder --------------------------------------------------------------

_TOY_VOCAB = 4096
_TOY_HIDDEN = 32
_TOY_LAYERS = 2
_TOY_HEADS = 2
_PAD, _CLS, _SEP = 0, 1, 2
_FIRST_WORD_ID = 4


class _ToyTokenizer:
    """Lowercased word hashing into a fixed id space; no corpus pass needed."""

    pad_id = _PAD

    def encode(self, text: str, max_tokens: int) -> list[int]:
        words = text.lower().split()
        budget = max_tokens - 2  # room for the boundary tokens
        ids = [
            _FIRST_WORD_ID + zlib.crc32(w.encode("utf-8")) % _TOY_VOCAB
            for w in words[:budget]
        ]
        return [_CLS] + ids + [_SEP]


class _ToyEncoderNet(nn.Module):
    """Two transformer blocks over hashed word embeddings; CLS vector out."""

    def __init__(self, max_positions: int) -> None:
        super().__init__()
        self.tok = nn.Embedding(_FIRST_WORD_ID + _TOY_VOCAB, _TOY_HIDDEN, padding_idx=_PAD)
        self.pos = nn.Embedding(max_positions, _TOY_HIDDEN)
        layer = nn.TransformerEncoderLayer(
            d_model=_TOY_HIDDEN,
            nhead=_TOY_HEADS,
            dim_feedforward=4 * _TOY_HIDDEN,
            dropout=0.0,
            batch_first=True,
        )
        self.blocks = nn.TransformerEncoder(layer, num_layers=_TOY_LAYERS, enable_nested_tensor=False)

    def forward(self, ids: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(ids.shape[1], device=ids.device).unsqueeze(0)
        x = self.tok(ids) + self.pos(positions)
        h = self.blocks(x, src_key_padding_mask=pad_mask)
        return h[:, 0, :]


class _HFEncoderNet(nn.Module):
    """Adapter exposing a pretrained checkpoint's CLS vector."""

    def __init__(self, hf_model: nn.Module) -> None:
        super().__init__()
        self.hf_model = hf_model

    def forward(self, ids: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        out = self.hf_model(input_ids=ids, attention_mask=(~pad_mask).long())
        return out.last_hidden_state[:, 0, :]


class _ClassifierNet(nn.Module):
    """Encoder plus the dense softmax head over the CLS representation."""

    def __init__(self, encoder_net: nn.Module, hidden: int, num_labels: int) -> None:
        super().__init__()
        self.encoder_net = encoder_net
        self.head = nn.Linear(hidden, num_labels)

    def forward(self, ids: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        return self.head(self.encoder_net(ids, pad_mask))


@dataclass
class _Runtime:
    tokenize: Callable[[str, int], list[int]]
    pad_id: int
    hidden: int
    build_net: Callable[[int], nn.Module]  # max_positions -> fresh encoder net


def _toy_runtime() -> _Runtime:
    tok = _ToyTokenizer()
    return _Runtime(
        tokenize=tok.encode,
        pad_id=tok.pad_id,
        hidden=_TOY_HIDDEN,
        build_net=lambda max_positions: _ToyEncoderNet(max_positions),
    )


def _hf_runtime(registry_name: str) -> _Runtime:
    try:
        from transformers import AutoModel, AutoTokenizer  # heavy; imported on demand
    except ImportError as exc:
        raise EncoderUnavailable(
            f"encoder {registry_name!r} needs the 'transformers' package "
            "(install the [hf] extra)"
        ) from exc
    try:
        tokenizer = AutoTokenizer.from_pretrained(registry_name)
    except Exception as exc:
        raise EncoderUnavailable(
            f"cannot load tokenizer for {registry_name!r}: {exc}"
        ) from exc

    def tokenize(text: str, max_tokens: int) -> list[int]:
        return tokenizer(text, truncation=True, max_length=max_tokens)["input_ids"]

    def build_net(_max_positions: int) -> nn.Module:
        try:
            hf_model = AutoModel.from_pretrained(registry_name)
        except Exception as exc:
            raise EncoderUnavailable(
                f"cannot load encoder {registry_name!r}: {exc}"
            ) from exc
        return _HFEncoderNet(hf_model)

    # Hidden width comes from the checkpoint config without loading weights.
    try:
        from transformers import AutoConfig

        hidden = AutoConfig.from_pretrained(registry_name).hidden_size
    except Exception as exc:
        raise EncoderUnavailable(
            f"cannot read config for {registry_name!r}: {exc}"
        ) from exc
    pad = tokenizer.pad_token_id
    return _Runtime(tokenize=tokenize, pad_id=0 if pad is None else pad, hidden=hidden, build_net=build_net)


def _resolve_runtime(ref: EncoderRef) -> _Runtime:
    if ref.family_tag == "toy":
        return _toy_runtime()
    return _hf_runtime(ref.registry_name)


def _seed_for(ref: EncoderRef, seed: int) -> int:
    # Distinct encoder names get distinct initializations under the same seed.
    return (seed * 1_000_003 + zlib.crc32(ref.registry_name.encode())) % (2**31)


# --- model ----------------------------------------------------------------------

@dataclass(eq=False)
class ClassifierModel:
    """A fine-tuned encoder + head, with its training history and lineage."""

    encoder: EncoderRef
    schema: LabelSchema
    net: _ClassifierNet
    hp: HyperParams
    training_log: list[tuple[int, float]] = field(default_factory=list)
    lineage: list[str] = field(default_factory=list)

    @property
    def head(self) -> nn.Linear:
        return self.net.head

    @property
    def num_labels(self) -> int:
        return self.net.head.out_features


# --- operations -------------------------------------------------------------------

def tokenize_truncate(text: str, encoder: EncoderRef, max_tokens: int) -> list[int]:
    """Token ids for ``text``, truncated to keep the first ``max_tokens``.

    The output includes the special boundary tokens and never exceeds
    ``max_tokens``; truncation keeps the prefix.
    """
    if max_tokens < 8:
        raise InvalidHyperParams(f"max_tokens must be >= 8, got {max_tokens}")
    if not text.strip():
        raise EmptyText("cannot tokenize empty text")
    runtime = _resolve_runtime(encoder)
    ids = runtime.tokenize(text, max_tokens)
    return list(ids)


def _pad_batch(
    ids_list: Sequence[list[int]], pad_id: int
) -> tuple[torch.Tensor, torch.Tensor]:
    width = max(len(ids) for ids in ids_list)
    batch = torch.full((len(ids_list), width), pad_id, dtype=torch.long)
    mask = torch.ones((len(ids_list), width), dtype=torch.bool)
    for i, ids in enumerate(ids_list):
        batch[i, : len(ids)] = torch.tensor(ids, dtype=torch.long)
        mask[i, : len(ids)] = False
    return batch, mask


def _train_epochs(
    net: _ClassifierNet,
    runtime: _Runtime,
    train: LabeledDataset,
    hp: HyperParams,
    start_epoch: int = 0,
) -> list[tuple[int, float]]:
    ids_list = [runtime.tokenize(text, hp.max_tokens) for text in train.texts]
    labels = torch.tensor(train.labels, dtype=torch.long)
    n = len(ids_list)

    optimizer = torch.optim.Adam(net.parameters(), lr=hp.learning_rate)
    steps_per_epoch = math.ceil(n / hp.batch_size)
    total_steps = hp.num_epochs * steps_per_epoch
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, lambda step: max(0.0, 1.0 - step / total_steps)
    )
    shuffle_rng = np.random.default_rng(hp.seed)
    loss_fn = nn.CrossEntropyLoss()

    log: list[tuple[int, float]] = []
    net.train()
    for epoch in range(hp.num_epochs):
        order = shuffle_rng.permutation(n)
        epoch_losses: list[float] = []
        for start in range(0, n, hp.batch_size):
            batch_idx = order[start : start + hp.batch_size]
            batch, mask = _pad_batch([ids_list[i] for i in batch_idx], runtime.pad_id)
            logits = net(batch, mask)
            loss = loss_fn(logits, labels[batch_idx])
            value = float(loss.item())
            if not math.isfinite(value):
                raise DivergedLoss(
                    f"non-finite loss at epoch {start_epoch + epoch}, step {start // hp.batch_size}"
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            scheduler.step()
            epoch_losses.append(value)
        log.append((start_epoch + epoch, math.fsum(epoch_losses) / len(epoch_losses)))
    return log


def fine_tune(
    encoder: EncoderRef, train: LabeledDataset, hp: HyperParams
) -> ClassifierModel:
    """Train a fresh classifier head (and the encoder) on ``train``."""
    if train.schema.num_levels < 2:
        raise SchemaMismatch("training schema needs at least 2 levels")
    runtime = _resolve_runtime(encoder)
    torch.manual_seed(_seed_for(encoder, hp.seed))
    net = _ClassifierNet(
        runtime.build_net(max(hp.max_tokens, 512)),
        runtime.hidden,
        train.schema.num_levels,
    )
    log = _train_epochs(net, runtime, train, hp)
    return ClassifierModel(
        encoder=encoder,
        schema=train.schema,
        net=net,
        hp=hp,
        training_log=log,
        lineage=[train.name or "dataset"],
    )


def continue_fine_tune(
    model: ClassifierModel, train: LabeledDataset, hp: HyperParams
) -> ClassifierModel:
    """Further fine-tune an existing model on a second dataset.

    All weights continue from the incoming model's state; the incoming
    model itself is left untouched. Label schemas must already be aligned
    (same level count as the head width); use merge_labels first.
    """
    if train.schema.num_levels != model.num_labels:
        raise SchemaMismatch(
            f"dataset has {train.schema.num_levels} levels but model head "
            f"has {model.num_labels}; align labels before transfer"
        )
    runtime = _resolve_runtime(model.encoder)
    torch.manual_seed(_seed_for(model.encoder, hp.seed) + 1)
    net = copy.deepcopy(model.net)
    start = model.training_log[-1][0] + 1 if model.training_log else 0
    log = _train_epochs(net, runtime, train, hp, start_epoch=start)
    return ClassifierModel(
        encoder=model.encoder,
        schema=model.schema,
        net=net,
        hp=hp,
        training_log=model.training_log + log,
        lineage=model.lineage + [train.name or "dataset"],
    )


def predict_proba(model: ClassifierModel, posts: Sequence[Post]) -> ProbabilityMatrix:
    """Softmax class probabilities for ``posts``, in input order."""
    if len(posts) == 0:
        raise EmptyInput("no posts to predict")
    runtime = _resolve_runtime(model.encoder)
    model.net.eval()
    all_logits: list[np.ndarray] = []
    with torch.no_grad():
        for start in range(0, len(posts), _PREDICT_BATCH):
            chunk = posts[start : start + _PREDICT_BATCH]
            ids_list = [
                runtime.tokenize(p.text, model.hp.max_tokens) for p in chunk
            ]
            batch, mask = _pad_batch(ids_list, runtime.pad_id)
            logits = model.net(batch, mask)
            all_logits.append(logits.double().numpy())
    logits_arr = np.concatenate(all_logits, axis=0)
    # Stable softmax in float64 keeps row sums tight.
    shifted = logits_arr - logits_arr.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    rows = expd / expd.sum(axis=1, keepdims=True)
    return ProbabilityMatrix(post_ids=tuple(p.id for p in posts), rows=rows)


# --- checkpoints ------------------------------------------------------------------

_CHECKPOINT_VERSION = 1


def save_model(model: ClassifierModel, directory: str | Path) -> None:
    """Persist weights plus a text manifest into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    torch.save({"state_dict": model.net.state_dict()}, directory / "weights.pt")
    manifest = {
        "format_version": _CHECKPOINT_VERSION,
        "encoder": {
            "registry_name": model.encoder.registry_name,
            "family_tag": model.encoder.family_tag,
        },
        "schema": {"name": model.schema.name, "levels": list(model.schema.levels)},
        "hyperparams": model.hp.to_dict(),
        "training_log": [[e, loss] for e, loss in model.training_log],
        "lineage": list(model.lineage),
    }
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )


def load_model(directory: str | Path) -> ClassifierModel:
    """Rebuild a checkpointed model; inverse of :func:`save_model`."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise MalformedRow(f"{directory}: no manifest.json")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("format_version") != _CHECKPOINT_VERSION:
        raise MalformedRow(
            f"{directory}: unsupported checkpoint version {manifest.get('format_version')!r}"
        )
    ref = EncoderRef(
        registry_name=manifest["encoder"]["registry_name"],
        family_tag=manifest["encoder"]["family_tag"],
    )
    schema = LabelSchema(
        name=manifest["schema"]["name"], levels=tuple(manifest["schema"]["levels"])
    )
    hp = HyperParams.from_dict(manifest["hyperparams"])
    runtime = _resolve_runtime(ref)
    net = _ClassifierNet(
        runtime.build_net(max(hp.max_tokens, 512)), runtime.hidden, schema.num_levels
    )
    state = torch.load(directory / "weights.pt", weights_only=True)
    net.load_state_dict(state["state_dict"])
    return ClassifierModel(
        encoder=ref,
        schema=schema,
        net=net,
        hp=hp,
        training_log=[(int(e), float(l)) for e, l in manifest["training_log"]],
        lineage=list(manifest["lineage"]),
    )
