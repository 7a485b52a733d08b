"""Synthetic corpora for desk-scale runs and tests.

Each class gets its own keyword pool, disjoint from every other class and
from the shared filler vocabulary, so linear models and small encoders can
separate the classes reliably.
"""

from __future__ import annotations

import numpy as np

from .corpus import LabeledDataset, LabelSchema, Post

_FILLER = (
    "today", "really", "just", "about", "because", "people", "think",
    "still", "going", "thing", "some", "around", "while", "again",
)


def _class_keywords(schema: LabelSchema, per_class: int = 6) -> list[list[str]]:
    return [
        [f"{level.replace(' ', '_')}_kw{j}" for j in range(per_class)]
        for level in schema.levels
    ]


def make_synthetic_split(
    schema: LabelSchema,
    counts: list[int] | tuple[int, ...],
    split_tag: str,
    seed: int,
    name: str = "synthetic",
) -> LabeledDataset:
    """Build one split with ``counts[c]`` posts for class ``c``."""
    if len(counts) != schema.num_levels:
        raise ValueError(f"need {schema.num_levels} counts, got {len(counts)}")
    rng = np.random.default_rng(seed)
    keywords = _class_keywords(schema)
    items: list[tuple[Post, int]] = []
    idx = 0
    for label, count in enumerate(counts):
        for _ in range(count):
            n_filler = rng.integers(3, 7)
            n_keys = rng.integers(2, 5)
            words = list(rng.choice(_FILLER, size=n_filler)) + list(
                rng.choice(keywords[label], size=n_keys)
            )
            rng.shuffle(words)
            items.append(
                (Post(id=f"{split_tag}-{idx:06d}", text=" ".join(words)), label)
            )
            idx += 1
    # Interleave classes so mini-batches are not single-class runs.
    order = rng.permutation(len(items))
    return LabeledDataset(
        schema=schema,
        items=tuple(items[i] for i in order),
        split_tag=split_tag,
        name=name,
    )


def make_synthetic_corpus(
    schema: LabelSchema,
    train_per_class: int,
    validation_per_class: int,
    test_per_class: int,
    seed: int = 7,
    name: str = "synthetic",
) -> dict[str, LabeledDataset]:
    """Balanced train/validation/test splits sharing one keyword scheme."""
    return {
        "train": make_synthetic_split(
            schema, [train_per_class] * schema.num_levels, "train", seed, name
        ),
        "validation": make_synthetic_split(
            schema,
            [validation_per_class] * schema.num_levels,
            "validation",
            seed + 1,
            name,
        ),
        "test": make_synthetic_split(
            schema, [test_per_class] * schema.num_levels, "test", seed + 2, name
        ),
    }
