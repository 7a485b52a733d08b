"""Dataset ingestion, label schemas, split bookkeeping, and label merging.

Dataset files are UTF-8 tab-separated text with a ``pid\ttext\tlabel``
header, one post per row. Tabs, newlines and backslashes inside the text
column are escaped (``\\t``, ``\\n``, ``\\r``, ``\\\\``) so that a row is
always a single physical line. Labels may be written either as the integer
level index or the textual level name.
"""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    EmptyDataset,
    MalformedRow,
    SchemaMismatch,
    UnknownLabel,
)

SPLIT_TAGS = ("train", "validation", "test")

DATASET_HEADER = ("pid", "text", "label")


@dataclass(frozen=True)
class Post:
    """One social media post: an opaque id plus the full text body."""

    id: str
    text: str

    def __post_init__(self) -> None:
        if not self.id:
            raise MalformedRow("post id must be non-empty")
        if not self.text.strip():
            raise MalformedRow(f"post {self.id!r}: text is empty after trimming")


@dataclass(frozen=True)
class LabelSchema:
    """Ordered depression levels; index in ``levels`` is the label index."""

    name: str
    levels: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.levels) < 2:
            raise SchemaMismatch(f"schema {self.name!r} needs at least 2 levels")
        if len(set(self.levels)) != len(self.levels):
            raise SchemaMismatch(f"schema {self.name!r} has duplicate level names")

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    def index_of(self, level_name: str) -> int:
        try:
            return self.levels.index(level_name)
        except ValueError:
            raise UnknownLabel(
                f"label {level_name!r} not in schema {self.name!r}"
            ) from None

    def parse_label(self, token: str) -> int:
        """Accept a label written as an integer index or a level name."""
        token = token.strip()
        if re.fullmatch(r"\d+", token):
            idx = int(token)
            if idx >= len(self.levels):
                raise UnknownLabel(
                    f"label index {idx} out of range for schema {self.name!r}"
                )
            return idx
        return self.index_of(token)


@dataclass(frozen=True)
class LabeledDataset:
    """Posts paired with label indices under one schema, for one split."""

    schema: LabelSchema
    items: tuple[tuple[Post, int], ...]
    split_tag: str
    name: str = ""

    def __post_init__(self) -> None:
        if self.split_tag not in SPLIT_TAGS:
            raise MalformedRow(
                f"split_tag {self.split_tag!r} not one of {SPLIT_TAGS}"
            )
        if not self.items:
            raise EmptyDataset(f"dataset {self.name!r} ({self.split_tag}) is empty")
        seen: set[str] = set()
        for post, label in self.items:
            if not 0 <= label < self.schema.num_levels:
                raise UnknownLabel(
                    f"label {label} invalid for schema {self.schema.name!r}"
                )
            if post.id in seen:
                raise MalformedRow(f"duplicate post id {post.id!r}")
            seen.add(post.id)

    def __len__(self) -> int:
        return len(self.items)

    @property
    def posts(self) -> tuple[Post, ...]:
        return tuple(post for post, _ in self.items)

    @property
    def labels(self) -> tuple[int, ...]:
        return tuple(label for _, label in self.items)

    @property
    def texts(self) -> tuple[str, ...]:
        return tuple(post.text for post, _ in self.items)

    def fingerprint(self) -> str:
        """Content hash used for cache keys and lineage manifests."""
        h = hashlib.sha256()
        h.update(self.schema.name.encode())
        for level in self.schema.levels:
            h.update(b"\x00" + level.encode())
        for post, label in self.items:
            h.update(b"\x01" + post.id.encode())
            h.update(b"\x02" + post.text.encode())
            h.update(b"\x03" + str(label).encode())
        return h.hexdigest()


@dataclass(frozen=True)
class LabelMapping:
    """Total, surjective map from source label indices to target indices."""

    source: LabelSchema
    target: LabelSchema
    map: tuple[int, ...]
    name: str = ""

    def __post_init__(self) -> None:
        if len(self.map) != self.source.num_levels:
            raise SchemaMismatch(
                f"mapping {self.name!r} must define all "
                f"{self.source.num_levels} source indices"
            )
        if any(not 0 <= t < self.target.num_levels for t in self.map):
            raise SchemaMismatch(
                f"mapping {self.name!r} has a target index out of range"
            )
        if set(self.map) != set(range(self.target.num_levels)):
            raise SchemaMismatch(
                f"mapping {self.name!r} is not surjective onto "
                f"{self.target.name!r}"
            )

    def apply(self, label: int) -> int:
        return self.map[label]


# --- built-in schemas and the canonical transfer mapping --------------------

DEPRESSION_3LEVEL = LabelSchema(
    name="depression-3level",
    levels=("not_depressed", "moderate", "severe"),
)

DEPRESSION_4LEVEL = LabelSchema(
    name="depression-4level",
    levels=("not_depressed", "change_of_feelings", "moderate", "severe"),
)

# Collapses change_of_feelings into moderate; the remaining levels keep
# their relative order so the result lines up with the 3-level schema.
TWITTER_TO_3LEVEL = LabelMapping(
    source=DEPRESSION_4LEVEL,
    target=DEPRESSION_3LEVEL,
    map=(0, 1, 1, 2),
    name="twitter-to-3level",
)

BUILTIN_SCHEMAS: dict[str, LabelSchema] = {
    DEPRESSION_3LEVEL.name: DEPRESSION_3LEVEL,
    DEPRESSION_4LEVEL.name: DEPRESSION_4LEVEL,
}

BUILTIN_MAPPINGS: dict[str, LabelMapping] = {
    TWITTER_TO_3LEVEL.name: TWITTER_TO_3LEVEL,
}


def join_title_body(title: str, body: str) -> str:
    """Canonical concatenation for posts that carry both a title and a body."""
    title, body = title.strip(), body.strip()
    if title and body:
        return f"{title} : {body}"
    return title or body


# --- text column escaping ----------------------------------------------------

_ESCAPES = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r"}
_UNESCAPES = {"\\\\": "\\", "\\t": "\t", "\\n": "\n", "\\r": "\r"}


def escape_text(text: str) -> str:
    return re.sub(r"[\\\t\n\r]", lambda m: _ESCAPES[m.group(0)], text)


def unescape_text(text: str) -> str:
    return re.sub(r"\\[\\tnr]", lambda m: _UNESCAPES[m.group(0)], text)


# --- operations ---------------------------------------------------------------

def load_dataset(
    path: str | Path,
    schema: LabelSchema,
    split_tag: str,
    name: str | None = None,
) -> LabeledDataset:
    """Read a tab-separated dataset file, validating every row.

    Raises MalformedRow on column-count mismatches or empty text,
    UnknownLabel when a label is not in ``schema``, and EmptyDataset
    when no data rows are present. Row order is preserved.
    """
    path = Path(path)
    items: list[tuple[Post, int]] = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        header = fh.readline().rstrip("\r\n")
        if tuple(header.split("\t")) != DATASET_HEADER:
            raise MalformedRow(
                f"{path}: header {header!r} does not match "
                + "\t".join(DATASET_HEADER)
            )
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\r\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise MalformedRow(
                    f"{path}:{lineno}: expected 3 columns, got {len(cols)}"
                )
            pid, raw_text, raw_label = cols
            text = unescape_text(raw_text)
            if not text.strip():
                raise MalformedRow(f"{path}:{lineno}: empty text for post {pid!r}")
            label = schema.parse_label(raw_label)
            items.append((Post(id=pid, text=text), label))
    if not items:
        raise EmptyDataset(f"{path}: no data rows")
    return LabeledDataset(
        schema=schema,
        items=tuple(items),
        split_tag=split_tag,
        name=name if name is not None else path.stem,
    )


def save_dataset(ds: LabeledDataset, path: str | Path) -> None:
    """Write the canonical tab-separated representation of ``ds``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write("\t".join(DATASET_HEADER) + "\n")
        for post, label in ds.items:
            fh.write(f"{post.id}\t{escape_text(post.text)}\t{label}\n")


def class_distribution(ds: LabeledDataset) -> list[tuple[int, int, float]]:
    """Per-level (index, count, fraction) over all schema levels, in order."""
    counts = Counter(label for _, label in ds.items)
    total = len(ds)
    return [
        (idx, counts.get(idx, 0), counts.get(idx, 0) / total)
        for idx in range(ds.schema.num_levels)
    ]


def merge_labels(ds: LabeledDataset, mapping: LabelMapping) -> LabeledDataset:
    """Relabel ``ds`` through ``mapping``, producing the target schema.

    Item count and order are unchanged; only labels move. The result is
    named ``<name>-merged`` so lineage manifests distinguish it.
    """
    if mapping.source != ds.schema:
        raise SchemaMismatch(
            f"mapping source {mapping.source.name!r} does not match "
            f"dataset schema {ds.schema.name!r}"
        )
    items = tuple((post, mapping.apply(label)) for post, label in ds.items)
    return LabeledDataset(
        schema=mapping.target,
        items=items,
        split_tag=ds.split_tag,
        name=f"{ds.name}-merged" if ds.name else "merged",
    )


def concat_datasets(
    first: LabeledDataset, second: LabeledDataset, split_tag: str = "train"
) -> LabeledDataset:
    """Concatenate two same-schema datasets (e.g. train + validation).

    Post ids colliding across the two inputs get the second dataset's
    split tag prefixed, keeping ids unique without touching texts.
    """
    if first.schema != second.schema:
        raise SchemaMismatch(
            f"cannot concat schemas {first.schema.name!r} and {second.schema.name!r}"
        )
    seen = {post.id for post, _ in first.items}
    extra: list[tuple[Post, int]] = []
    for post, label in second.items:
        if post.id in seen:
            post = Post(id=f"{second.split_tag}:{post.id}", text=post.text)
        extra.append((post, label))
    return LabeledDataset(
        schema=first.schema,
        items=first.items + tuple(extra),
        split_tag=split_tag,
        name=first.name,
    )


# --- schema / mapping files ----------------------------------------------------

def load_schema(path: str | Path) -> LabelSchema:
    """Read a schema document: JSON with ``name`` and ordered ``levels``."""
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    try:
        return LabelSchema(name=doc["name"], levels=tuple(doc["levels"]))
    except (KeyError, TypeError) as exc:
        raise MalformedRow(f"{path}: bad schema document: {exc}") from exc


def save_schema(schema: LabelSchema, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps({"name": schema.name, "levels": list(schema.levels)}, indent=2)
        + "\n",
        encoding="utf-8",
    )


def resolve_schema(ref: str | dict | LabelSchema) -> LabelSchema:
    """Accept a built-in schema name, a file path, or an inline document."""
    if isinstance(ref, LabelSchema):
        return ref
    if isinstance(ref, dict):
        return LabelSchema(name=ref["name"], levels=tuple(ref["levels"]))
    if ref in BUILTIN_SCHEMAS:
        return BUILTIN_SCHEMAS[ref]
    return load_schema(ref)


def load_mapping(
    path: str | Path,
    source: LabelSchema,
    target: LabelSchema,
    name: str | None = None,
) -> LabelMapping:
    """Read a mapping file of ``source_index -> target_index`` lines."""
    path = Path(path)
    pairs: dict[int, int] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        m = re.fullmatch(r"(\d+)\s*->\s*(\d+)", line)
        if m is None:
            raise MalformedRow(f"{path}:{lineno}: expected 'src -> dst', got {line!r}")
        src, dst = int(m.group(1)), int(m.group(2))
        if src in pairs:
            raise MalformedRow(f"{path}:{lineno}: duplicate source index {src}")
        pairs[src] = dst
    if sorted(pairs) != list(range(source.num_levels)):
        raise SchemaMismatch(
            f"{path}: mapping must cover source indices 0..{source.num_levels - 1}"
        )
    return LabelMapping(
        source=source,
        target=target,
        map=tuple(pairs[i] for i in range(source.num_levels)),
        name=name if name is not None else path.stem,
    )


def save_mapping(mapping: LabelMapping, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{i} -> {t}" for i, t in enumerate(mapping.map)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def resolve_mapping(
    ref: str | LabelMapping,
    source: LabelSchema | None = None,
    target: LabelSchema | None = None,
) -> LabelMapping:
    """Accept a built-in mapping name, a file path, or a LabelMapping."""
    if isinstance(ref, LabelMapping):
        return ref
    if ref in BUILTIN_MAPPINGS:
        return BUILTIN_MAPPINGS[ref]
    if source is None or target is None:
        raise SchemaMismatch(
            f"mapping file {ref!r} needs explicit source and target schemas"
        )
    return load_mapping(ref, source, target)
