"""Reference models: majority class, TF-IDF + logistic regression, and
document-embedding + logistic regression.

TF-IDF uses lowercased word tokens, smoothed inverse document frequency and
L2-normalized rows; logistic regression uses the multinomial objective with
L2 regularization strength 1.0 and up to 1000 iterations. The embedding
baseline trains distributed-memory paragraph vectors (100 dims, 20 epochs,
window 5) on the training texts only.
"""

from __future__ import annotations

import json
import pickle
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from sklearn.feature_extraction.text import TfidfVectorizer
from sklearn.linear_model import LogisticRegression

from .corpus import LabeledDataset, LabelSchema, Post
from .docvec import DocVecModel, DocVecParams
from .errors import EmptyDataset, EmptyInput, MalformedRow
from .probmatrix import ProbabilityMatrix

BASELINE_KINDS = ("majority", "tfidf_logreg", "docvec_logreg")

_LOGREG_KWARGS = dict(C=1.0, max_iter=1000, solver="lbfgs")


@dataclass
class BaselineModel:
    """A fitted baseline: the kind tag, the schema, and opaque fitted state."""

    kind: str
    schema: LabelSchema
    params: Any
    seed: int
    config: dict

    def majority_label(self) -> int:
        if self.kind != "majority":
            raise MalformedRow(f"{self.kind} model has no majority label")
        return int(self.params)


def _check_kind(kind: str) -> None:
    if kind not in BASELINE_KINDS:
        raise MalformedRow(f"unknown baseline kind {kind!r}; expected {BASELINE_KINDS}")


def fit_baseline(kind: str, train: LabeledDataset, seed: int = 1) -> BaselineModel:
    """Fit one of the three baselines on the training split."""
    _check_kind(kind)
    if len(train) == 0:
        raise EmptyDataset("cannot fit a baseline on an empty dataset")

    if kind == "majority":
        counts = Counter(train.labels)
        best = max(
            range(train.schema.num_levels),
            # Ties resolve to the lowest level index.
            key=lambda idx: (counts.get(idx, 0), -idx),
        )
        return BaselineModel(
            kind=kind,
            schema=train.schema,
            params=best,
            seed=seed,
            config={"tie_break": "lowest_index"},
        )

    labels = np.array(train.labels)
    if kind == "tfidf_logreg":
        vectorizer = TfidfVectorizer(lowercase=True)
        features = vectorizer.fit_transform(train.texts)
        clf = LogisticRegression(random_state=seed, **_LOGREG_KWARGS)
        clf.fit(features, labels)
        return BaselineModel(
            kind=kind,
            schema=train.schema,
            params=(vectorizer, clf),
            seed=seed,
            config={
                "tfidf": {"lowercase": True, "smooth_idf": True, "norm": "l2"},
                "logreg": dict(_LOGREG_KWARGS),
            },
        )

    # docvec_logreg
    dv_params = DocVecParams()
    embedder = DocVecModel(dv_params, seed=seed).fit(list(train.texts))
    clf = LogisticRegression(random_state=seed, **_LOGREG_KWARGS)
    clf.fit(embedder.doc_vectors, labels)
    return BaselineModel(
        kind=kind,
        schema=train.schema,
        params=(embedder, clf),
        seed=seed,
        config={"docvec": dv_params.to_dict(), "logreg": dict(_LOGREG_KWARGS)},
    )


def _features_for(model: BaselineModel, posts: Sequence[Post]):
    texts = [p.text for p in posts]
    if model.kind == "tfidf_logreg":
        vectorizer, _ = model.params
        return vectorizer.transform(texts)
    embedder, _ = model.params
    return embedder.transform(texts)


def predict_proba_baseline(
    model: BaselineModel, posts: Sequence[Post]
) -> ProbabilityMatrix:
    """Class-probability rows for ``posts`` (one-hot for the majority model)."""
    if len(posts) == 0:
        raise EmptyInput("no posts to predict")
    num_levels = model.schema.num_levels
    if model.kind == "majority":
        rows = np.zeros((len(posts), num_levels))
        rows[:, model.majority_label()] = 1.0
    else:
        _, clf = model.params
        proba = clf.predict_proba(_features_for(model, posts))
        # The classifier may have seen a subset of classes; re-expand.
        rows = np.zeros((len(posts), num_levels))
        rows[:, clf.classes_] = proba
        if (rows.sum(axis=1) == 0).any():
            raise EmptyInput("classifier produced an all-zero probability row")
    return ProbabilityMatrix(post_ids=tuple(p.id for p in posts), rows=rows)


def predict_baseline(model: BaselineModel, posts: Sequence[Post]) -> list[int]:
    """Hard labels for ``posts``; constant for the majority model."""
    if len(posts) == 0:
        raise EmptyInput("no posts to predict")
    if model.kind == "majority":
        return [model.majority_label()] * len(posts)
    pm = predict_proba_baseline(model, posts)
    return [int(i) for i in np.argmax(pm.rows, axis=1)]


# --- serialization -----------------------------------------------------------

_BASELINE_VERSION = 1


def save_baseline(model: BaselineModel, directory: str | Path) -> None:
    """Write the fitted state blob plus a text manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "model.pkl").write_bytes(pickle.dumps(model.params, protocol=4))
    manifest = {
        "format_version": _BASELINE_VERSION,
        "kind": model.kind,
        "schema": {"name": model.schema.name, "levels": list(model.schema.levels)},
        "hyperparameters": model.config,
        "seed": model.seed,
    }
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )


def load_baseline(directory: str | Path) -> BaselineModel:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
    if manifest.get("format_version") != _BASELINE_VERSION:
        raise MalformedRow(
            f"{directory}: unsupported baseline version "
            f"{manifest.get('format_version')!r}"
        )
    params = pickle.loads((directory / "model.pkl").read_bytes())
    return BaselineModel(
        kind=manifest["kind"],
        schema=LabelSchema(
            name=manifest["schema"]["name"],
            levels=tuple(manifest["schema"]["levels"]),
        ),
        params=params,
        seed=manifest["seed"],
        config=manifest["hyperparameters"],
    )
