"""Probability fusion for classifier ensembles, plus hard-label extraction.

Two fusion rules:

* averaging: element-wise arithmetic mean of member probabilities.
* bayesian: independence-assuming posterior fusion. With k members,
  ``fused[c] proportional to prior[c]^(1-k) * prod_m member_m[c]``,
  i.e. the member posteriors are multiplied and the shared prior divided
  out k-1 times, then the row is renormalized. Member entries are floored
  at 1e-12 before the product so one over-confident zero cannot
  annihilate a class.

Both rules reduce member values in sorted order, so member permutation
produces bit-identical output.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import LabeledDataset, class_distribution
from .errors import (
    DegeneratePrior,
    EmptyInput,
    IdOrderMismatch,
    MissingGeneralChoice,
    ShapeMismatch,
)
from .probmatrix import ProbabilityMatrix

PROB_FLOOR = 1e-12

FUSION_KINDS = ("averaging", "bayesian")

# Slot letters per combo; G = best general model, M = mentalbert, T = bertweet.
COMBO_SLOTS: dict[str, tuple[str, ...]] = {
    "GMT": ("G", "M", "T"),
    "GT": ("G", "T"),
    "GM": ("G", "M"),
    "MT": ("M", "T"),
}


@dataclass(frozen=True)
class EnsembleSpec:
    """A resolved ensemble: combo, fusion rule, and concrete member ids."""

    combo: str
    fusion: str
    members: tuple[str, ...]
    prior_mode: str = "train"

    def __post_init__(self) -> None:
        if self.combo not in COMBO_SLOTS:
            raise MissingGeneralChoice(
                f"unknown combo {self.combo!r}; expected one of {sorted(COMBO_SLOTS)}"
            )
        if self.fusion not in FUSION_KINDS:
            raise ShapeMismatch(
                f"unknown fusion {self.fusion!r}; expected one of {FUSION_KINDS}"
            )
        expected = len(COMBO_SLOTS[self.combo])
        if len(self.members) != expected:
            raise ShapeMismatch(
                f"combo {self.combo} needs {expected} members, got {len(self.members)}"
            )
        if len(set(self.members)) != len(self.members):
            raise ShapeMismatch("ensemble members must be distinct")
        if self.prior_mode not in ("train", "uniform"):
            raise ShapeMismatch(f"unknown prior mode {self.prior_mode!r}")


@dataclass(frozen=True, eq=False)
class ClassPrior:
    """Class probability vector used by the bayesian fusion rule."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        weights = np.asarray(self.weights, dtype=np.float64)
        if weights.ndim != 1 or weights.size < 2:
            raise ShapeMismatch(f"prior must be a 1-D vector, got {weights.shape}")
        if (weights < 0).any():
            raise DegeneratePrior("prior weights must be non-negative")
        if abs(float(weights.sum()) - 1.0) > 1e-9:
            raise ShapeMismatch(f"prior sums to {weights.sum()!r}, not 1")
        object.__setattr__(self, "weights", weights)

    @property
    def num_classes(self) -> int:
        return self.weights.size

    @classmethod
    def uniform(cls, num_classes: int) -> "ClassPrior":
        return cls(weights=np.full(num_classes, 1.0 / num_classes))

    @classmethod
    def from_dataset(cls, ds: LabeledDataset) -> "ClassPrior":
        """Training-set class frequencies."""
        fractions = np.array([f for _, _, f in class_distribution(ds)])
        return cls(weights=fractions / fractions.sum())

    def is_uniform(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))


def _stack_members(members: Sequence[ProbabilityMatrix]) -> np.ndarray:
    if len(members) == 0:
        raise EmptyInput("need at least one ensemble member")
    first = members[0]
    for i, pm in enumerate(members[1:], start=1):
        if pm.num_classes != first.num_classes or len(pm) != len(first):
            raise ShapeMismatch(
                f"member {i} has shape {(len(pm), pm.num_classes)}, "
                f"expected {(len(first), first.num_classes)}"
            )
        if pm.post_ids != first.post_ids:
            raise IdOrderMismatch(f"member {i} post ids differ from member 0")
    return np.stack([pm.rows for pm in members], axis=0)


def average_fuse(members: Sequence[ProbabilityMatrix]) -> ProbabilityMatrix:
    """Element-wise mean of the members' probability rows."""
    stack = _stack_members(members)
    # Sorting along the member axis makes the reduction order canonical.
    fused = np.sort(stack, axis=0).sum(axis=0) / len(members)
    return ProbabilityMatrix(post_ids=members[0].post_ids, rows=fused)


def bayes_fuse(
    members: Sequence[ProbabilityMatrix], prior: ClassPrior
) -> ProbabilityMatrix:
    """Independence-assuming posterior fusion under ``prior``."""
    stack = _stack_members(members)
    if prior.num_classes != members[0].num_classes:
        raise ShapeMismatch(
            f"prior has {prior.num_classes} classes, members have "
            f"{members[0].num_classes}"
        )
    if (prior.weights == 0).any():
        raise DegeneratePrior("bayesian fusion requires strictly positive priors")
    k = len(members)
    floored = np.maximum(stack, PROB_FLOOR)
    fused = np.sort(floored, axis=0).prod(axis=0)
    if k > 1 and not prior.is_uniform():
        # A uniform prior only rescales rows, so it is skipped exactly.
        fused = fused * prior.weights[np.newaxis, :] ** (1 - k)
    fused = fused / fused.sum(axis=1, keepdims=True)
    return ProbabilityMatrix(post_ids=members[0].post_ids, rows=fused)


def hard_labels(pm: ProbabilityMatrix) -> list[int]:
    """Argmax per row; ties resolve to the lowest class index."""
    return [int(i) for i in np.argmax(pm.rows, axis=1)]


def resolve_members(
    combo: str,
    general_choice: str | None = None,
    mental: str = "mentalbert",
    tweet: str = "bertweet",
) -> tuple[str, ...]:
    """Bind a combo's slot letters to concrete member identifiers."""
    if combo not in COMBO_SLOTS:
        raise MissingGeneralChoice(
            f"unknown combo {combo!r}; expected one of {sorted(COMBO_SLOTS)}"
        )
    slots = COMBO_SLOTS[combo]
    if "G" in slots and not general_choice:
        raise MissingGeneralChoice(f"combo {combo} requires a general model choice")
    binding = {"G": general_choice, "M": mental, "T": tweet}
    return tuple(binding[s] for s in slots)  # type: ignore[misc]
