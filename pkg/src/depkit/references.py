"""Published reference values for the original full-scale experiments.

These numbers came from large-encoder fine-tuning on the complete Reddit
and Twitter corpora and are *not* reproducible at desk scale; they exist so
reports can show the target a configuration corresponds to. Reference
scores are (accuracy, weighted F1, SD of F1 over three repetitions).
"""

from __future__ import annotations

from .encoder import HyperParams

# Selected fine-tuning settings per (logical encoder, corpus), from the
# published validation-set tuning. Seed and max_tokens are not part of the
# published grid; callers fill them in.
PINNED_HYPERPARAMS: dict[tuple[str, str], dict] = {
    ("bert", "reddit"): {"batch_size": 32, "num_epochs": 15, "learning_rate": 5e-5},
    ("roberta", "reddit"): {"batch_size": 8, "num_epochs": 15, "learning_rate": 1e-5},
    ("mentalbert", "reddit"): {"batch_size": 32, "num_epochs": 15, "learning_rate": 1e-4},
    ("bertweet", "reddit"): {"batch_size": 16, "num_epochs": 15, "learning_rate": 5e-5},
    ("bert", "twitter"): {"batch_size": 32, "num_epochs": 15, "learning_rate": 5e-5},
    ("roberta", "twitter"): {"batch_size": 32, "num_epochs": 15, "learning_rate": 5e-5},
    ("mentalbert", "twitter"): {"batch_size": 32, "num_epochs": 10, "learning_rate": 5e-5},
    ("bertweet", "twitter"): {"batch_size": 16, "num_epochs": 5, "learning_rate": 5e-5},
}


def pinned_hyperparams(
    model: str, dataset: str, seed: int = 1, max_tokens: int = 512
) -> HyperParams:
    """The published selection for (model, dataset), or KeyError."""
    row = PINNED_HYPERPARAMS[(model, dataset)]
    return HyperParams(seed=seed, max_tokens=max_tokens, **row)


# Reference test scores, keyed dataset -> group -> model -> variant, where
# variant "direct" is single-corpus training and "transfer" is two-stage
# training that starts from the other corpus.
REFERENCE_RESULTS: dict[str, dict[str, dict[str, dict[str, tuple[float, float, float]]]]] = {
    "reddit": {
        "baselines": {
            "majority": {"direct": (0.513, 0.348, 0.0000)},
            "docvec_logreg": {"direct": (0.459, 0.459, 0.0051)},
            "tfidf_logreg": {"direct": (0.519, 0.576, 0.0000)},
        },
        "transformers": {
            "mentalbert": {"direct": (0.577, 0.577, 0.0050), "transfer": (0.569, 0.565, 0.0079)},
            "roberta": {"direct": (0.557, 0.563, 0.0035), "transfer": (0.532, 0.537, 0.0110)},
            "bert": {"direct": (0.559, 0.561, 0.0057), "transfer": (0.564, 0.559, 0.0051)},
            "bertweet": {"direct": (0.560, 0.561, 0.0072), "transfer": (0.557, 0.553, 0.0068)},
        },
        "averaging": {
            "GMT": {"direct": (0.592, 0.592, 0.0024), "transfer": (0.586, 0.580, 0.0040)},
            "GM": {"direct": (0.592, 0.591, 0.0031), "transfer": (0.583, 0.575, 0.0057)},
            "MT": {"direct": (0.584, 0.579, 0.0057), "transfer": (0.579, 0.571, 0.0093)},
            "GT": {"direct": (0.579, 0.580, 0.0030), "transfer": (0.577, 0.569, 0.0021)},
        },
        "bayesian": {
            "GMT": {"direct": (0.588, 0.590, 0.0037), "transfer": (0.564, 0.567, 0.0063)},
            "GM": {"direct": (0.545, 0.556, 0.0045), "transfer": (0.496, 0.513, 0.0209)},
            "MT": {"direct": (0.525, 0.541, 0.0125), "transfer": (0.525, 0.537, 0.0051)},
            "GT": {"direct": (0.568, 0.571, 0.0086), "transfer": (0.565, 0.562, 0.0069)},
        },
    },
    "twitter": {
        "baselines": {
            "majority": {"direct": (0.416, 0.245, 0.0000)},
            "docvec_logreg": {"direct": (0.683, 0.680, 0.0009)},
            "tfidf_logreg": {"direct": (0.730, 0.728, 0.0000)},
        },
        "transformers": {
            "mentalbert": {"direct": (0.831, 0.831, 0.0023), "transfer": (0.848, 0.848, 0.0004)},
            "roberta": {"direct": (0.852, 0.852, 0.0009), "transfer": (0.865, 0.866, 0.0020)},
            "bert": {"direct": (0.831, 0.831, 0.0008), "transfer": (0.846, 0.846, 0.0003)},
            "bertweet": {"direct": (0.849, 0.849, 0.0008), "transfer": (0.860, 0.860, 0.0043)},
        },
        "averaging": {
            "GMT": {"direct": (0.858, 0.859, 0.0018), "transfer": (0.871, 0.871, 0.0005)},
            "GM": {"direct": (0.851, 0.851, 0.0017), "transfer": (0.857, 0.857, 0.0024)},
            "MT": {"direct": (0.839, 0.839, 0.0029), "transfer": (0.853, 0.853, 0.0013)},
            "GT": {"direct": (0.858, 0.858, 0.0014), "transfer": (0.873, 0.873, 0.0005)},
        },
        "bayesian": {
            "GMT": {"direct": (0.849, 0.849, 0.0064), "transfer": (0.857, 0.858, 0.0025)},
            "GM": {"direct": (0.853, 0.854, 0.0003), "transfer": (0.866, 0.866, 0.0016)},
            "MT": {"direct": (0.835, 0.835, 0.0054), "transfer": (0.849, 0.849, 0.0005)},
            "GT": {"direct": (0.844, 0.844, 0.0020), "transfer": (0.854, 0.854, 0.0017)},
        },
    },
}

# Every majority-baseline report carries this caveat: the reference table's
# majority accuracy matches the share of level 0 in the *test* split (0.513
# on Reddit), while the definition implemented here takes the most frequent
# *training* label (level 1 on Reddit, giving 0.407 on that test split).
# The discrepancy is documented rather than silently adopted.
MAJORITY_REFERENCE_NOTE = (
    "majority baseline predicts the most frequent training-split label; "
    "the published reference accuracy (0.513 on the Reddit corpus) instead "
    "equals the test-split fraction of level 0, so the two figures are not "
    "comparable. This implementation keeps the training-frequency "
    "definition (level 1 on Reddit, test accuracy 0.407)."
)


def lookup_reference(
    dataset: str, group: str, model: str, transfer: bool
) -> tuple[float, float, float] | None:
    """Reference (accuracy, F1, SD) if one was published for this cell."""
    try:
        return REFERENCE_RESULTS[dataset][group][model][
            "transfer" if transfer else "direct"
        ]
    except KeyError:
        return None
