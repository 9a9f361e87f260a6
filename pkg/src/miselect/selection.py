"""Turning per-sample MI scores into retained training subsets.

A plan is scope x band x retention ratio. ``global`` scope ranks the whole
dataset at once; ``class_wise`` first apportions the target size across
classes proportionally (largest remainder) and applies the band rule
within each class, which preserves class balance. Bands: ``top`` keeps the
highest scores, ``bottom`` the lowest, ``middle`` a contiguous rank window
centered on the median rank, and ``random`` a seeded uniform draw
(stratified when class_wise). Score ties always resolve to the smaller
sample index, and -inf sentinel scores sort below every finite score.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._util import largest_remainder_quotas, round_half_even
from .errors import ConfigError, ConsistencyError

SCOPES = ("global", "class_wise")
BANDS = ("top", "middle", "bottom", "random")
SELECTION_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SelectionPlan:
    scope: str
    band: str
    retention_ratio: float
    seed: int | None = None  # random band only

    def __post_init__(self):
        if self.scope not in SCOPES:
            raise ConfigError(f"scope must be one of {SCOPES}, got {self.scope!r}")
        if self.band not in BANDS:
            raise ConfigError(f"band must be one of {BANDS}, got {self.band!r}")
        if not (0.0 < self.retention_ratio <= 1.0):
            raise ConfigError("retention_ratio must lie in (0, 1]")

    @property
    def strategy(self):
        return f"{self.scope}/{self.band}"


@dataclass(frozen=True)
class SelectionResult:
    retained_indices: np.ndarray
    plan: SelectionPlan
    per_class_counts: np.ndarray

    @property
    def size(self):
        return len(self.retained_indices)


def _band_pick(local, positions, m, band, rng):
    """Pick m of ``positions`` (global indices) by the band rule on their scores."""
    if band == "random":
        picked = rng.choice(len(positions), size=m, replace=False)
        return positions[picked]
    scores = local[positions]
    if band == "top":
        order = np.lexsort((positions, -scores))
        return positions[order[:m]]
    if band == "bottom":
        order = np.lexsort((positions, scores))
        return positions[order[:m]]
    # middle: rank window centered on the median of the descending order
    order = np.lexsort((positions, -scores))
    start = (len(positions) - m) // 2
    return positions[order[start : start + m]]


def select(scores, labels, plan, num_classes=None):
    """Apply a selection plan to local MI scores.

    Retains exactly round(retention_ratio * N) samples; raises ConfigError
    if rounding makes that zero. ``scores`` may be an MIScoreSet or a plain
    array of local scores.
    """
    local = np.asarray(getattr(scores, "local_scores", scores), dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if local.shape != labels.shape:
        raise ConsistencyError("scores and labels must be aligned")
    n = len(local)
    if n < 1:
        raise ConfigError("cannot select from an empty dataset")
    if num_classes is None:
        num_classes = int(labels.max()) + 1 if n else 1
    m = round_half_even(plan.retention_ratio * n)
    if m == 0:
        raise ConfigError(
            f"retention_ratio {plan.retention_ratio} rounds to an empty training set"
        )
    rng = None
    if plan.band == "random":
        if plan.seed is None:
            raise ConfigError("random band requires a seed")
        rng = np.random.default_rng(plan.seed)

    if plan.scope == "global":
        retained = _band_pick(local, np.arange(n, dtype=np.int64), m, plan.band, rng)
    else:
        counts = np.bincount(labels, minlength=num_classes)
        quotas = largest_remainder_quotas(m, counts)
        parts = []
        for c in range(num_classes):
            if quotas[c] == 0:
                continue
            members = np.flatnonzero(labels == c)
            parts.append(_band_pick(local, members, int(quotas[c]), plan.band, rng))
        retained = np.concatenate(parts)

    retained = np.sort(retained.astype(np.int64))
    per_class = np.bincount(labels[retained], minlength=num_classes)
    return SelectionResult(retained_indices=retained, plan=plan, per_class_counts=per_class)


def save_selection(result, json_path=None, index_path=None):
    """Export a selection as JSON with plan metadata and/or a newline-
    delimited index file."""
    if index_path is not None:
        with open(index_path, "w", newline="\n") as f:
            for i in result.retained_indices:
                f.write(f"{int(i)}\n")
    if json_path is not None:
        payload = {
            "schema_version": SELECTION_SCHEMA_VERSION,
            "plan": {
                "scope": result.plan.scope,
                "band": result.plan.band,
                "retention_ratio": result.plan.retention_ratio,
                "seed": result.plan.seed,
            },
            "retained_indices": [int(i) for i in result.retained_indices],
            "per_class_counts": [int(c) for c in result.per_class_counts],
        }
        with open(json_path, "w", newline="\n") as f:
            json.dump(payload, f, sort_keys=True, indent=2)
            f.write("\n")
