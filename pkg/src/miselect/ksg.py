"""k-nearest-neighbor mutual information scoring.

Every sample receives a local MI contribution

    score_i = psi(k) + psi(N) - psi(n_x(i) + 1) - psi(n_y(i) + 1)

whose mean over the dataset is the global MI estimate (in nats). Local
scores can be negative; strongly negative scores mark samples whose inputs
carry little or contradictory information about their labels, which is
what makes the ranking useful for filtering noisy data.

Two variants are provided. ``score_discrete`` (default) treats labels as a
discrete variable: the radius for sample i is the distance to its kth
nearest neighbor among same-label points, n_x counts points of any label
inside that radius, and n_y + 1 is the size of the sample's class.
``score_onehot`` embeds labels as scaled one-hot vectors and runs the
generic continuous estimator on the concatenated joint space; the same
continuous core (``score_continuous``) also handles two real-valued
variables, which is how the estimator is validated against the bivariate
Gaussian closed form.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .data import _frozen
from .errors import ConfigError, ConsistencyError, DegenerateInputError, DomainError
from .neighbors import JITTER_SCALE, NeighborIndex

SCORES_SCHEMA_VERSION = 1

VARIANT_DISCRETE = "discrete_label"
VARIANT_ONEHOT = "onehot_continuous"
VARIANT_CONTINUOUS = "continuous"


def digamma(x):
    """Digamma function, elementwise, to better than 1e-10 absolute error.

    Arguments below 6 are shifted up with psi(x) = psi(x+1) - 1/x, then the
    asymptotic expansion with Bernoulli coefficients through x**-12 is
    evaluated. Accepts scalars or arrays of positive reals.
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.size and not np.all(arr > 0):
        raise DomainError("digamma requires strictly positive arguments")
    scalar = arr.ndim == 0
    work = np.atleast_1d(arr).astype(np.float64).copy()
    acc = np.zeros_like(work)
    for _ in range(6):
        small = work < 6.0
        if not small.any():
            break
        acc[small] -= 1.0 / work[small]
        work[small] += 1.0
    inv = 1.0 / work
    inv2 = inv * inv
    tail = inv2 * (
        1.0 / 12.0
        - inv2
        * (
            1.0 / 120.0
            - inv2
            * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0))))
        )
    )
    out = np.log(work) - 0.5 * inv - tail + acc
    if scalar:
        return float(out[0])
    return out.reshape(arr.shape)


@dataclass(frozen=True)
class MIScoreSet:
    """Per-sample local MI contributions plus the global estimate.

    ``local_scores`` holds -inf for degenerate samples (singleton classes,
    which have no same-label neighbor); those are flagged in ``degenerate``
    and excluded from ``global_mi``. ``k_effective`` records the per-sample
    k after any small-class fallback.
    """

    local_scores: np.ndarray
    global_mi: float
    k: int
    n_samples: int
    variant: str
    per_sample_n_x: np.ndarray
    per_sample_n_y: np.ndarray
    k_effective: np.ndarray
    degenerate: np.ndarray
    strict: bool = True
    label_scale: float | None = None
    jitter_seed: int | None = None

    def __post_init__(self):
        scores = np.asarray(self.local_scores, dtype=np.float64)
        nx = np.asarray(self.per_sample_n_x, dtype=np.int64)
        ny = np.asarray(self.per_sample_n_y, dtype=np.int64)
        keff = np.asarray(self.k_effective, dtype=np.int64)
        deg = np.asarray(self.degenerate, dtype=bool)
        n = self.n_samples
        for name, a in (("local_scores", scores), ("n_x", nx), ("n_y", ny),
                        ("k_effective", keff), ("degenerate", deg)):
            if a.shape != (n,):
                raise ConsistencyError(f"{name} must have length n_samples")
        if nx.size and (nx.min() < 0 or nx.max() > n - 1):
            raise ConsistencyError("per-sample n_x counts must lie in [0, N-1]")
        if ny.size and (ny.min() < 0 or ny.max() > n - 1):
            raise ConsistencyError("per-sample n_y counts must lie in [0, N-1]")
        object.__setattr__(self, "local_scores", _frozen(scores))
        object.__setattr__(self, "per_sample_n_x", _frozen(nx))
        object.__setattr__(self, "per_sample_n_y", _frozen(ny))
        object.__setattr__(self, "k_effective", _frozen(keff))
        object.__setattr__(self, "degenerate", _frozen(deg))

    @property
    def k_substitutions(self):
        """Number of samples scored with a reduced k (small-class fallback)."""
        return int(((self.k_effective != self.k) & ~self.degenerate).sum())

    @property
    def global_mi_bits(self):
        return self.global_mi / math.log(2.0)


def _finalize(scores, nx, ny, keff, deg, k, variant, strict, label_scale, jitter_seed):
    usable = ~deg
    if not usable.any():
        raise DegenerateInputError("every sample is degenerate; no global MI")
    global_mi = float(np.mean(scores[usable]))
    return MIScoreSet(
        local_scores=scores,
        global_mi=global_mi,
        k=k,
        n_samples=len(scores),
        variant=variant,
        per_sample_n_x=nx,
        per_sample_n_y=ny,
        k_effective=keff,
        degenerate=deg,
        strict=strict,
        label_scale=label_scale,
        jitter_seed=jitter_seed,
    )


def _count_with_radii(index, radii, strict):
    # radius 0 under strict counting can never include anything
    counts = index.count_within_bulk(np.where(radii > 0, radii, 0.0), strict=strict)
    if strict:
        counts = np.where(radii > 0, counts, 0)
    return counts


def score_discrete(points, k, strict=True, structure="brute", jitter_seed=None):
    """Local MI contributions with labels treated as a discrete variable.

    For each sample, the kth-nearest same-label distance (Chebyshev, self
    excluded) sets the radius; n_x counts points of any label strictly
    inside it (or within it if ``strict`` is False) and n_y + 1 is the
    class size. Classes with k or fewer members fall back to
    k_i = class_size - 1; singleton classes are flagged degenerate with a
    -inf sentinel and excluded from the global mean.
    """
    x = points.points
    labels = points.labels
    n = len(labels)
    if n < k + 2:
        raise ConfigError(f"need at least k+2={k + 2} samples, have {n}")
    if k < 1:
        raise ConfigError("k must be positive")

    if jitter_seed is not None:
        rng = np.random.default_rng(jitter_seed)
        x = x + rng.uniform(-JITTER_SCALE, JITTER_SCALE, size=x.shape)
    index_all = NeighborIndex(x, structure=structure)

    radii = np.zeros(n)
    nx = np.zeros(n, dtype=np.int64)
    ny = np.zeros(n, dtype=np.int64)
    keff = np.zeros(n, dtype=np.int64)
    deg = np.zeros(n, dtype=bool)

    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        size = len(members)
        if size == 1:
            deg[members] = True
            continue
        k_c = min(k, size - 1)
        sub = NeighborIndex(x[members], structure=structure)
        radii[members] = sub.kth_distance_bulk(k_c)
        keff[members] = k_c
        ny[members] = size - 1

    nx_all = _count_with_radii(index_all, radii, strict)
    usable = ~deg
    nx[usable] = nx_all[usable]

    scores = np.full(n, -np.inf)
    scores[usable] = (
        digamma(keff[usable].astype(float))
        + digamma(float(n))
        - digamma(nx[usable] + 1.0)
        - digamma(ny[usable] + 1.0)
    )
    return _finalize(scores, nx, ny, keff, deg, k, VARIANT_DISCRETE, strict, None, jitter_seed)


def score_continuous(x, y, k, strict=True, structure="brute", jitter_seed=None,
                     variant=VARIANT_CONTINUOUS):
    """Generic KSG estimator for two real-valued variables.

    The joint space is the column concatenation of x and y under the
    Chebyshev metric; the kth joint neighbor distance sets each sample's
    radius for the marginal counts.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    if x.shape[0] != y.shape[0]:
        raise ConsistencyError("x and y must have the same number of samples")
    n = x.shape[0]
    if n < k + 2:
        raise ConfigError(f"need at least k+2={k + 2} samples, have {n}")
    if k < 1:
        raise ConfigError("k must be positive")

    joint = np.hstack([x, y])
    if jitter_seed is not None:
        rng = np.random.default_rng(jitter_seed)
        joint = joint + rng.uniform(-JITTER_SCALE, JITTER_SCALE, size=joint.shape)
    dx = x.shape[1]
    index_joint = NeighborIndex(joint, structure=structure)
    index_x = NeighborIndex(joint[:, :dx], structure=structure)
    index_y = NeighborIndex(joint[:, dx:], structure=structure)

    eps = index_joint.kth_distance_bulk(k)
    nx = _count_with_radii(index_x, eps, strict)
    ny = _count_with_radii(index_y, eps, strict)

    keff = np.full(n, k, dtype=np.int64)
    deg = np.zeros(n, dtype=bool)
    scores = digamma(float(k)) + digamma(float(n)) - digamma(nx + 1.0) - digamma(ny + 1.0)
    return _finalize(scores, nx, ny, keff, deg, k, variant, strict, None, jitter_seed)


def score_onehot(points, k, label_scale, strict=True, structure="brute", jitter_seed=None):
    """Local MI via the continuous estimator on (x, scaled one-hot labels).

    With ``label_scale`` well above the data diameter, cross-label pairs
    can never fall inside a sample's radius and the marginal-y counts
    reduce to same-label counts.
    """
    if label_scale <= 0:
        raise ConfigError("label_scale must be positive")
    labels = points.labels
    onehot = np.zeros((len(labels), points.num_classes))
    onehot[np.arange(len(labels)), labels] = label_scale
    result = score_continuous(
        points.points, onehot, k, strict=strict, structure=structure,
        jitter_seed=jitter_seed, variant=VARIANT_ONEHOT,
    )
    return MIScoreSet(
        local_scores=result.local_scores,
        global_mi=result.global_mi,
        k=result.k,
        n_samples=result.n_samples,
        variant=VARIANT_ONEHOT,
        per_sample_n_x=result.per_sample_n_x,
        per_sample_n_y=result.per_sample_n_y,
        k_effective=result.k_effective,
        degenerate=result.degenerate,
        strict=strict,
        label_scale=float(label_scale),
        jitter_seed=jitter_seed,
    )


def score_dataset(points, k, variant=VARIANT_DISCRETE, strict=True, label_scale=None,
                  structure="brute", jitter_seed=None):
    """Dispatch to the configured scoring variant."""
    if variant == VARIANT_DISCRETE:
        return score_discrete(points, k, strict=strict, structure=structure,
                              jitter_seed=jitter_seed)
    if variant == VARIANT_ONEHOT:
        if label_scale is None:
            span = points.points.max() - points.points.min() if points.points.size else 1.0
            label_scale = 4.0 * max(float(span), 1.0)
        return score_onehot(points, k, label_scale, strict=strict, structure=structure,
                            jitter_seed=jitter_seed)
    raise ConfigError(f"unknown estimator variant {variant!r}")


def per_class_summary(scores, labels):
    """Per-class and overall {mean, stddev, min, max, count} of local scores.

    Degenerate (-inf) samples are excluded; ``count`` is the number of
    finite scores contributing to each entry.
    """
    local = scores.local_scores if isinstance(scores, MIScoreSet) else np.asarray(scores)
    labels = np.asarray(labels, dtype=np.int64)
    if local.shape != labels.shape:
        raise ConsistencyError("scores and labels must be aligned")
    finite = np.isfinite(local)

    def stats(mask):
        vals = local[mask]
        if vals.size == 0:
            return {"mean": float("nan"), "stddev": float("nan"),
                    "min": float("nan"), "max": float("nan"), "count": 0}
        return {
            "mean": float(vals.mean()),
            "stddev": float(vals.std()),
            "min": float(vals.min()),
            "max": float(vals.max()),
            "count": int(vals.size),
        }

    out = {}
    for c in np.unique(labels):
        out[int(c)] = stats(finite & (labels == c))
    out["overall"] = stats(finite)
    return out


def dataset_content_hash(points, labels):
    """Stable content hash of an embedded dataset (exact float bytes)."""
    h = hashlib.sha256()
    pts = np.ascontiguousarray(points, dtype=np.float64)
    h.update(str(pts.shape).encode())
    h.update(pts.tobytes())
    h.update(np.ascontiguousarray(labels, dtype=np.int64).tobytes())
    return h.hexdigest()


def save_scores(scores, path, dataset_hash=None):
    """Write a score set to a versioned JSON artifact (exact round trip)."""
    local = [None if d else float(s) for s, d in zip(scores.local_scores, scores.degenerate)]
    payload = {
        "schema_version": SCORES_SCHEMA_VERSION,
        "variant": scores.variant,
        "k": scores.k,
        "n_samples": scores.n_samples,
        "strict": scores.strict,
        "label_scale": scores.label_scale,
        "jitter_seed": scores.jitter_seed,
        "global_mi": scores.global_mi,
        "local_scores": local,
        "n_x": scores.per_sample_n_x.tolist(),
        "n_y": scores.per_sample_n_y.tolist(),
        "k_effective": scores.k_effective.tolist(),
        "degenerate": scores.degenerate.tolist(),
        "dataset_hash": dataset_hash,
    }
    with open(path, "w", newline="\n") as f:
        json.dump(payload, f, sort_keys=True)
        f.write("\n")


def load_scores(path):
    """Read a score artifact; returns (MIScoreSet, dataset_hash)."""
    with open(path) as f:
        payload = json.load(f)
    if payload.get("schema_version") != SCORES_SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported score artifact version")
    deg = np.asarray(payload["degenerate"], dtype=bool)
    local = np.asarray(
        [(-np.inf if v is None else v) for v in payload["local_scores"]], dtype=np.float64
    )
    scores = MIScoreSet(
        local_scores=local,
        global_mi=payload["global_mi"],
        k=payload["k"],
        n_samples=payload["n_samples"],
        variant=payload["variant"],
        per_sample_n_x=np.asarray(payload["n_x"], dtype=np.int64),
        per_sample_n_y=np.asarray(payload["n_y"], dtype=np.int64),
        k_effective=np.asarray(payload["k_effective"], dtype=np.int64),
        degenerate=deg,
        strict=payload["strict"],
        label_scale=payload["label_scale"],
        jitter_seed=payload["jitter_seed"],
    )
    return scores, payload.get("dataset_hash")
