"""Linear dimensionality reduction for neighbor-based scoring.

Raw feature vectors (e.g. flattened images) are compressed with PCA into a
low-dimensional space where nearest-neighbor distances are meaningful. The
transform is deterministic: components carry a fixed sign convention and
ties never depend on library internals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import _TAG_DTYPE, _frozen
from .errors import ConfigError, ConsistencyError, DegenerateInputError

_ORTHO_TOL = 1e-8
PCA_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class PcaModel:
    """Fitted PCA transform.

    ``components`` holds d orthonormal rows (principal directions) of the
    source space; ``explained_variance`` is non-increasing. With ``whiten``
    each projected coordinate is scaled to unit variance.
    """

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    whiten: bool = False

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        comps = np.asarray(self.components, dtype=np.float64)
        ev = np.asarray(self.explained_variance, dtype=np.float64)
        if comps.ndim != 2 or comps.shape[1] != mean.shape[0]:
            raise ConsistencyError("components must be (d, source_dim)")
        if ev.shape != (comps.shape[0],):
            raise ConsistencyError("explained_variance must have one entry per component")
        gram = comps @ comps.T
        if not np.allclose(gram, np.eye(comps.shape[0]), atol=_ORTHO_TOL):
            raise ConsistencyError("components are not orthonormal")
        if np.any(np.diff(ev) > 1e-12) or np.any(ev < -1e-12):
            raise ConsistencyError("explained_variance must be non-negative, non-increasing")
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "components", _frozen(comps))
        object.__setattr__(self, "explained_variance", _frozen(np.maximum(ev, 0.0)))

    @property
    def latent_dim(self):
        return self.components.shape[0]

    @property
    def source_dim(self):
        return self.mean.shape[0]


@dataclass(frozen=True)
class EmbeddedDataset:
    """Low-dimensional points aligned 1:1 with labels and provenance."""

    points: np.ndarray
    labels: np.ndarray
    num_classes: int
    original_labels: np.ndarray
    input_corruption: np.ndarray
    embed_params: PcaModel | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        original = np.asarray(self.original_labels, dtype=np.int64)
        tags = np.asarray(self.input_corruption, dtype=_TAG_DTYPE)
        if pts.ndim != 2:
            raise ConsistencyError("points must be a 2-D (N, d) array")
        if not np.all(np.isfinite(pts)):
            raise ConsistencyError("all embedded coordinates must be finite")
        n = pts.shape[0]
        if not (labels.shape == original.shape == tags.shape == (n,)):
            raise ConsistencyError("labels and provenance must have length N")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "original_labels", _frozen(original))
        object.__setattr__(self, "input_corruption", _frozen(tags))

    @classmethod
    def from_points(cls, points, labels, num_classes=None):
        labels = np.asarray(labels, dtype=np.int64)
        if num_classes is None:
            num_classes = int(labels.max()) + 1 if labels.size else 1
        return cls(
            points=points,
            labels=labels,
            num_classes=num_classes,
            original_labels=labels.copy(),
            input_corruption=np.full(len(labels), "", dtype=_TAG_DTYPE),
        )

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def label_flipped(self):
        return self.labels != self.original_labels

    def provenance(self):
        flipped = self.label_flipped
        out = []
        for i in range(self.n):
            parts = []
            if flipped[i]:
                parts.append("label_flipped")
            if self.input_corruption[i]:
                parts.append(str(self.input_corruption[i]))
            out.append("+".join(parts) if parts else "clean")
        return np.asarray(out, dtype=_TAG_DTYPE)

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return EmbeddedDataset(
            points=self.points[indices],
            labels=self.labels[indices],
            num_classes=self.num_classes,
            original_labels=self.original_labels[indices],
            input_corruption=self.input_corruption[indices],
            embed_params=self.embed_params,
        )


def _features_of(ds):
    return ds.features if hasattr(ds, "features") else np.asarray(ds, dtype=np.float64)


def fit_pca(ds, d, whiten=False):
    """Fit a d-component PCA on a dataset's features.

    Components are the top-d eigenvectors of the sample covariance
    (ddof=1) of the centered features. For determinism every component is
    flipped so that its largest-magnitude coordinate is positive. Uses a
    symmetric eigensolver on the explicit covariance while source_dim is
    small; falls back to an SVD of the centered data otherwise.
    """
    x = _features_of(ds)
    n, dim = x.shape
    if n < 2:
        raise ConfigError("fit_pca needs at least 2 samples")
    if not (1 <= d <= min(n, dim)):
        raise ConfigError(f"latent dim {d} must lie in [1, min(N={n}, dim={dim})]")
    mean = x.mean(axis=0)
    xc = x - mean
    total_var = float((xc**2).sum()) / (n - 1)
    if total_var == 0.0:
        raise DegenerateInputError("zero-variance dataset, nothing to embed")

    if dim <= 1024:
        cov = (xc.T @ xc) / (n - 1)
        eigvals, eigvecs = np.linalg.eigh(cov)
        order = np.argsort(eigvals)[::-1][:d]
        ev = eigvals[order]
        comps = eigvecs[:, order].T
    else:
        u, s, vt = np.linalg.svd(xc, full_matrices=False)
        ev = (s[:d] ** 2) / (n - 1)
        comps = vt[:d]

    ev = np.maximum(ev, 0.0)
    comps = comps.copy()
    for j in range(d):
        peak = np.argmax(np.abs(comps[j]))
        if comps[j, peak] < 0:
            comps[j] = -comps[j]
    if whiten and np.any(ev <= 1e-300):
        raise DegenerateInputError("cannot whiten: a requested component has zero variance")
    return PcaModel(mean=mean, components=comps, explained_variance=ev, whiten=whiten)


def transform_points(model, x):
    """Project raw feature rows into the latent space."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1] != model.source_dim:
        raise ConsistencyError(
            f"feature dim {x.shape[1]} does not match model source dim {model.source_dim}"
        )
    p = (x - model.mean) @ model.components.T
    if model.whiten:
        p = p / np.sqrt(model.explained_variance)
    return p


def transform(model, ds):
    """Embed a labeled dataset; labels and provenance pass through unchanged."""
    points = transform_points(model, ds.features)
    return EmbeddedDataset(
        points=points,
        labels=ds.labels,
        num_classes=ds.num_classes,
        original_labels=ds.original_labels,
        input_corruption=ds.input_corruption,
        embed_params=model,
    )


def inverse_transform(model, points):
    """Map latent points back to the source space (least-squares lift)."""
    points = np.asarray(points, dtype=np.float64)
    if model.whiten:
        points = points * np.sqrt(model.explained_variance)
    return points @ model.components + model.mean


def reconstruction_error(model, x):
    """Mean squared reconstruction error of raw features under the model."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = inverse_transform(model, transform_points(model, x))
    return float(np.mean((x - x_hat) ** 2))


def save_pca(model, path):
    payload = {
        "schema_version": PCA_SCHEMA_VERSION,
        "mean": model.mean.tolist(),
        "components": model.components.tolist(),
        "explained_variance": model.explained_variance.tolist(),
        "whiten": model.whiten,
    }
    with open(path, "w", newline="\n") as f:
        json.dump(payload, f, sort_keys=True)
        f.write("\n")


def load_pca(path):
    with open(path) as f:
        payload = json.load(f)
    if payload.get("schema_version") != PCA_SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported PCA artifact version")
    return PcaModel(
        mean=np.asarray(payload["mean"]),
        components=np.asarray(payload["components"]),
        explained_variance=np.asarray(payload["explained_variance"]),
        whiten=bool(payload["whiten"]),
    )
