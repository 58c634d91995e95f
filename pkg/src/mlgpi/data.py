"""Labeled datasets: loading, standardization and synthetic generators."""
import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NonPrincipalLog, ParseError

__all__ = [
    "LabeledDataset",
    "Standardizer",
    "load_dataset",
    "save_dataset",
    "synth_stripes",
    "stripe_label",
    "StripeLayout",
    "stripe_midlines",
    "synth_rotation_atlas",
    "shear_atlas",
    "DEFAULT_ROTATION",
]

DEFAULT_ROTATION = 0.63


@dataclass(frozen=True)
class LabeledDataset:
    """``n`` points in R^d with integer class labels in ``[0, C)``."""

    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.shape[0] != points.shape[0]:
            raise DimensionMismatch(
                f"{points.shape[0]} points but {labels.shape} labels")
        if labels.size and not np.all(labels == np.round(labels)):
            raise ValueError("labels must be integers")
        labels = labels.astype(np.int64)
        if labels.size and labels.min() < 0:
            raise ValueError("labels must be non-negative")
        if not np.all(np.isfinite(points)):
            raise ValueError("points must be finite")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def classes(self):
        return np.unique(self.labels)

    def subset(self, index):
        return LabeledDataset(self.points[index], self.labels[index])


@dataclass
class Standardizer:
    """Per-feature z-score transform; features with zero spread keep scale 1."""

    mean: np.ndarray = field(default=None)
    scale: np.ndarray = field(default=None)

    @classmethod
    def fit(cls, points):
        points = np.asarray(points, dtype=float)
        mean = points.mean(axis=0)
        scale = points.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        return cls(mean=mean, scale=scale)

    @classmethod
    def identity(cls, dim):
        return cls(mean=np.zeros(dim), scale=np.ones(dim))

    def transform(self, points):
        return (np.asarray(points, dtype=float) - self.mean) / self.scale

    def inverse(self, points):
        return np.asarray(points, dtype=float) * self.scale + self.mean

    def apply(self, data):
        return LabeledDataset(self.transform(data.points), data.labels)


def load_dataset(path, header=False, standardize=False):
    """Read a comma-separated file whose last column is the integer label.

    Returns ``(dataset, standardizer)``; the standardizer is the identity
    transform unless ``standardize`` is set.
    """
    rows, labels = [], []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 2:
                raise ParseError("need at least one feature and a label",
                                 lineno)
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DimensionMismatch(
                    f"line {lineno}: expected {width} columns, "
                    f"got {len(row)}")
            try:
                feats = [float(cell) for cell in row[:-1]]
            except ValueError:
                raise ParseError(f"non-numeric feature in {row!r}",
                                 lineno) from None
            try:
                label = float(row[-1])
            except ValueError:
                raise ParseError(f"non-numeric label {row[-1]!r}",
                                 lineno) from None
            if label != int(label) or label < 0:
                raise ParseError(f"label {row[-1]!r} is not a "
                                 "non-negative integer", lineno)
            if not all(np.isfinite(feats)):
                raise ParseError("non-finite feature value", lineno)
            rows.append(feats)
            labels.append(int(label))
    if not rows:
        raise ParseError(f"no data rows in {path}")
    data = LabeledDataset(np.array(rows), np.array(labels))
    if standardize:
        scaler = Standardizer.fit(data.points)
        return scaler.apply(data), scaler
    return data, Standardizer.identity(data.dim)


def save_dataset(data, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for x, y in zip(data.points, data.labels):
            writer.writerow([repr(float(v)) for v in x] + [int(y)])


@dataclass(frozen=True)
class StripeLayout:
    """Geometry of the two-class stripes set.

    Class 0 fills ``x`` in ``[-width - gap/2, -gap/2]`` and class 1 fills
    ``[gap/2, width + gap/2]``. Each class is drawn as ``stripes`` horizontal
    rows holding ``base_count * density`` evenly spaced points whose
    innermost member sits on the band edge, so the class with the smaller
    density is the sparser one. The ground-truth boundary is ``x = 0``, the
    midline between the two innermost columns.
    """

    stripes: int = 4
    width: float = 4.0
    gap: float = 1.0
    row_spacing: float = 1.0
    densities: tuple = (1, 2)
    base_count: int = 8

    def counts(self):
        return tuple(int(round(self.base_count * d)) for d in self.densities)

    def bounds(self, margin=0.5):
        half = self.width + 0.5 * self.gap + margin
        top = (self.stripes - 1) * self.row_spacing
        return (-half, half, -margin, top + margin)


def stripe_label(x):
    """Ground-truth class from the x coordinate: 0 left of 0, else 1."""
    return (np.asarray(x, dtype=float) > 0.0).astype(np.int64)


def synth_stripes(layout=StripeLayout(), noise=0.05, seed=0):
    """Two-class striped data; class 0 is the sparser one by default.

    Points sit on a regular lattice along each stripe and are jittered by
    isotropic Gaussian noise of standard deviation ``noise``. Jitter in x is
    clipped so no point leaves its own class band.
    """
    if min(layout.densities) <= 0:
        raise ValueError("stripe densities must be positive")
    rng = np.random.default_rng(seed)
    half_gap = 0.5 * layout.gap
    pts, labs = [], []
    for label, count in enumerate(layout.counts()):
        step = layout.width / max(count - 1, 1)
        offsets = half_gap + step * np.arange(count)
        xs = -offsets[::-1] if label == 0 else offsets
        for row in range(layout.stripes):
            y = row * layout.row_spacing
            pts.append(np.column_stack([xs, np.full(count, y)]))
            labs.append(np.full(count, label))
    points = np.vstack(pts)
    labels = np.concatenate(labs)
    if noise > 0:
        points = points + rng.normal(scale=noise, size=points.shape)
        side = np.where(labels == 0, -1.0, 1.0)
        inner = half_gap
        outer = half_gap + layout.width
        points[:, 0] = side * np.clip(side * points[:, 0], inner, outer)
    return LabeledDataset(points, labels)


def stripe_midlines(data, layout=StripeLayout()):
    """Ideal boundary per stripe: midpoint of its two innermost points.

    Returns ``(ys, mids)`` with the nominal stripe heights and the x
    coordinate halfway between the rightmost class-0 point and the leftmost
    class-1 point of that stripe. Points are assigned to the nearest stripe.
    """
    X, y = data.points, data.labels
    ys = np.arange(layout.stripes) * layout.row_spacing
    row = np.clip(np.rint(X[:, 1] / layout.row_spacing), 0,
                  layout.stripes - 1).astype(int)
    mids = np.empty(layout.stripes)
    for r in range(layout.stripes):
        left = X[(row == r) & (y == 0), 0]
        right = X[(row == r) & (y == 1), 0]
        if left.size == 0 or right.size == 0:
            raise ValueError(f"stripe {r} lacks points of both classes")
        mids[r] = 0.5 * (left.max() + right.min())
    return ys, mids


def _rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def synth_rotation_atlas(theta=DEFAULT_ROTATION, centers=((-2.0, 0.0),
                                                        (2.0, 0.0)),
                         sigma=2.0, steps=32):
    """Two opposed rotations: +theta about the first center, -theta about
    the second."""
    from .fusion import atlas_from_linear

    if not abs(theta) < np.pi:
        raise NonPrincipalLog(
            f"|theta| = {abs(theta):.6g} >= pi has no principal log")
    c1, c2 = (np.asarray(c, dtype=float) for c in centers)
    return atlas_from_linear([_rotation(theta), _rotation(-theta)],
                             [c1, c2], [sigma, sigma], steps)


def shear_atlas(strength=2.0, centers=((-1.0, 0.0), (1.0, 0.0)), sigma=1.0,
                steps=32):
    """Two opposed horizontal shears ``[[1, +-s], [0, 1]]``.

    Strong enough shears fold under displacement averaging while the
    velocity fusion stays a diffeomorphism.
    """
    from .fusion import atlas_from_linear

    c1, c2 = (np.asarray(c, dtype=float) for c in centers)
    s = float(strength)
    return atlas_from_linear([[[1.0, s], [0.0, 1.0]],
                              [[1.0, -s], [0.0, 1.0]]],
                             [c1, c2], [sigma, sigma], steps)
