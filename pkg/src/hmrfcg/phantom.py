"""Synthetic piecewise-constant phantoms with known ground truth.

Randomness comes from ``numpy.random.Generator(PCG64(seed))``; Gaussian
samples use numpy's ziggurat ``standard_normal``.  The same seed therefore
gives the same image on any platform running the same numpy major version.

Generated intensities are rounded to whole gray levels, so an image survives
a round trip through the 8-bit file formats unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy import ndimage

from .grid import LatticeShape
from .model import ImageVolume, Labeling

__all__ = ["PhantomSpec", "generate", "label_geometry", "inhomogeneity_field"]

Geometry = Literal["bands", "disks", "blobs"]


@dataclass(frozen=True)
class PhantomSpec:
    """Phantom parameters.

    ``inhomogeneity`` is the peak relative amplitude of the multiplicative
    shading (0.2 means intensities vary by up to +/-20%).  ``noise`` is the
    standard deviation of the additive Gaussian noise in gray levels.
    """

    shape: LatticeShape
    intensities: Sequence[float]
    geometry: Geometry = "bands"
    noise: float = 0.0
    inhomogeneity: float = 0.0
    seed: int = 0

    def __post_init__(self):
        values = tuple(float(v) for v in self.intensities)
        object.__setattr__(self, "intensities", values)
        if not values:
            raise ValueError("at least one class intensity is required")
        if any(not 0.0 <= v <= 255.0 for v in values):
            raise ValueError(f"class intensities must lie in [0, 255], got {values}")
        if len(set(values)) != len(values):
            raise ValueError("class intensities must be pairwise distinct")
        if self.geometry not in ("bands", "disks", "blobs"):
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if self.noise < 0 or self.inhomogeneity < 0:
            raise ValueError("noise and inhomogeneity must be >= 0")

    @property
    def num_classes(self) -> int:
        return len(self.intensities)


def _bands(dims, k, rng):
    cols = np.arange(dims[-1])
    band = np.minimum(cols * k // dims[-1], k - 1) + 1
    return np.broadcast_to(band, dims).copy()


def _disks(dims, k, rng):
    grids = np.meshgrid(*[np.arange(n) - (n - 1) / 2 for n in dims], indexing="ij")
    r = np.sqrt(sum(g * g for g in grids))
    rmax = r.max() if r.max() > 0 else 1.0
    return np.minimum((r / rmax * k).astype(int), k - 1) + 1


def _blobs(dims, k, rng):
    noise = rng.standard_normal(dims)
    field = ndimage.gaussian_filter(noise, sigma=[max(n / 12.0, 1.0) for n in dims], mode="wrap")
    # quantile cuts give every class a similar share of sites
    edges = np.quantile(field, np.linspace(0, 1, k + 1)[1:-1])
    return np.searchsorted(edges, field, side="right") + 1


def label_geometry(spec: PhantomSpec, rng=None) -> np.ndarray:
    """Ground-truth class indices (1-based) shaped like the lattice."""
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    maker = {"bands": _bands, "disks": _disks, "blobs": _blobs}[spec.geometry]
    return maker(spec.shape.dims, spec.num_classes, rng).astype(np.int64)


def inhomogeneity_field(dims: Sequence[int], amplitude: float) -> np.ndarray:
    """Separable multilinear ramp from -amplitude at the origin corner to +amplitude opposite."""
    ramps = [np.linspace(0.0, 1.0, n) if n > 1 else np.full(1, 0.5) for n in dims]
    prod = np.ones(tuple(dims))
    for axis, ramp in enumerate(ramps):
        shape = [1] * len(dims)
        shape[axis] = -1
        prod = prod * ramp.reshape(shape)
    return amplitude * (2.0 * prod - 1.0)


def generate(spec: PhantomSpec) -> tuple[ImageVolume, Labeling]:
    """Build the phantom image and its ground-truth labeling."""
    rng = np.random.default_rng(spec.seed)
    labels = label_geometry(spec, rng)
    clean = np.asarray(spec.intensities)[labels - 1]
    if spec.inhomogeneity > 0:
        clean = clean * (1.0 + inhomogeneity_field(spec.shape.dims, spec.inhomogeneity))
    noisy = clean + spec.noise * rng.standard_normal(spec.shape.dims) if spec.noise > 0 else clean
    image = np.clip(np.rint(noisy), 0, 255)
    return (
        ImageVolume(spec.shape, image),
        Labeling(spec.shape, labels, spec.num_classes),
    )
