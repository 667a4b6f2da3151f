"""Rasterize density and ratio grids to binary PPM images."""

from dataclasses import dataclass

import numpy as np

# blue -> white -> red, anchored at 0, 0.5, 1
_DIVERGING = np.array([[33, 102, 172], [247, 247, 247], [178, 24, 43]], dtype=float)


@dataclass
class RasterImage:
    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3) uint8, row 0 at the top

    def tobytes(self):
        return np.ascontiguousarray(self.pixels, dtype=np.uint8).tobytes()


def _scale(v, scale):
    if scale == "linear":
        return v
    if scale == "log1p":
        return np.log1p(np.maximum(v, 0.0))
    raise ValueError(f"unknown scale {scale!r}")


def render_heatmap(grid, colormap="grayscale", scale="linear", clip=None, center=1.0):
    """Map a 2-D grid (``values[iy, ix]``, iy northward) to an RGB image.

    ``grayscale`` runs black (low) to white (high) over the clipped range.
    ``diverging`` puts ``center`` (default 1, parity for ratio grids) at the
    neutral white, stretching each side independently so the center is exact.
    Rows are flipped so north is at the top of the image.
    """
    values = np.asarray(getattr(grid, "values", grid), dtype=float)
    if values.ndim != 2 or values.size == 0:
        raise ValueError("grid must be a nonempty 2-D array")
    if clip is not None:
        lo, hi = clip
        if lo >= hi:
            raise ValueError("clip lo must be below hi")
        values = np.clip(values, lo, hi)
    v = _scale(values, scale)
    lo, hi = float(v.min()), float(v.max())

    if colormap == "grayscale":
        t = (v - lo) / (hi - lo) if hi > lo else np.full(v.shape, 0.5)
        rgb = np.repeat((t * 255.0)[..., None], 3, axis=2)
    elif colormap == "diverging":
        c = float(_scale(np.asarray(center, dtype=float), scale))
        below = c - lo
        above = hi - c
        t = np.full(v.shape, 0.5)
        neg = v < c
        pos = v > c
        if below > 0:
            t[neg] = 0.5 - 0.5 * (c - v[neg]) / below
        if above > 0:
            t[pos] = 0.5 + 0.5 * (v[pos] - c) / above
        t = np.clip(t, 0.0, 1.0)
        left = t < 0.5
        s = np.where(left, t / 0.5, (t - 0.5) / 0.5)[..., None]
        rgb = np.where(left[..., None],
                       _DIVERGING[0] + s * (_DIVERGING[1] - _DIVERGING[0]),
                       _DIVERGING[1] + s * (_DIVERGING[2] - _DIVERGING[1]))
    else:
        raise ValueError(f"unknown colormap {colormap!r}")

    pixels = np.rint(rgb[::-1]).astype(np.uint8)
    h, w = values.shape
    return RasterImage(w, h, pixels)


def ppm_bytes(img):
    header = f"P6 {img.width} {img.height} 255\n".encode("ascii")
    return header + img.tobytes()


def write_image(img, path):
    """Write ``img`` as binary PPM: ``P6 <w> <h> 255\\n`` then raw RGB rows."""
    if img.pixels.shape != (img.height, img.width, 3):
        raise ValueError("pixel array does not match width/height")
    with open(path, "wb") as fh:
        fh.write(ppm_bytes(img))


def image_name(run_id, label, kind):
    return f"{run_id}_{label}_{kind}.ppm"
