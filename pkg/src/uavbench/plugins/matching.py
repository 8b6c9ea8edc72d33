"""Grayscale template matching via normalized cross-correlation.

The response map is computed with FFT cross-correlation plus integral-image
window statistics, masked to -1 wherever the window (or template) has no
texture. Everything runs in float64 and is bit-deterministic across calls.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import zoom as nd_zoom
from scipy.signal import fftconvolve

from ..errors import DatasetError, InvalidBoxError
from ..geometry import Box

# windows whose intensity deviation falls below this are treated as flat
VARIANCE_EPS = 1e-6


def load_gray(path) -> np.ndarray:
    """Load an image as a float64 grayscale array (H, W)."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError("image does not exist", path=path)
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("L"), dtype=np.float64)
    except DatasetError:
        raise
    except Exception as exc:
        raise DatasetError(f"unreadable image: {exc}", path=path) from exc
    return arr


def crop_template(image: np.ndarray, box: Box) -> np.ndarray:
    """Integer-grid crop of a box region, clipped to the image bounds."""
    box.validate()
    h, w = image.shape
    x0 = max(0, int(round(box.x)))
    y0 = max(0, int(round(box.y)))
    x1 = min(w, int(round(box.x + box.w)))
    y1 = min(h, int(round(box.y + box.h)))
    if x1 - x0 < 2 or y1 - y0 < 2:
        raise InvalidBoxError(
            f"box {box.as_tuple()} leaves a template smaller than 2x2 pixels")
    return image[y0:y1, x0:x1].copy()


def scale_template(template: np.ndarray, factor: float) -> np.ndarray:
    """Bilinear rescale of a template; factor 1.0 is the identity."""
    if factor == 1.0:
        return template
    return nd_zoom(template, factor, order=1)


def ncc_response(image: np.ndarray, template: np.ndarray) -> np.ndarray:
    """Valid-mode NCC response map in [-1, 1].

    ``resp[dy, dx]`` is the correlation of the template placed with its
    top-left corner at (dx, dy). Flat windows and flat templates give -1.
    """
    img = np.asarray(image, dtype=np.float64)
    tpl = np.asarray(template, dtype=np.float64)
    th, tw = tpl.shape
    ih, iw = img.shape
    if th > ih or tw > iw:
        raise InvalidBoxError("template larger than search image")
    n = th * tw
    tz = tpl - tpl.mean()
    tnorm = np.sqrt((tz * tz).sum())

    num = fftconvolve(img, tz[::-1, ::-1], mode="valid")
    ones = np.ones((th, tw))
    wsum = fftconvolve(img, ones, mode="valid")
    wsq = fftconvolve(img * img, ones, mode="valid")
    var = wsq - wsum * wsum / n
    np.clip(var, 0.0, None, out=var)
    denom = np.sqrt(var) * tnorm

    resp = np.full(num.shape, -1.0)
    ok = denom > VARIANCE_EPS
    resp[ok] = num[ok] / denom[ok]
    np.clip(resp, -1.0, 1.0, out=resp)
    return resp


def peak_position(resp: np.ndarray) -> tuple[int, int, float]:
    """(dx, dy, value) of the highest response; first occurrence wins ties."""
    idx = int(np.argmax(resp))
    dy, dx = divmod(idx, resp.shape[1])
    return dx, dy, float(resp[dy, dx])
