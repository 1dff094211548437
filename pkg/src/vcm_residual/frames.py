"""Image file I/O (8-bit PGM/PNG; colour inputs reduced to BT.601 luma)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image as PILImage, UnidentifiedImageError

from .errors import UnreadableFile, VcmError
from .sift import Image

_SUPPORTED_MODES = {"L", "P", "RGB", "RGBA", "LA", "1"}


def load_image(path) -> Image:
    path = Path(path)
    try:
        with PILImage.open(path) as im:
            im.load()
            if im.mode not in _SUPPORTED_MODES:
                raise UnreadableFile(f"{path}: unsupported pixel mode {im.mode} (8-bit only)")
            # PIL's "L" conversion uses the ITU-R 601 luma weights
            gray = im if im.mode == "L" else im.convert("L")
            arr = np.asarray(gray, dtype=np.float64)
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        if isinstance(exc, VcmError):
            raise
        raise UnreadableFile(f"{path}: {exc}") from exc
    return Image(arr)


def save_image(path, image: Image) -> None:
    """Write an 8-bit frame; the container follows the file suffix (.pgm or .png)."""
    path = Path(path)
    arr = np.clip(np.rint(image.samples), 0, 255).astype(np.uint8)
    fmt = "PPM" if path.suffix.lower() in (".pgm", ".ppm") else "PNG"
    PILImage.fromarray(arr).save(path, format=fmt)
