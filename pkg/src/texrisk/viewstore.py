"""On-disk view store: 16-bit grayscale PNGs with JSON sidecar metadata."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .imaging.types import Laterality, ViewFormat, ViewImage, ViewPosition


def encode_png(pixels: np.ndarray) -> bytes:
    import io as _io

    buf = _io.BytesIO()
    Image.fromarray(np.asarray(pixels, dtype=np.uint16)).save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    import io as _io

    return np.asarray(Image.open(_io.BytesIO(data)), dtype=np.uint16)


class ViewStore:
    """A directory of views; each view is ``<id>.png`` plus ``<id>.json``."""

    def __init__(self, root: str | Path, create: bool = False):
        self.root = Path(root)
        if create:
            self.root.mkdir(parents=True, exist_ok=True)
        if not self.root.is_dir():
            raise FileNotFoundError(f"view store directory {self.root} does not exist")

    def _png(self, view_id: str) -> Path:
        return self.root / f"{view_id}.png"

    def _sidecar(self, view_id: str) -> Path:
        return self.root / f"{view_id}.json"

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.png"))

    def __contains__(self, view_id: str) -> bool:
        return self._png(view_id).exists()

    def save(self, view_id: str, view: ViewImage) -> None:
        self._png(view_id).write_bytes(encode_png(view.pixels))
        meta = {
            "pixel_spacing_mm": view.pixel_spacing_mm,
            "laterality": view.laterality.value,
            "view_position": view.view_position.value,
            "format": view.fmt.tag(),
            "i_max": view.i_max,
            "downscale_warning": view.downscale_warning,
            "flipped": view.flipped,
        }
        self._sidecar(view_id).write_text(json.dumps(meta, indent=2) + "\n")

    def load(self, view_id: str) -> ViewImage:
        png = self._png(view_id)
        if not png.exists():
            raise KeyError(f"view {view_id!r} not in store {self.root}")
        meta = json.loads(self._sidecar(view_id).read_text())
        return ViewImage(
            pixels=decode_png(png.read_bytes()),
            pixel_spacing_mm=meta["pixel_spacing_mm"],
            laterality=Laterality(meta["laterality"]),
            view_position=ViewPosition(meta["view_position"]),
            fmt=ViewFormat.from_tag(meta["format"]),
            i_max=meta.get("i_max", 4095),
            downscale_warning=meta.get("downscale_warning", False),
            flipped=meta.get("flipped", False),
        )

    def raw_png_bytes(self, view_id: str) -> bytes:
        png = self._png(view_id)
        if not png.exists():
            raise KeyError(f"view {view_id!r} not in store {self.root}")
        return png.read_bytes()
