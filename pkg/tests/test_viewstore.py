"""16-bit PNG view store round-trips."""

import numpy as np
import pytest

from texrisk.imaging.types import (
    Laterality,
    ViewFormat,
    ViewImage,
    ViewPosition,
)
from texrisk.viewstore import ViewStore, decode_png, encode_png


def test_png_roundtrip_is_lossless():
    rng = np.random.default_rng(0)
    pixels = rng.integers(0, 65536, size=(50, 40)).astype(np.uint16)
    assert (decode_png(encode_png(pixels)) == pixels).all()


def test_store_roundtrip_preserves_metadata(tmp_path):
    store = ViewStore(tmp_path, create=True)
    rng = np.random.default_rng(1)
    view = ViewImage(
        pixels=rng.integers(0, 4096, size=(30, 20)).astype(np.uint16),
        pixel_spacing_mm=0.255,
        laterality=Laterality.RIGHT,
        view_position=ViewPosition.MLO,
        fmt=ViewFormat("flavor", "flavor03"),
        i_max=4095,
        downscale_warning=True,
    )
    store.save("study1_RMLO", view)
    loaded = store.load("study1_RMLO")
    assert (loaded.pixels == view.pixels).all()
    assert loaded.pixel_spacing_mm == view.pixel_spacing_mm
    assert loaded.laterality is Laterality.RIGHT
    assert loaded.view_position is ViewPosition.MLO
    assert loaded.fmt == view.fmt
    assert loaded.i_max == 4095
    assert loaded.downscale_warning is True


def test_list_and_contains(tmp_path):
    store = ViewStore(tmp_path, create=True)
    view = ViewImage(pixels=np.zeros((4, 4), dtype=np.uint16) + 5,
                     pixel_spacing_mm=1.0, laterality=Laterality.LEFT,
                     view_position=ViewPosition.CC)
    for name in ("b", "a", "c"):
        store.save(name, view)
    assert store.list_ids() == ["a", "b", "c"]
    assert "a" in store and "zz" not in store


def test_missing_view_raises(tmp_path):
    store = ViewStore(tmp_path, create=True)
    with pytest.raises(KeyError):
        store.load("nope")


def test_missing_directory_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        ViewStore(tmp_path / "absent")
