"""Local HTTP service backing the flavor-profile tuner UI.

Endpoints: list raw views, fetch raw PNGs, preview a profile against a view
(flavored PNG + 64-bin histogram of masked pixels), and list/save profiles.
Static UI assets are served at the root.  The service is loopback-oriented:
one local operator, profile saves serialized behind a lock.
"""

from __future__ import annotations

import base64
import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .errors import TexriskError
from .imaging.flavor import flavorize
from .imaging.mask import compute_breast_mask
from .imaging.types import (
    PROFILE_HARD_BOUNDS,
    TONE_MAP_MODES,
    FlavorProfile,
    load_profiles,
    save_profile,
)
from .viewstore import ViewStore, encode_png

HISTOGRAM_BINS = 64


def _bound(name: str) -> dict:
    lo, hi = PROFILE_HARD_BOUNDS[name]
    return {"ge": lo, "le": hi}


class ProfilePayload(BaseModel):
    """FlavorProfile fields with the hard validation bounds."""

    profile_id: str = Field(min_length=1, max_length=64)
    alpha: float = Field(**_bound("alpha"))
    beta: float = Field(**_bound("beta"))
    gamma: float = Field(**_bound("gamma"))
    delta: float = Field(**_bound("delta"))
    tone_map_mode: str = Field(default="monotone_log_square_ratio")
    lowpass_sigma_px: float = Field(default=8.0, **_bound("lowpass_sigma_px"))
    edge_band_mm: float = Field(default=12.0, **_bound("edge_band_mm"))
    interior_threshold_mm: float = Field(default=20.0,
                                         **_bound("interior_threshold_mm"))

    def to_profile(self) -> FlavorProfile:
        if self.tone_map_mode not in TONE_MAP_MODES:
            raise HTTPException(
                status_code=422,
                detail=[{"loc": ["body", "tone_map_mode"],
                         "msg": f"must be one of {TONE_MAP_MODES}"}])
        fields = {name: getattr(self, name) for name in ProfilePayload.model_fields}
        return FlavorProfile(**fields)


class PreviewRequest(ProfilePayload):
    view_id: str
    # step toggles for bypass/fixture paths; production previews keep all on
    apply_tone_map: bool = True
    apply_edge_correction: bool = True
    apply_enhancement: bool = True


def create_app(views_dir: str | Path, profiles_dir: str | Path) -> FastAPI:
    store = ViewStore(views_dir)
    profiles_dir = Path(profiles_dir)
    profiles_dir.mkdir(parents=True, exist_ok=True)
    save_lock = threading.Lock()
    app = FastAPI(title="texrisk flavor tuner")

    def _load_raw_view(view_id: str):
        try:
            view = store.load(view_id)
        except KeyError:
            raise HTTPException(status_code=404,
                                detail=f"view {view_id!r} not found")
        if view.fmt.kind != "raw":
            raise HTTPException(status_code=404,
                                detail=f"view {view_id!r} is not raw")
        return view

    @app.get("/api/views")
    def list_views() -> list[str]:
        ids = []
        for view_id in store.list_ids():
            try:
                if store.load(view_id).fmt.kind == "raw":
                    ids.append(view_id)
            except Exception:
                continue
        return ids

    @app.get("/api/views/{view_id}/raw")
    def raw_png(view_id: str):
        _load_raw_view(view_id)
        return Response(content=store.raw_png_bytes(view_id),
                        media_type="image/png")

    @app.post("/api/preview")
    def preview(request: PreviewRequest) -> dict:
        view = _load_raw_view(request.view_id)
        profile = request.to_profile()
        try:
            flavored = flavorize(
                view, profile,
                skip_tone_map=not request.apply_tone_map,
                skip_edge_correction=not request.apply_edge_correction,
                skip_enhancement=not request.apply_enhancement)
            mask = compute_breast_mask(view)
        except TexriskError as exc:
            raise HTTPException(status_code=422,
                                detail=[{"loc": ["body"], "msg": str(exc)}])
        masked = flavored.pixels[mask.mask]
        histogram, _ = np.histogram(masked, bins=HISTOGRAM_BINS,
                                    range=(0, flavored.i_max + 1))
        return {
            "view_id": request.view_id,
            "width": flavored.width_px,
            "height": flavored.height_px,
            "i_max": flavored.i_max,
            "png_b64": base64.b64encode(encode_png(flavored.pixels)).decode(),
            "histogram": histogram.tolist(),
        }

    @app.get("/api/profiles")
    def list_profiles_endpoint() -> list[dict]:
        return [p.to_dict() for p in load_profiles(profiles_dir).values()]

    @app.post("/api/profiles")
    def save_profile_endpoint(payload: ProfilePayload) -> dict:
        profile = payload.to_profile()
        with save_lock:
            path = save_profile(profile, profiles_dir)
        return {"saved": profile.profile_id, "path": str(path)}

    ui_dir = Path(__file__).resolve().parent.parent.parent / "frontend" / "dist"
    if ui_dir.is_dir():
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    else:
        @app.get("/")
        def index_placeholder():
            return Response(
                content="<html><body><h3>texrisk tuner</h3>"
                        "<p>UI assets not built; the JSON API is live under "
                        "/api.</p></body></html>",
                media_type="text/html")

    return app
