"""HTTP/JSON service for the interactive superpixel labeling loop.

Uploading an image creates a session: superpixels are computed immediately
(so overlays can render), while the similarity graph and the sampling
distribution build in a background thread whose progress is pollable.
Labels accumulate per superpixel (latest wins), and reconstruction runs the
constrained decoders on exactly the accumulated labels, so identical labels
and seed give a byte-identical mask. Sessions live in process memory only.
"""

from __future__ import annotations

import base64
import binascii
import io
import threading
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from PIL import Image
from pydantic import BaseModel

from .groups import assemble_sample_operators
from .imaging import mask_png_bytes
from .pipeline import SegmentationSetup, build_segmentation_setup
from .reconstruct import (
    SmoothnessFilter,
    constrained_fast_decode,
    constrained_full_decode,
    fast_decode,
    full_decode,
)
from .sampling import SamplingDistribution, draw_groups
from .groups import SampleDraw

MAX_IMAGE_BYTES = 16 * 2**20
MIN_PIXELS = 16  # below this no 9-neighbour graph exists


class CreateSession(BaseModel):
    image_b64: str
    n_superpixels: int = 60
    k0: int = 10
    order: int = 50
    seed: int = 0
    distribution: str = "frobenius"  # or "spectral", costlier


class ProposalRequest(BaseModel):
    s: int
    seed: int = 0


class LabelRequest(BaseModel):
    labels: dict[str, int]


class ReconstructRequest(BaseModel):
    decoder: str = "fast"  # or "full"
    constrained: bool = True
    gamma: float | None = None
    init: str | None = None  # "fast" warm-starts the full decoder
    seed: int = 0


@dataclass
class Session:
    id: str
    image: np.ndarray
    params: CreateSession
    state: str = "building"
    error: str = ""
    setup: SegmentationSetup | None = None
    spmap: object = None
    labels: dict[int, int] = field(default_factory=dict)
    proposal_history: list = field(default_factory=list)
    latest_mask: bytes | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


def _decode_image(payload: str) -> np.ndarray:
    try:
        raw = base64.b64decode(payload, validate=True)
    except (binascii.Error, ValueError):
        raise HTTPException(status_code=422, detail="image_b64 is not valid base64")
    if len(raw) > MAX_IMAGE_BYTES:
        raise HTTPException(status_code=413, detail="image exceeds 16 MB")
    try:
        with Image.open(io.BytesIO(raw)) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    except Exception:
        raise HTTPException(status_code=422, detail="payload is not a decodable image")
    return arr


def create_app() -> FastAPI:
    app = FastAPI(title="groupsamp session service", version="1")
    sessions: dict[str, Session] = {}

    def get_session(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session

    def require_ready(session: Session) -> SegmentationSetup:
        if session.state == "failed":
            raise HTTPException(status_code=500, detail=f"session build failed: {session.error}")
        if session.state != "ready" or session.setup is None:
            raise HTTPException(status_code=409, detail="session still building; poll status")
        return session.setup

    def build_in_background(session: Session, spmap):
        try:
            p = session.params
            setup = build_segmentation_setup(
                session.image,
                n_superpixels=p.n_superpixels,
                k0=p.k0,
                order=p.order,
                seed=p.seed,
                spmap=spmap,
                include_spectral=p.distribution == "spectral",
            )
            session.setup = setup
            session.state = "ready"
        except Exception as exc:  # surfaced through the status endpoint
            session.error = str(exc)
            session.state = "failed"

    @app.post("/v1/sessions")
    def create_session(body: CreateSession):
        image = _decode_image(body.image_b64)
        h, w = image.shape[:2]
        if h * w < MIN_PIXELS:
            raise HTTPException(
                status_code=422,
                detail=f"image of {h}x{w} pixels is too small for the similarity graph",
            )
        if body.n_superpixels < 1 or body.n_superpixels > h * w:
            raise HTTPException(status_code=422, detail="n_superpixels outside [1, pixels]")
        if body.distribution not in ("frobenius", "spectral"):
            raise HTTPException(status_code=422, detail="distribution must be frobenius or spectral")
        from .imaging import slic_superpixels

        spmap = slic_superpixels(image, body.n_superpixels)
        session = Session(id=uuid.uuid4().hex, image=image, params=body)
        session.spmap = spmap
        sessions[session.id] = session
        threading.Thread(target=build_in_background, args=(session, spmap), daemon=True).start()
        return {
            "session_id": session.id,
            "n_groups": spmap.N,
            "width": w,
            "height": h,
        }

    @app.get("/v1/sessions/{session_id}/status")
    def status(session_id: str):
        session = get_session(session_id)
        return {"state": session.state, "detail": session.error}

    @app.get("/v1/sessions/{session_id}/overlay")
    def overlay(session_id: str):
        session = get_session(session_id)
        setup = require_ready(session)
        dist = setup.distributions[session.params.distribution]
        spmap = session.spmap
        boundaries = [spmap.boundary_pixels(g).tolist() for g in range(spmap.N)]
        return {
            "boundaries": boundaries,
            "distribution": dist.probs.tolist(),
            "coherence_k": setup.k0,
        }

    @app.get("/v1/sessions/{session_id}/labelmap")
    def labelmap(session_id: str):
        session = get_session(session_id)
        spmap = session.spmap
        data = spmap.labels.astype("<u2").tobytes()
        return {
            "width": int(spmap.shape[1]),
            "height": int(spmap.shape[0]),
            "n_groups": spmap.N,
            "labels_b64": base64.b64encode(data).decode(),
        }

    @app.post("/v1/sessions/{session_id}/proposals")
    def proposals(session_id: str, body: ProposalRequest):
        session = get_session(session_id)
        setup = require_ready(session)
        if body.s < 1:
            raise HTTPException(status_code=422, detail="s must be >= 1")
        dist = setup.distributions[session.params.distribution]
        draw = draw_groups(dist, body.s, body.seed, setup.part)
        order = []
        multiplicity: dict[int, int] = {}
        for g in draw.omega.tolist():
            if g not in multiplicity:
                order.append(g)
                multiplicity[g] = 0
            multiplicity[g] += 1
        proposal = [{"group_id": g, "multiplicity": multiplicity[g]} for g in order]
        with session.lock:
            session.proposal_history.append({"s": body.s, "seed": body.seed})
        return {"proposals": proposal, "s": body.s}

    @app.post("/v1/sessions/{session_id}/labels")
    def put_labels(session_id: str, body: LabelRequest):
        session = get_session(session_id)
        n_groups = session.spmap.N
        parsed: dict[int, int] = {}
        for key, value in body.labels.items():
            try:
                group = int(key)
            except ValueError:
                raise HTTPException(status_code=422, detail=f"group id {key!r} is not an integer")
            if not 0 <= group < n_groups:
                raise HTTPException(status_code=422, detail=f"unknown group id {group}")
            if value not in (0, 1):
                raise HTTPException(status_code=422, detail="labels must be 0 or 1")
            parsed[group] = value
        with session.lock:
            session.labels.update(parsed)
        return {"accepted": len(parsed)}

    @app.post("/v1/sessions/{session_id}/reconstruct")
    def reconstruct(session_id: str, body: ReconstructRequest):
        session = get_session(session_id)
        setup = require_ready(session)
        if body.decoder not in ("fast", "full"):
            raise HTTPException(status_code=422, detail="decoder must be fast or full")
        with session.lock:
            labels = dict(sorted(session.labels.items()))
        if not labels:
            raise HTTPException(status_code=409, detail="no labels to reconstruct from")
        part = setup.part
        group_ids = np.array(list(labels.keys()), dtype=int)
        group_values = np.array(list(labels.values()), dtype=float)
        fast_estimate = None
        if body.decoder == "fast" or body.init == "fast":
            y_tilde = group_values * np.sqrt(part.sizes[group_ids])
            if body.constrained or body.gamma is None:
                fast_result = constrained_fast_decode(
                    setup.reduced, group_ids, y_tilde, part, seed=body.seed
                )
            else:
                dist = setup.distributions[session.params.distribution]
                draw = SampleDraw(omega=group_ids, probs=dist.probs,
                                  m=int(part.sizes[group_ids].sum()))
                ops = assemble_sample_operators(part, dist.probs, draw)
                fast_result = fast_decode(setup.reduced, ops, y_tilde, body.gamma)
            result = fast_result
            fast_estimate = fast_result.estimate
        if body.decoder == "full":
            node_idx = np.concatenate([part.groups[g] for g in group_ids])
            node_vals = np.repeat(group_values, part.sizes[group_ids])
            if body.constrained or body.gamma is None:
                result = constrained_full_decode(
                    setup.lap, SmoothnessFilter.identity(), node_idx, node_vals,
                    x0=fast_estimate, seed=body.seed,
                )
            else:
                dist = setup.distributions[session.params.distribution]
                draw = SampleDraw(omega=group_ids, probs=dist.probs,
                                  m=int(part.sizes[group_ids].sum()))
                ops = assemble_sample_operators(part, dist.probs, draw)
                result = full_decode(setup.lap, SmoothnessFilter.identity(), ops,
                                     node_vals, body.gamma, x0=fast_estimate)
        mask = (result.estimate > 0.5).reshape(session.spmap.shape)
        png = mask_png_bytes(mask)
        with session.lock:
            session.latest_mask = png
        return {
            "mask_png_b64": base64.b64encode(png).decode(),
            "timing_ms": result.wall_ms,
            "iterations": result.iterations,
            "residual": result.residual,
        }

    @app.exception_handler(ValueError)
    def value_error_handler(_, exc):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    return app


app = create_app()
