"""FastAPI application exposing the package's workflows.

Path-based requests (synth, fit, eval) operate on the server's filesystem;
inline scanpath payloads are accepted where a remote client would reasonably
stream data (extract, predict). Domain validation errors map to 400,
missing files to 404.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, pipeline
from ..core import GazeZone, canonical_zone_order
from .schemas import (
    EvalCvRequest,
    EvalModelRequest,
    EvalResponse,
    ExtractRequest,
    ExtractResponse,
    FitRequest,
    FitResponse,
    GazeQualityRequest,
    GazeQualityResponse,
    HealthResponse,
    PredictRequest,
    PredictResponse,
    SynthRequest,
    SynthResponse,
    ZonesResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(
        title="gazedyn",
        version=__version__,
        description=(
            "Gaze-zone scanpath descriptors, maneuver behavior models, and "
            "the sliding-window lane-change prediction protocol."
        ),
    )

    @app.exception_handler(FileNotFoundError)
    async def _missing_file(request: Request, exc: FileNotFoundError) -> JSONResponse:
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(ValueError)
    async def _bad_value(request: Request, exc: ValueError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(OSError)
    async def _os_error(request: Request, exc: OSError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.get("/zones", response_model=ZonesResponse)
    def zones() -> ZonesResponse:
        return ZonesResponse(
            zones=[z.value for z in canonical_zone_order()],
            unknown=GazeZone.UNKNOWN.value,
        )

    @app.post("/synth", response_model=SynthResponse)
    def synth(req: SynthRequest) -> SynthResponse:
        summary = pipeline.run_synth(
            out_dir=req.out_dir,
            seed=req.seed,
            drivers=req.drivers,
            fps=req.fps,
            noise=req.noise,
            templates_path=req.templates_path,
            counts=req.counts,
        )
        return SynthResponse(**summary)

    @app.post("/features/extract", response_model=ExtractResponse)
    def extract(req: ExtractRequest) -> ExtractResponse:
        summary = pipeline.run_extract(
            out_path=req.out_path,
            scanpath_path=req.scanpath_path,
            scanpath=req.scanpath.to_scanpath() if req.scanpath else None,
            config=req.features.to_config(),
            stride_frames=req.stride_frames,
        )
        return ExtractResponse(**summary)

    @app.post("/fit", response_model=FitResponse)
    def fit(req: FitRequest) -> FitResponse:
        summary = pipeline.run_fit(
            manifest=req.manifest,
            config=req.features.to_config(),
            out_path=req.out_path,
            lc_source=req.lc_source,
            lk_source=req.lk_source,
        )
        return FitResponse(**summary)

    @app.post("/predict", response_model=PredictResponse)
    def predict(req: PredictRequest) -> PredictResponse:
        summary = pipeline.run_predict(
            model_path=req.model_path,
            scanpath_path=req.scanpath_path,
            scanpath=req.scanpath.to_scanpath() if req.scanpath else None,
            stride_frames=req.stride_frames,
            out_path=req.out_path,
        )
        return PredictResponse(**summary)

    @app.post("/eval/cv", response_model=EvalResponse)
    def eval_cv(req: EvalCvRequest) -> EvalResponse:
        summary = pipeline.run_eval_cv(
            manifest=req.manifest,
            config=req.features.to_config(),
            out_dir=req.out_dir,
            lc_source=req.lc_source,
            lk_source=req.lk_source,
            sweep_seconds=req.sweep_seconds,
            max_workers=req.max_workers,
        )
        return EvalResponse(**summary)

    @app.post("/eval/model", response_model=EvalResponse)
    def eval_model(req: EvalModelRequest) -> EvalResponse:
        summary = pipeline.run_eval_model(
            manifest=req.manifest,
            model_path=req.model_path,
            out_dir=req.out_dir,
            sweep_seconds=req.sweep_seconds,
            max_workers=req.max_workers,
        )
        return EvalResponse(**summary)

    @app.post("/eval/gaze-quality", response_model=GazeQualityResponse)
    def eval_gaze_quality(req: GazeQualityRequest) -> GazeQualityResponse:
        summary = pipeline.run_eval_quality(
            manifest=req.manifest,
            out_dir=req.out_dir,
            window_seconds=req.window_seconds,
            stride_seconds=req.stride_seconds,
        )
        return GazeQualityResponse(**summary)

    return app
