"""
FastAPI surface for sampling, preset verification and probes
"""
import logging
from typing import Any, Dict, Optional

from fastapi import FastAPI
from fastapi.responses import JSONResponse, PlainTextResponse

from .config import settings
from .core.ensembles import EnsembleSpec, sample_weights
from .core.file_handler import weights_frame
from .core.log_manager import EXPORT_FORMATS, log_manager, setup_log_capture
from .core.presets import PRESETS, UnknownPresetError, run_preset
from .core.probes import run_probe
from .core.random_streams import MATRIX, RngState
from .models import (
    ErrorResponse,
    ProbeRequest,
    SampleRequest,
    SampleResponse,
    VerifyRequest,
    WeightEntry,
)

logging.basicConfig(level=settings.log_level, format=settings.log_format)
logger = logging.getLogger(__name__)

setup_log_capture()

app = FastAPI(
    title=settings.api_title,
    description=settings.api_description,
    version=settings.api_version,
)


def error_response(status_code: int, error: str, details: Optional[str] = None) -> JSONResponse:
    """ErrorResponse body for failed operations"""
    return JSONResponse(status_code=status_code,
                        content=ErrorResponse(error=error, details=details).model_dump())


@app.get("/")
async def root():
    """Health check endpoint"""
    return {"message": f"{settings.api_title} is running", "version": settings.api_version}


@app.post("/sample", response_model=SampleResponse)
def sample(request: SampleRequest):
    """Squared moduli of one sampled matrix, as (i, j, w) entries with 1-based indices"""
    try:
        spec = EnsembleSpec(request.ensemble, request.n)
        weights = sample_weights(spec, RngState(request.seed).fixed(MATRIX), check_unitary=True)
        entries = [WeightEntry(i=int(i), j=int(j), w=float(w))
                   for i, j, w in weights_frame(weights).itertuples(index=False)]
        log_manager.add_detailed_log("sample", {"ensemble": request.ensemble.value, "n": request.n,
                                                "seed": request.seed})
        return SampleResponse(success=True, ensemble=request.ensemble, n=request.n, entries=entries)
    except ValueError as e:
        return error_response(422, "invalid sample request", str(e))
    except Exception as e:
        logger.error(f"Sampling failed: {str(e)}")
        return error_response(500, "sampling failed", str(e))


@app.get("/presets")
async def presets() -> Dict[str, Dict[str, Any]]:
    """Preset names and the configuration fields they fix"""
    return {name: {key: getattr(value, "value", value) for key, value in fields.items()}
            for name, fields in PRESETS.items()}


@app.post("/verify")
def verify(request: VerifyRequest):
    """Run a preset; the report is returned whether it passes or not"""
    try:
        report = run_preset(request.preset, request.overrides.experiment_overrides(),
                            request.overrides.threads)
        log_manager.record_report(request.preset, report)
        return report.model_dump(mode="json")
    except UnknownPresetError as e:
        return error_response(404, "unknown preset", str(e))
    except ValueError as e:
        return error_response(422, "invalid configuration", str(e))
    except Exception as e:
        logger.error(f"Verification of {request.preset} failed: {str(e)}")
        return error_response(500, "verification failed", str(e))


@app.post("/probe")
def probe(request: ProbeRequest):
    """Run a moment or conjecture probe over the requested sizes"""
    try:
        report = run_probe(request.probe, request.n, request.seed, request.ensemble,
                           request.replicates, request.s, request.t)
        log_manager.record_report(request.probe, report)
        return report.model_dump(mode="json")
    except ValueError as e:
        return error_response(422, "invalid probe request", str(e))
    except Exception as e:
        logger.error(f"Probe {request.probe} failed: {str(e)}")
        return error_response(500, "probe failed", str(e))


@app.get("/logs/summary")
async def logs_summary():
    return log_manager.get_log_summary()


@app.get("/logs/export/{fmt}", response_class=PlainTextResponse)
async def export_logs(fmt: str):
    if fmt not in EXPORT_FORMATS:
        return error_response(404, "unknown log format", f"choose from {', '.join(EXPORT_FORMATS)}")
    return PlainTextResponse(log_manager.export(fmt))


@app.delete("/logs")
async def clear_logs():
    log_manager.clear_logs()
    return {"success": True}


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host=settings.host, port=settings.port)
