import sys
import time

from brotli_asgi import BrotliMiddleware
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from couette3d import __version__
from couette3d.api.v1.router import api_router
from couette3d.core import AppException, get_logger, get_settings, setup_logging
from couette3d.core.middleware import ValidationMiddleware

# Setup logging
settings = get_settings()
setup_logging(log_level=settings.log_level, log_file=settings.log_file, stream=sys.stdout)
logger = get_logger(__name__)

app = FastAPI(
    title="Couette3D Experiment Service",
    description="""
API for running plane Couette flow perturbation experiments and fetching their artifacts.

## Endpoints

### Experiments
- **POST /api/v1/experiments/run** - Run an experiment (linear, streak, sim3d, toy, multiplier-table, coord)
- **GET /api/v1/experiments/download/{run_id}/{filename}** - Download a run artifact

### Health
- **GET /health** - Health check endpoint

## Features
- Shear-frame pseudospectral solvers
- Reproducible run directories with manifests and parameter hashes
- Gnuplot scripts rendered with Jinja2
- Brotli compression
- Structured logging
- Request validation
""",
    version=__version__,
    docs_url="/docs",
    redoc_url="/redoc",
    license_info={
        "name": "MIT",
    },
    openapi_tags=[
        {
            "name": "experiments",
            "description": "Experiment runs and artifact downloads"
        },
        {
            "name": "health",
            "description": "Health check and monitoring endpoints"
        }
    ]
)

# Track startup time
startup_time = time.time()


@app.exception_handler(AppException)
async def app_exception_handler(request: Request, exc: AppException):
    """Handle custom application exceptions."""
    logger.error(f"{exc.code}: {exc.message}")
    return JSONResponse(
        status_code=exc.status_code,
        content={
            "error": {
                "code": exc.code,
                "message": exc.message
            }
        }
    )


app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.cors_origins,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Request validation middleware
app.add_middleware(ValidationMiddleware)

# Brotli compression for CSV downloads
app.add_middleware(BrotliMiddleware, minimum_size=500, gzip_fallback=True)

app.include_router(api_router, prefix="/api/v1")


@app.get("/health", tags=["health"], summary="Health check")
async def health_check():
    """
    Check API health status.

    Returns the current status, version, and uptime of the service.
    """
    uptime = time.time() - startup_time
    return {
        "status": "healthy",
        "version": __version__,
        "uptime_seconds": round(uptime, 2)
    }
