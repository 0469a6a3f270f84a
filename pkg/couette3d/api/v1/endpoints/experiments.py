from pathlib import Path

from fastapi import APIRouter
from fastapi.concurrency import run_in_threadpool
from fastapi.responses import FileResponse

from couette3d.core import ArtifactNotFoundError, get_logger, get_settings
from couette3d.schemas.experiment import ArtifactInfo, ExperimentConfig, RunResponse
from couette3d.services.experiment_runner import ExperimentRunner

router = APIRouter(tags=["experiments"])
logger = get_logger(__name__)

MEDIA_TYPES = {
    ".csv": "text/csv",
    ".json": "application/json",
    ".gp": "text/plain",
    ".bin": "application/octet-stream",
}


def _output_root(config: ExperimentConfig | None = None) -> Path:
    if config is not None and config.output_dir:
        return Path(config.output_dir)
    return Path(get_settings().output_dir)


@router.post("/run", response_model=RunResponse, summary="Run an experiment")
async def run_experiment(config: ExperimentConfig):
    """
    Run one experiment synchronously and return its artifacts.

    **Request Body:** an experiment configuration; grid keys `Nx`, `Ny`, `Nz`,
    `Ly` sit at top level next to the physical parameters.

    **Response:**
    Returns the run id, the parameter hash, the regime flag, the fitted
    constants and one download URL per artifact.

    **Run id format:** `{kind}_{hash12}_{NNN}`
    """
    logger.info(f"Running {config.kind} experiment over HTTP")
    result = await run_in_threadpool(ExperimentRunner(_output_root(config)).run, config)

    artifacts = [
        ArtifactInfo(
            filename=path.name,
            file_url=f"/api/v1/experiments/download/{result.run_id}/{path.name}",
            file_size=path.stat().st_size,
        )
        for path in result.artifacts
    ]
    logger.info(f"Run {result.run_id} produced {len(artifacts)} artifacts")
    return RunResponse(
        run_id=result.run_id,
        kind=config.kind,
        parameter_hash=result.manifest["parameter_hash"],
        regime=result.manifest["regime"],
        artifacts=artifacts,
        fits=result.manifest["fits"],
    )


@router.get("/download/{run_id}/{filename}", summary="Download a run artifact")
async def download_artifact(run_id: str, filename: str):
    """
    Download a CSV, manifest, plot script or checkpoint of a finished run.

    **Path Parameters:**
    - `run_id`: run directory name returned by `/run`
    - `filename`: artifact name from the run's artifact list

    **Errors:**
    - 400: path traversal or malformed names
    - 404: unknown run or artifact
    """
    root = _output_root()
    file_path = root / run_id / filename
    if not file_path.is_file():
        raise ArtifactNotFoundError(f"{run_id}/{filename}")

    logger.info(f"Serving artifact {run_id}/{filename}")
    return FileResponse(
        path=str(file_path),
        filename=filename,
        media_type=MEDIA_TYPES.get(file_path.suffix, "application/octet-stream"),
    )
