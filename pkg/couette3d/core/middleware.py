"""Custom middleware for request validation."""

import re

from fastapi import Request
from fastapi.responses import JSONResponse
from starlette.middleware.base import BaseHTTPMiddleware

from couette3d.core.logging import get_logger

logger = get_logger(__name__)

DOWNLOAD_PREFIX = "/api/v1/experiments/download/"


class ValidationMiddleware(BaseHTTPMiddleware):
    """Middleware for validating requests."""

    # Run ids and artifact names: alphanumeric, underscores, hyphens, dots
    ALLOWED_SEGMENT_PATTERN = re.compile(r'^[\w\-.]+$')

    # Blocked patterns for path traversal
    BLOCKED_PATTERNS = ['..', '\\', '~', '%2e', '%2f', '%5c']

    async def dispatch(self, request: Request, call_next):
        """Validate request before processing."""
        logger.info(f"{request.method} {request.url.path}")

        if request.url.path.startswith(DOWNLOAD_PREFIX):
            # Path params are not resolved yet; check the raw remainder instead
            remainder = request.url.path[len(DOWNLOAD_PREFIX):]
            if not self._is_valid_artifact_path(remainder):
                logger.warning(f"Invalid artifact path detected: {remainder}")
                return JSONResponse(
                    status_code=400,
                    content={"error": {"code": "INVALID_FILENAME", "message": "Invalid artifact path"}}
                )

        return await call_next(request)

    def _is_valid_artifact_path(self, remainder: str) -> bool:
        """Exactly ``<run_id>/<filename>`` with safe segments."""
        lowered = remainder.lower()
        for pattern in self.BLOCKED_PATTERNS:
            if pattern in lowered:
                return False

        segments = remainder.split("/")
        if len(segments) != 2:
            return False
        return all(segment and self.ALLOWED_SEGMENT_PATTERN.match(segment) for segment in segments)
