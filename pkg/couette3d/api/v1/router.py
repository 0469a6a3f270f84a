from fastapi import APIRouter
from couette3d.api.v1.endpoints import experiments

api_router = APIRouter()
api_router.include_router(experiments.router, prefix="/experiments", tags=["experiments"])
