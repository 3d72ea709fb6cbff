"""
GET /api/v1/plans/{preset} - generated fault plans.

Query params: p (active processes), k (failures), cores_per_node and spares
(worst_case_substitute), seed (random), first_iteration, spacing.
"""

from fastapi import APIRouter, Query

from src.api.schemas import InjectionOut, PlanOut
from src.harness.plans import build_preset
from src.harness.schemas import PlanPreset, PlanPresetName
from src.simcore.config import WorldConfig

router = APIRouter(prefix="/plans", tags=["plans"])


@router.get("/{preset}", response_model=PlanOut)
def get_plan(
    preset: PlanPresetName,
    p: int = Query(..., ge=1, le=4096, description="Active processes."),
    k: int = Query(..., ge=0, description="Failures to place."),
    cores_per_node: int = Query(1, ge=1),
    spares: int = Query(0, ge=0),
    seed: int = Query(0),
    first_iteration: int = Query(1, ge=0),
    spacing: int = Query(1, ge=0),
) -> PlanOut:
    world = WorldConfig(processes=p, spares=spares, cores_per_node=cores_per_node, seed=seed)
    plan = build_preset(PlanPreset(name=preset, k=k, first_iteration=first_iteration, spacing=spacing), world)
    return PlanOut(
        preset=preset.value,
        processes=p,
        k=k,
        injections=[InjectionOut(**inj.model_dump()) for inj in plan.injections],
    )
