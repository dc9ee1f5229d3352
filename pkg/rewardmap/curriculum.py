"""
Multi-Stage Curriculum
Question types are split into stages that run coarse-to-fine
(binary judgment -> counting -> planning); items are shuffled inside each stage
"""

import json
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Iterator, List, Mapping, Optional, Sequence, Tuple

from rewardmap.errors import UsageError
from rewardmap.qa_generator import PLUS_QTYPES, QTYPES, QAItem
from rewardmap.utils.run_log import get_logger
from rewardmap.utils.seeding import make_rng

logger = get_logger("curriculum")

GRANULARITIES = ("fine", "coarse", "none")

STAGE_LAYOUTS = {
    "fine": (
        ("binary judgment", ("torf_1", "torf_2")),
        ("counting", ("global_count", "local_count_1", "local_count_2")),
        ("planning", ("planning",)),
    ),
    "coarse": (
        ("understanding", PLUS_QTYPES),
        ("planning", ("planning",)),
    ),
    "none": (("all", QTYPES),),
}


@dataclass(frozen=True)
class Stage:
    stage_id: int
    name: str
    qtypes: FrozenSet[str]
    items: Tuple[QAItem, ...]


@dataclass
class CurriculumPlan:
    stages: Tuple[Stage, ...]
    seed: int
    granularity: str
    warnings: List[str] = field(default_factory=list)

    def stage(self, stage_id: int) -> Stage:
        for stage in self.stages:
            if stage.stage_id == stage_id:
                return stage
        raise UsageError(f"No stage {stage_id} in this plan")

    @property
    def item_count(self) -> int:
        return sum(len(stage.items) for stage in self.stages)


def _shuffled(items: Sequence[QAItem], seed: int, stage_id: int, epoch: int) -> Tuple[QAItem, ...]:
    order = make_rng("curriculum", seed, stage_id, epoch).permutation(len(items))
    return tuple(items[int(i)] for i in order)


def build_plan(pool: Sequence[QAItem], granularity: str, seed: int) -> CurriculumPlan:
    """
    Partition a pool into ordered stages and shuffle each one.

    Args:
        pool: Training items; order matters only through the seeded shuffle
        granularity: fine (3 stages), coarse (2 stages) or none (1 stage)
        seed: Plan seed

    Returns:
        Plan whose empty stages are kept and reported in plan.warnings
    """
    if not pool:
        raise UsageError("Cannot build a curriculum from an empty pool")
    if granularity not in STAGE_LAYOUTS:
        raise UsageError(
            f"Unknown granularity '{granularity}', expected one of {', '.join(GRANULARITIES)}"
        )

    stages = []
    warnings = []
    for stage_id, (name, qtypes) in enumerate(STAGE_LAYOUTS[granularity], start=1):
        members = [item for item in pool if item.qtype in qtypes]
        if not members:
            message = f"Stage {stage_id} ({name}) has no items"
            warnings.append(message)
            logger.warning(message)
        stages.append(
            Stage(
                stage_id=stage_id,
                name=name,
                qtypes=frozenset(qtypes),
                items=_shuffled(members, seed, stage_id, 0),
            )
        )
    return CurriculumPlan(
        stages=tuple(stages), seed=seed, granularity=granularity, warnings=warnings
    )


def _epochs_for(stage_id: int, epochs_per_stage: int, overrides: Optional[Mapping]) -> int:
    overrides = {int(k): int(v) for k, v in (overrides or {}).items()}
    epochs = overrides.get(stage_id, epochs_per_stage)
    if epochs < 1:
        raise UsageError(f"Stage {stage_id} needs at least 1 epoch, got {epochs}")
    return epochs


def iterate(
    plan: CurriculumPlan,
    epochs_per_stage: int = 1,
    overrides: Optional[Mapping[int, int]] = None,
) -> Iterator[Tuple[int, QAItem]]:
    """
    Stream (stage_id, item) pairs, finishing every epoch of a stage before the next.

    Epoch 0 replays the plan's stored order; later epochs reshuffle with a
    seed derived from (plan seed, stage, epoch).
    """
    if epochs_per_stage < 1:
        raise UsageError(f"epochs_per_stage must be >= 1, got {epochs_per_stage}")
    for stage in plan.stages:
        for epoch in range(_epochs_for(stage.stage_id, epochs_per_stage, overrides)):
            items = stage.items if epoch == 0 else _shuffled(stage.items, plan.seed, stage.stage_id, epoch)
            for item in items:
                yield stage.stage_id, item


def plan_manifest(
    plan: CurriculumPlan,
    epochs_per_stage: int = 1,
    overrides: Optional[Mapping[int, int]] = None,
) -> Dict[str, Any]:
    return {
        "granularity": plan.granularity,
        "seed": plan.seed,
        "epochs_per_stage": epochs_per_stage,
        "stage_epochs": {
            str(s.stage_id): _epochs_for(s.stage_id, epochs_per_stage, overrides)
            for s in plan.stages
        },
        "stages": [
            {
                "stage_id": s.stage_id,
                "name": s.name,
                "qtypes": sorted(s.qtypes),
                "items": [item.qa_id for item in s.items],
            }
            for s in plan.stages
        ],
        "warnings": list(plan.warnings),
        "emission_order": [
            [stage_id, item.qa_id]
            for stage_id, item in iterate(plan, epochs_per_stage, overrides)
        ],
    }


def write_plan_manifest(
    plan: CurriculumPlan,
    path: str,
    epochs_per_stage: int = 1,
    overrides: Optional[Mapping[int, int]] = None,
):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(plan_manifest(plan, epochs_per_stage, overrides), f, indent=2)
        f.write("\n")
