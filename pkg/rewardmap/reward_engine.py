"""
Reward Engine
Format, correctness and detail rewards, difficulty-aware weighting, the composed
training reward and the difficulty-weighted evaluation metrics
"""

from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from rewardmap.answer_format import (
    ParsedAnswer,
    canonical_name,
    format_reward,
    normalize_scalar,
    parse_boxed,
    parse_route,
)
from rewardmap.errors import UsageError
from rewardmap.qa_generator import QTYPES, QAItem
from rewardmap.transit_graph import TransitNetwork, validate_route
from rewardmap.utils.run_log import get_logger

logger = get_logger("reward_engine")

DEFAULT_EVAL_WEIGHTS = {"easy": 1.0, "medium": 1.5, "hard": 2.0}

# Stand-ins for evaluators that are not reproduced here; echoed into every report
SUBSTITUTE_FLAGS = {
    "planning_correctness": "substitute: valid route with correct endpoints, optimality not required",
    "map_score": "substitute: difficulty-weighted mean detail reward",
}


@dataclass(frozen=True)
class RewardConfig:
    alpha: float = 0.5
    gamma_easy: float = 0.5
    gamma_medium: float = 0.75
    gamma_hard: float = 1.0
    beta_0: float = 0.25
    beta_1: float = 0.5
    detail_cap: float = 10.0

    def __post_init__(self):
        # alpha == 0 is admitted only so the baseline reward is expressible
        if self.alpha < 0:
            raise UsageError(f"alpha must be >= 0, got {self.alpha}")
        for name in ("gamma_easy", "gamma_medium", "gamma_hard", "detail_cap"):
            if getattr(self, name) <= 0:
                raise UsageError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("beta_0", "beta_1"):
            if getattr(self, name) < 0:
                raise UsageError(f"{name} must be >= 0, got {getattr(self, name)}")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any]) -> "RewardConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise UsageError(f"Unknown reward settings: {', '.join(unknown)}")
        return cls(**{k: float(v) for k, v in mapping.items()})

    @classmethod
    def baseline(cls, detail_cap: float = 10.0) -> "RewardConfig":
        """Format + correctness only: no detail term, unit difficulty weights"""
        return cls(
            alpha=0.0,
            gamma_easy=1.0,
            gamma_medium=1.0,
            gamma_hard=1.0,
            beta_0=0.0,
            beta_1=0.0,
            detail_cap=detail_cap,
        )

    def gamma(self, difficulty: str) -> float:
        try:
            return {
                "easy": self.gamma_easy,
                "medium": self.gamma_medium,
                "hard": self.gamma_hard,
            }[difficulty]
        except KeyError:
            raise UsageError(f"Unknown map difficulty '{difficulty}'")

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class RewardBreakdown:
    r_format: float
    r_correct: float
    r_detail: float
    w_map: float
    w_question: float
    w_difficulty: float
    total: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


# --- Name resolution (exact after whitespace collapse and casefolding) ---


def _name_index(names: Sequence[str]) -> Dict[str, str]:
    index = {}
    for name in names:
        index.setdefault(canonical_name(name), name)
    return index


def _require_network(item: QAItem, net: TransitNetwork):
    if net is None or item.network_id != net.network_id:
        found = net.network_id if net is not None else None
        raise UsageError(f"Item {item.qa_id} needs network '{item.network_id}', got '{found}'")


def _require_planning(item: QAItem, operation: str):
    if not item.is_planning:
        raise UsageError(f"{operation} applies to planning items, got {item.qtype} ({item.qa_id})")


# --- Rewards ---


def correctness_plus(item: QAItem, p: ParsedAnswer) -> float:
    if item.is_planning:
        raise UsageError(f"correctness_plus does not score planning items ({item.qa_id})")
    if p.kind != "scalar":
        return 0.0
    return 1.0 if p.scalar_value == normalize_scalar(str(item.answer)) else 0.0


def correctness_planning(item: QAItem, p: ParsedAnswer, net: TransitNetwork) -> float:
    """1.0 iff the route is valid on the network and joins the question's endpoints"""
    _require_planning(item, "correctness_planning")
    _require_network(item, net)
    if p.kind != "route" or p.route_value is None:
        return 0.0

    stops = _name_index(net.stops)
    lines = _name_index(net.line_names)
    resolved = [
        (
            lines.get(canonical_name(s.line), s.line),
            stops.get(canonical_name(s.from_stop), s.from_stop),
            stops.get(canonical_name(s.to_stop), s.to_stop),
        )
        for s in p.route_value.segments
    ]
    if validate_route(net, resolved):
        return 0.0
    if resolved[0][1] != item.params["stop_1"] or resolved[-1][2] != item.params["stop_2"]:
        return 0.0
    return 1.0


def detail_reward(
    item: QAItem, p: ParsedAnswer, net: TransitNetwork, cfg: RewardConfig
) -> float:
    """
    Partial credit for a planning answer.

    +2 if the route departs from the origin or arrives at the destination;
    per segment i (i transfers taken so far): -5 once i exceeds the question's
    transfer count, +4 when the first segment rides the ground-truth first line,
    +1 when both stops exist and a non-final segment chains into the next.
    The result is capped above at cfg.detail_cap; there is no floor.
    """
    _require_planning(item, "detail_reward")
    _require_network(item, net)
    if p.kind != "route" or not p.format_ok or p.route_value is None:
        return 0.0

    segments = p.route_value.segments
    stations = {canonical_name(s) for s in net.stops}
    stop_1 = canonical_name(item.params["stop_1"])
    stop_2 = canonical_name(item.params["stop_2"])
    first_line = canonical_name(item.answer.segments[0].line)
    question_transfer_count = item.transfer_count

    score = 0.0
    if (
        canonical_name(segments[0].from_stop) == stop_1
        or canonical_name(segments[-1].to_stop) == stop_2
    ):
        score += 2

    for current_transfer_times, segment in enumerate(segments):
        if current_transfer_times > question_transfer_count:
            score -= 5
        if current_transfer_times == 0 and canonical_name(segment.line) == first_line:
            score += 4
        departure = canonical_name(segment.from_stop)
        arrival = canonical_name(segment.to_stop)
        if departure in stations and arrival in stations:
            if current_transfer_times < len(segments) - 1:
                if arrival == canonical_name(segments[current_transfer_times + 1].from_stop):
                    score += 1

    return min(score, cfg.detail_cap)


def difficulty_weight(item: QAItem, cfg: RewardConfig) -> Tuple[float, float]:
    """
    Returns:
        (w_map, w_question); non-planning items always take beta_0
    """
    w_map = cfg.gamma(item.map_difficulty)
    if item.is_planning and item.transfer_count >= 1:
        return w_map, cfg.beta_1
    return w_map, cfg.beta_0


def compose(
    r_format: float,
    r_correct: float,
    r_detail: float,
    weights: Tuple[float, float],
    cfg: RewardConfig,
    is_planning: bool = True,
) -> RewardBreakdown:
    w_map, w_question = weights
    w_difficulty = w_map + w_question
    if not is_planning:
        r_detail = 0.0
    total = w_difficulty * (r_format + r_correct + cfg.alpha * r_detail)
    return RewardBreakdown(
        r_format=r_format,
        r_correct=r_correct,
        r_detail=r_detail,
        w_map=w_map,
        w_question=w_question,
        w_difficulty=w_difficulty,
        total=total,
    )


class RewardEngine:
    """Scores raw answer text for an item with the parser matching its type"""

    def __init__(self, cfg: Optional[RewardConfig] = None):
        self.cfg = cfg or RewardConfig()

    @staticmethod
    def parse(item: QAItem, text: str) -> ParsedAnswer:
        return parse_route(text) if item.is_planning else parse_boxed(text)

    def score_parsed(
        self, item: QAItem, p: ParsedAnswer, net: Optional[TransitNetwork] = None
    ) -> RewardBreakdown:
        r_format = format_reward(p)
        if item.is_planning:
            r_correct = correctness_planning(item, p, net)
            r_detail = detail_reward(item, p, net, self.cfg)
        else:
            r_correct = correctness_plus(item, p)
            r_detail = 0.0
        return compose(
            r_format,
            r_correct,
            r_detail,
            difficulty_weight(item, self.cfg),
            self.cfg,
            item.is_planning,
        )

    def score(
        self, item: QAItem, text: str, net: Optional[TransitNetwork] = None
    ) -> RewardBreakdown:
        return self.score_parsed(item, self.parse(item, text), net)


# --- Evaluation metrics ---


def _eval_weight(item: QAItem, eval_weights: Mapping[str, float]) -> float:
    try:
        return float(eval_weights[item.map_difficulty])
    except KeyError:
        raise UsageError(f"No evaluation weight for map difficulty '{item.map_difficulty}'")


def weighted_accuracy(
    results: Sequence[Tuple[QAItem, bool]],
    eval_weights: Optional[Mapping[str, float]] = None,
) -> float:
    """Sum of weights of correct items over the sum of all weights"""
    if not results:
        raise UsageError("weighted_accuracy needs at least one result")
    eval_weights = eval_weights or DEFAULT_EVAL_WEIGHTS
    numerator = 0.0
    denominator = 0.0
    for item, correct in results:
        weight = _eval_weight(item, eval_weights)
        denominator += weight
        if correct:
            numerator += weight
    return numerator / denominator


def weighted_map_score(
    results: Sequence[Tuple[QAItem, float]],
    eval_weights: Optional[Mapping[str, float]] = None,
) -> float:
    if not results:
        raise UsageError("weighted_map_score needs at least one result")
    eval_weights = eval_weights or DEFAULT_EVAL_WEIGHTS
    numerator = 0.0
    denominator = 0.0
    for item, detail in results:
        _require_planning(item, "weighted_map_score")
        weight = _eval_weight(item, eval_weights)
        numerator += weight * detail
        denominator += weight
    return numerator / denominator


# --- Score reports ---


def score_record(item: QAItem, text: str, breakdown: RewardBreakdown) -> Dict[str, Any]:
    return {
        "qa_id": item.qa_id,
        "network_id": item.network_id,
        "qtype": item.qtype,
        "map_difficulty": item.map_difficulty,
        "transfer_count": item.transfer_count,
        "answer_text": text,
        "correct": breakdown.r_correct == 1.0,
        "breakdown": breakdown.to_dict(),
        "error": None,
    }


def error_record(qa_id: str, message: str) -> Dict[str, Any]:
    return {"qa_id": qa_id, "error": message}


def summarize_scores(
    scored: Sequence[Tuple[QAItem, RewardBreakdown]],
    cfg: RewardConfig,
    eval_weights: Optional[Mapping[str, float]] = None,
    error_count: int = 0,
) -> Dict[str, Any]:
    """
    Aggregate scored items into a report.

    Returns:
        {"summary": ..., "per_type": ..., "metadata": ...}; weighted metrics are
        None when there is nothing of that kind to aggregate
    """
    eval_weights = dict(eval_weights or DEFAULT_EVAL_WEIGHTS)
    correctness = [(item, b.r_correct == 1.0) for item, b in scored]
    planning = [(item, b.r_detail) for item, b in scored if item.is_planning]

    per_type: Dict[str, Dict[str, Any]] = {}
    for qtype in QTYPES:
        subset = [(item, ok) for item, ok in correctness if item.qtype == qtype]
        if subset:
            per_type[qtype] = {
                "items": len(subset),
                "accuracy": sum(1 for _, ok in subset if ok) / len(subset),
                "weighted_accuracy": weighted_accuracy(subset, eval_weights),
            }

    totals: List[float] = [b.total for _, b in scored]
    return {
        "summary": {
            "items_scored": len(scored),
            "items_with_errors": error_count,
            "mean_total_reward": sum(totals) / len(totals) if totals else None,
            "weighted_accuracy": weighted_accuracy(correctness, eval_weights) if correctness else None,
            "weighted_map_score": weighted_map_score(planning, eval_weights) if planning else None,
        },
        "per_type": per_type,
        "metadata": {
            "reward_config": cfg.to_dict(),
            "eval_weights": eval_weights,
            "substitutes": dict(SUBSTITUTE_FLAGS),
        },
    }
