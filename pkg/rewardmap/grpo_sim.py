"""
GRPO Simulation
A linear-softmax policy answers generated questions (building planning routes
one ride at a time); K responses per query are scored by the reward engine and
the policy follows the group-relative advantage objective with a KL penalty
"""

import csv
import dataclasses
import json
import os
from dataclasses import dataclass, field, fields
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from rewardmap.answer_format import serialize_route
from rewardmap.curriculum import CurriculumPlan, build_plan, iterate
from rewardmap.errors import NonFiniteGradientError, UsageError
from rewardmap.qa_generator import OPTION_LETTERS, QAItem
from rewardmap.reward_engine import (
    DEFAULT_EVAL_WEIGHTS,
    RewardConfig,
    RewardEngine,
    correctness_planning,
    correctness_plus,
    detail_reward,
    weighted_accuracy,
    weighted_map_score,
)
from rewardmap.transit_graph import Segment, TransitNetwork, lines_through, share_line
from rewardmap.utils.run_log import get_logger
from rewardmap.utils.seeding import derive_seed, make_rng

logger = get_logger("grpo_sim")

FEATURE_SET = "linear-v1"
FEATURES = (
    "stop_bias",
    "ride_bias",
    "reaches_destination",
    "serves_destination",
    "meets_destination_line",
    "target_is_hub",
    "ride_fraction",
    "answer_yes",
    "answer_no",
    "count_match",
    "option_a",
    "option_b",
    "option_c",
    "option_d",
)
FEATURE_INDEX = {name: i for i, name in enumerate(FEATURES)}

MODES = ("baseline", "rewardmap", "reward_design", "multi_stage")

LOG_COLUMNS = (
    "step",
    "stage_id",
    "mean_reward",
    "zero_reward_group_fraction",
    "mean_abs_advantage",
    "kl",
    "planning_validity",
    "eval_weighted_accuracy",
    "eval_weighted_map_score",
)


@dataclass(frozen=True)
class TrainConfig:
    K: int = 8
    learning_rate: float = 1e-6
    kl_coeff: float = 1e-3
    batch_queries: int = 16
    max_segments: int = 4
    seed: int = 0
    max_steps: Optional[int] = None
    eval_every: int = 10
    epochs_per_stage: int = 1
    stage_epochs: Dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.K < 2:
            raise UsageError(f"Group size K must be >= 2, got {self.K}")
        if self.kl_coeff < 0:
            raise UsageError(f"kl_coeff must be >= 0, got {self.kl_coeff}")
        if self.max_segments < 1:
            raise UsageError(f"max_segments must be >= 1, got {self.max_segments}")
        if self.batch_queries < 1:
            raise UsageError(f"batch_queries must be >= 1, got {self.batch_queries}")
        if self.learning_rate < 0:
            raise UsageError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.eval_every < 1:
            raise UsageError(f"eval_every must be >= 1, got {self.eval_every}")
        if self.epochs_per_stage < 1:
            raise UsageError(f"epochs_per_stage must be >= 1, got {self.epochs_per_stage}")
        if self.max_steps is not None and self.max_steps < 1:
            raise UsageError(f"max_steps must be >= 1 when set, got {self.max_steps}")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any]) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise UsageError(f"Unknown train settings: {', '.join(unknown)}")
        values = dict(mapping)
        values["stage_epochs"] = {
            int(k): int(v) for k, v in (values.get("stage_epochs") or {}).items()
        }
        return cls(**values)


# --- Policy ---


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits)
    exp = np.exp(shifted)
    return exp / exp.sum()


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits)
    return shifted - np.log(np.exp(shifted).sum())


@dataclass
class PolicyState:
    weights: np.ndarray
    reference_weights: np.ndarray
    feature_set: str = FEATURE_SET

    @classmethod
    def initial(cls, weights: Optional[Mapping[str, float]] = None) -> "PolicyState":
        """Zero weights (uniform over actions) unless named weights are given"""
        vector = np.zeros(len(FEATURES))
        for name, value in (weights or {}).items():
            if name not in FEATURE_INDEX:
                raise UsageError(f"Unknown feature '{name}'")
            vector[FEATURE_INDEX[name]] = float(value)
        return cls(weights=vector, reference_weights=vector.copy())

    def probabilities(self, features: np.ndarray) -> np.ndarray:
        return softmax(features @ self.weights)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "feature_set": self.feature_set,
            "weights": {n: float(w) for n, w in zip(FEATURES, self.weights)},
            "reference_weights": {n: float(w) for n, w in zip(FEATURES, self.reference_weights)},
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PolicyState":
        if data.get("feature_set") != FEATURE_SET:
            raise UsageError(f"Unsupported feature set '{data.get('feature_set')}'")
        return cls(
            weights=np.array([float(data["weights"][n]) for n in FEATURES]),
            reference_weights=np.array([float(data["reference_weights"][n]) for n in FEATURES]),
        )


@dataclass(frozen=True)
class DecisionStep:
    """One decision: candidate feature rows and the index taken"""

    features: np.ndarray
    chosen: int


@dataclass(frozen=True)
class Trajectory:
    steps: Tuple[DecisionStep, ...]
    answer_text: str

    def log_prob(self, weights: np.ndarray) -> float:
        return float(sum(log_softmax(s.features @ weights)[s.chosen] for s in self.steps))


@dataclass(frozen=True)
class GroupSample:
    query: QAItem
    responses: Tuple[Trajectory, ...]
    rewards: Tuple[float, ...]
    advantages: Tuple[float, ...]

    def __post_init__(self):
        if not len(self.responses) == len(self.rewards) == len(self.advantages):
            raise UsageError(
                f"Group for {self.query.qa_id} has {len(self.responses)} responses, "
                f"{len(self.rewards)} rewards and {len(self.advantages)} advantages"
            )


# --- Features and rollouts ---


def _row(**values: float) -> np.ndarray:
    row = np.zeros(len(FEATURES))
    for name, value in values.items():
        row[FEATURE_INDEX[name]] = value
    return row


def _ride_row(
    net: TransitNetwork, current: str, line: str, target: str, destination: str
) -> np.ndarray:
    stops = net.lines[line]
    distance = abs(net.position(line, target) - net.position(line, current))
    return _row(
        ride_bias=1.0,
        reaches_destination=float(target == destination),
        serves_destination=float(net.position(line, destination) is not None),
        meets_destination_line=float(share_line(net, target, destination)),
        target_is_hub=float(net.is_hub(target)),
        ride_fraction=distance / (len(stops) - 1),
    )


def _plus_choices(item: QAItem, net: TransitNetwork) -> Tuple[List[str], np.ndarray]:
    p = item.params
    if item.qtype in ("torf_1", "torf_2"):
        if item.qtype == "torf_1":
            name, perceived = "meets_destination_line", share_line(net, p["stop_1"], p["stop_2"])
        else:
            name, perceived = "serves_destination", p["line_x"] in lines_through(net, p["stop_1"])
        perceived = float(perceived)
        rows = [
            _row(answer_yes=1.0, **{name: perceived}),
            _row(answer_no=1.0, **{name: 1.0 - perceived}),
        ]
        return ["yes", "no"], np.array(rows)

    if item.qtype == "local_count_1":
        rows = [
            _row(**{f"option_{letter.lower()}": 1.0, "count_match": float(option == str(_true_count(item, net)))})
            for letter, option in zip(OPTION_LETTERS, item.options)
        ]
        return list(OPTION_LETTERS), np.array(rows)

    truth = _true_count(item, net)
    values = list(range(len(net.lines) + 2))
    rows = [_row(count_match=float(v == truth)) for v in values]
    return [str(v) for v in values], np.array(rows)


def _true_count(item: QAItem, net: TransitNetwork) -> int:
    """What the policy perceives on the map for a counting question"""
    p = item.params
    if item.qtype == "local_count_1":
        return abs(net.position(p["line"], p["stop_1"]) - net.position(p["line"], p["stop_2"])) - 1
    if item.qtype == "local_count_2":
        return len(lines_through(net, p["stop_1"]))
    return len(net.lines)


def _pick(probabilities: np.ndarray, rng: np.random.Generator, greedy: bool) -> int:
    if greedy:
        return int(np.argmax(probabilities))
    return int(rng.choice(len(probabilities), p=probabilities))


def rollout(
    policy: PolicyState,
    item: QAItem,
    net: TransitNetwork,
    seed: int,
    max_segments: int = 4,
    greedy: bool = False,
) -> Trajectory:
    """
    Sample one response.

    Planning: start at the origin and repeatedly ride a line through the
    current stop (not the line just ridden) to an unvisited stop, or STOP
    once a segment exists; arriving at the destination, reaching
    max_segments or running out of rides ends the response, which is
    emitted in the canonical wire form. Other types take one categorical
    answer emitted as \\boxed{value}.
    """
    if net is None or net.network_id != item.network_id:
        raise UsageError(f"Item {item.qa_id} references unknown network '{item.network_id}'")
    rng = make_rng("rollout", seed)

    if not item.is_planning:
        labels, features = _plus_choices(item, net)
        chosen = _pick(policy.probabilities(features), rng, greedy)
        return Trajectory((DecisionStep(features, chosen),), f"\\boxed{{{labels[chosen]}}}")

    origin, destination = item.params["stop_1"], item.params["stop_2"]
    current, last_line = origin, None
    visited = {origin}
    segments: List[Segment] = []
    steps: List[DecisionStep] = []
    while len(segments) < max_segments and current != destination:
        actions = [
            (line, target)
            for line in sorted(lines_through(net, current))
            if line != last_line
            for target in net.lines[line]
            if target not in visited
        ]
        if not actions:
            break
        rows = [_ride_row(net, current, line, target, destination) for line, target in actions]
        if segments:
            actions.append(None)
            rows.append(_row(stop_bias=1.0))
        features = np.array(rows)
        chosen = _pick(policy.probabilities(features), rng, greedy)
        steps.append(DecisionStep(features, chosen))
        if actions[chosen] is None:
            break
        line, target = actions[chosen]
        segments.append(Segment(line, current, target))
        visited.add(target)
        current, last_line = target, line

    return Trajectory(tuple(steps), serialize_route(segments))


# --- Advantages, objective and update ---


def group_advantages(rewards: Sequence[float]) -> List[float]:
    """Mean-centered rewards, in order"""
    if len(rewards) < 2:
        raise UsageError(f"Group advantages need K >= 2 rewards, got {len(rewards)}")
    values = np.asarray(rewards, dtype=float)
    return list(values - values.mean())


def _visited_states(batch: Sequence[GroupSample]) -> List[np.ndarray]:
    return [step.features for group in batch for t in group.responses for step in t.steps]


def batch_kl(weights: np.ndarray, reference_weights: np.ndarray, batch: Sequence[GroupSample]) -> float:
    """Exact categorical KL(policy || reference) averaged over visited states"""
    states = _visited_states(batch)
    if not states:
        return 0.0
    total = 0.0
    for features in states:
        log_p = log_softmax(features @ weights)
        log_q = log_softmax(features @ reference_weights)
        total += float(np.exp(log_p) @ (log_p - log_q))
    return total / len(states)


def objective(
    weights: np.ndarray,
    reference_weights: np.ndarray,
    batch: Sequence[GroupSample],
    kl_coeff: float,
) -> float:
    """Batch mean of sum_i A_i log pi(y_i | x), minus kl_coeff times the mean state KL"""
    value = 0.0
    for group in batch:
        for trajectory, advantage in zip(group.responses, group.advantages):
            value += advantage * trajectory.log_prob(weights)
    value /= len(batch)
    if kl_coeff:
        value -= kl_coeff * batch_kl(weights, reference_weights, batch)
    return value


def policy_gradient(
    weights: np.ndarray,
    reference_weights: np.ndarray,
    batch: Sequence[GroupSample],
    kl_coeff: float,
) -> np.ndarray:
    """Analytic gradient of objective() with respect to the weights"""
    grad = np.zeros_like(weights, dtype=float)
    for group in batch:
        for trajectory, advantage in zip(group.responses, group.advantages):
            if advantage == 0:
                continue
            for step in trajectory.steps:
                p = softmax(step.features @ weights)
                grad += advantage * (step.features[step.chosen] - p @ step.features)
    grad /= len(batch)

    states = _visited_states(batch)
    if kl_coeff and states:
        kl_grad = np.zeros_like(grad)
        for features in states:
            log_p = log_softmax(features @ weights)
            log_q = log_softmax(features @ reference_weights)
            p = np.exp(log_p)
            centered = features - p @ features
            kl_grad += (p * (log_p - log_q)) @ centered
        grad -= kl_coeff * kl_grad / len(states)
    return grad


def update(
    policy: PolicyState,
    batch: Sequence[GroupSample],
    cfg: TrainConfig,
    dump_dir: Optional[str] = None,
) -> PolicyState:
    """
    One gradient-ascent step.

    Raises:
        NonFiniteGradientError: after writing a JSON diagnostic dump
    """
    if not batch:
        raise UsageError("update needs at least one group")
    grad = policy_gradient(policy.weights, policy.reference_weights, batch, cfg.kl_coeff)
    if not np.all(np.isfinite(grad)):
        path = os.path.join(dump_dir or ".", "nonfinite_gradient.json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump(
                {
                    "policy": policy.to_dict(),
                    "gradient": {n: repr(float(g)) for n, g in zip(FEATURES, grad)},
                    "groups": [
                        {
                            "qa_id": g.query.qa_id,
                            "rewards": [repr(float(r)) for r in g.rewards],
                            "advantages": [repr(float(a)) for a in g.advantages],
                        }
                        for g in batch
                    ],
                },
                f,
                indent=2,
            )
        logger.error(f"Non-finite gradient; diagnostics written to {path}")
        raise NonFiniteGradientError("Policy gradient is not finite", dump_path=path)
    return dataclasses.replace(policy, weights=policy.weights + cfg.learning_rate * grad)


# --- Training ---


@dataclass
class TrainingLog:
    mode: str
    rows: List[Dict[str, Any]] = field(default_factory=list)
    policy: Optional[PolicyState] = None

    def column(self, name: str) -> List[Any]:
        return [row.get(name) for row in self.rows]

    @property
    def steps(self) -> List[int]:
        return [row["step"] for row in self.rows]

    def to_csv(self, path: str):
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(LOG_COLUMNS), lineterminator="\n")
            writer.writeheader()
            for row in self.rows:
                writer.writerow({c: row.get(c) for c in LOG_COLUMNS})

    @classmethod
    def from_csv(cls, path: str, mode: str = "unknown") -> "TrainingLog":
        rows = []
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.DictReader(f)
            missing = sorted(set(LOG_COLUMNS) - set(reader.fieldnames or []))
            if missing:
                raise UsageError(f"{path} is not a training log (missing {', '.join(missing)})")
            for record in reader:
                row = {}
                for column in LOG_COLUMNS:
                    value = record[column]
                    if value == "":
                        row[column] = None
                    elif column in ("step", "stage_id"):
                        row[column] = int(value)
                    else:
                        row[column] = float(value)
                rows.append(row)
        return cls(mode=mode, rows=rows)


def _network_for(item: QAItem, networks: Mapping[str, TransitNetwork]) -> TransitNetwork:
    net = networks.get(item.network_id)
    if net is None:
        raise UsageError(f"Item {item.qa_id} references unknown network '{item.network_id}'")
    return net


def _batches(
    plan: CurriculumPlan, cfg: TrainConfig
) -> List[Tuple[int, List[QAItem]]]:
    """Consecutive items of the curriculum stream, never mixing stages"""
    batches: List[Tuple[int, List[QAItem]]] = []
    for stage_id, item in iterate(plan, cfg.epochs_per_stage, cfg.stage_epochs):
        if not batches or batches[-1][0] != stage_id or len(batches[-1][1]) == cfg.batch_queries:
            batches.append((stage_id, []))
        batches[-1][1].append(item)
    if cfg.max_steps is not None:
        batches = batches[: cfg.max_steps]
    return batches


def resolve_mode(
    mode: str,
    pool: Sequence[QAItem],
    plan: Optional[CurriculumPlan],
    reward_cfg: RewardConfig,
    seed: int,
) -> Tuple[CurriculumPlan, RewardConfig]:
    """
    Plan and reward for a training mode.

    baseline: format + correctness reward, planning items only, one stage.
    rewardmap: full reward, the given multi-stage plan.
    reward_design: full reward, one stage over the whole pool.
    multi_stage: format + correctness reward, the given multi-stage plan.
    """
    if mode not in MODES:
        raise UsageError(f"Unknown mode '{mode}', expected one of {', '.join(MODES)}")
    baseline_cfg = RewardConfig.baseline(detail_cap=reward_cfg.detail_cap)

    if mode == "baseline":
        planning = [item for item in pool if item.is_planning]
        if not planning:
            raise UsageError("Baseline training needs planning items in the pool")
        return build_plan(planning, "none", seed), baseline_cfg
    if mode == "reward_design":
        if not pool:
            raise UsageError("Cannot train on an empty pool")
        return build_plan(pool, "none", seed), reward_cfg
    if plan is None or plan.item_count == 0:
        raise UsageError(f"Mode {mode} needs a non-empty curriculum plan")
    return plan, (reward_cfg if mode == "rewardmap" else baseline_cfg)


def train(
    pool: Sequence[QAItem],
    plan: Optional[CurriculumPlan],
    networks: Mapping[str, TransitNetwork],
    cfg: TrainConfig,
    reward_cfg: RewardConfig,
    mode: str = "rewardmap",
    eval_items: Optional[Sequence[QAItem]] = None,
    eval_weights: Optional[Mapping[str, float]] = None,
    dump_dir: Optional[str] = None,
) -> TrainingLog:
    """
    Run curriculum GRPO and log every update step.

    Args:
        pool: Training items
        plan: Curriculum for the rewardmap and multi_stage modes
        networks: network_id -> TransitNetwork
        cfg: Group size, step size, KL coefficient, batching and caps
        reward_cfg: Full reward settings (baseline modes derive their own)
        mode: baseline, rewardmap, reward_design or multi_stage
        eval_items: Held-out items evaluated every cfg.eval_every steps and at stage ends

    Returns:
        TrainingLog whose policy attribute holds the final PolicyState
    """
    plan, step_reward_cfg = resolve_mode(mode, pool, plan, reward_cfg, cfg.seed)
    engine = RewardEngine(step_reward_cfg)
    batches = _batches(plan, cfg)
    if not batches:
        raise UsageError("The curriculum plan yields no training steps")

    policy = PolicyState.initial()
    log = TrainingLog(mode=mode)
    for step, (stage_id, items) in enumerate(batches, start=1):
        groups = []
        planning_outcomes = []
        for q, item in enumerate(items):
            net = _network_for(item, networks)
            responses = []
            rewards = []
            for k in range(cfg.K):
                trajectory = rollout(
                    policy, item, net, derive_seed(cfg.seed, step, q, k), cfg.max_segments
                )
                breakdown = engine.score(item, trajectory.answer_text, net)
                responses.append(trajectory)
                rewards.append(breakdown.total)
                if item.is_planning:
                    planning_outcomes.append(breakdown.r_correct)
            groups.append(
                GroupSample(
                    query=item,
                    responses=tuple(responses),
                    rewards=tuple(rewards),
                    advantages=tuple(group_advantages(rewards)),
                )
            )

        kl = batch_kl(policy.weights, policy.reference_weights, groups)
        policy = update(policy, groups, cfg, dump_dir)

        all_rewards = [r for g in groups for r in g.rewards]
        row = {
            "step": step,
            "stage_id": stage_id,
            "mean_reward": float(np.mean(all_rewards)),
            "zero_reward_group_fraction": sum(1 for g in groups if len(set(g.rewards)) == 1) / len(groups),
            "mean_abs_advantage": float(np.mean([abs(a) for g in groups for a in g.advantages])),
            "kl": kl,
            "planning_validity": float(np.mean(planning_outcomes)) if planning_outcomes else None,
            "eval_weighted_accuracy": None,
            "eval_weighted_map_score": None,
        }

        stage_ends = step == len(batches) or batches[step][0] != stage_id
        if eval_items and (step % cfg.eval_every == 0 or stage_ends):
            metrics = evaluate(
                policy, eval_items, networks, reward_cfg, eval_weights, cfg.max_segments
            )
            row["eval_weighted_accuracy"] = metrics["weighted_accuracy"]
            row["eval_weighted_map_score"] = metrics["weighted_map_score"]
            logger.info(
                f"[{mode}] step {step} stage {stage_id}: "
                f"eval weighted accuracy {metrics['weighted_accuracy']:.4f}"
            )
        log.rows.append(row)

    log.policy = policy
    logger.info(f"[{mode}] finished {len(log.rows)} steps")
    return log


def evaluate(
    policy: PolicyState,
    test_items: Sequence[QAItem],
    networks: Mapping[str, TransitNetwork],
    reward_cfg: RewardConfig,
    eval_weights: Optional[Mapping[str, float]] = None,
    max_segments: int = 4,
    train_network_ids: Optional[Iterable[str]] = None,
) -> Dict[str, Any]:
    """
    Greedy-decoded evaluation.

    Returns:
        items, accuracy, weighted_accuracy and weighted_map_score (None
        without planning items)
    """
    if not test_items:
        raise UsageError("Cannot evaluate an empty test set")
    if train_network_ids is not None:
        overlap = sorted({i.network_id for i in test_items} & set(train_network_ids))
        if overlap:
            raise UsageError(f"Test items share networks with training: {', '.join(overlap)}")
    eval_weights = eval_weights or DEFAULT_EVAL_WEIGHTS

    correctness = []
    details = []
    for item in test_items:
        net = _network_for(item, networks)
        trajectory = rollout(policy, item, net, seed=0, max_segments=max_segments, greedy=True)
        parsed = RewardEngine.parse(item, trajectory.answer_text)
        if item.is_planning:
            correct = correctness_planning(item, parsed, net)
            details.append((item, detail_reward(item, parsed, net, reward_cfg)))
        else:
            correct = correctness_plus(item, parsed)
        correctness.append((item, correct == 1.0))

    return {
        "items": len(correctness),
        "accuracy": sum(1 for _, ok in correctness if ok) / len(correctness),
        "weighted_accuracy": weighted_accuracy(correctness, eval_weights),
        "weighted_map_score": weighted_map_score(details, eval_weights) if details else None,
    }


def steps_to_validity(log: TrainingLog, threshold: float = 0.8, window: int = 1) -> Optional[int]:
    """First step whose trailing-window mean planning validity reaches threshold"""
    history = []
    for row in log.rows:
        if row["planning_validity"] is None:
            continue
        history.append(row["planning_validity"])
        if len(history) >= window and np.mean(history[-window:]) >= threshold:
            return row["step"]
    return None


# --- Sweeps ---

SWEEP_COLUMNS = (
    "mode",
    "granularity",
    "seed",
    "steps",
    "steps_to_validity",
    "early_zero_reward_group_fraction",
    "final_eval_weighted_accuracy",
)


def sweep(
    pool: Sequence[QAItem],
    networks: Mapping[str, TransitNetwork],
    cfg: TrainConfig,
    reward_cfg: RewardConfig,
    seeds: Sequence[int],
    modes: Sequence[str] = ("baseline", "rewardmap"),
    granularities: Sequence[str] = ("fine",),
    eval_items: Optional[Sequence[QAItem]] = None,
    eval_weights: Optional[Mapping[str, float]] = None,
    validity_threshold: float = 0.8,
) -> List[Dict[str, Any]]:
    """
    Train every mode x granularity x seed and summarize each run.

    Modes that ignore the plan (baseline, reward_design) run once per seed
    with granularity "none".
    """
    rows = []
    for mode in modes:
        mode_granularities = granularities if mode in ("rewardmap", "multi_stage") else ("none",)
        for granularity in mode_granularities:
            for seed in seeds:
                run_cfg = dataclasses.replace(cfg, seed=seed)
                plan = build_plan(pool, granularity, seed) if mode in ("rewardmap", "multi_stage") else None
                log = train(pool, plan, networks, run_cfg, reward_cfg, mode, eval_items, eval_weights)
                early = log.rows[: max(1, len(log.rows) // 4)]
                evals = [v for v in log.column("eval_weighted_accuracy") if v is not None]
                rows.append(
                    {
                        "mode": mode,
                        "granularity": granularity,
                        "seed": seed,
                        "steps": len(log.rows),
                        "steps_to_validity": steps_to_validity(log, validity_threshold),
                        "early_zero_reward_group_fraction": float(
                            np.mean([r["zero_reward_group_fraction"] for r in early])
                        ),
                        "final_eval_weighted_accuracy": evals[-1] if evals else None,
                    }
                )
                logger.info(f"Sweep run {mode}/{granularity}/seed {seed} done")
    return rows


def write_sweep_csv(rows: Sequence[Mapping[str, Any]], path: str):
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(SWEEP_COLUMNS), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({c: row.get(c) for c in SWEEP_COLUMNS})
