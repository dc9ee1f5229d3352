"""
Question Generation
Counting, true-or-false and planning questions rendered from fixed templates,
with answers taken from the transit-graph oracles
"""

import dataclasses
import json
from collections import Counter
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union

from rewardmap.errors import (
    BalancingError,
    EmptySplitError,
    GenerationError,
    ParseError,
    UsageError,
)
from rewardmap.transit_graph import (
    Route,
    TransitNetwork,
    connected_pairs,
    intermediate_stop_count,
    lines_through,
    min_transfer_route,
    share_line,
    validate_route,
)
from rewardmap.utils.run_log import get_logger
from rewardmap.utils.seeding import derive_seed, make_rng

logger = get_logger("qa_generator")

QTYPES = (
    "local_count_1",
    "local_count_2",
    "global_count",
    "torf_1",
    "torf_2",
    "planning",
)
PLUS_QTYPES = QTYPES[:5]
TORF_QTYPES = ("torf_1", "torf_2")
OPTION_LETTERS = ("A", "B", "C", "D")
SPLITS = ("train", "test")

TEMPLATES = {
    "local_count_1": (
        'Please solve the multiple choice problem and put your answer (one of ABCD) in one "\\boxed{}". '
        "According to the subway map, how many intermediate stops are there between {stop 1} and "
        "{stop 2} (except for this two stops)?\n"
        "A) {x}\nB) {x}\nC) {x}\nD) {x}"
    ),
    "local_count_2": (
        'Please solve the problem and put your answer in one "\\boxed{}". '
        "According to the subway map, how many lines pass through {stop 1}?"
    ),
    "global_count": (
        'Please solve the problem and put your answer in one "\\boxed{}". '
        "According to the subway map, how many subway (metro) lines are there in total?"
    ),
    "torf_1": (
        'Please solve the problem and put your answer (only answer yes or no) in one "\\boxed{}". '
        "According to the subway map, is it true that {stop 1} is the same line as {stop 2}?"
    ),
    "torf_2": (
        'Please solve the problem and put your answer (only answer yes or no) in one "\\boxed{}". '
        "According to the subway map, is it true that {stop 1} is on the {line x}?"
    ),
    "planning": (
        'Please solve the problem and give your route as one "take <line> from <stop> to <stop>" '
        "line per segment. According to the subway map, plan a route from {stop 1} to {stop 2}, "
        "listing each line and transfer."
    ),
}

Answer = Union[str, int, Route]


@dataclass(frozen=True)
class QAItem:
    qa_id: str
    network_id: str
    qtype: str
    question_text: str
    params: Dict[str, Any]
    answer: Answer
    map_difficulty: str
    question_difficulty: str
    options: Optional[Tuple[str, ...]] = None
    transfer_count: int = 0
    split: str = "train"

    def __post_init__(self):
        if self.qtype not in QTYPES:
            raise UsageError(f"Unknown question type '{self.qtype}'")
        if self.split not in SPLITS:
            raise UsageError(f"Unknown split '{self.split}'")
        if self.options is not None:
            object.__setattr__(self, "options", tuple(self.options))

    @property
    def is_planning(self) -> bool:
        return self.qtype == "planning"

    def with_split(self, split: str) -> "QAItem":
        return dataclasses.replace(self, split=split)

    def to_record(self) -> Dict[str, Any]:
        answer = self.answer.to_records() if isinstance(self.answer, Route) else self.answer
        return {
            "qa_id": self.qa_id,
            "network_id": self.network_id,
            "qtype": self.qtype,
            "question_text": self.question_text,
            "params": dict(self.params),
            "options": list(self.options) if self.options is not None else None,
            "answer": answer,
            "map_difficulty": self.map_difficulty,
            "question_difficulty": self.question_difficulty,
            "transfer_count": self.transfer_count,
            "split": self.split,
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "QAItem":
        answer = record["answer"]
        if record["qtype"] == "planning":
            answer = Route.from_records(answer)
        return cls(
            qa_id=record["qa_id"],
            network_id=record["network_id"],
            qtype=record["qtype"],
            question_text=record["question_text"],
            params=dict(record.get("params") or {}),
            answer=answer,
            map_difficulty=record["map_difficulty"],
            question_difficulty=record["question_difficulty"],
            options=record.get("options"),
            transfer_count=int(record.get("transfer_count", 0)),
            split=record.get("split", "train"),
        )


def render_question(qtype: str, params: Mapping[str, Any], options: Sequence[str] = ()) -> str:
    """Fill a template's slots by plain substitution"""
    text = TEMPLATES[qtype]
    slots = {
        "{stop 1}": params.get("stop_1"),
        "{stop 2}": params.get("stop_2"),
        "{line x}": params.get("line_x"),
    }
    for slot, value in slots.items():
        if value is not None:
            text = text.replace(slot, str(value))
    for option in options:
        text = text.replace("{x}", str(option), 1)
    return text


def make_distractors(true_count: int, seed: int) -> List[int]:
    """
    Four distinct non-negative options, one of them the true count.

    Distractors come from true±1..3 (padded from a widening window near 0),
    and the true value lands on a uniformly drawn position.
    """
    if true_count < 0:
        raise UsageError(f"true_count must be >= 0, got {true_count}")
    rng = make_rng("distractors", seed)
    pool = [
        v
        for offset in (1, 2, 3)
        for v in (true_count - offset, true_count + offset)
        if v >= 0
    ]
    width = 4
    while len(pool) < 3:
        pool.append(true_count + width)
        width += 1

    chosen = [pool[int(i)] for i in rng.choice(len(pool), size=3, replace=False)]
    chosen.insert(int(rng.integers(4)), true_count)
    return chosen


# --- Parameter settings and item construction ---


def _settings(net: TransitNetwork, qtype: str) -> List[Tuple]:
    """Every distinct parameter setting of a question type, in a fixed order"""
    stops = net.stops
    if qtype == "local_count_1":
        settings = []
        for line, line_stops in net.lines.items():
            for i, a in enumerate(line_stops):
                for b in line_stops[i + 1 :]:
                    # only pairs whose one shared line is this one, so the count is unique
                    if lines_through(net, a) & lines_through(net, b) == {line}:
                        settings.append((line, a, b))
        return settings
    if qtype == "local_count_2":
        return [(s,) for s in stops]
    if qtype == "global_count":
        return [()]
    if qtype == "torf_1":
        return [(a, b) for i, a in enumerate(stops) for b in stops[i + 1 :]]
    if qtype == "torf_2":
        return [(s, line) for s in stops for line in net.line_names]
    if qtype == "planning":
        return connected_pairs(net)
    raise UsageError(f"Unknown question type '{qtype}'")


def _build_item(
    net: TransitNetwork, qtype: str, qa_id: str, setting: Tuple, seed: int
) -> QAItem:
    options = None
    transfer_count = 0
    question_difficulty = net.difficulty

    if qtype == "local_count_1":
        line, a, b = setting
        params = {"stop_1": a, "stop_2": b, "line": line}
        true_count = intermediate_stop_count(net, line, a, b)
        values = make_distractors(true_count, derive_seed(seed, qa_id))
        options = tuple(str(v) for v in values)
        answer = OPTION_LETTERS[values.index(true_count)]
    elif qtype == "local_count_2":
        params = {"stop_1": setting[0]}
        answer = len(lines_through(net, setting[0]))
    elif qtype == "global_count":
        params = {}
        answer = len(net.lines)
    elif qtype == "torf_1":
        params = {"stop_1": setting[0], "stop_2": setting[1]}
        answer = "yes" if share_line(net, *setting) else "no"
    elif qtype == "torf_2":
        params = {"stop_1": setting[0], "line_x": setting[1]}
        answer = "yes" if setting[1] in lines_through(net, setting[0]) else "no"
    else:
        params = {"stop_1": setting[0], "stop_2": setting[1]}
        answer = min_transfer_route(net, *setting)
        transfer_count = answer.transfer_count
        question_difficulty = "easy" if transfer_count == 0 else "hard"

    return QAItem(
        qa_id=qa_id,
        network_id=net.network_id,
        qtype=qtype,
        question_text=render_question(qtype, params, options or ()),
        params=params,
        answer=answer,
        map_difficulty=net.difficulty,
        question_difficulty=question_difficulty,
        options=options,
        transfer_count=transfer_count,
    )


def verify_item(item: QAItem, net: TransitNetwork):
    """
    Re-derive an item's answer from the oracles and compare.

    Raises:
        GenerationError: the stored answer disagrees with the network
    """
    if item.network_id != net.network_id:
        raise UsageError(f"Item {item.qa_id} belongs to {item.network_id}, not {net.network_id}")
    p = item.params
    if item.qtype == "local_count_1":
        count = intermediate_stop_count(net, p["line"], p["stop_1"], p["stop_2"])
        options = item.options or ()
        ok = (
            len(options) == 4
            and list(options).count(str(count)) == 1
            and options[OPTION_LETTERS.index(item.answer)] == str(count)
        )
    elif item.qtype == "local_count_2":
        ok = item.answer == len(lines_through(net, p["stop_1"]))
    elif item.qtype == "global_count":
        ok = item.answer == len(net.line_names)
    elif item.qtype == "torf_1":
        shared = bool(lines_through(net, p["stop_1"]) & lines_through(net, p["stop_2"]))
        ok = item.answer == ("yes" if shared else "no")
    elif item.qtype == "torf_2":
        ok = item.answer == ("yes" if net.position(p["line_x"], p["stop_1"]) is not None else "no")
    else:
        route = min_transfer_route(net, p["stop_1"], p["stop_2"])
        ok = (
            item.answer == route
            and not validate_route(net, item.answer.segments)
            and item.transfer_count == route.transfer_count
        )
    if not ok:
        raise GenerationError(f"Item {item.qa_id} ({item.qtype}) failed oracle re-verification")


def _draw(net: TransitNetwork, qtype: str, seed: int, count: int) -> List[QAItem]:
    settings = _settings(net, qtype)
    if count > len(settings):
        raise GenerationError(
            f"Quota for {qtype} is {count} but network {net.network_id} "
            f"only has {len(settings)} distinct settings"
        )
    rng = make_rng("qa", net.network_id, seed, qtype)
    picks = rng.choice(len(settings), size=count, replace=False) if count else []
    items = []
    for index, pick in enumerate(picks):
        qa_id = f"{net.network_id}-{qtype}-{index:04d}"
        item = _build_item(net, qtype, qa_id, settings[int(pick)], seed)
        verify_item(item, net)
        items.append(item)
    return items


def generate_planning(net: TransitNetwork, seed: int, count: int) -> List[QAItem]:
    """Planning items whose answers are minimum-transfer routes between connected stops"""
    return _draw(net, "planning", seed, count)


def generate(net: TransitNetwork, seed: int, quota: Mapping[str, int]) -> List[QAItem]:
    """
    Generate questions for one network.

    Args:
        net: Source network
        seed: Root seed; each (network, type) draws from its own derived stream
        quota: Per-type counts; global_count may be 0 or 1 here, while the
            genqa pipeline requires exactly 1

    Returns:
        Items grouped by type in QTYPES order
    """
    unknown = sorted(set(quota) - set(QTYPES))
    if unknown:
        raise UsageError(f"Unknown question types in quota: {', '.join(unknown)}")
    if quota.get("global_count", 0) not in (0, 1):
        raise GenerationError(
            f"Quota for global_count must be 0 or 1 per network, got {quota['global_count']}"
        )
    items = []
    for qtype in QTYPES:
        count = int(quota.get(qtype, 0))
        if count < 0:
            raise GenerationError(f"Quota for {qtype} is negative ({count})")
        items.extend(_draw(net, qtype, seed, count))
    logger.info(f"Generated {len(items)} items for {net.network_id}")
    return items


# --- Yes/no balancing ---


def balance_yes_no(
    items: List[QAItem], seed: int, networks: Mapping[str, TransitNetwork]
) -> List[QAItem]:
    """
    Balance yes/no answers within each true-or-false type.

    Majority-answer items are re-drawn on their own network with a fresh
    parameter setting carrying the minority answer; answers are never
    flipped. When the network pool runs out of minority settings, surplus
    majority items are dropped so the counts differ by at most one.

    Raises:
        BalancingError: imbalance remains and no minority setting exists at all
    """
    result: List[Optional[QAItem]] = list(items)
    for qtype in TORF_QTYPES:
        indexes = [i for i, item in enumerate(result) if item.qtype == qtype]
        counts = Counter(result[i].answer for i in indexes)
        majority = "yes" if counts["yes"] >= counts["no"] else "no"
        minority = "no" if majority == "yes" else "yes"
        needed = (counts[majority] - counts[minority]) // 2
        if needed == 0:
            continue

        rng = make_rng("balance", seed, qtype)
        used: Dict[str, Set[Tuple]] = {}
        for i in indexes:
            item = result[i]
            used.setdefault(item.network_id, set()).add(_setting_of(item))

        majority_indexes = [i for i in indexes if result[i].answer == majority]
        order = [majority_indexes[int(j)] for j in rng.permutation(len(majority_indexes))]
        converted = 0
        untouched = []
        for i in order:
            if converted == needed:
                untouched.append(i)
                continue
            item = result[i]
            net = networks.get(item.network_id)
            if net is None:
                raise UsageError(f"No network '{item.network_id}' to rebalance {item.qa_id}")
            candidates = [
                s
                for s in _settings(net, qtype)
                if s not in used[item.network_id]
                and _oracle_torf(net, qtype, s) == minority
            ]
            if not candidates:
                untouched.append(i)
                continue
            setting = candidates[int(rng.integers(len(candidates)))]
            used[item.network_id].add(setting)
            replacement = _build_item(net, qtype, item.qa_id, setting, seed)
            replacement = replacement.with_split(item.split)
            verify_item(replacement, net)
            result[i] = replacement
            converted += 1

        if converted < needed:
            if counts[minority] + converted == 0:
                raise BalancingError(
                    f"Cannot balance {qtype}: {counts[majority]} '{majority}' answers and "
                    f"no '{minority}' setting left on any network"
                )
            surplus = (counts[majority] - converted) - (counts[minority] + converted) - 1
            dropped = sorted(untouched[:surplus])
            logger.warning(
                f"{qtype}: only {converted} of {needed} items could be resampled; "
                f"dropping {len(dropped)} surplus '{majority}' items"
            )
            for i in dropped:
                result[i] = None
        logger.info(f"{qtype}: resampled {converted} '{majority}' items to '{minority}'")
    return [item for item in result if item is not None]


def _setting_of(item: QAItem) -> Tuple:
    p = item.params
    if item.qtype == "torf_1":
        return (p["stop_1"], p["stop_2"])
    return (p["stop_1"], p["line_x"])


def _oracle_torf(net: TransitNetwork, qtype: str, setting: Tuple) -> str:
    if qtype == "torf_1":
        return "yes" if share_line(net, *setting) else "no"
    return "yes" if setting[1] in lines_through(net, setting[0]) else "no"


# --- Splits ---


def choose_holdout(
    network_ids: Iterable[str],
    seed: int,
    count: Optional[int] = None,
    fraction: Optional[float] = None,
) -> Set[str]:
    """Seeded choice of held-out networks by explicit count or by fraction"""
    ids = sorted(set(network_ids))
    if count is None:
        count = int(round((fraction or 0.0) * len(ids)))
    if not 0 <= count <= len(ids):
        raise UsageError(f"Cannot hold out {count} of {len(ids)} networks")
    order = make_rng("holdout", seed).permutation(len(ids))
    return {ids[int(i)] for i in order[:count]}


def split_dataset(
    items: Sequence[QAItem], holdout_network_ids: Set[str]
) -> Tuple[List[QAItem], List[QAItem]]:
    """
    Partition items by network: held-out networks go to test.

    Raises:
        UsageError: a holdout id names no observed network
        EmptySplitError: either split is empty (both splits attached)
    """
    observed = {item.network_id for item in items}
    unknown = sorted(set(holdout_network_ids) - observed)
    if unknown:
        raise UsageError(f"Holdout networks not in the dataset: {', '.join(unknown)}")

    train = [i.with_split("train") for i in items if i.network_id not in holdout_network_ids]
    test = [i.with_split("test") for i in items if i.network_id in holdout_network_ids]
    if not train or not test:
        empty = "train" if not train else "test"
        message = f"The {empty} split is empty ({len(train)} train / {len(test)} test items)"
        logger.warning(message)
        raise EmptySplitError(message, train, test)
    return train, test


# --- Files and reports ---


def write_dataset(items: Iterable[QAItem], path: str):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for item in items:
            f.write(json.dumps(item.to_record(), ensure_ascii=False) + "\n")


def read_dataset(path: str) -> List[QAItem]:
    items = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                items.append(QAItem.from_record(json.loads(line)))
            except json.JSONDecodeError as e:
                raise ParseError(f"Malformed dataset record in {path}: {e.msg}", line=lineno)
            except (KeyError, TypeError) as e:
                raise ParseError(f"Incomplete dataset record in {path}: {e}", line=lineno)
    return items


def dataset_report(items: Sequence[QAItem]) -> Dict[str, Any]:
    """Balance report: yes/no per true-or-false type, per-type counts and difficulty histograms"""
    report = {
        "total_items": len(items),
        "per_type": {q: 0 for q in QTYPES},
        "yes_no": {q: {"yes": 0, "no": 0} for q in TORF_QTYPES},
        "map_difficulty": {"easy": 0, "medium": 0, "hard": 0},
        "question_difficulty": {"easy": 0, "medium": 0, "hard": 0},
        "per_split": {s: 0 for s in SPLITS},
        "networks": sorted({item.network_id for item in items}),
    }
    for item in items:
        report["per_type"][item.qtype] += 1
        report["map_difficulty"][item.map_difficulty] += 1
        report["question_difficulty"][item.question_difficulty] += 1
        report["per_split"][item.split] += 1
        if item.qtype in TORF_QTYPES:
            report["yes_no"][item.qtype][item.answer] += 1
    return report
