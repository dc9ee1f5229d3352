import numpy as np
import pytest

from rewardmap.answer_format import ParsedAnswer, RouteAnswer, parse_route, serialize_route
from rewardmap.errors import GenerationError, UsageError
from rewardmap.qa_generator import generate_planning
from rewardmap.reward_engine import (
    RewardConfig,
    RewardEngine,
    compose,
    correctness_planning,
    correctness_plus,
    detail_reward,
    difficulty_weight,
    score_record,
    summarize_scores,
    weighted_accuracy,
    weighted_map_score,
)
from rewardmap.transit_graph import NetworkSpec, generate_synthetic_network


def _route(*segments):
    return ParsedAnswer.route(RouteAnswer(tuple(segments)))


"""
-------------------------------------------------------------
    CORRECTNESS
-------------------------------------------------------------
"""


def test_correctness_plus(make_plus_item):
    item = make_plus_item("q1", qtype="global_count", answer=3)
    engine = RewardEngine()
    assert correctness_plus(item, engine.parse(item, "\\boxed{3}")) == 1.0
    assert correctness_plus(item, engine.parse(item, "\\boxed{03.}")) == 1.0
    assert correctness_plus(item, engine.parse(item, "\\boxed{4}")) == 0.0
    assert correctness_plus(item, engine.parse(item, "3")) == 0.0

    torf = make_plus_item("q2", qtype="torf_1", answer="no", params={"stop_1": "A", "stop_2": "G"})
    assert correctness_plus(torf, engine.parse(torf, "\\boxed{\\text{No}}")) == 1.0


def test_correctness_plus_rejects_planning_items(tiny_net, make_planning_item):
    item = make_planning_item(tiny_net, "A", "J")
    with pytest.raises(UsageError):
        correctness_plus(item, ParsedAnswer.scalar("yes"))


def test_correctness_planning(tiny_net, make_planning_item):
    item = make_planning_item(tiny_net, "A", "G")
    assert correctness_planning(item, _route(("L1", "A", "C"), ("L2", "C", "G")), tiny_net) == 1.0
    # any valid route between the right endpoints counts, optimal or not
    assert correctness_planning(
        item, _route(("L1", "A", "C"), ("L2", "C", "H"), ("L2", "H", "G")), tiny_net
    ) == 1.0
    # names resolve after casefolding and whitespace collapse
    assert correctness_planning(item, parse_route("take l1 from a to  c\ntake L2 from C to g"), tiny_net) == 1.0
    # wrong destination, broken chain, malformed
    assert correctness_planning(item, _route(("L1", "A", "C"), ("L2", "C", "H")), tiny_net) == 0.0
    assert correctness_planning(item, _route(("L1", "A", "D"), ("L2", "C", "G")), tiny_net) == 0.0
    assert correctness_planning(item, ParsedAnswer.malformed(), tiny_net) == 0.0


def test_correctness_planning_needs_the_items_network(tiny_net, mono_net, make_planning_item):
    item = make_planning_item(tiny_net, "A", "G")
    with pytest.raises(UsageError):
        correctness_planning(item, _route(("L1", "A", "C")), mono_net)
    with pytest.raises(UsageError):
        correctness_planning(item, _route(("L1", "A", "C")), None)


"""
-------------------------------------------------------------
    DETAIL REWARD
-------------------------------------------------------------
"""


def test_detail_reward_hand_computed(tiny_net, make_planning_item):
    cfg = RewardConfig()
    item = make_planning_item(tiny_net, "A", "J")  # L1 -> L2 -> L3, two transfers

    exact = _route(("L1", "A", "C"), ("L2", "C", "H"), ("L3", "H", "J"))
    # +2 endpoints, +4 first line, +1 per chained non-final segment
    assert detail_reward(item, exact, tiny_net, cfg) == 8.0

    # four segments on a two-transfer question: the last one costs 5
    long_way = _route(("L1", "A", "C"), ("L2", "C", "G"), ("L2", "G", "H"), ("L3", "H", "J"))
    assert detail_reward(item, long_way, tiny_net, cfg) == 2 + 4 + 3 - 5

    # unknown stops never earn the chaining point, and there is no floor
    item_direct = make_planning_item(tiny_net, "A", "E")
    lost = _route(("LX", "Q", "R"), ("LX", "R", "S"), ("LX", "S", "T"))
    assert detail_reward(item_direct, lost, tiny_net, cfg) == -10.0

    assert detail_reward(item, ParsedAnswer.malformed(), tiny_net, cfg) == 0.0


def test_detail_reward_cap(tiny_net, make_planning_item):
    item = make_planning_item(tiny_net, "A", "J")
    exact = _route(("L1", "A", "C"), ("L2", "C", "H"), ("L3", "H", "J"))
    assert detail_reward(item, exact, tiny_net, RewardConfig(detail_cap=5.0)) == 5.0


def _reference_detail(answer_segments, item, net, cap):
    """Step-by-step transcription of the detail-reward pipeline"""

    def norm(name):
        return " ".join(name.split()).casefold()

    stations = set(norm(s) for s in net.stops)
    score = 0
    if norm(answer_segments[0][1]) == norm(item.params["stop_1"]) or norm(answer_segments[-1][2]) == norm(
        item.params["stop_2"]
    ):
        score = score + 2
    current_transfer_times = 0
    for i in range(len(answer_segments)):
        line, departure, arrival = answer_segments[i]
        if current_transfer_times > item.transfer_count:
            score = score - 5
        if current_transfer_times == 0 and norm(line) == norm(item.answer.segments[0].line):
            score = score + 4
        if norm(departure) in stations and norm(arrival) in stations:
            if i != len(answer_segments) - 1:
                if norm(arrival) == norm(answer_segments[i + 1][1]):
                    score = score + 1
        current_transfer_times = current_transfer_times + 1
    return min(score, cap)


def _mangle(name, rng):
    choice = rng.integers(4)
    if choice == 0:
        return name.upper()
    if choice == 1:
        return f"  {name} "
    return name


def test_detail_reward_matches_reference_on_fuzzed_routes():
    rng = np.random.default_rng(2024)
    spec = NetworkSpec(line_count=4, min_stops=4, max_stops=6)
    cases = []
    for seed in range(10):
        try:
            net = generate_synthetic_network(seed, spec)
        except GenerationError:
            continue
        cases.extend((net, item) for item in generate_planning(net, seed, 10))

    cfg = RewardConfig()
    checked = 0
    while checked < 1000:
        net, item = cases[int(rng.integers(len(cases)))]
        stops = list(net.stops) + ["Nowhere", "Elsewhere"]
        lines = list(net.line_names) + ["LX"]
        length = int(rng.integers(1, 6))
        segments = []
        for _ in range(length):
            departure = segments[-1][2] if segments and rng.random() < 0.7 else stops[int(rng.integers(len(stops)))]
            segments.append(
                (
                    lines[int(rng.integers(len(lines)))],
                    _mangle(departure, rng),
                    _mangle(stops[int(rng.integers(len(stops)))], rng),
                )
            )
        if rng.random() < 0.3:
            segments[0] = (segments[0][0], item.params["stop_1"], segments[0][2])
        if rng.random() < 0.3:
            segments[0] = (item.answer.segments[0].line, segments[0][1], segments[0][2])

        parsed = _route(*segments)
        assert detail_reward(item, parsed, net, cfg) == _reference_detail(segments, item, net, cfg.detail_cap)
        checked += 1


"""
-------------------------------------------------------------
    WEIGHTS AND COMPOSITION
-------------------------------------------------------------
"""


def test_difficulty_weight(tiny_net, make_planning_item, make_plus_item):
    cfg = RewardConfig()
    assert difficulty_weight(make_planning_item(tiny_net, "A", "E"), cfg) == (0.5, 0.25)
    assert difficulty_weight(make_planning_item(tiny_net, "A", "J"), cfg) == (0.5, 0.5)
    assert difficulty_weight(make_plus_item("q", map_difficulty="hard"), cfg) == (1.0, 0.25)
    assert difficulty_weight(make_plus_item("q", map_difficulty="medium"), cfg) == (0.75, 0.25)


def test_compose_formula_and_linearity():
    rng = np.random.default_rng(7)
    for _ in range(500):
        r_format, r_correct = float(rng.integers(2)), float(rng.integers(2))
        r_detail = float(rng.integers(-15, 11))
        alpha = float(rng.uniform(0, 2))
        w_map, w_question = float(rng.uniform(0.1, 2)), float(rng.uniform(0, 1))
        cfg = RewardConfig(alpha=alpha)

        breakdown = compose(r_format, r_correct, r_detail, (w_map, w_question), cfg)
        expected = (w_map + w_question) * (r_format + r_correct + alpha * r_detail)
        assert abs(breakdown.total - expected) <= 1e-12 * max(1.0, abs(expected))
        assert breakdown.w_difficulty == w_map + w_question

        for c in (0.5, 2.0, 4.0):
            scaled = compose(r_format, r_correct, r_detail, (c * w_map, c * w_question), cfg)
            assert scaled.total == c * breakdown.total


def test_compose_ignores_detail_for_non_planning():
    breakdown = compose(1.0, 1.0, 7.0, (1.0, 0.25), RewardConfig(), is_planning=False)
    assert breakdown.r_detail == 0.0
    assert breakdown.total == 2.5


def test_reward_config_validation():
    with pytest.raises(UsageError):
        RewardConfig(alpha=-0.1)
    with pytest.raises(UsageError):
        RewardConfig(gamma_hard=0.0)
    with pytest.raises(UsageError):
        RewardConfig.from_mapping({"alpha": 0.5, "delta": 1})
    baseline = RewardConfig.baseline()
    assert baseline.alpha == 0.0
    assert baseline.gamma("hard") + baseline.beta_1 == 1.0


"""
-------------------------------------------------------------
    ENGINE
-------------------------------------------------------------
"""


def test_engine_scores_a_hand_built_fixture(tiny_net, make_planning_item, make_plus_item):
    engine = RewardEngine(RewardConfig())
    global_count = make_plus_item("count", qtype="global_count", answer=3)
    direct = make_planning_item(tiny_net, "A", "E")
    two_transfers = make_planning_item(tiny_net, "A", "J")

    # w = 0.5 + 0.25; format + correct
    assert engine.score(global_count, "\\boxed{3}", tiny_net).total == pytest.approx(1.5)
    assert engine.score(global_count, "\\boxed{4}", tiny_net).total == pytest.approx(0.75)
    assert engine.score(global_count, "three", tiny_net).total == 0.0

    # w = 0.5 + 0.25; detail 2 + 4 = 6
    assert engine.score(direct, "take L1 from A to E", tiny_net).total == pytest.approx(0.75 * (2 + 0.5 * 6))
    # w = 0.5 + 0.5; detail 8
    answer = serialize_route(two_transfers.answer.segments)
    breakdown = engine.score(two_transfers, answer, tiny_net)
    assert (breakdown.r_format, breakdown.r_correct, breakdown.r_detail) == (1.0, 1.0, 8.0)
    assert breakdown.total == pytest.approx(6.0)

    # wrong destination with an extra transfer: 2 + 4 + 1 - 5 = 2
    detour = engine.score(direct, serialize_route([("L1", "A", "C"), ("L2", "C", "G")]), tiny_net)
    assert (detour.r_correct, detour.r_detail) == (0.0, 2.0)
    assert detour.total == pytest.approx(0.75 * (1 + 0.5 * 2))


def test_baseline_engine_gives_flat_rewards_to_wrong_routes(tiny_net, make_planning_item):
    """Formatted but wrong answers all score the same without the detail term"""
    item = make_planning_item(tiny_net, "A", "J")
    answers = [
        serialize_route([("L1", "A", "C")]),
        serialize_route([("L1", "A", "C"), ("L2", "C", "G")]),
        serialize_route([("L1", "A", "C"), ("L2", "C", "H")]),
        serialize_route([("L2", "F", "H"), ("L3", "H", "J")]),
    ]
    baseline = RewardEngine(RewardConfig.baseline())
    full = RewardEngine(RewardConfig())
    assert len({baseline.score(item, a, tiny_net).total for a in answers}) == 1
    assert len({full.score(item, a, tiny_net).total for a in answers}) > 1


"""
-------------------------------------------------------------
    EVALUATION METRICS AND REPORTS
-------------------------------------------------------------
"""


def test_weighted_accuracy_fixture(make_plus_item):
    results = [
        (make_plus_item("e", map_difficulty="easy"), True),
        (make_plus_item("m", map_difficulty="medium"), False),
        (make_plus_item("h", map_difficulty="hard"), True),
    ]
    assert abs(weighted_accuracy(results, {"easy": 1.0, "medium": 1.5, "hard": 2.0}) - 3.0 / 4.5) <= 1e-12
    with pytest.raises(UsageError):
        weighted_accuracy([])


def test_weighted_map_score(tiny_net, make_planning_item, make_plus_item):
    easy = make_planning_item(tiny_net, "A", "E", map_difficulty="easy")
    hard = make_planning_item(tiny_net, "A", "J", map_difficulty="hard")
    assert weighted_map_score([(easy, 6.0), (hard, 0.0)]) == pytest.approx(6.0 / 3.0)
    with pytest.raises(UsageError):
        weighted_map_score([(make_plus_item("q"), 1.0)])


def test_summarize_scores(tiny_net, make_planning_item, make_plus_item):
    engine = RewardEngine()
    count = make_plus_item("count", answer=3)
    route = make_planning_item(tiny_net, "A", "J")
    scored = [
        (count, engine.score(count, "\\boxed{3}", tiny_net)),
        (route, engine.score(route, "no idea", tiny_net)),
    ]
    report = summarize_scores(scored, engine.cfg, error_count=1)
    assert set(report) == {"summary", "per_type", "metadata"}
    assert report["summary"]["items_scored"] == 2
    assert report["summary"]["items_with_errors"] == 1
    assert report["summary"]["weighted_accuracy"] == pytest.approx(0.5)
    assert report["summary"]["weighted_map_score"] == 0.0
    assert report["per_type"]["global_count"]["accuracy"] == 1.0
    assert "planning_correctness" in report["metadata"]["substitutes"]

    record = score_record(count, "\\boxed{3}", scored[0][1])
    assert record["correct"] is True and record["error"] is None
    assert record["breakdown"]["total"] == pytest.approx(1.5)
