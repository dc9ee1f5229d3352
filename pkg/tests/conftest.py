import pytest

from rewardmap.qa_generator import QAItem, render_question
from rewardmap.transit_graph import TransitNetwork, min_transfer_route

#   L1: A - B - C - D - E
#   L2: F - C - G - H
#   L3: H - I - J
TINY_LINES = {
    "L1": ["A", "B", "C", "D", "E"],
    "L2": ["F", "C", "G", "H"],
    "L3": ["H", "I", "J"],
}


@pytest.fixture
def tiny_net():
    return TransitNetwork(network_id="tiny", difficulty="easy", lines=TINY_LINES)


@pytest.fixture
def mono_net():
    return TransitNetwork(
        network_id="mono",
        difficulty="easy",
        lines={"L1": ["S1", "S2", "S3", "S4", "S5", "S6"]},
    )


@pytest.fixture
def split_net():
    """Two components: L1/L2 share B, L3 stands alone"""
    return TransitNetwork(
        network_id="split",
        difficulty="medium",
        lines={"L1": ["A", "B", "C"], "L2": ["B", "D"], "L3": ["X", "Y", "Z"]},
    )


@pytest.fixture
def make_planning_item():
    def _make(net, origin, destination, qa_id=None, map_difficulty=None):
        route = min_transfer_route(net, origin, destination)
        params = {"stop_1": origin, "stop_2": destination}
        return QAItem(
            qa_id=qa_id or f"{net.network_id}-{origin}-{destination}",
            network_id=net.network_id,
            qtype="planning",
            question_text=render_question("planning", params),
            params=params,
            answer=route,
            map_difficulty=map_difficulty or net.difficulty,
            question_difficulty="easy" if route.transfer_count == 0 else "hard",
            transfer_count=route.transfer_count,
        )

    return _make


@pytest.fixture
def make_plus_item():
    def _make(qa_id, qtype="global_count", answer=3, map_difficulty="easy", network_id="tiny", params=None):
        params = params or {}
        return QAItem(
            qa_id=qa_id,
            network_id=network_id,
            qtype=qtype,
            question_text=render_question(qtype, params),
            params=params,
            answer=answer,
            map_difficulty=map_difficulty,
            question_difficulty=map_difficulty,
        )

    return _make
