import random

import pytest

from secure_consensus.codec import CodecConfig
from secure_consensus.paillier import keygen
from secure_consensus.protocol import ConsensusParams, NodeState

# 96-bit moduli leave headroom for w=64, S_a=2**16 and keep tests fast
FAST_KEY_BITS = 96


@pytest.fixture(scope="session")
def small_keys():
    rng = random.Random(1234)
    return [keygen(FAST_KEY_BITS, rng) for _ in range(8)]


@pytest.fixture
def make_node(small_keys):
    def factory(node_id, x, params=None, seed=0, keypair=None):
        params = params or ConsensusParams(0.1, 0.9)
        return NodeState(
            node_id,
            x,
            keypair or small_keys[node_id],
            params,
            random.Random(f"m{seed}/{node_id}"),
            random.Random(f"c{seed}/{node_id}"),
        )

    return factory


@pytest.fixture
def tiny_params():
    # N=10, S_a=1, w=16: hand-traceable integers
    return ConsensusParams(0.1, 4.0, CodecConfig(state_scale=10, weight_scale=1, signed_width=16))


# -- acceptance reporting: one line per criterion in the terminal summary --------

ACCEPTANCE_LINES: dict[int, str] = {}


class _Criterion:
    def __init__(self, number: int):
        self.number = number
        self.recorded = False

    def __call__(self, ok: bool, detail: str) -> None:
        self.recorded = True
        ACCEPTANCE_LINES[self.number] = f"criterion {self.number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        assert ok, detail


@pytest.fixture
def criterion(request):
    number = int(request.node.name.split("_")[2])
    rec = _Criterion(number)
    yield rec
    if not rec.recorded:
        ACCEPTANCE_LINES[number] = f"criterion {number:2d}: FAIL  (raised before reporting)"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
