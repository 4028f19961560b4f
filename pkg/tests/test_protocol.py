import random

import pytest

from secure_consensus.codec import CodecConfig, encode_signed
from secure_consensus.paillier import decrypt, encrypt
from secure_consensus.protocol import (
    ConsensusParams,
    HeadroomError,
    PacingError,
    ParameterError,
    ProtocolError,
    ResponseMessage,
    WeightedDifference,
    make_nodes,
    run_round,
)
from secure_consensus.signature import IntegrityError
from secure_consensus.topology import TopologySchedule
from secure_consensus.transport.pacing import Pacing

W = 64


def test_request_payload_zero_state(make_node):
    node = make_node(0, 0.0)
    req = node.make_request(1)
    assert decrypt(node.keypair.private, req.payload) == 0
    assert req.public_key == node.public_key and req.round == 0


def test_request_payload_negated_quantized_state(make_node):
    node = make_node(0, 1.5)
    req = node.make_request(1)
    assert decrypt(node.keypair.private, req.payload) == encode_signed(-1500000, W)


def test_requests_bookkeeping(make_node):
    node = make_node(0, 1.0)
    node.make_request(1)
    node.make_request(2)
    assert set(node.pending) == {(1, 0), (2, 0)}
    with pytest.raises(ProtocolError):
        node.make_request(1)


def test_response_equal_states_is_zero(make_node):
    a, b = make_node(0, 0.0), make_node(1, 0.0)
    resp = b.handle_request(a.make_request(1))
    assert decrypt(a.keypair.private, resp.payload) == 0


def test_small_number_trace(make_node, tiny_params):
    a = make_node(0, 0.0, tiny_params)
    b = make_node(1, 1.0, tiny_params)
    a.a_secret[0] = 2
    b.a_secret[0] = 3
    req = a.make_request(1)
    resp = b.handle_request(req)
    # direct integer arithmetic: 3 * (quantize(1.0)=10 - quantize(0.0)=0)
    assert decrypt(a.keypair.private, resp.payload) == 3 * (10 - 0)
    diff = a.handle_response(resp)
    assert diff.integer_value == 2 * 3 * 10
    assert diff.real_value == 6.0
    assert a.pending == {}


def test_zero_multiplier_response(make_node):
    a, b = make_node(0, 3.0), make_node(1, -7.25)
    b.a_secret[0] = 0
    resp = b.handle_request(a.make_request(1))
    assert decrypt(a.keypair.private, resp.payload) == 0


def test_response_of_encrypted_zero(make_node):
    a = make_node(0, 1.0)
    a.make_request(1)
    zero = encrypt(a.public_key, 0, random.Random(0))
    assert a.handle_response(ResponseMessage(1, 0, 0, zero)).integer_value == 0


def test_antisymmetry_both_directions(make_node):
    a, b = make_node(0, 0.3), make_node(1, -2.7)
    d_ab = a.handle_response(b.handle_request(a.make_request(1)))
    d_ba = b.handle_response(a.handle_request(b.make_request(0)))
    assert d_ab.integer_value == -d_ba.integer_value != 0


def test_unknown_response_rejected(make_node):
    a = make_node(0, 1.0)
    zero = encrypt(a.public_key, 0, random.Random(0))
    with pytest.raises(ProtocolError):
        a.handle_response(ResponseMessage(1, 0, 0, zero))


def test_headroom_violation_detected(make_node):
    a = make_node(0, 1.0)
    a.make_request(1)
    huge = encrypt(a.public_key, a.public_key.n - 1, random.Random(0))
    with pytest.raises(HeadroomError):
        a.handle_response(ResponseMessage(1, 0, 0, huge))


def test_request_pacing(make_node):
    a, b = make_node(0, 1.0), make_node(1, 2.0)
    req = a.make_request(1)
    b.apply_update([])
    with pytest.raises(PacingError) as info:
        b.handle_request(req)
    assert info.value.verdict is Pacing.REJECT


def test_apply_update_empty(make_node):
    node = make_node(0, 4.5)
    node.apply_update([])
    assert node.x == 4.5 and node.round == 1 and 1 in node.a_secret


def test_apply_update_arithmetic(make_node):
    node = make_node(0, 0.0)
    node.params = ConsensusParams(0.1, 0.9)
    node.apply_update([WeightedDifference(0, 1, 0, 60, 10)])
    assert node.x == pytest.approx(0.6, abs=1e-15)


def test_apply_update_rejects_foreign_round(make_node):
    node = make_node(0, 0.0)
    with pytest.raises(ProtocolError):
        node.apply_update([WeightedDifference(0, 1, 5, 60, 10)])


def test_two_node_network_step(make_node):
    # a_12 = 2*3/10**2 = 0.06 with S_a=10; x = (0,1), eps = 0.1
    params = ConsensusParams(0.1, 0.9, CodecConfig(state_scale=10**6, weight_scale=10))
    a, b = make_node(0, 0.0, params), make_node(1, 1.0, params)
    a.a_secret[0], b.a_secret[0] = 2, 3
    run_round([a, b], TopologySchedule.static(2, [(0, 1)]))
    assert a.x == pytest.approx(0.006, abs=1e-12)
    assert b.x == pytest.approx(0.994, abs=1e-12)
    assert a.x + b.x == pytest.approx(1.0, abs=1e-15)


def test_round_without_edges(make_node):
    nodes = [make_node(i, float(i)) for i in range(3)]
    rec = run_round(nodes, TopologySchedule(3, [[]]))
    assert [n.x for n in nodes] == [0.0, 1.0, 2.0]
    assert rec.diffs == {} and all(n.round == 1 for n in nodes)


def test_round_moves_pair_symmetrically(make_node):
    a, b = make_node(0, -3.0), make_node(1, 5.0)
    rec = run_round([a, b], TopologySchedule.static(2, [(0, 1)]))
    assert rec.diffs[(0, 1)] == -rec.diffs[(1, 0)]
    assert a.x - (-3.0) == pytest.approx(5.0 - b.x, abs=1e-12)


def test_fresh_multiplier_each_round(make_node):
    node = make_node(0, 0.0)
    for _ in range(20):
        node.apply_update([])
    draws = [node.a_secret[k] for k in range(21)]
    assert len(set(draws)) > 15
    assert all(0 <= d <= node.params.multiplier_max for d in draws)


def test_params_validation():
    sched = TopologySchedule.static(3, [(0, 1), (1, 2)])  # max degree 2
    ConsensusParams(0.49, 0.9).validate(sched)
    with pytest.raises(ParameterError):
        ConsensusParams(0.5, 0.9).validate(sched)
    with pytest.raises(ParameterError):
        ConsensusParams(0.1, 1.0).validate(sched)
    ConsensusParams(1.0, 2.0).validate(sched, allow_unstable=True)


def test_signed_nodes_roundtrip():
    params = ConsensusParams(0.3, 0.9)
    nodes = make_nodes([1.0, 2.0], params, 96, seed=5, signatures=True)
    run_round(nodes, TopologySchedule.static(2, [(0, 1)]))
    assert nodes[0].x + nodes[1].x == pytest.approx(3.0, abs=1e-12)
    unsigned = make_nodes([1.0, 2.0], params, 96, seed=5)[0]
    packet = unsigned.seal(unsigned.make_request(1))
    with pytest.raises(IntegrityError):
        nodes[1].open(packet)
