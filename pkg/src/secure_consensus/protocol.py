"""Per-node confidential interaction protocol and the discrete-time update.

For one directed exchange ``i -> j -> i`` in round ``k``:

1. ``i`` sends ``E_i(-x_i)`` together with its public key.
2. ``j`` encrypts ``x_j`` under ``i``'s key, adds the two ciphertexts and
   raises the sum to its private multiplier ``a_j``, giving ``E_i(a_j (x_j - x_i))``.
3. ``i`` decrypts and multiplies by its own multiplier ``a_i``.

Both directions of every active edge run each round, so the coupling weight
``a_i a_j`` is symmetric and the two weighted differences are exact integer
negatives of each other. States stay in double precision between rounds and
are re-quantized at every send.
"""

from __future__ import annotations

import logging
import math
import random
import time
from collections.abc import Sequence
from dataclasses import dataclass, field

from .codec import CodecConfig, decode_signed, encode_signed, quantize
from .paillier import (
    Ciphertext,
    PaillierKeyPair,
    PaillierPublicKey,
    decrypt,
    encrypt,
    hom_add,
    keygen,
    scalar_mul,
)
from .signature import IntegrityError, make_signer, open_sealed, seal
from .topology import TopologySchedule
from .transport.pacing import Pacing, pacing_check
from .transport.sim import SimNetwork
from .transport.wire import (
    FramingError,
    MsgType,
    Packet,
    decode_request_body,
    decode_response_body,
    encode_request_body,
    encode_response_body,
)

log = logging.getLogger(__name__)


class ProtocolError(RuntimeError):
    pass


class PacingError(ProtocolError):
    def __init__(self, msg: str, verdict: Pacing):
        super().__init__(msg)
        self.verdict = verdict


class HeadroomError(ProtocolError):
    """A decrypted response is larger than any legitimate one could be."""


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class ConsensusParams:
    epsilon: float
    a_bar: float
    codec: CodecConfig = field(default_factory=CodecConfig)

    def validate(self, schedule: TopologySchedule, allow_unstable: bool = False) -> None:
        """Check the step size and multiplier bound against the schedule.

        Requires ``0 < epsilon < 1/max_degree`` and ``0 < a_bar < 1`` unless
        ``allow_unstable`` is set (used to demonstrate divergence).
        """
        if self.epsilon <= 0 or self.a_bar <= 0:
            raise ParameterError("epsilon and a_bar must be positive")
        if allow_unstable:
            return
        degree = schedule.max_degree()
        if degree and self.epsilon >= 1 / degree:
            raise ParameterError(f"epsilon={self.epsilon} must be < 1/{degree}")
        if self.a_bar >= 1:
            raise ParameterError(f"a_bar={self.a_bar} must be < 1")

    @property
    def multiplier_max(self) -> int:
        return self.codec.max_multiplier(self.a_bar)

    @property
    def difference_scale(self) -> int:
        """Scale carried by a final weighted difference: N * S_a**2."""
        return self.codec.state_scale * self.codec.weight_scale**2


@dataclass(frozen=True)
class RequestMessage:
    sender: int
    receiver: int
    round: int
    public_key: PaillierPublicKey
    payload: Ciphertext


@dataclass(frozen=True)
class ResponseMessage:
    sender: int
    receiver: int
    round: int
    payload: Ciphertext


@dataclass(frozen=True)
class WeightedDifference:
    node: int
    neighbor: int
    round: int
    integer_value: int
    scale: int

    @property
    def real_value(self) -> float:
        return self.integer_value / self.scale


class NodeState:
    """One agent: its state, keys, round counter and per-round secret multiplier."""

    def __init__(
        self,
        node_id: int,
        x: float,
        keypair: PaillierKeyPair,
        params: ConsensusParams,
        rng: random.Random,
        crypto_rng: random.Random | None = None,
        signer=None,
        cert: bytes = b"",
        require_signatures: bool = False,
    ):
        params.codec.validate_for_key(keypair.public.key_bits, params.a_bar)
        self.id = node_id
        self.x = float(x)
        self.keypair = keypair
        self.params = params
        self.rng = rng
        self.crypto_rng = crypto_rng or random.Random(rng.getrandbits(64))
        self.signer = signer
        self.cert = cert
        self.require_signatures = require_signatures
        self.round = 0
        self.a_secret: dict[int, int] = {}
        self.pending: dict[tuple[int, int], int] = {}
        self._draw()

    def __repr__(self):
        return f"NodeState(id={self.id}, round={self.round}, x={self.x!r})"

    @property
    def public_key(self) -> PaillierPublicKey:
        return self.keypair.public

    def _draw(self) -> None:
        self.a_secret[self.round] = self.rng.randint(0, self.params.multiplier_max)

    def _encoded_state(self, sign: int) -> int:
        codec = self.params.codec
        q = quantize(self.x, codec.state_scale, codec.signed_width)
        return encode_signed(sign * q, codec.signed_width)

    # -- protocol steps -----------------------------------------------------

    def make_request(self, neighbor: int) -> RequestMessage:
        key = (neighbor, self.round)
        if key in self.pending:
            raise ProtocolError(f"node {self.id} already has a request to {neighbor} in round {self.round}")
        payload = encrypt(self.public_key, self._encoded_state(-1), self.crypto_rng)
        self.pending[key] = self.a_secret[self.round]
        return RequestMessage(self.id, neighbor, self.round, self.public_key, payload)

    def handle_request(self, req: RequestMessage) -> ResponseMessage:
        verdict = pacing_check(self.round, req.round)
        if verdict is not Pacing.ACCEPT:
            raise PacingError(f"node {self.id} at round {self.round} got request for round {req.round}", verdict)
        if req.receiver != self.id:
            raise ProtocolError(f"request for {req.receiver} delivered to {self.id}")
        if req.payload.key_fingerprint != req.public_key.fingerprint:
            raise ProtocolError("request payload not encrypted under the enclosed key")
        mine = encrypt(req.public_key, self._encoded_state(+1), self.crypto_rng)
        weighted = scalar_mul(hom_add(mine, req.payload), self.a_secret[req.round])
        return ResponseMessage(self.id, req.sender, req.round, weighted)

    def handle_response(self, resp: ResponseMessage) -> WeightedDifference:
        key = (resp.sender, resp.round)
        if key not in self.pending:
            raise ProtocolError(f"node {self.id} has no pending exchange {key}")
        codec = self.params.codec
        raw = decrypt(self.keypair.private, resp.payload)
        if raw >= codec.response_bound(self.params.a_bar):
            raise HeadroomError(f"decrypted response from {resp.sender} exceeds the {codec.signed_width}-bit window")
        a_self = self.pending.pop(key)
        value = decode_signed(raw, codec.signed_width) * a_self
        return WeightedDifference(self.id, resp.sender, resp.round, value, self.params.difference_scale)

    def apply_update(self, diffs: Sequence[WeightedDifference]) -> "NodeState":
        for d in diffs:
            if d.round != self.round or d.node != self.id:
                raise ProtocolError(f"difference {d} does not belong to node {self.id} round {self.round}")
        total = math.fsum(d.real_value for d in sorted(diffs, key=lambda d: d.neighbor))
        self.x = self.x + self.params.epsilon * total
        stale = [k for k in self.pending if k[1] <= self.round]
        for k in stale:
            log.warning("node %d: exchange with %d in round %d never completed", self.id, *k)
            del self.pending[k]
        self.round += 1
        self._draw()
        return self

    # -- wire ---------------------------------------------------------------

    def seal(self, msg: RequestMessage | ResponseMessage) -> Packet:
        if isinstance(msg, RequestMessage):
            body = encode_request_body(msg.public_key, msg.payload)
            kind = MsgType.REQUEST
        else:
            body = encode_response_body(msg.payload)
            kind = MsgType.RESPONSE
        packet = Packet(kind, msg.round, msg.sender, msg.receiver, body)
        if self.signer is not None:
            packet = seal(packet, self.signer, self.cert)
        return packet

    def open(self, packet: Packet, expected_round: int | None = None) -> RequestMessage | ResponseMessage:
        """Verify (if signed or required) and decode a delivered packet."""
        if packet.msg_type == MsgType.SIGNED_WRAPPER:
            packet = open_sealed(packet, expected_round)
        elif self.require_signatures:
            raise IntegrityError(f"unsigned packet from {packet.sender}")
        if packet.receiver != self.id:
            raise ProtocolError(f"packet for {packet.receiver} delivered to {self.id}")
        if packet.msg_type == MsgType.REQUEST:
            pk, payload = decode_request_body(packet.body)
            return RequestMessage(packet.sender, packet.receiver, packet.round, pk, payload)
        if packet.msg_type == MsgType.RESPONSE:
            payload = decode_response_body(packet.body, self.public_key)
            return ResponseMessage(packet.sender, packet.receiver, packet.round, payload)
        raise FramingError(f"nested signed wrapper from {packet.sender}")


def node_rngs(seed: int | str, node_id: int) -> tuple[random.Random, random.Random, random.Random]:
    """Independent (keys, multipliers, encryption) streams for one node."""
    return (
        random.Random(f"{seed}/{node_id}/keys"),
        random.Random(f"{seed}/{node_id}/multipliers"),
        random.Random(f"{seed}/{node_id}/nonces"),
    )


def make_nodes(
    x0: Sequence[float],
    params: ConsensusParams,
    key_bits: int,
    seed: int | str,
    signatures: bool = False,
    signature_scheme: str = "trapdoor",
    signature_bits: int = 512,
) -> list[NodeState]:
    nodes = []
    for i, x in enumerate(x0):
        key_rng, mult_rng, nonce_rng = node_rngs(seed, i)
        keypair = keygen(key_bits, key_rng)
        signer = make_signer(signature_scheme, signature_bits, key_rng) if signatures else None
        cert = f"cert:node-{i}".encode() if signatures else b""
        nodes.append(NodeState(i, x, keypair, params, mult_rng, nonce_rng, signer, cert, signatures))
    return nodes


@dataclass
class RoundRecord:
    round: int
    states: list[float]
    multipliers: list[int]
    edges: list[tuple[int, int]]
    diffs: dict[tuple[int, int], int]
    alarms: int = 0
    tampered: int = 0
    exchanges: int = 0
    elapsed: float = 0.0


def run_round(
    nodes: Sequence[NodeState],
    schedule: TopologySchedule,
    network: SimNetwork | None = None,
    max_retries: int = 3,
) -> RoundRecord:
    """Run every directed exchange of the current round, then update all nodes."""
    network = SimNetwork() if network is None else network
    k = nodes[0].round
    if any(n.round != k for n in nodes):
        raise ProtocolError("nodes are not at the same round")
    started = time.perf_counter()
    edges = schedule.edges_at(k)
    record = RoundRecord(
        k, [n.x for n in nodes], [n.a_secret[k] for n in nodes], edges, {}, exchanges=2 * len(edges)
    )
    tampered_before = len(network.tampered)
    for i, j in edges:
        for a, b in ((i, j), (j, i)):
            network.send(nodes[a].seal(nodes[a].make_request(b)))

    collected: dict[int, list[WeightedDifference]] = {n.id: [] for n in nodes}
    while not network.idle:
        for delivery in network.deliver():
            node = nodes[delivery.packet.receiver]
            try:
                msg = node.open(delivery.packet, expected_round=k)
            except (IntegrityError, ValueError) as exc:
                record.alarms += 1
                log.warning("integrity alarm at node %d: %s", node.id, exc)
                if delivery.attempt < max_retries:
                    network.retransmit(delivery)
                continue
            if isinstance(msg, RequestMessage):
                network.send(node.seal(node.handle_request(msg)))
            else:
                diff = node.handle_response(msg)
                collected[node.id].append(diff)
                record.diffs[(diff.node, diff.neighbor)] = diff.integer_value

    for node in nodes:
        node.apply_update(collected[node.id])
    record.tampered = len(network.tampered) - tampered_before
    record.elapsed = time.perf_counter() - started
    return record
