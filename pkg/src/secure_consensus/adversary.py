"""Attacks on the protocol: what a curious neighbor can infer, and what an active
man-in-the-middle can change.

Passive side (an honest-but-curious observer ``E``):

* :class:`ObservationLog` holds only what ``E`` legitimately sees: its own
  states and multipliers, the decrypted weighted differences from each
  neighbor, and the common final value.
* :func:`build_observability` stacks the linear map from initial states to
  those observations (a test-harness tool; it needs the ground truth).
* :func:`count_unknowns` does the equation/unknown accounting for the two
  canonical three-party layouts.
* :func:`infer_isolated_state` recovers the initial state of a node whose only
  neighbor is ``E``.
* :func:`non_identifiability_witness` builds a second, different set of initial
  states and multipliers that explains ``E``'s log exactly.

Active side: :func:`inject_noise` shifts the plaintext inside an intercepted
request, :func:`injection_hook` wires it into the simulated network, and
:func:`predict_injection` gives the plaintext prediction of the result.
:func:`forge_envelope` re-signs a packet under the forgeable signature scheme.
"""

from __future__ import annotations

import csv
import logging
import math
import random
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .codec import CodecConfig, encode_signed, quantize
from .oracles import perron, plaintext_oracle_dt, weight_matrix
from .paillier import PaillierPublicKey, encrypt, hom_add
from .serial import pack_ints, unpack_ints
from .signature import TAG_PAILLIER, SignedEnvelope, envelope_from_body, envelope_to_body, signature_blocks
from .simulation import RunTrace
from .transport.sim import Hook
from .transport.wire import (
    MsgType,
    Packet,
    decode_packet,
    decode_request_body,
    encode_packet,
    encode_request_body,
)

log = logging.getLogger(__name__)

LOG_FIELDS = ["round", "observer", "neighbor", "delta", "own_state", "own_multiplier"]
WITNESS_MIN_DELTA = 1e-2
WITNESS_DELTAS = tuple(s * WITNESS_MIN_DELTA * m for m in (1.5, 2, 5, 10, 20, 50, 100) for s in (1, -1))
REPLAY_TOLERANCE = 1e-9


class AttackError(ValueError):
    pass


# -- ground truth and observation logs -----------------------------------------


@dataclass
class GroundTruth:
    """Full history of a run: initial states plus every round's multipliers and edges."""

    x0: np.ndarray
    epsilon: float
    multipliers: list[np.ndarray]
    edges: list[list[tuple[int, int]]]

    @property
    def num_nodes(self) -> int:
        return len(self.x0)

    @property
    def rounds(self) -> int:
        return len(self.multipliers)

    def weights(self, k: int) -> np.ndarray:
        a = self.multipliers[k]
        return weight_matrix(self.num_nodes, {(i, j): a[i] * a[j] for i, j in self.edges[k]})

    def weight_schedule(self) -> list[np.ndarray]:
        return [self.weights(k) for k in range(self.rounds)]

    def trajectory(self) -> np.ndarray:
        return plaintext_oracle_dt(self.x0, self.weight_schedule(), self.epsilon)

    @classmethod
    def from_trace(cls, trace: RunTrace) -> "GroundTruth":
        return cls(
            trace.states()[0],
            trace.epsilon,
            [np.array(trace.multipliers(k)) for k in range(trace.rounds)],
            [list(r.edges) for r in trace.records],
        )

    def observation_log(self, observer: int) -> "ObservationLog":
        """The log ``observer`` would record in an exact (unquantized) run."""
        traj = self.trajectory()
        rows = []
        for k in range(self.rounds):
            w = self.weights(k)
            x = traj[k]
            rows.append({i: w[observer, i] * (x[i] - x[observer]) for i in _neighbors(self.edges[k], observer)})
        return ObservationLog(
            observer,
            self.epsilon,
            rows,
            list(traj[:, observer]),
            [float(a[observer]) for a in self.multipliers],
            float(traj[-1, observer]),
            self.num_nodes,
        )


def _neighbors(edges: Iterable[tuple[int, int]], node: int) -> list[int]:
    return sorted({j for i, j in edges if i == node} | {i for i, j in edges if j == node})


@dataclass
class ObservationLog:
    """Everything observer ``E`` legitimately knows after ``K`` rounds."""

    observer: int
    epsilon: float
    rows: list[dict[int, float]]
    own_states: list[float]
    own_multipliers: list[float]
    final_value: float | None = None
    assumed_M: int | None = None

    @property
    def rounds(self) -> int:
        return len(self.rows)

    def observation(self, k: int, neighbor: int) -> float:
        return self.rows[k].get(neighbor, 0.0)

    def vector(self, labels: Sequence[tuple[int, int]]) -> np.ndarray:
        return np.array([self.rows[k][i] for k, i in labels])

    @classmethod
    def from_trace(cls, trace: RunTrace, observer: int, assumed_M: int | None = None) -> "ObservationLog":
        rows = []
        for k, rec in enumerate(trace.records):
            rows.append({j: trace.difference(k, i, j) for (i, j) in rec.diffs if i == observer})
        states = trace.states()
        return cls(
            observer,
            trace.epsilon,
            rows,
            list(states[:, observer]),
            [trace.multipliers(k)[observer] for k in range(trace.rounds)],
            float(states[-1, observer]),
            assumed_M if assumed_M is not None else trace.num_nodes,
        )

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(LOG_FIELDS)
            for k, row in enumerate(self.rows):
                for i in sorted(row):
                    writer.writerow(
                        [k, self.observer, i, f"{row[i]:.17g}", f"{self.own_states[k]:.17g}",
                         f"{self.own_multipliers[k]:.17g}"]
                    )


# -- passive analysis ------------------------------------------------------------


@dataclass(frozen=True)
class Observability:
    matrix: np.ndarray
    labels: list[tuple[int, int]]  # (round, neighbor) per row

    def predict(self, x0: Sequence[float]) -> np.ndarray:
        return self.matrix @ np.asarray(x0, dtype=float)


def build_observability(truth: GroundTruth, observer: int, horizon: int) -> Observability:
    """Stack ``C_E(k) P(k-1)...P(0)`` for ``k = 0..horizon``.

    ``C_E(k)`` has one row per neighbor ``i`` of the observer in round ``k``,
    with ``-w_Ei`` in the observer's column and ``+w_Ei`` in column ``i``.
    """
    if not 0 <= horizon < truth.rounds:
        raise AttackError(f"horizon {horizon} outside recorded history of {truth.rounds} rounds")
    m = truth.num_nodes
    transition = np.eye(m)
    blocks, labels = [], []
    for k in range(horizon + 1):
        w = truth.weights(k)
        for i in _neighbors(truth.edges[k], observer):
            row = np.zeros(m)
            row[observer] = -w[observer, i]
            row[i] = w[observer, i]
            blocks.append(row @ transition)
            labels.append((k, i))
        transition = perron(w, truth.epsilon) @ transition
    matrix = np.array(blocks) if blocks else np.zeros((0, m))
    return Observability(matrix, labels)


@dataclass(frozen=True)
class PrivacyVerdict:
    equations: int
    unknowns: int

    @property
    def identifiable(self) -> bool:
        return self.equations >= self.unknowns


def count_unknowns(config: str, horizon: int) -> PrivacyVerdict:
    """Equation/unknown accounting for the two three-party layouts.

    ``"a"``: ``E`` adjacent to both ``A`` and ``B`` which are also adjacent.
    Unknowns are both initial states plus one multiplier each per round;
    equations are two observations per round plus the average constraint.

    ``"b"``: ``A`` adjacent to ``E`` only. Unknowns are ``A``'s initial state
    and one multiplier per round; equations are one observation per round plus
    the average constraint.
    """
    if horizon < 0:
        raise AttackError("horizon must be non-negative")
    steps = horizon + 1
    if config == "a":
        return PrivacyVerdict(2 * steps + 1, 2 * steps + 2)
    if config == "b":
        return PrivacyVerdict(steps + 1, horizon + 2)
    raise AttackError(f"unsupported configuration {config!r}")


def infer_isolated_state(obs: ObservationLog, isolated: int) -> float:
    """Initial state of a node whose only neighbor is the observer.

    The isolated node's state moves only through exchanges with the observer,
    each by ``-epsilon * delta``, so its initial value is the final value plus
    ``epsilon`` times the sum of everything the observer measured from it.
    """
    if obs.final_value is None:
        raise AttackError("log has no final value")
    if len(obs.own_states) != obs.rounds + 1:
        raise AttackError("log does not cover every round")
    return obs.final_value + obs.epsilon * math.fsum(obs.observation(k, isolated) for k in range(obs.rounds))


@dataclass
class Witness:
    """An alternative history consistent with an observer's log."""

    x0: list[float]
    multipliers: list[np.ndarray]
    delta: float
    residual: float

    def ground_truth(self, epsilon: float, edges: list[list[tuple[int, int]]]) -> GroundTruth:
        return GroundTruth(np.array(self.x0), epsilon, self.multipliers, edges)


def non_identifiability_witness(
    obs: ObservationLog,
    truth: GroundTruth,
    a_bar: float,
    deltas: Sequence[float] = WITNESS_DELTAS,
) -> Witness | None:
    """Find different initial states and multipliers that reproduce ``obs``.

    Shifts the first non-observer node's initial state by ``delta`` and the
    second's by ``-delta`` (so the average is unchanged), then solves each
    round's observations for the two unknown multipliers. A candidate is
    accepted only if every multiplier lands in ``(0, a_bar]`` and a plaintext
    replay reproduces the log within ``REPLAY_TOLERANCE``. Returns ``None`` when
    no candidate ``delta`` works.
    """
    e = obs.observer
    others = [i for i in range(truth.num_nodes) if i != e]
    if len(others) != 2:
        raise AttackError("witness construction needs exactly three nodes")
    if obs.rounds < 1 or obs.rounds > truth.rounds:
        raise AttackError("log must span at least one round of the recorded history")
    for delta in deltas:
        found = _try_witness(obs, truth, a_bar, others, delta)
        if found is not None:
            return found
    log.info("no witness found for observer %d over %d rounds", e, obs.rounds)
    return None


def _try_witness(obs, truth, a_bar, others, delta) -> Witness | None:
    e, (p, q) = obs.observer, others
    x = truth.x0.astype(float).copy()
    x[p] += delta
    x[q] -= delta
    x0 = x.copy()
    multipliers = []
    for k in range(obs.rounds):
        edges = {tuple(sorted(ed)) for ed in truth.edges[k]}
        a = np.zeros(truth.num_nodes)
        a[e] = obs.own_multipliers[k]
        for i in (p, q):
            gap = x[i] - obs.own_states[k]
            y = obs.observation(k, i)
            if tuple(sorted((e, i))) in edges and a[e] > 0:
                if gap == 0:
                    return None
                a[i] = y / (a[e] * gap)
            else:
                a[i] = truth.multipliers[k][i] if truth.multipliers[k][i] > 0 else a_bar / 2
            if not 0 < a[i] <= a_bar:
                return None
        multipliers.append(a)
        w = weight_matrix(truth.num_nodes, {(i, j): a[i] * a[j] for i, j in truth.edges[k]})
        x = perron(w, truth.epsilon) @ x
    witness = Witness(list(x0), multipliers, delta, 0.0)
    replay = witness.ground_truth(truth.epsilon, truth.edges[: obs.rounds]).observation_log(e)
    residual = _log_distance(obs, replay)
    if residual > REPLAY_TOLERANCE:
        return None
    witness.residual = residual
    return witness


def _log_distance(a: ObservationLog, b: ObservationLog) -> float:
    worst = max(abs(s - t) for s, t in zip(a.own_states, b.own_states))
    for k in range(a.rounds):
        keys = set(a.rows[k]) | set(b.rows[k])
        for i in keys:
            worst = max(worst, abs(a.observation(k, i) - b.observation(k, i)))
    return worst


# -- active attacks ------------------------------------------------------------


def _tamper_request(packet: Packet, xi: float, codec: CodecConfig, rng: random.Random) -> Packet:
    pk, payload = decode_request_body(packet.body)
    noise = encrypt(pk, encode_signed(quantize(xi, codec.state_scale, codec.signed_width), codec.signed_width), rng)
    body = encode_request_body(pk, hom_add(payload, noise))
    return Packet(packet.msg_type, packet.round, packet.sender, packet.receiver, body, packet.version)


def inject_noise(packet: Packet, xi: float, codec: CodecConfig, rng: random.Random) -> Packet:
    """Shift the plaintext of an intercepted request by ``+xi``.

    Works on plain requests and on signed wrappers around a request. In the
    signed case the inner payload is modified but the attacker cannot
    re-sign it, so the envelope keeps the stale signature.
    """
    if packet.msg_type == MsgType.REQUEST:
        return _tamper_request(packet, xi, codec, rng)
    if packet.msg_type == MsgType.SIGNED_WRAPPER:
        env = envelope_from_body(packet.body)
        inner = decode_packet(env.payload)
        if inner.msg_type != MsgType.REQUEST:
            raise AttackError("signed packet does not wrap a request")
        tampered = _tamper_request(inner, xi, codec, rng)
        env = SignedEnvelope(encode_packet(tampered), env.verify_key, env.sig, env.cert)
        return Packet(packet.msg_type, packet.round, packet.sender, packet.receiver, envelope_to_body(env))
    raise AttackError(f"cannot inject into a {packet.msg_type.name} packet")


def _carries_request(packet: Packet) -> bool:
    if packet.msg_type == MsgType.REQUEST:
        return True
    if packet.msg_type != MsgType.SIGNED_WRAPPER:
        return False
    try:
        return decode_packet(envelope_from_body(packet.body).payload).msg_type == MsgType.REQUEST
    except ValueError:
        return False


@dataclass
class InjectionHook:
    """Network hook that tampers with ``target``'s requests on first transmission.

    Retransmissions (``attempt > 0``) pass untouched: the attacker only gets
    one shot at each message.
    """

    target: int
    xi: float
    codec: CodecConfig
    rng: random.Random = field(default_factory=lambda: random.Random(0))
    rounds: set[int] | None = None
    hits: int = 0

    def __call__(self, packet: Packet, attempt: int) -> Packet:
        if attempt > 0 or packet.sender != self.target or not _carries_request(packet):
            return packet
        if self.rounds is not None and packet.round not in self.rounds:
            return packet
        self.hits += 1
        return inject_noise(packet, self.xi, self.codec, self.rng)


def injection_hook(target: int, xi: float, codec: CodecConfig, seed: int = 0, rounds=None) -> Hook:
    return InjectionHook(target, xi, codec, random.Random(seed), None if rounds is None else set(rounds))


def predict_injection(truth: GroundTruth, target: int, xi: float, rounds: Iterable[int] | None = None) -> np.ndarray:
    """Plaintext trajectory when every request of ``target`` carries ``+xi``.

    A tampered request makes each neighbor ``j`` return ``a_j (x_j - x_t + xi)``,
    so the target's update gains ``epsilon * xi * sum_j w_tj``.
    """
    attacked = None if rounds is None else set(rounds)
    x = truth.x0.astype(float).copy()
    out = [x.copy()]
    for k in range(truth.rounds):
        w = truth.weights(k)
        forcing = np.zeros_like(x)
        if attacked is None or k in attacked:
            forcing[target] = xi * w[target].sum()
        x = perron(w, truth.epsilon) @ x + truth.epsilon * forcing
        out.append(x.copy())
    return np.array(out)


def forge_envelope(packet: Packet, new_inner: Packet, rng: random.Random) -> Packet:
    """Re-sign ``new_inner`` using only what travels with ``packet``.

    Possible exactly when the verify key is a Paillier decryption key: the
    modulus inside it is also the public encryption key, with ``g = n + 1``.
    """
    env = envelope_from_body(packet.body)
    if not env.verify_key or env.verify_key[0] != TAG_PAILLIER:
        raise AttackError("verify key does not reveal an encryption key")
    _, _, n = unpack_ints(env.verify_key[1:], 3)
    pk = PaillierPublicKey(n)
    payload = encode_packet(new_inner)
    sig = pack_ints(encrypt(pk, b, rng).value for b in signature_blocks(payload, env.cert, n))
    forged = SignedEnvelope(payload, env.verify_key, sig, env.cert)
    return Packet(MsgType.SIGNED_WRAPPER, new_inner.round, new_inner.sender, new_inner.receiver, envelope_to_body(forged))
