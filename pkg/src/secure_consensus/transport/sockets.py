"""Localhost TCP transport: one listener and one worker thread per node.

Each node owns a listening socket. Inbound connections get a reader thread
that parses frames and pushes packets onto the node's inbox, so delivery to
the protocol layer is serialized per node while reads run concurrently.
Outbound connections are opened lazily, one per peer, and only the node's
worker thread writes to them, which keeps per-peer order intact.

A node finishes round ``k`` once it holds a response from every round-``k``
neighbor and has answered every round-``k`` request addressed to it. Requests
one round ahead are parked until the local update; anything else is dropped,
and the sender re-sends any request still unanswered after ``resend_after``
seconds. Duplicate responses produced that way are ignored.
"""

from __future__ import annotations

import logging
import queue
import socket
import threading
import time
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from ..protocol import NodeState, ProtocolError, RequestMessage
from ..signature import IntegrityError
from ..topology import TopologySchedule
from .pacing import Pacing, pacing_check
from .wire import FramingError, Packet, encode_packet, read_packet

log = logging.getLogger(__name__)

Address = tuple[str, int]


class TransportError(RuntimeError):
    pass


@dataclass
class NodeStats:
    latencies: list[float] = field(default_factory=list)
    deferred: int = 0
    rejected: int = 0
    alarms: int = 0
    resent: int = 0


@dataclass
class SocketRunResult:
    states: np.ndarray
    stats: list[NodeStats]
    addresses: list[Address]

    @property
    def mean_latency(self) -> float:
        samples = [t for s in self.stats for t in s.latencies]
        return float(np.mean(samples)) if samples else 0.0


class _Endpoint:
    """Listening socket plus reader threads feeding one inbox."""

    def __init__(self, host: str, port: int):
        self.server = socket.create_server((host, port))
        self.address: Address = self.server.getsockname()[:2]
        self.inbox: queue.Queue[Packet] = queue.Queue()
        self._closed = threading.Event()
        self._accepted: list[socket.socket] = []
        threading.Thread(target=self._accept_loop, daemon=True).start()

    def _accept_loop(self) -> None:
        while not self._closed.is_set():
            try:
                conn, _ = self.server.accept()
            except OSError:
                return
            self._accepted.append(conn)
            threading.Thread(target=self._read_loop, args=(conn,), daemon=True).start()

    def _read_loop(self, conn: socket.socket) -> None:
        with conn, conn.makefile("rb") as stream:
            while True:
                try:
                    packet = read_packet(stream)
                except FramingError as exc:
                    log.warning("dropping connection after bad frame: %s", exc)
                    return
                except OSError:
                    return
                if packet is None:
                    return
                self.inbox.put(packet)

    def close(self) -> None:
        self._closed.set()
        self.server.close()
        for conn in self._accepted:
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass


class _Worker(threading.Thread):
    def __init__(self, node: NodeState, schedule: TopologySchedule, rounds: int, endpoint: _Endpoint,
                 peers: Sequence[Address], timeout: float, resend_after: float):
        super().__init__(name=f"node-{node.id}", daemon=True)
        self.node, self.schedule, self.rounds = node, schedule, rounds
        self.endpoint, self.peers, self.timeout = endpoint, peers, timeout
        self.resend_after = resend_after
        self.states = [node.x]
        self.stats = NodeStats()
        self.error: BaseException | None = None
        self._conns: dict[int, socket.socket] = {}
        self._parked: list[Packet] = []

    def run(self) -> None:
        try:
            for k in range(self.rounds):
                self._round(k)
                self.states.append(self.node.x)
        except BaseException as exc:  # surfaced by the coordinator
            self.error = exc
        finally:
            for conn in self._conns.values():
                conn.close()

    def _send(self, peer: int, packet: Packet) -> None:
        conn = self._conns.get(peer)
        if conn is None:
            conn = self._conns[peer] = socket.create_connection(self.peers[peer], timeout=self.timeout)
        conn.sendall(encode_packet(packet))

    def _round(self, k: int) -> None:
        node = self.node
        neighbors = self.schedule.neighbors_at(node.id, k)
        awaiting = set(neighbors)
        to_answer = set(neighbors)
        sent_at, requests = {}, {}
        diffs = []
        for j in neighbors:
            sent_at[j] = time.perf_counter()
            requests[j] = node.seal(node.make_request(j))
            self._send(j, requests[j])

        backlog, self._parked = self._parked, []
        deadline = time.monotonic() + self.timeout
        while awaiting or to_answer:
            if backlog:
                packet = backlog.pop(0)
            else:
                try:
                    packet = self.endpoint.inbox.get(timeout=self.resend_after)
                except queue.Empty:
                    if time.monotonic() > deadline:
                        raise TransportError(
                            f"node {node.id} timed out in round {k} waiting on {sorted(awaiting | to_answer)}"
                        ) from None
                    for j in sorted(awaiting):
                        self.stats.resent += 1
                        self._send(j, requests[j])
                    continue
            verdict = pacing_check(node.round, packet.round)
            if verdict is Pacing.DEFER:
                self.stats.deferred += 1
                self._parked.append(packet)
                continue
            if verdict is Pacing.REJECT:
                self.stats.rejected += 1
                log.debug("node %d at round %d rejected packet for round %d", node.id, k, packet.round)
                continue
            try:
                msg = node.open(packet, expected_round=k)
            except (IntegrityError, ValueError) as exc:
                self.stats.alarms += 1
                log.warning("integrity alarm at node %d: %s", node.id, exc)
                continue
            if isinstance(msg, RequestMessage):
                self._send(msg.sender, node.seal(node.handle_request(msg)))
                to_answer.discard(msg.sender)
            elif msg.sender in awaiting:
                diffs.append(node.handle_response(msg))
                awaiting.discard(msg.sender)
                self.stats.latencies.append(time.perf_counter() - sent_at[msg.sender])
            else:
                log.info("node %d ignoring duplicate response from %d", node.id, msg.sender)
        node.apply_update(diffs)


def run_sockets(
    nodes: Sequence[NodeState],
    schedule: TopologySchedule,
    rounds: int,
    host: str = "127.0.0.1",
    ports: Sequence[int] | None = None,
    timeout: float = 30.0,
    resend_after: float = 0.05,
) -> SocketRunResult:
    """Run ``rounds`` rounds with every node exchanging over localhost TCP.

    ``ports`` pins each node's listening port; by default the OS picks.
    Returns the per-round states as a (rounds+1, M) array.
    """
    if any(n.round != 0 for n in nodes):
        raise ProtocolError("socket runs start from round 0")
    ports = list(ports) if ports is not None else [0] * len(nodes)
    endpoints = [_Endpoint(host, p) for p in ports]
    addresses = [ep.address for ep in endpoints]
    workers = [_Worker(n, schedule, rounds, ep, addresses, timeout, resend_after) for n, ep in zip(nodes, endpoints)]
    try:
        for w in workers:
            w.start()
        for w in workers:
            w.join()
    finally:
        for ep in endpoints:
            ep.close()
    errors = [w.error for w in workers if w.error is not None]
    if errors:
        raise TransportError(f"{len(errors)} node(s) failed: {errors[0]!r}") from errors[0]
    states = np.array([w.states for w in workers], dtype=float).T
    return SocketRunResult(states, [w.stats for w in workers], addresses)
