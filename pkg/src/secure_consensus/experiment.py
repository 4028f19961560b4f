"""Experiment configuration, seeded runs and their on-disk outputs.

A run directory holds:

``states.csv``     round, node_0..node_{M-1}, disagreement
``trace.csv``      round, node, state, per-neighbor integer differences
``adversary.csv``  the observer's view, when a passive scenario is configured
``summary.json``   deterministic outcome of the run
``timing.json``    wall-clock figures (kept apart so summaries stay reproducible)
"""

from __future__ import annotations

import csv
import json
import logging
import math
import random
import time
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .adversary import (
    GroundTruth,
    ObservationLog,
    infer_isolated_state,
    injection_hook,
    predict_injection,
)
from .codec import CodecConfig
from .oracles import disagreement
from .paillier import keygen
from .protocol import ConsensusParams, make_nodes
from .simulation import CONVERGED, MAX_ROUNDS, RunTrace, simulate
from .topology import TopologySchedule, ring_with_chord
from .transport.sim import SimNetwork
from .transport.sockets import run_sockets

log = logging.getLogger(__name__)

ADVERSARY_KINDS = ("none", "eavesdrop", "isolate-and-infer", "inject")
FIG4_STATES = (290.0, 746.0, 541.0, 383.0, 301.0, 675.0)


class ConfigError(ValueError):
    pass


@dataclass
class AdversaryConfig:
    kind: str = "none"
    observer: int = 0
    target: int = 1
    xi: float = 0.0
    rounds: list[int] | None = None  # inject only; None means every round

    def validate(self, num_nodes: int) -> None:
        if self.kind not in ADVERSARY_KINDS:
            raise ConfigError(f"adversary kind must be one of {ADVERSARY_KINDS}")
        if self.kind != "none":
            for name in ("observer", "target"):
                if not 0 <= getattr(self, name) < num_nodes:
                    raise ConfigError(f"adversary {name} is not a node")


@dataclass
class ExperimentConfig:
    initial_states: list[float]
    topology: dict
    epsilon: float
    a_bar: float
    seed: int
    codec: CodecConfig = field(default_factory=CodecConfig)
    key_bits: int = 512
    transport: str = "sim"
    endpoints: list[str] | None = None
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig)
    signatures: bool = False
    signature_scheme: str = "trapdoor"
    max_rounds: int = 1000
    stop_threshold: float = 1e-3
    deviation_tolerance: float = 1e-3
    allow_unstable: bool = False
    output: str | None = None

    @property
    def num_nodes(self) -> int:
        return len(self.initial_states)

    @property
    def params(self) -> ConsensusParams:
        return ConsensusParams(self.epsilon, self.a_bar, self.codec)

    def schedule(self, base: Path | None = None) -> TopologySchedule:
        topo = self.topology
        if "file" in topo:
            path = Path(topo["file"])
            if base is not None and not path.is_absolute():
                path = base / path
            topo = json.loads(path.read_text())
        if "edges" in topo:
            return TopologySchedule.static(self.num_nodes, topo["edges"])
        sched = TopologySchedule.from_dict({"num_nodes": self.num_nodes, **topo})
        if sched.num_nodes != self.num_nodes:
            raise ConfigError("topology node count differs from the number of initial states")
        return sched

    def validate(self, base: Path | None = None) -> TopologySchedule:
        if self.num_nodes < 1:
            raise ConfigError("need at least one initial state")
        if self.transport not in ("sim", "socket"):
            raise ConfigError("transport must be 'sim' or 'socket'")
        if self.endpoints is not None and len(self.endpoints) != self.num_nodes:
            raise ConfigError("one endpoint per node is required")
        if self.max_rounds < 0:
            raise ConfigError("max_rounds must be non-negative")
        self.adversary.validate(self.num_nodes)
        if self.adversary.kind == "inject" and self.transport != "sim":
            raise ConfigError("the injection scenario needs the simulated transport")
        try:
            sched = self.schedule(base)
            self.params.validate(sched, self.allow_unstable)
            self.codec.validate_for_key(self.key_bits, self.a_bar)
        except ConfigError:
            raise
        except (ValueError, KeyError, OSError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.num_nodes > 1 and not sched.union_connected():
            log.warning("topology is not connected over one period; consensus is not expected")
        return sched

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        try:
            if "codec" in data:
                data["codec"] = CodecConfig(**data["codec"])
            if "adversary" in data:
                data["adversary"] = AdversaryConfig(**data["adversary"])
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def preset_fig4(seed: int = 0) -> ExperimentConfig:
    """Six nodes on a ring with one chord, started from the reference states.

    The graph and step size are substitutes: ring plus chord 0-3 (maximum
    degree 3) and ``epsilon = 0.9 / 3``.
    """
    edges = ring_with_chord(len(FIG4_STATES))
    degree = TopologySchedule.static(len(FIG4_STATES), edges).max_degree()
    return ExperimentConfig(
        initial_states=list(FIG4_STATES),
        topology={"edges": [list(e) for e in edges]},
        epsilon=0.9 / degree,
        a_bar=0.9,
        seed=seed,
        codec=CodecConfig(state_scale=10**6, weight_scale=2**16, signed_width=64),
        key_bits=512,
        max_rounds=2000,
        stop_threshold=1e-3,
    )


# -- outputs ------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(x, ".12g")


def emit_csv(states: Sequence[Sequence[float]], path: str | Path, num_nodes: int) -> None:
    """Per-round states; a run with no recorded rows yields the header only."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["round", *(f"node_{i}" for i in range(num_nodes)), "disagreement"])
        for k, row in enumerate(states):
            writer.writerow([k, *(_fmt(x) for x in row), _fmt(disagreement(row))])


def emit_trace(trace: RunTrace, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["round", "node", "state", "diffs"])
        for rec in trace.records:
            for i, x in enumerate(rec.states):
                diffs = ";".join(f"{j}:{v}" for (a, j), v in sorted(rec.diffs.items()) if a == i)
                writer.writerow([rec.round, i, _fmt(x), diffs])


# -- running --------------------------------------------------------------------


@dataclass
class ExperimentResult:
    summary: dict
    timing: dict
    states: np.ndarray
    trace: RunTrace | None = None
    observation: ObservationLog | None = None

    @property
    def status(self) -> str:
        return self.summary["status"]

    @property
    def ok(self) -> bool:
        return self.status == CONVERGED and self.summary["deviation"] <= self.summary["deviation_tolerance"]


def run_experiment(config: ExperimentConfig, out_dir: str | Path | None = None, base: Path | None = None) -> ExperimentResult:
    schedule = config.validate(base)
    nodes = make_nodes(
        config.initial_states,
        config.params,
        config.key_bits,
        config.seed,
        signatures=config.signatures,
        signature_scheme=config.signature_scheme,
    )
    true_mean = math.fsum(config.initial_states) / config.num_nodes
    adversary = config.adversary
    trace = None
    extra: dict = {}
    timing: dict = {}

    if config.transport == "socket":
        host, ports = "127.0.0.1", None
        if config.endpoints:
            pairs = [e.rsplit(":", 1) for e in config.endpoints]
            host, ports = pairs[0][0], [int(p) for _, p in pairs]
        result = run_sockets(nodes, schedule, config.max_rounds, host=host, ports=ports)
        states = result.states
        final = states[-1]
        status = CONVERGED if disagreement(final) < config.stop_threshold else MAX_ROUNDS
        timing["mean_interaction_seconds"] = result.mean_latency
        extra["alarms"] = sum(s.alarms for s in result.stats)
    else:
        network = SimNetwork()
        hook = None
        if adversary.kind == "inject":
            hook = injection_hook(adversary.target, adversary.xi, config.codec, config.seed, adversary.rounds)
            network.add_hook(hook)
        trace = simulate(nodes, schedule, config.max_rounds, config.stop_threshold, network)
        states = trace.states()
        final = states[-1]
        status = trace.status
        exchanges = sum(r.exchanges for r in trace.records)
        timing["mean_interaction_seconds"] = sum(r.elapsed for r in trace.records) / exchanges if exchanges else 0.0
        extra["alarms"] = sum(r.alarms for r in trace.records)
        extra["tampered"] = len(network.tampered)
        if hook is not None:
            predicted = predict_injection(GroundTruth.from_trace(trace), adversary.target, adversary.xi, adversary.rounds)
            extra["predicted_final_value"] = float(np.mean(predicted[-1]))

    observation = None
    if adversary.kind in ("eavesdrop", "isolate-and-infer") and trace is not None:
        observation = ObservationLog.from_trace(trace, adversary.observer)
        if adversary.kind == "isolate-and-infer":
            estimate = infer_isolated_state(observation, adversary.target)
            extra["inferred_state"] = estimate
            extra["inference_error"] = abs(estimate - config.initial_states[adversary.target])

    final_value = float(np.mean(final))
    summary = {
        "status": status,
        "rounds": int(len(states) - 1),
        "final_states": [float(x) for x in final],
        "final_value": final_value,
        "true_mean": true_mean,
        "final_disagreement": float(disagreement(final)),
        "deviation": abs(final_value - true_mean),
        "deviation_tolerance": config.deviation_tolerance,
        "transport": config.transport,
        "signatures": config.signatures,
        "adversary": adversary.kind,
        **extra,
    }
    outcome = ExperimentResult(summary, timing, states, trace, observation)
    out_dir = out_dir if out_dir is not None else config.output
    if out_dir is not None:
        write_outputs(outcome, Path(out_dir), config.num_nodes)
    return outcome


def write_outputs(result: ExperimentResult, out_dir: Path, num_nodes: int) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    emit_csv(result.states, out_dir / "states.csv", num_nodes)
    if result.trace is not None:
        emit_trace(result.trace, out_dir / "trace.csv")
    if result.observation is not None:
        result.observation.write_csv(out_dir / "adversary.csv")
    (out_dir / "summary.json").write_text(json.dumps(result.summary, indent=2, sort_keys=True) + "\n")
    (out_dir / "timing.json").write_text(json.dumps(result.timing, indent=2, sort_keys=True) + "\n")


def divergence_demo(seed: int = 0) -> ExperimentConfig:
    """Two nodes with ``epsilon = 2/max_degree`` and ``a_bar = 2`` (needs the override)."""
    return ExperimentConfig(
        initial_states=[0.0, 1.0],
        topology={"edges": [[0, 1]]},
        epsilon=2.0,
        a_bar=2.0,
        seed=seed,
        key_bits=128,
        max_rounds=400,
        allow_unstable=True,
    )


def keygen_benchmark(bits: int, count: int, seed: int) -> list[float]:
    """Seconds per key pair for ``count`` key generations."""
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        t0 = time.perf_counter()
        keygen(bits, rng)
        out.append(time.perf_counter() - t0)
    return out

