"""Command-line entry point.

Exit codes: 0 when the run converged to the true mean, 2 when it diverged or
settled elsewhere, 1 on configuration or runtime errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import statistics
import sys
from pathlib import Path

from . import kernels
from .codec import CodecConfig
from .experiment import (
    AdversaryConfig,
    ConfigError,
    ExperimentConfig,
    divergence_demo,
    keygen_benchmark,
    preset_fig4,
    run_experiment,
)
from .topology import line, ring, ring_with_chord

EXIT_OK, EXIT_ERROR, EXIT_DEVIATION = 0, 1, 2

NAMED_TOPOLOGIES = {
    "ring": ring,
    "line": line,
    "ring-chord": ring_with_chord,
    "complete": lambda m: [(i, j) for i in range(m) for j in range(i + 1, m)],
}


def _topology_arg(value: str, num_nodes: int) -> dict:
    if value in NAMED_TOPOLOGIES:
        return {"edges": [list(e) for e in NAMED_TOPOLOGIES[value](num_nodes)]}
    return {"file": value}


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON experiment config")
    p.add_argument("--states", help="comma-separated initial states")
    p.add_argument("--topology", help=f"one of {sorted(NAMED_TOPOLOGIES)} or a JSON schedule file")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--a-bar", type=float)
    p.add_argument("--key-bits", type=int)
    p.add_argument("--state-scale", type=int)
    p.add_argument("--weight-scale", type=int)
    p.add_argument("--signed-width", type=int)
    p.add_argument("--transport", choices=["sim", "socket"])
    p.add_argument("--signatures", action="store_true", default=None)
    p.add_argument("--signature-scheme", choices=["trapdoor", "paillier-literal"])
    p.add_argument("--max-rounds", type=int)
    p.add_argument("--stop-threshold", type=float)
    p.add_argument("--allow-unstable", action="store_true", default=None)
    p.add_argument("--output", help="directory for CSV and JSON outputs")


def _config_from_args(args: argparse.Namespace) -> tuple[ExperimentConfig, Path | None]:
    base = None
    if args.config:
        data = json.loads(args.config.read_text())
        base = args.config.parent
    else:
        missing = [f for f in ("states", "topology", "epsilon", "a_bar") if getattr(args, f) is None]
        if missing:
            raise ConfigError(f"without --config these flags are required: {', '.join(missing)}")
        data = {}
    data["seed"] = args.seed
    if args.states is not None:
        data["initial_states"] = [float(s) for s in args.states.split(",")]
    if args.topology is not None:
        data["topology"] = _topology_arg(args.topology, len(data["initial_states"]))
    codec = dict(data.get("codec", {}))
    for flag, key in (("state_scale", "state_scale"), ("weight_scale", "weight_scale"), ("signed_width", "signed_width")):
        if getattr(args, flag) is not None:
            codec[key] = getattr(args, flag)
    if codec:
        data["codec"] = codec
    for flag in ("epsilon", "a_bar", "key_bits", "transport", "signatures", "signature_scheme", "max_rounds",
                 "stop_threshold", "allow_unstable", "output"):
        if getattr(args, flag) is not None:
            data[flag] = getattr(args, flag)
    return ExperimentConfig.from_dict(data), base


def _report(result) -> int:
    print(json.dumps({**result.summary, **result.timing}, indent=2, sort_keys=True))
    return EXIT_OK if result.ok else EXIT_DEVIATION


def cmd_run(args) -> int:
    config, base = _config_from_args(args)
    return _report(run_experiment(config, base=base))


def cmd_preset(args) -> int:
    config = preset_fig4(args.seed)
    if args.key_bits:
        config.key_bits = args.key_bits
    if args.dump_config:
        config.dump(args.dump_config)
    return _report(run_experiment(config, args.output))


def cmd_keygen_bench(args) -> int:
    if args.backend:
        kernels.use_backend(args.backend)
    times = keygen_benchmark(args.bits, args.count, args.seed)
    print(json.dumps({
        "backend": kernels.BACKEND,
        "bits": args.bits,
        "count": args.count,
        "mean_seconds": statistics.fmean(times),
        "max_seconds": max(times),
    }, indent=2))
    return EXIT_OK


def cmd_attack(args) -> int:
    codec = CodecConfig()
    if args.scenario == "divergence":
        config = divergence_demo(args.seed)
    elif args.scenario == "inject":
        config = ExperimentConfig(
            initial_states=[2.0, 8.0], topology={"edges": [[0, 1]]}, epsilon=0.9, a_bar=0.9, seed=args.seed,
            codec=codec, key_bits=args.key_bits, signatures=args.signatures, max_rounds=args.max_rounds,
            adversary=AdversaryConfig("inject", target=0, xi=args.xi),
        )
    else:  # infer: node 1's only neighbor is the observer 0
        config = ExperimentConfig(
            initial_states=[1.0, 5.0, -3.0], topology={"edges": [[0, 1], [0, 2]]}, epsilon=0.45, a_bar=0.9,
            seed=args.seed, codec=codec, key_bits=args.key_bits, max_rounds=args.max_rounds, stop_threshold=1e-5,
            adversary=AdversaryConfig("isolate-and-infer", observer=0, target=1),
        )
    return _report(run_experiment(config, args.output))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="secure-consensus", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--pure-python", action="store_true", help="use the pure-Python arithmetic kernels")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a configured experiment")
    run.add_argument("--seed", type=int, required=True)
    _add_run_flags(run)
    run.set_defaults(func=cmd_run)

    preset = sub.add_parser("preset", help="run a canned scenario")
    preset.add_argument("name", choices=["fig4"])
    preset.add_argument("--seed", type=int, default=0)
    preset.add_argument("--key-bits", type=int)
    preset.add_argument("--output")
    preset.add_argument("--dump-config", help="also write the preset's config as JSON")
    preset.set_defaults(func=cmd_preset)

    bench = sub.add_parser("keygen-bench", help="time Paillier key generation")
    bench.add_argument("--bits", type=int, default=512)
    bench.add_argument("--count", type=int, default=5)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--backend", choices=["gmp", "python"])
    bench.set_defaults(func=cmd_keygen_bench)

    attack = sub.add_parser("attack", help="adversary scenario shortcuts")
    attack.add_argument("scenario", choices=["inject", "infer", "divergence"])
    attack.add_argument("--seed", type=int, default=0)
    attack.add_argument("--xi", type=float, default=10.0)
    attack.add_argument("--signatures", action="store_true")
    attack.add_argument("--key-bits", type=int, default=256)
    attack.add_argument("--max-rounds", type=int, default=300)
    attack.add_argument("--output")
    attack.set_defaults(func=cmd_attack)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    if args.pure_python:
        kernels.use_backend("python")
    try:
        return args.func(args)
    except (ConfigError, OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
