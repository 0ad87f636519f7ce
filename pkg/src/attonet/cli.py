"""Command-line entry point: build, analyze, score, infer, explore, and
export-dot.  Exit codes: 0 success, 1 domain error, 2 usage error."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import engine, explorer
from .complexity import analyze_network
from .errors import AttonetError
from .graph import (
    LayerKind,
    NetworkSpec,
    TensorShape,
    bind_channels,
    dumps,
    infer_shapes,
    loads,
    module_id,
    validate,
)
from .netscore import MetricConfig, MetricInputs, netscore
from .zoo import PrototypeConfig, build_attonet, build_prototype

__all__ = ["run", "main"]

_NETWORKS = ("attonet-a", "attonet-b", "attonet-c", "attonet-d", "prototype")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attonet",
        description="Model, analyze, score, run, and explore the AttoNet family.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="write a network description to a JSON file")
    p.add_argument("--network", required=True, choices=_NETWORKS)
    p.add_argument("--modules", type=int, default=16,
                   help="module count (prototype only)")
    p.add_argument("--classes", type=int, default=51,
                   help="output classes (prototype only)")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--json", action="store_true", help="machine-readable result")

    p = sub.add_parser("analyze", help="per-layer and total parameter/mult-add counts")
    p.add_argument("spec", type=Path)
    p.add_argument("--input", type=int, default=224, metavar="N",
                   help="square input resolution (default 224)")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("score", help="efficiency score from raw measured counts")
    p.add_argument("--accuracy", required=True, type=float, help="top-1 percent")
    p.add_argument("--params", required=True, type=int, help="raw parameter count")
    p.add_argument("--macs", required=True, type=int, help="raw multiply-add count")
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("infer", help="run one example through a network")
    p.add_argument("spec", type=Path)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--weights", type=Path, help="weight file (ATTW)")
    group.add_argument("--random-seed", type=int, help="seeded random weights")
    p.add_argument("--input", required=True, type=Path, help="tensor file (ATTO)")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("explore", help="progressive seeded design search")
    p.add_argument("--base", required=True, type=Path, help="base network JSON")
    p.add_argument("--generations", required=True, type=int)
    p.add_argument("--seeds", required=True, type=int, help="candidates per generation")
    p.add_argument("--rng", required=True, type=int, help="search seed")
    p.add_argument("--evaluator", required=True,
                   help="'synthetic' or 'command:<path>'")
    p.add_argument("--scale", type=float, default=0.2,
                   help="perturbation scale (default 0.2)")
    p.add_argument("--pressure", type=float, default=0.5,
                   help="complexity pressure (default 0.5)")
    p.add_argument("--json", action="store_true",
                   help="no-op; the log is already one JSON line per generation")

    p = sub.add_parser("export-dot", help="graph description with one node per layer")
    p.add_argument("spec", type=Path)
    p.add_argument("--out", type=Path, help="output path (default: stdout)")
    p.add_argument("--json", action="store_true")

    return parser


def _load_spec(path: Path) -> NetworkSpec:
    return loads(path.read_text())


def _cmd_build(args) -> int:
    if args.network == "prototype":
        net = build_prototype(PrototypeConfig(num_modules=args.modules,
                                              num_classes=args.classes))
    else:
        net = build_attonet(args.network.split("-")[1])
    text = dumps(net) + "\n"
    args.out.write_text(text)
    if args.json:
        print(json.dumps({"name": net.name, "path": str(args.out),
                          "modules": len(net.modules)}))
    else:
        print(f"wrote {net.name} ({len(net.modules)} modules) to {args.out}")
    return 0


def _cmd_analyze(args) -> int:
    net = _load_spec(args.spec)
    report = validate(net)
    if not report.ok:
        raise AttonetError(
            "network does not validate: "
            + "; ".join(f"{v.where}: {v.message}" for v in report.errors))
    shape = TensorShape(net.input_shape.channels, args.input, args.input)
    cx = analyze_network(bind_channels(net), shape)
    if args.json:
        print(json.dumps({
            "name": net.name,
            "input_shape": {"channels": shape.channels, "height": shape.height,
                            "width": shape.width},
            "per_layer": [
                {"layer": e.layer_id, "params": e.params, "mult_adds": e.mult_adds}
                for e in cx.per_layer
            ],
            "total_params": cx.total_params,
            "total_mult_adds": cx.total_mult_adds,
        }))
        return 0
    print(f"{net.name} at {shape.channels}x{shape.height}x{shape.width}")
    print(f"{'layer':<18}{'params':>12}{'mult-adds':>16}")
    for e in cx.per_layer:
        if e.params or e.mult_adds:
            print(f"{e.layer_id:<18}{e.params:>12,}{e.mult_adds:>16,}")
    print(f"{'total':<18}{cx.total_params:>12,}{cx.total_mult_adds:>16,}")
    print(f"total_params {cx.total_params}")
    print(f"total_mult_adds {cx.total_mult_adds}")
    print(f"({cx.total_params / 1e6:.1f} M params, "
          f"{cx.total_mult_adds / 1e6:.1f} M mult-adds)")
    return 0


def _cmd_score(args) -> int:
    cfg = MetricConfig(alpha=args.alpha, beta=args.beta, gamma=args.gamma)
    value = netscore(MetricInputs.from_raw_counts(args.accuracy, args.params, args.macs),
                     cfg)
    if args.json:
        print(json.dumps({"netscore": round(value, 2)}))
    else:
        print(f"{value:.2f}")
    return 0


def _cmd_infer(args) -> int:
    net = _load_spec(args.spec)
    report = validate(net)
    if not report.ok:
        raise AttonetError(
            "network does not validate: "
            + "; ".join(f"{v.where}: {v.message}" for v in report.errors))
    bound = bind_channels(net)
    if args.weights is not None:
        with open(args.weights, "rb") as f:
            store = engine.load_weights(f)
    else:
        store = engine.init_weights(bound, args.random_seed)
    with open(args.input, "rb") as f:
        x = engine.load_tensor(f)
    out = engine.forward(bound, store, x)
    probs = out.data.reshape(-1)
    if args.json:
        print(json.dumps({"distribution": [float(p) for p in probs]}))
    else:
        for p in probs:
            print(f"{p:.6f}")
    return 0


def _cmd_explore(args) -> int:
    net = _load_spec(args.base)
    if args.evaluator == "synthetic":
        evaluator = explorer.SyntheticEvaluator()
    elif args.evaluator.startswith("command:"):
        evaluator = explorer.CommandEvaluator(args.evaluator.split(":", 1)[1])
    else:
        raise AttonetError(f"unknown evaluator {args.evaluator!r}; "
                           "expected 'synthetic' or 'command:<path>'")
    state = explorer.initial_state(net, args.rng, perturbation_scale=args.scale,
                                   complexity_pressure=args.pressure)
    cfg = explorer.StepConfig(seeds_per_generation=args.seeds)
    explorer.run_exploration(state, evaluator, args.generations, cfg,
                             on_generation=lambda record: print(record.log_line()))
    return 0


def _dot_label(bound, layer_id: str) -> str:
    layer = bound[layer_id].spec
    if layer.kind is LayerKind.CONV:
        return f"{layer.kind.value}/{layer.out_channels}/{layer.groups}/{layer.stride}"
    if layer.kind in (LayerKind.MAX_POOL, LayerKind.AVG_POOL):
        return f"{layer.kind.value}/-/-/{layer.stride}"
    if layer.kind is LayerKind.DENSE:
        return f"dense/{layer.out_channels}/-/-"
    return f"{layer.kind.value}/-/-/-"


def _cmd_export_dot(args) -> int:
    net = _load_spec(args.spec)
    bound = bind_channels(net)
    lines = [f'digraph "{net.name}" {{', "  rankdir=TB;"]
    for layer in bound.layers:
        lines.append(f'  "{layer.layer_id}" [label="{layer.layer_id}\\n'
                     f'{_dot_label(bound, layer.layer_id)}"];')
    lines.append('  "stem.conv" -> "stem.pool";')
    prev = "stem.pool"
    for i in range(1, len(net.modules) + 1):
        mid = module_id(i)
        # the residual add is drawn as the shortcut joining the decompress node
        lines.append(f'  "{prev}" -> "{mid}.compress";')
        lines.append(f'  "{mid}.compress" -> "{mid}.group_conv";')
        lines.append(f'  "{mid}.group_conv" -> "{mid}.mix";')
        lines.append(f'  "{mid}.mix" -> "{mid}.decompress";')
        lines.append(f'  "{prev}" -> "{mid}.shortcut";')
        lines.append(f'  "{mid}.shortcut" -> "{mid}.decompress";')
        prev = f"{mid}.decompress"
    lines.append(f'  "{prev}" -> "head.pool";')
    lines.append('  "head.pool" -> "head.dense";')
    lines.append('  "head.dense" -> "head.softmax";')
    lines.append("}")
    text = "\n".join(lines) + "\n"
    if args.out is not None:
        args.out.write_text(text)
        if args.json:
            print(json.dumps({"path": str(args.out)}))
        else:
            print(f"wrote graph for {net.name} to {args.out}")
    else:
        if args.json:
            print(json.dumps({"dot": text}))
        else:
            sys.stdout.write(text)
    return 0


_HANDLERS = {
    "build": _cmd_build,
    "analyze": _cmd_analyze,
    "score": _cmd_score,
    "infer": _cmd_infer,
    "explore": _cmd_explore,
    "export-dot": _cmd_export_dot,
}


def run(argv: list[str]) -> int:
    """Parse and execute one command; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    try:
        return _HANDLERS[args.command](args)
    except (AttonetError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
