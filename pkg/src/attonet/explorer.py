"""Machine-driven design exploration over module micro-architectures.

A Generator maps integer seeds to candidate networks by perturbing a base
micro-parameterization with log-normal noise inside the fixed family
skeleton.  `step` scores one generation of candidates with the efficiency
score under the accuracy-floor constraint and recenters the generator on the
best feasible candidate, biased toward fewer parameters; the resulting
generator sequence yields networks with progressively smaller complexity.
"""

from __future__ import annotations

import json
import math
import subprocess
from dataclasses import dataclass, replace
from typing import Callable, Protocol

import numpy as np

from .complexity import analyze_network
from .errors import EvaluatorFailureError, InsufficientHistoryError
from .graph import (
    LayerKind,
    NetworkSpec,
    TensorShape,
    bind_channels,
    dumps,
    loads,
    spec_digest,
    validate,
)
from .netscore import DEFAULT_CONFIG, MetricConfig, MetricInputs, indicator, netscore
from .zoo import ModuleDims, assemble_network

__all__ = [
    "MicroParams",
    "Generator",
    "StepConfig",
    "GenerationRecord",
    "ExplorationState",
    "AccuracyEvaluator",
    "MemoizedEvaluator",
    "SyntheticEvaluator",
    "CommandEvaluator",
    "generate",
    "generation_seeds",
    "step",
    "emit_family",
    "initial_state",
    "run_exploration",
]


@dataclass(frozen=True)
class MicroParams:
    """Per-module widths/groups plus the stem width and downsampling layout.

    Modules between consecutive downsampling positions form a stage; the
    decompress width is constant within a stage (the residual chain adds
    feature maps of that width end to end).
    """

    stem_width: int
    modules: tuple[ModuleDims, ...]
    downsample_positions: tuple[int, ...] = (1, 4, 8, 14)
    num_classes: int = 51
    input_shape: TensorShape = TensorShape(3, 224, 224)

    def __post_init__(self):
        object.__setattr__(self, "modules", tuple(self.modules))
        object.__setattr__(self, "downsample_positions",
                           tuple(sorted(self.downsample_positions)))
        if self.stem_width < 1:
            raise ValueError("stem_width must be >= 1")
        if not self.modules:
            raise ValueError("at least one module is required")
        positions = self.downsample_positions
        if not positions or positions[0] != 1:
            raise ValueError("downsample positions must start at module 1")
        if positions[-1] > len(self.modules):
            raise ValueError("downsample position beyond the module chain")
        for stage in self.stages():
            widths = {self.modules[i - 1].decompress_width for i in stage}
            if len(widths) != 1:
                raise ValueError(f"decompress width varies within stage {stage}")

    def stages(self) -> list[list[int]]:
        """1-based module indices grouped by stage."""
        bounds = list(self.downsample_positions) + [len(self.modules) + 1]
        return [list(range(bounds[i], bounds[i + 1])) for i in range(len(bounds) - 1)]

    @staticmethod
    def from_network(net: NetworkSpec) -> "MicroParams":
        """Extract the micro-parameterization of a skeleton-shaped network."""
        positions = tuple(
            i for i, mod in enumerate(net.modules, 1)
            if mod.shortcut.kind is LayerKind.CONV
        )
        modules = tuple(
            ModuleDims(
                compress_width=mod.compress.out_channels,
                group_count=mod.group_conv.groups,
                group_out_width=mod.group_conv.out_channels,
                mix_width=mod.mix.out_channels,
                decompress_width=mod.decompress.out_channels,
            )
            for mod in net.modules
        )
        return MicroParams(
            stem_width=net.stem_conv.out_channels,
            modules=modules,
            downsample_positions=positions,
            num_classes=net.head_dense.out_channels,
            input_shape=net.input_shape,
        )

    def materialize(self, name: str) -> NetworkSpec:
        return assemble_network(
            name,
            stem_width=self.stem_width,
            module_dims=self.modules,
            downsample_positions=self.downsample_positions,
            num_classes=self.num_classes,
            input_shape=self.input_shape,
        )


@dataclass(frozen=True)
class Generator:
    """A seeded sampler of candidate networks around a base design."""

    base: MicroParams
    perturbation_scale: float = 0.2
    complexity_pressure: float = 0.5

    def __post_init__(self):
        if self.perturbation_scale < 0:
            raise ValueError("perturbation_scale must be non-negative")
        if not (0 <= self.complexity_pressure <= 1):
            raise ValueError("complexity_pressure must be in [0, 1]")


def _perturb_width(width: int, rng: np.random.Generator, scale: float) -> int:
    factor = math.exp(scale * float(rng.standard_normal()))
    return max(1, round(width * factor))


def generate(g: Generator, seed: int) -> NetworkSpec:
    """Deterministically sample one valid network from (generator, seed).

    Widths move multiplicatively under log-normal noise of the generator's
    scale, get rounded to integers, and are clamped so the result always
    binds and validates; zero scale reproduces the base exactly.
    """
    rng = np.random.default_rng(seed)
    base = g.base
    scale = g.perturbation_scale

    stem = _perturb_width(base.stem_width, rng, scale)
    stage_widths = {}
    for stage in base.stages():
        width = base.modules[stage[0] - 1].decompress_width
        stage_widths[stage[0]] = _perturb_width(width, rng, scale)

    modules = []
    for stage in base.stages():
        stage_width = stage_widths[stage[0]]
        for index in stage:
            dims = base.modules[index - 1]
            compress = _perturb_width(dims.compress_width, rng, scale)
            group_out = _perturb_width(dims.group_out_width, rng, scale)
            mix = _perturb_width(dims.mix_width, rng, scale)
            groups = _perturb_width(dims.group_count, rng, scale)
            groups = min(groups, compress, group_out)
            modules.append(ModuleDims(
                compress_width=compress,
                group_count=groups,
                group_out_width=group_out,
                mix_width=mix,
                decompress_width=stage_width,
            ))

    micro = MicroParams(
        stem_width=stem,
        modules=tuple(modules),
        downsample_positions=base.downsample_positions,
        num_classes=base.num_classes,
        input_shape=base.input_shape,
    )
    net = micro.materialize(f"candidate-{seed}")
    report = validate(net)
    if not report.ok:  # clamping is supposed to make this unreachable
        raise AssertionError(f"generated network failed validation: {report.errors}")
    return net


# ---------------------------------------------------------------------------
# evaluators


class AccuracyEvaluator(Protocol):
    """Maps a network to a top-1 accuracy percentage; deterministic per net."""

    def __call__(self, net: NetworkSpec) -> float: ...


class MemoizedEvaluator:
    """Caches evaluator results by canonical spec digest."""

    def __init__(self, inner: AccuracyEvaluator):
        self.inner = inner
        self.cache: dict[str, float] = {}
        self.calls = 0

    def __call__(self, net: NetworkSpec) -> float:
        key = spec_digest(net)
        if key not in self.cache:
            self.calls += 1
            self.cache[key] = float(self.inner(net))
        return self.cache[key]


class SyntheticEvaluator:
    """Training-free accuracy proxy for exercising the search loop.

    Returns ``clamp(55 + 8*log10(params_millions * 10), 0, 95)``: accuracy
    grows slowly with capacity, so shrinking a network below ~1.78 M
    parameters trips the default 65% feasibility floor.
    """

    def __call__(self, net: NetworkSpec) -> float:
        params = analyze_network(bind_channels(net)).total_params
        acc = 55.0 + 8.0 * math.log10(params / 1e6 * 10.0)
        return min(95.0, max(0.0, acc))


class CommandEvaluator:
    """Runs an external program: the network JSON goes to its stdin and one
    decimal accuracy percentage is read from its stdout.  A nonzero exit
    status is reported as an evaluator failure."""

    def __init__(self, command: str):
        self.command = command

    def __call__(self, net: NetworkSpec) -> float:
        proc = subprocess.run(
            [self.command], input=dumps(net), capture_output=True, text=True)
        if proc.returncode != 0:
            raise RuntimeError(
                f"evaluator command exited {proc.returncode}: {proc.stderr.strip()}")
        try:
            return float(proc.stdout.strip())
        except ValueError:
            raise RuntimeError(
                f"evaluator command printed non-numeric output: {proc.stdout!r}")


# ---------------------------------------------------------------------------
# progressive search


@dataclass(frozen=True)
class StepConfig:
    """One generation's sampling budget and selection behavior.

    `survivor_fraction` keeps the top share of feasible candidates by score;
    the recenter target is then the fewest-parameter survivor scoring within
    `complexity_pressure` points of the generation's best.
    """

    seeds_per_generation: int
    survivor_fraction: float = 0.5
    metric: MetricConfig = DEFAULT_CONFIG

    def __post_init__(self):
        if self.seeds_per_generation < 2:
            raise ValueError("seeds_per_generation must be >= 2")
        if not (0 < self.survivor_fraction <= 1):
            raise ValueError("survivor_fraction must be in (0, 1]")


@dataclass(frozen=True)
class GenerationRecord:
    """Best feasible candidate seen up to and including one generation."""

    generation: int
    best_netscore: float
    best_params: int
    best_mult_adds: int
    best_digest: str
    best_accuracy: float
    feasible_count: int
    best_spec_json: str

    def log_line(self) -> str:
        return json.dumps({
            "generation": self.generation,
            "best_netscore": round(self.best_netscore, 4),
            "best_params": self.best_params,
            "best_mult_adds": self.best_mult_adds,
            "feasible_count": self.feasible_count,
            "spec_digest": self.best_digest,
        }, sort_keys=True)


@dataclass(frozen=True)
class ExplorationState:
    """Generation counter, current generator, and the best-so-far history."""

    generation: int
    current: Generator
    history: tuple[GenerationRecord, ...]
    rng_seed: int


def initial_state(base: MicroParams | NetworkSpec, rng_seed: int, *,
                  perturbation_scale: float = 0.2,
                  complexity_pressure: float = 0.5) -> ExplorationState:
    if isinstance(base, NetworkSpec):
        base = MicroParams.from_network(base)
    gen = Generator(base, perturbation_scale, complexity_pressure)
    return ExplorationState(generation=0, current=gen, history=(), rng_seed=rng_seed)


@dataclass(frozen=True)
class _Candidate:
    net: NetworkSpec
    digest: str
    params: int
    mult_adds: int
    accuracy: float
    score: float


def generation_seeds(rng_seed: int, generation: int, count: int) -> list[int]:
    rng = np.random.default_rng([rng_seed, generation])
    return [int(s) for s in rng.integers(0, 2**63, size=count)]


def step(state: ExplorationState, evaluator: AccuracyEvaluator,
         cfg: StepConfig) -> ExplorationState:
    """Advance one generation.

    Samples `cfg.seeds_per_generation` candidates from the current generator,
    scores each (accuracy from the evaluator, complexity from exact counts),
    drops candidates under the accuracy floor, and recenters the next
    generator on the selected survivor.  When nothing is feasible the base is
    kept and the perturbation scale halves.  The recorded best never gets
    worse from one generation to the next.
    """
    seeds = generation_seeds(state.rng_seed, state.generation, cfg.seeds_per_generation)

    candidates: list[_Candidate] = []
    for seed in seeds:
        net = generate(state.current, seed)
        digest = spec_digest(net)
        try:
            accuracy = float(evaluator(net))
        except Exception as exc:
            raise EvaluatorFailureError(digest, exc) from exc
        report = analyze_network(bind_channels(net))
        score = netscore(
            MetricInputs.from_raw_counts(accuracy, report.total_params,
                                         report.total_mult_adds),
            cfg.metric,
        ) if accuracy > 0 else -math.inf
        candidates.append(_Candidate(net, digest, report.total_params,
                                     report.total_mult_adds, accuracy, score))

    feasible = [c for c in candidates
                if indicator(min(100.0, max(0.0, c.accuracy)), cfg.metric)]

    previous = state.history[-1] if state.history else None

    if not feasible:
        next_generator = replace(state.current,
                                 perturbation_scale=state.current.perturbation_scale / 2)
        if previous is not None:
            record = replace(previous, generation=state.generation, feasible_count=0)
        else:
            record = GenerationRecord(
                generation=state.generation,
                best_netscore=-math.inf,
                best_params=0,
                best_mult_adds=0,
                best_digest="",
                best_accuracy=0.0,
                feasible_count=0,
                best_spec_json="",
            )
        return ExplorationState(state.generation + 1, next_generator,
                                state.history + (record,), state.rng_seed)

    ranked = sorted(feasible, key=lambda c: (-c.score, c.params, c.digest))
    best = ranked[0]
    survivors = ranked[:max(1, math.ceil(cfg.survivor_fraction * len(ranked)))]
    window = [c for c in survivors
              if c.score >= best.score - state.current.complexity_pressure]
    target = min(window, key=lambda c: (c.params, -c.score, c.digest))

    next_generator = replace(state.current, base=MicroParams.from_network(target.net))

    if previous is not None and previous.best_netscore >= best.score:
        record = replace(previous, generation=state.generation,
                         feasible_count=len(feasible))
    else:
        record = GenerationRecord(
            generation=state.generation,
            best_netscore=best.score,
            best_params=best.params,
            best_mult_adds=best.mult_adds,
            best_digest=best.digest,
            best_accuracy=best.accuracy,
            feasible_count=len(feasible),
            best_spec_json=dumps(best.net, indent=None),
        )
    return ExplorationState(state.generation + 1, next_generator,
                            state.history + (record,), state.rng_seed)


def emit_family(state: ExplorationState, count: int) -> list[NetworkSpec]:
    """Pick `count` distinct recorded bests, largest parameter count first.

    Candidates come from distinct generations (carried-over bests collapse
    to one entry) and satisfy the accuracy floor per their recorded
    evaluations; ties on parameter count keep the higher-scoring network.
    Raises InsufficientHistoryError when history cannot supply `count`
    networks with distinct sizes.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    by_digest: dict[str, GenerationRecord] = {}
    for record in state.history:
        if record.best_digest and record.best_digest not in by_digest:
            by_digest[record.best_digest] = record
    by_params: dict[int, GenerationRecord] = {}
    for record in by_digest.values():
        kept = by_params.get(record.best_params)
        if kept is None or record.best_netscore > kept.best_netscore:
            by_params[record.best_params] = record
    pool = sorted(by_params.values(),
                  key=lambda r: (-r.best_netscore, r.best_params, r.best_digest))
    if len(pool) < count:
        raise InsufficientHistoryError(
            f"history holds {len(pool)} distinct feasible bests, need {count}")
    chosen = sorted(pool[:count], key=lambda r: -r.best_params)
    return [loads(r.best_spec_json) for r in chosen]


def run_exploration(state: ExplorationState, evaluator: AccuracyEvaluator,
                    generations: int, cfg: StepConfig,
                    on_generation: Callable[[GenerationRecord], None] | None = None,
                    ) -> ExplorationState:
    """Run `generations` steps with digest-keyed evaluator memoization."""
    memo = MemoizedEvaluator(evaluator)
    for _ in range(generations):
        state = step(state, memo, cfg)
        if on_generation is not None:
            on_generation(state.history[-1])
    return state
