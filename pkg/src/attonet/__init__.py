"""Toolkit for the AttoNet family of efficient convolutional networks:
architecture modeling and validation, exact complexity accounting, the
efficiency score, a reference inference engine, and seeded design
exploration."""

from .graph import (
    BoundLayer,
    BoundNetwork,
    LayerKind,
    LayerSpec,
    ModuleSpec,
    NetworkSpec,
    TensorShape,
    ValidationReport,
    Violation,
    bind_channels,
    dumps,
    infer_shapes,
    loads,
    spec_digest,
    validate,
)
from .zoo import PrototypeConfig, build_attonet, build_prototype
from .complexity import ComplexityReport, analyze_network, count_mult_adds, count_params
from .netscore import MetricConfig, MetricInputs, indicator, netscore
from .engine import Tensor, WeightStore, conv2d, forward, forward_trace, init_weights
from .explorer import (
    ExplorationState,
    Generator,
    MicroParams,
    StepConfig,
    emit_family,
    generate,
    initial_state,
    run_exploration,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "BoundLayer",
    "BoundNetwork",
    "LayerKind",
    "LayerSpec",
    "ModuleSpec",
    "NetworkSpec",
    "TensorShape",
    "ValidationReport",
    "Violation",
    "bind_channels",
    "dumps",
    "infer_shapes",
    "loads",
    "spec_digest",
    "validate",
    "PrototypeConfig",
    "build_attonet",
    "build_prototype",
    "ComplexityReport",
    "analyze_network",
    "count_mult_adds",
    "count_params",
    "MetricConfig",
    "MetricInputs",
    "indicator",
    "netscore",
    "Tensor",
    "WeightStore",
    "conv2d",
    "forward",
    "forward_trace",
    "init_weights",
    "ExplorationState",
    "Generator",
    "MicroParams",
    "StepConfig",
    "emit_family",
    "generate",
    "initial_state",
    "run_exploration",
    "step",
]
