"""Differentiable first-order logic over predicate tensors.

Lifted Permute/Expand/Reduce operators on masked predicate groundings, a
small reverse-mode engine, the multi-layer multi-group rule network, an
exact stratified Horn-clause oracle, five relational task families, and
supervised plus policy-gradient trainers with exam-gated curricula.
"""

from .predtensor import PredTensor, concat_channels, expand, from_values, permute_all, reduce
from .machine import MachineConfig, Model, estimate_cost, forward
from .logic import (FactSet, HornClause, HornProgram, Literal,
                    brute_force_ground, compile_clause_plan, execute_plan,
                    forward_chain, parse_program)
from .blocks_rules import shouldmove_fixture
from .presets import PRESETS, build_model

__version__ = "0.1.0"

__all__ = [
    "PredTensor", "concat_channels", "expand", "from_values", "permute_all", "reduce",
    "MachineConfig", "Model", "estimate_cost", "forward",
    "FactSet", "HornClause", "HornProgram", "Literal",
    "brute_force_ground", "compile_clause_plan", "execute_plan",
    "forward_chain", "parse_program", "shouldmove_fixture",
    "PRESETS", "build_model", "__version__",
]
