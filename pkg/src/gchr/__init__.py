"""Ground Constraint Handling Rules: parser, sequential, parallel, set-based,
transactional and distributed engines, plus a brute-force reference oracle."""

from .chre import encode_1neighbor, encode_program, run_ensemble
from .chrmp import run_mp
from .chrt import run_chrt, unfold_bounded
from .engine_par import ParConfig, run_parallel
from .engine_seq import Delta, FinalResult, run
from .errors import (CHRError, EvalError, FragmentError, NonTermination, ParseError,
                     StuckBuiltin)
from .parser import parse_goal, parse_program
from .syntax import Program, Rule, check_fragment, validate_ground
from .terms import Atomic, Compound, Constraint, Var

__all__ = [
    "Atomic", "CHRError", "Compound", "Constraint", "Delta", "EvalError", "FinalResult",
    "FragmentError", "NonTermination", "ParConfig", "ParseError", "Program", "Rule",
    "StuckBuiltin", "Var", "check_fragment", "encode_1neighbor", "encode_program",
    "parse_goal", "parse_program", "run", "run_chrt", "run_ensemble", "run_mp",
    "run_parallel", "unfold_bounded", "validate_ground",
]
