from .ast import EvalError, ParseError, Program, RewardProgram
from .evaluator import evaluate
from .parser import parse, tokenize
from .presets import APPENDIX_B, PRESET_NAMES, preset
from .printer import pretty_print
from .validate import load_reward_file, save_reward_file, validate_program

__all__ = ["EvalError", "ParseError", "Program", "RewardProgram", "evaluate", "parse", "tokenize",
           "APPENDIX_B", "PRESET_NAMES", "preset", "pretty_print", "load_reward_file", "save_reward_file",
           "validate_program"]
