"""Sandboxed policy language: parser, checker, printer, interpreter."""

from .ast import Program
from .checker import BUILTINS, validate_program
from .errors import InterpError
from .fifo import FIFO_SOURCE, NativeFifo, bundled_source, native_fifo
from .interp import (
    DEFAULT_MAX_STEPS,
    InterpretedPolicy,
    PolicyProgram,
    load_program,
    parse,
    run_init,
    run_schedule,
)
from .printer import pretty

__all__ = [
    "BUILTINS", "DEFAULT_MAX_STEPS", "FIFO_SOURCE", "InterpError", "InterpretedPolicy", "NativeFifo",
    "PolicyProgram", "Program", "bundled_source", "load_program", "native_fifo", "parse", "pretty",
    "run_init", "run_schedule", "validate_program",
]
