"""Mini kernel language: parsing, launch configs, elaboration."""

from .config import ConfigError, LaunchConfig
from .elaborate import (
    ElaborationError,
    Launch,
    StructuredCtaError,
    check_sync_set,
    elaborate,
    resolve,
    validate_structured,
)
from .parser import KernelAst, KernelSyntaxError, parse_kernel

__all__ = [
    "ConfigError",
    "ElaborationError",
    "KernelAst",
    "KernelSyntaxError",
    "Launch",
    "LaunchConfig",
    "StructuredCtaError",
    "check_sync_set",
    "elaborate",
    "parse_kernel",
    "resolve",
    "validate_structured",
]
