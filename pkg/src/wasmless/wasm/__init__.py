"""WebAssembly module validation and fuel instrumentation."""

from .tools import (
    DEFAULT_SCHEDULE,
    EXHAUSTED_EXPORT,
    FUEL_EXPORT,
    MEMORY_EXCEEDED_EXPORT,
    MEMORY_LIMIT_EXPORT,
    START_EXPORT,
    FuelSchedule,
    ModuleArtifact,
    content_hash,
    instrument,
    validate,
    validate_and_instrument,
)

__all__ = [
    "DEFAULT_SCHEDULE",
    "EXHAUSTED_EXPORT",
    "FUEL_EXPORT",
    "MEMORY_EXCEEDED_EXPORT",
    "MEMORY_LIMIT_EXPORT",
    "START_EXPORT",
    "FuelSchedule",
    "ModuleArtifact",
    "content_hash",
    "instrument",
    "validate",
    "validate_and_instrument",
]
