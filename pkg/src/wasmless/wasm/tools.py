"""Validation and fuel instrumentation of WebAssembly modules.

The instrumentation pass splits every function body into straight-line
segments, each ending with a control instruction, and prepends to every
segment a charge of its static cost against a 64-bit global exported as
``__fuel_remaining``.  A segment whose cost exceeds the remaining fuel sets
``__fuel_exhausted``, zeroes the fuel global and traps.

Retired-instruction convention (what the fuel count equals):

* every instruction the program counter passes through is retired, control
  instructions included;
* a branch to a ``block``/``if`` label resumes *after* its ``end``, so that
  ``end`` is not retired; a branch to a ``loop`` resumes after ``loop``;
* an ``if`` whose condition is false resumes after its ``else`` (or after its
  ``end`` when there is no ``else``);
* reaching ``else`` from the then-arm jumps past the matching ``end``.

Every resumption point above is the first instruction of a segment, so
charging each segment on entry is exact for executions that do not trap.

``memory.grow`` is additionally guarded against a host-provided page limit
(``__memory_limit_pages``); a request beyond it sets ``__memory_exceeded``
and traps.  A module ``start`` function is turned into the export
``__wasmless_start`` so the host can set the fuel budget before it runs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import wasmtime

from ..errors import MalformedModule, TransformOverflow
from . import binary as wb
from . import opcodes as op

FUEL_EXPORT = "__fuel_remaining"
EXHAUSTED_EXPORT = "__fuel_exhausted"
MEMORY_LIMIT_EXPORT = "__memory_limit_pages"
MEMORY_EXCEEDED_EXPORT = "__memory_exceeded"
START_EXPORT = "__wasmless_start"
RESERVED_EXPORTS = (FUEL_EXPORT, EXHAUSTED_EXPORT, MEMORY_LIMIT_EXPORT, MEMORY_EXCEEDED_EXPORT, START_EXPORT)

MAX_SEGMENT_COST = 2**32
MAX_PAGES = 65536


@dataclass(frozen=True)
class FuelSchedule:
    default_cost: int = 1
    overrides: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.default_cost, int) or self.default_cost <= 0:
            raise ValueError("default_cost must be a positive integer")
        for name, cost in self.overrides.items():
            if name not in op.NAMES:
                raise ValueError(f"unknown instruction class {name!r}")
            if not isinstance(cost, int) or cost < 0:
                raise ValueError(f"cost for {name!r} must be a nonnegative integer")

    def cost(self, opcode: int) -> int:
        return self.overrides.get(op.mnemonic(opcode), self.default_cost)

    def fingerprint(self) -> str:
        items = ",".join(f"{k}={v}" for k, v in sorted(self.overrides.items()))
        return f"default={self.default_cost};{items}"

    def __hash__(self):
        return hash(self.fingerprint())


DEFAULT_SCHEDULE = FuelSchedule()


@dataclass(frozen=True)
class ModuleArtifact:
    raw_bytes: bytes
    content_hash: str
    instruction_count_static: int
    instrumented_bytes: bytes = b""

    @property
    def instrumented(self) -> bool:
        return bool(self.instrumented_bytes)

    @cached_property
    def pool_key(self) -> str:
        """Compiled-module cache key: the raw hash plus which bytes get compiled."""
        if not self.instrumented_bytes:
            return f"{self.content_hash}:raw"
        return f"{self.content_hash}:{hashlib.sha256(self.instrumented_bytes).hexdigest()[:16]}"


def content_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@lru_cache(maxsize=1)
def _validation_engine() -> wasmtime.Engine:
    return wasmtime.Engine()


def validate(data: bytes) -> ModuleArtifact:
    """Check that ``data`` is a well-formed core module and describe it.

    Structural decoding and the opcode whitelist are done here; operand
    typing is checked by the engine's validator.
    """
    data = bytes(data)
    mod = wb.decode(data)
    try:
        wasmtime.Module.validate(_validation_engine(), data)
    except wasmtime.WasmtimeError as exc:
        raise MalformedModule(str(exc).strip().splitlines()[0]) from exc
    return ModuleArtifact(data, content_hash(data), mod.instruction_count())


# -- instrumentation -------------------------------------------------------

def _b(name: str) -> int:
    return op.NAMES[name]


def _charge(cost: int, g_fuel: int, g_exh: int) -> bytes:
    gf = wb.uleb(g_fuel)
    c = wb.sleb(cost)
    return b"".join([
        bytes([op.GLOBAL_GET]), gf, bytes([op.I64_CONST]), c, bytes([_b("i64.lt_u")]),
        bytes([op.IF, wb.EMPTY_BLOCK]),
        bytes([op.I32_CONST, 1, op.GLOBAL_SET]), wb.uleb(g_exh),
        bytes([op.I64_CONST, 0, op.GLOBAL_SET]), gf,
        bytes([op.UNREACHABLE, op.END]),
        bytes([op.GLOBAL_GET]), gf, bytes([op.I64_CONST]), c, bytes([_b("i64.sub"), op.GLOBAL_SET]), gf,
    ])


def _grow_guard(g_tmp: int, g_limit: int, g_exceeded: int) -> bytes:
    ext = _b("i64.extend_i32_u")
    return b"".join([
        bytes([op.GLOBAL_SET]), wb.uleb(g_tmp),
        bytes([op.MEMORY_SIZE, 0, ext]),
        bytes([op.GLOBAL_GET]), wb.uleb(g_tmp), bytes([ext, _b("i64.add")]),
        bytes([op.GLOBAL_GET]), wb.uleb(g_limit), bytes([ext, _b("i64.gt_u")]),
        bytes([op.IF, wb.EMPTY_BLOCK]),
        bytes([op.I32_CONST, 1, op.GLOBAL_SET]), wb.uleb(g_exceeded),
        bytes([op.UNREACHABLE, op.END]),
        bytes([op.GLOBAL_GET]), wb.uleb(g_tmp),
    ])


def segments(instructions: list[wb.Instruction]) -> list[tuple[int, int]]:
    """Split a body into ``[start, stop)`` index ranges, each ending with a control instruction."""
    out = []
    start = 0
    for i, ins in enumerate(instructions):
        if ins.opcode in op.CONTROL:
            out.append((start, i + 1))
            start = i + 1
    if start != len(instructions):
        out.append((start, len(instructions)))
    return out


def _instrument_body(data: bytes, body: wb.FunctionBody, schedule: FuelSchedule, g: dict) -> bytes:
    instrs = body.instructions
    pieces = [data[body.start:body.code_start]]
    for lo, hi in segments(instrs):
        cost = sum(schedule.cost(ins.opcode) for ins in instrs[lo:hi])
        if cost > MAX_SEGMENT_COST:
            raise TransformOverflow(f"segment cost {cost} exceeds 2^32")
        if cost:
            pieces.append(_charge(cost, g["fuel"], g["exhausted"]))
        for ins in instrs[lo:hi]:
            if ins.opcode == op.MEMORY_GROW:
                pieces.append(_grow_guard(g["tmp"], g["limit"], g["exceeded"]))
            pieces.append(data[ins.start:ins.end])
    code = b"".join(pieces)
    return wb.uleb(len(code)) + code


def _global_entry(valtype: str, init: int) -> bytes:
    const = op.I64_CONST if valtype == "i64" else op.I32_CONST
    return bytes([wb.VALTYPE_CODES[valtype], 1, const]) + wb.sleb(init) + bytes([op.END])


def _vector_payload(data: bytes, sec: wb.Section | None) -> tuple[int, bytes]:
    if sec is None:
        return 0, b""
    r = wb.Reader(data, sec.payload_start, sec.end)
    count = r.u32()
    return count, data[r.pos:sec.end]


def _section(sec_id: int, payload: bytes) -> bytes:
    return bytes([sec_id]) + wb.uleb(len(payload)) + payload


def instrument(artifact: ModuleArtifact, schedule: FuelSchedule = DEFAULT_SCHEDULE) -> ModuleArtifact:
    """Return ``artifact`` with ``instrumented_bytes`` populated."""
    data = artifact.raw_bytes
    mod = wb.decode(data)
    for ex in mod.exports:
        if ex.name in RESERVED_EXPORTS:
            raise MalformedModule(f"module already exports reserved name {ex.name!r}")

    base = mod.total_globals
    g = {"fuel": base, "exhausted": base + 1, "limit": base + 2, "exceeded": base + 3, "tmp": base + 4}
    new_globals = [
        _global_entry("i64", 0),
        _global_entry("i32", 0),
        _global_entry("i32", MAX_PAGES),
        _global_entry("i32", 0),
        _global_entry("i32", 0),
    ]
    new_exports = [
        wb.name_bytes(FUEL_EXPORT) + bytes([wb.KIND_GLOBAL]) + wb.uleb(g["fuel"]),
        wb.name_bytes(EXHAUSTED_EXPORT) + bytes([wb.KIND_GLOBAL]) + wb.uleb(g["exhausted"]),
        wb.name_bytes(MEMORY_LIMIT_EXPORT) + bytes([wb.KIND_GLOBAL]) + wb.uleb(g["limit"]),
        wb.name_bytes(MEMORY_EXCEEDED_EXPORT) + bytes([wb.KIND_GLOBAL]) + wb.uleb(g["exceeded"]),
    ]
    if mod.start is not None:
        new_exports.append(wb.name_bytes(START_EXPORT) + bytes([wb.KIND_FUNC]) + wb.uleb(mod.start))

    n, old = _vector_payload(data, mod.section(wb.SEC_GLOBAL))
    global_sec = _section(wb.SEC_GLOBAL, wb.uleb(n + len(new_globals)) + old + b"".join(new_globals))
    n, old = _vector_payload(data, mod.section(wb.SEC_EXPORT))
    export_sec = _section(wb.SEC_EXPORT, wb.uleb(n + len(new_exports)) + old + b"".join(new_exports))
    bodies = [_instrument_body(data, b, schedule, g) for b in mod.bodies]
    code_sec = _section(wb.SEC_CODE, wb.uleb(len(bodies)) + b"".join(bodies)) if mod.bodies or mod.section(wb.SEC_CODE) else b""

    replacements = {wb.SEC_GLOBAL: global_sec, wb.SEC_EXPORT: export_sec, wb.SEC_CODE: code_sec, wb.SEC_START: b""}
    pending = dict(replacements)
    order = [wb.SEC_TYPE, wb.SEC_IMPORT, wb.SEC_FUNCTION, wb.SEC_TABLE, wb.SEC_MEMORY, wb.SEC_GLOBAL,
             wb.SEC_EXPORT, wb.SEC_START, wb.SEC_ELEMENT, wb.SEC_CODE, wb.SEC_DATA]
    out = [wb.HEADER]

    def flush_before(sec_id: int):
        for sid in order[:order.index(sec_id)]:
            if sid in pending:
                out.append(pending.pop(sid))

    for sec in mod.sections:
        if sec.id == wb.SEC_CUSTOM:
            out.append(data[sec.start:sec.end])
            continue
        flush_before(sec.id)
        if sec.id in pending:
            out.append(pending.pop(sec.id))
        else:
            out.append(data[sec.start:sec.end])
    for sid in order:
        if sid in pending:
            out.append(pending.pop(sid))

    instrumented = b"".join(out)
    return ModuleArtifact(artifact.raw_bytes, artifact.content_hash, artifact.instruction_count_static, instrumented)


def validate_and_instrument(data: bytes, schedule: FuelSchedule = DEFAULT_SCHEDULE) -> ModuleArtifact:
    return instrument(validate(data), schedule)
