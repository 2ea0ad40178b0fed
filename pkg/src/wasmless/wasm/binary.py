"""Decoder for the WebAssembly binary format (version 1, core MVP feature set).

The decoder keeps byte offsets for every section and every instruction so the
instrumentation pass can splice new code in without re-encoding the original
instruction stream.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from ..errors import MalformedModule, NotWasm, UnsupportedFeature
from . import opcodes as op

MAGIC = b"\0asm"
VERSION = b"\x01\x00\x00\x00"
HEADER = MAGIC + VERSION

SEC_CUSTOM = 0
SEC_TYPE = 1
SEC_IMPORT = 2
SEC_FUNCTION = 3
SEC_TABLE = 4
SEC_MEMORY = 5
SEC_GLOBAL = 6
SEC_EXPORT = 7
SEC_START = 8
SEC_ELEMENT = 9
SEC_CODE = 10
SEC_DATA = 11
SEC_DATACOUNT = 12

KIND_FUNC = 0
KIND_TABLE = 1
KIND_MEMORY = 2
KIND_GLOBAL = 3

VALTYPES = {0x7F: "i32", 0x7E: "i64", 0x7D: "f32", 0x7C: "f64"}
VALTYPE_CODES = {v: k for k, v in VALTYPES.items()}
FUNCREF = 0x70
EMPTY_BLOCK = 0x40


# -- LEB128 encoding -------------------------------------------------------

def uleb(value: int) -> bytes:
    if value < 0:
        raise ValueError("uleb of negative value")
    out = bytearray()
    while True:
        b = value & 0x7F
        value >>= 7
        if value:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def sleb(value: int) -> bytes:
    out = bytearray()
    while True:
        b = value & 0x7F
        value >>= 7
        if (value == 0 and not b & 0x40) or (value == -1 and b & 0x40):
            out.append(b)
            return bytes(out)
        out.append(b | 0x80)


def name_bytes(name: str) -> bytes:
    raw = name.encode("utf-8")
    return uleb(len(raw)) + raw


class Reader:
    """Cursor over a byte buffer; every decoding failure is a MalformedModule."""

    def __init__(self, data: bytes, pos: int = 0, end: int | None = None):
        self.data = data
        self.pos = pos
        self.end = len(data) if end is None else end

    def at_end(self) -> bool:
        return self.pos >= self.end

    def byte(self) -> int:
        if self.pos >= self.end:
            raise MalformedModule(f"unexpected end of data at offset {self.pos}")
        b = self.data[self.pos]
        self.pos += 1
        return b

    def peek(self) -> int:
        if self.pos >= self.end:
            raise MalformedModule(f"unexpected end of data at offset {self.pos}")
        return self.data[self.pos]

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > self.end:
            raise MalformedModule(f"length {n} at offset {self.pos} runs past the end")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def _leb(self, bits: int, signed: bool) -> int:
        result = shift = 0
        max_bytes = (bits + 6) // 7
        for i in range(max_bytes):
            b = self.byte()
            result |= (b & 0x7F) << shift
            shift += 7
            if not b & 0x80:
                break
        else:
            raise MalformedModule(f"integer representation too long at offset {self.pos}")
        if signed:
            if b & 0x40:
                result -= 1 << shift
            lo, hi = -(1 << (bits - 1)), (1 << (bits - 1)) - 1
        else:
            lo, hi = 0, (1 << bits) - 1
        if not lo <= result <= hi:
            raise MalformedModule(f"integer too large at offset {self.pos}")
        return result

    def u32(self) -> int:
        return self._leb(32, False)

    def s32(self) -> int:
        return self._leb(32, True)

    def s64(self) -> int:
        return self._leb(64, True)

    def name(self) -> str:
        raw = self.take(self.u32())
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedModule(f"invalid UTF-8 name at offset {self.pos}") from exc

    def valtype(self) -> str:
        b = self.byte()
        if b not in VALTYPES:
            if b in (0x7B, 0x70, 0x6F):
                raise UnsupportedFeature(f"value type 0x{b:02x} is not in the core 1.0 set", b)
            raise MalformedModule(f"invalid value type 0x{b:02x} at offset {self.pos - 1}")
        return VALTYPES[b]

    def limits(self) -> tuple[int, int | None]:
        flag = self.byte()
        if flag == 0:
            return self.u32(), None
        if flag == 1:
            lo, hi = self.u32(), self.u32()
            if hi < lo:
                raise MalformedModule("limits maximum below minimum")
            return lo, hi
        if flag in (2, 3, 4, 5, 6, 7):
            raise UnsupportedFeature(f"limits flag 0x{flag:02x} (shared/64-bit memory)", flag)
        raise MalformedModule(f"invalid limits flag 0x{flag:02x}")


# -- decoded structures ----------------------------------------------------

@dataclass(frozen=True)
class FuncType:
    params: tuple[str, ...]
    results: tuple[str, ...]


@dataclass(frozen=True)
class Import:
    module: str
    name: str
    kind: int
    desc: object


@dataclass(frozen=True)
class Export:
    name: str
    kind: int
    index: int


@dataclass(frozen=True)
class Section:
    id: int
    start: int          # offset of the id byte
    payload_start: int
    end: int


@dataclass(frozen=True)
class Instruction:
    opcode: int
    start: int
    end: int
    imm: object = None

    @property
    def name(self) -> str:
        return op.mnemonic(self.opcode)


@dataclass
class FunctionBody:
    start: int          # first byte of the body (the local declarations)
    code_start: int     # first instruction
    end: int
    locals: list[str]
    instructions: list[Instruction]


@dataclass
class DecodedModule:
    data: bytes
    sections: list[Section] = field(default_factory=list)
    types: list[FuncType] = field(default_factory=list)
    imports: list[Import] = field(default_factory=list)
    functions: list[int] = field(default_factory=list)      # type index per defined function
    tables: list[tuple[int, int | None]] = field(default_factory=list)
    memories: list[tuple[int, int | None]] = field(default_factory=list)
    globals: list[tuple[str, bool]] = field(default_factory=list)
    exports: list[Export] = field(default_factory=list)
    start: int | None = None
    bodies: list[FunctionBody] = field(default_factory=list)

    def imported(self, kind: int) -> list[Import]:
        return [i for i in self.imports if i.kind == kind]

    @property
    def num_imported_funcs(self) -> int:
        return len(self.imported(KIND_FUNC))

    @property
    def num_imported_globals(self) -> int:
        return len(self.imported(KIND_GLOBAL))

    @property
    def total_funcs(self) -> int:
        return self.num_imported_funcs + len(self.functions)

    @property
    def total_globals(self) -> int:
        return self.num_imported_globals + len(self.globals)

    @property
    def total_memories(self) -> int:
        return len(self.imported(KIND_MEMORY)) + len(self.memories)

    @property
    def total_tables(self) -> int:
        return len(self.imported(KIND_TABLE)) + len(self.tables)

    def func_type(self, index: int) -> FuncType:
        n = self.num_imported_funcs
        if index < n:
            return self.types[self.imported(KIND_FUNC)[index].desc]
        return self.types[self.functions[index - n]]

    def section(self, sec_id: int) -> Section | None:
        for s in self.sections:
            if s.id == sec_id:
                return s
        return None

    def instruction_count(self) -> int:
        return sum(len(b.instructions) for b in self.bodies)


# -- decoding --------------------------------------------------------------

_ORDER = {SEC_TYPE: 1, SEC_IMPORT: 2, SEC_FUNCTION: 3, SEC_TABLE: 4, SEC_MEMORY: 5,
          SEC_GLOBAL: 6, SEC_EXPORT: 7, SEC_START: 8, SEC_ELEMENT: 9, SEC_CODE: 11, SEC_DATA: 12}


def check_header(data: bytes) -> None:
    if len(data) < 4 or data[:4] != MAGIC:
        raise NotWasm("missing \\0asm magic")
    if len(data) < 8 or data[4:8] != VERSION:
        raise NotWasm(f"unsupported binary version {data[4:8].hex() or '(missing)'}")


def decode(data: bytes) -> DecodedModule:
    """Decode and structurally validate a module.

    Raises NotWasm, MalformedModule or UnsupportedFeature.
    """
    data = bytes(data)
    check_header(data)
    mod = DecodedModule(data=data)
    r = Reader(data, 8)
    last = 0
    while not r.at_end():
        start = r.pos
        sec_id = r.byte()
        size = r.u32()
        payload_start = r.pos
        if payload_start + size > len(data):
            raise MalformedModule(f"section {sec_id} length {size} runs past the end of the module")
        end = payload_start + size
        if sec_id == SEC_DATACOUNT:
            raise UnsupportedFeature("data count section (bulk memory)", sec_id)
        if sec_id not in _ORDER and sec_id != SEC_CUSTOM:
            raise MalformedModule(f"unknown section id {sec_id}")
        if sec_id != SEC_CUSTOM:
            if _ORDER[sec_id] <= last:
                raise MalformedModule(f"section {sec_id} out of order or duplicated")
            last = _ORDER[sec_id]
        mod.sections.append(Section(sec_id, start, payload_start, end))
        sr = Reader(data, payload_start, end)
        _SECTION_DECODERS[sec_id](mod, sr)
        if sr.pos != end:
            raise MalformedModule(f"section {sec_id} size mismatch")
        r.pos = end
    if len(mod.functions) != len(mod.bodies):
        raise MalformedModule(
            f"function and code section counts differ ({len(mod.functions)} vs {len(mod.bodies)})")
    _check_indices(mod)
    return mod


def _vec(r: Reader, fn):
    return [fn(r) for _ in range(r.u32())]


def _custom(mod: DecodedModule, r: Reader) -> None:
    r.name()
    r.pos = r.end


def _types(mod: DecodedModule, r: Reader) -> None:
    for _ in range(r.u32()):
        form = r.byte()
        if form != 0x60:
            raise MalformedModule(f"invalid function type form 0x{form:02x}")
        params = tuple(_vec(r, Reader.valtype))
        results = tuple(_vec(r, Reader.valtype))
        if len(results) > 1:
            raise UnsupportedFeature("multi-value function results")
        mod.types.append(FuncType(params, results))


def _tabletype(r: Reader):
    elem = r.byte()
    if elem != FUNCREF:
        if elem == 0x6F:
            raise UnsupportedFeature("externref tables (reference types)", elem)
        raise MalformedModule(f"invalid table element type 0x{elem:02x}")
    return r.limits()


def _globaltype(r: Reader) -> tuple[str, bool]:
    vt = r.valtype()
    mut = r.byte()
    if mut not in (0, 1):
        raise MalformedModule("invalid global mutability flag")
    return vt, bool(mut)


def _imports(mod: DecodedModule, r: Reader) -> None:
    for _ in range(r.u32()):
        module, name, kind = r.name(), r.name(), r.byte()
        if kind == KIND_FUNC:
            desc = r.u32()
        elif kind == KIND_TABLE:
            desc = _tabletype(r)
        elif kind == KIND_MEMORY:
            desc = r.limits()
        elif kind == KIND_GLOBAL:
            desc = _globaltype(r)
        else:
            raise MalformedModule(f"invalid import kind {kind}")
        mod.imports.append(Import(module, name, kind, desc))


def _functions(mod: DecodedModule, r: Reader) -> None:
    mod.functions = _vec(r, Reader.u32)


def _tables(mod: DecodedModule, r: Reader) -> None:
    mod.tables = _vec(r, _tabletype)


def _memories(mod: DecodedModule, r: Reader) -> None:
    mod.memories = _vec(r, Reader.limits)
    for lo, hi in mod.memories:
        if lo > 65536 or (hi is not None and hi > 65536):
            raise MalformedModule("memory size exceeds 4 GiB")


def _const_expr(r: Reader) -> list[Instruction]:
    instrs = []
    while True:
        ins = read_instruction(r)
        instrs.append(ins)
        if ins.opcode == op.END:
            break
        if ins.opcode not in (op.I32_CONST, op.I64_CONST, op.F32_CONST, op.F64_CONST, op.GLOBAL_GET):
            raise MalformedModule(f"non-constant instruction {ins.name} in initializer")
    if len(instrs) != 2:
        raise MalformedModule("initializer must be exactly one constant instruction")
    return instrs


def _globals(mod: DecodedModule, r: Reader) -> None:
    for _ in range(r.u32()):
        mod.globals.append(_globaltype(r))
        _const_expr(r)


def _exports(mod: DecodedModule, r: Reader) -> None:
    seen = set()
    for _ in range(r.u32()):
        name, kind, index = r.name(), r.byte(), None
        if kind not in (KIND_FUNC, KIND_TABLE, KIND_MEMORY, KIND_GLOBAL):
            raise MalformedModule(f"invalid export kind {kind}")
        index = r.u32()
        if name in seen:
            raise MalformedModule(f"duplicate export name {name!r}")
        seen.add(name)
        mod.exports.append(Export(name, kind, index))


def _start(mod: DecodedModule, r: Reader) -> None:
    mod.start = r.u32()


def _elements(mod: DecodedModule, r: Reader) -> None:
    for _ in range(r.u32()):
        flags = r.u32()
        if flags != 0:
            raise UnsupportedFeature(f"element segment flags {flags} (bulk memory / reference types)", flags)
        _const_expr(r)
        _vec(r, Reader.u32)


def _data(mod: DecodedModule, r: Reader) -> None:
    for _ in range(r.u32()):
        flags = r.u32()
        if flags != 0:
            raise UnsupportedFeature(f"data segment flags {flags} (bulk memory)", flags)
        _const_expr(r)
        r.take(r.u32())


def _code(mod: DecodedModule, r: Reader) -> None:
    for _ in range(r.u32()):
        size = r.u32()
        start = r.pos
        end = start + size
        if end > r.end:
            raise MalformedModule("function body runs past the code section")
        br = Reader(r.data, start, end)
        local_types: list[str] = []
        for _ in range(br.u32()):
            count = br.u32()
            vt = br.valtype()
            if len(local_types) + count > 50000:
                raise MalformedModule("too many locals")
            local_types.extend([vt] * count)
        code_start = br.pos
        instrs = []
        depth = 1
        while depth:
            ins = read_instruction(br)
            instrs.append(ins)
            if ins.opcode in (op.BLOCK, op.LOOP, op.IF):
                depth += 1
            elif ins.opcode == op.END:
                depth -= 1
        if br.pos != end:
            raise MalformedModule("function body continues after its final end")
        mod.bodies.append(FunctionBody(start, code_start, end, local_types, instrs))
        r.pos = end


_SECTION_DECODERS = {
    SEC_CUSTOM: _custom, SEC_TYPE: _types, SEC_IMPORT: _imports, SEC_FUNCTION: _functions,
    SEC_TABLE: _tables, SEC_MEMORY: _memories, SEC_GLOBAL: _globals, SEC_EXPORT: _exports,
    SEC_START: _start, SEC_ELEMENT: _elements, SEC_CODE: _code, SEC_DATA: _data,
}


def read_instruction(r: Reader) -> Instruction:
    start = r.pos
    code = r.byte()
    entry = op.OPCODES.get(code)
    if entry is None:
        if code in op.POST_MVP_PREFIXES:
            raise UnsupportedFeature(
                f"opcode 0x{code:02x} {op.POST_MVP_PREFIXES[code]} at offset {start} is outside the core set", code)
        if code in op.POST_MVP_SINGLE:
            raise UnsupportedFeature(
                f"opcode 0x{code:02x} {op.POST_MVP_SINGLE[code]} at offset {start} is outside the core set", code)
        raise MalformedModule(f"illegal opcode 0x{code:02x} at offset {start}")
    kind = entry[1]
    imm: object = None
    if kind == op.BLOCKTYPE:
        bt = r.byte()
        if bt != EMPTY_BLOCK and bt not in VALTYPES:
            raise UnsupportedFeature(f"block type 0x{bt:02x} (multi-value) at offset {start}", code)
        imm = bt
    elif kind in (op.LABEL, op.FUNC, op.LOCAL, op.GLOBAL):
        imm = r.u32()
    elif kind == op.BR_TABLE:
        imm = (tuple(_vec(r, Reader.u32)), r.u32())
    elif kind == op.CALL_INDIRECT:
        type_index = r.u32()
        if r.byte() != 0:
            raise MalformedModule(f"call_indirect table index must be 0 at offset {start}")
        imm = type_index
    elif kind == op.MEMARG:
        imm = (r.u32(), r.u32())
    elif kind == op.MEMIDX:
        if r.byte() != 0:
            raise MalformedModule(f"memory index must be 0 at offset {start}")
    elif kind == op.I32:
        imm = r.s32()
    elif kind == op.I64:
        imm = r.s64()
    elif kind == op.F32:
        imm = struct.unpack("<f", r.take(4))[0]
    elif kind == op.F64:
        imm = struct.unpack("<d", r.take(8))[0]
    return Instruction(code, start, r.pos, imm)


def _check_indices(mod: DecodedModule) -> None:
    ntypes = len(mod.types)
    for imp in mod.imported(KIND_FUNC):
        if imp.desc >= ntypes:
            raise MalformedModule(f"import {imp.module}.{imp.name} references unknown type {imp.desc}")
    for t in mod.functions:
        if t >= ntypes:
            raise MalformedModule(f"function references unknown type {t}")
    if mod.total_memories > 1:
        raise UnsupportedFeature("multiple memories")
    if mod.total_tables > 1:
        raise UnsupportedFeature("multiple tables")
    limits = {KIND_FUNC: mod.total_funcs, KIND_TABLE: mod.total_tables,
              KIND_MEMORY: mod.total_memories, KIND_GLOBAL: mod.total_globals}
    for ex in mod.exports:
        if ex.index >= limits[ex.kind]:
            raise MalformedModule(f"export {ex.name!r} references unknown index {ex.index}")
    if mod.start is not None:
        if mod.start >= mod.total_funcs:
            raise MalformedModule("start function index out of range")
        ft = mod.func_type(mod.start)
        if ft.params or ft.results:
            raise MalformedModule("start function must have type [] -> []")
    for fi, body in enumerate(mod.bodies):
        ft = mod.types[mod.functions[fi]]
        nlocals = len(ft.params) + len(body.locals)
        depth = 0
        for ins in body.instructions:
            c = ins.opcode
            if c in (op.BLOCK, op.LOOP, op.IF):
                depth += 1
            elif c == op.END:
                depth -= 1
            elif c in (op.BR, op.BR_IF) and ins.imm > depth:
                raise MalformedModule(f"branch depth {ins.imm} out of range at offset {ins.start}")
            elif c == op.BR_TABLE_OP and max(ins.imm[0] + (ins.imm[1],)) > depth:
                raise MalformedModule(f"br_table depth out of range at offset {ins.start}")
            elif c == op.CALL and ins.imm >= mod.total_funcs:
                raise MalformedModule(f"call to unknown function {ins.imm} at offset {ins.start}")
            elif c == op.CALL_INDIRECT_OP and (ins.imm >= ntypes or not mod.total_tables):
                raise MalformedModule(f"invalid call_indirect at offset {ins.start}")
            elif c in (op.LOCAL_GET, op.LOCAL_SET, op.LOCAL_TEE) and ins.imm >= nlocals:
                raise MalformedModule(f"unknown local {ins.imm} at offset {ins.start}")
            elif c in (op.GLOBAL_GET, op.GLOBAL_SET) and ins.imm >= mod.total_globals:
                raise MalformedModule(f"unknown global {ins.imm} at offset {ins.start}")
            elif 0x28 <= c <= 0x40 and not mod.total_memories:
                raise MalformedModule(f"memory instruction without a memory at offset {ins.start}")
