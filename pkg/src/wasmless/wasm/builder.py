"""Minimal assembler for hand-built modules.

Instructions are given as a flat sequence of mnemonics followed by their
immediates::

    asm("i32.const", 1, "i32.const", 2, "i32.add", "drop", "end")

Block types are written as ``None`` (empty) or a value type name.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from . import binary as wb
from . import opcodes as op


def asm(*items) -> bytes:
    out = bytearray()
    it = iter(items)
    for item in it:
        code = op.NAMES[item]
        out.append(code)
        kind = op.OPCODES[code][1]
        if kind == op.NONE:
            continue
        if kind == op.MEMIDX:
            out.append(0)
            continue
        if kind == op.CALL_INDIRECT:
            out += wb.uleb(next(it)) + b"\x00"
            continue
        imm = next(it)
        if kind == op.BLOCKTYPE:
            out.append(wb.EMPTY_BLOCK if imm is None else wb.VALTYPE_CODES[imm])
        elif kind in (op.LABEL, op.FUNC, op.LOCAL, op.GLOBAL):
            out += wb.uleb(imm)
        elif kind == op.BR_TABLE:
            targets, default = imm
            out += wb.uleb(len(targets)) + b"".join(wb.uleb(t) for t in targets) + wb.uleb(default)
        elif kind == op.MEMARG:
            align, offset = imm
            out += wb.uleb(align) + wb.uleb(offset)
        elif kind in (op.I32, op.I64):
            out += wb.sleb(imm)
        elif kind == op.F32:
            out += struct.pack("<f", imm)
        elif kind == op.F64:
            out += struct.pack("<d", imm)
    return bytes(out)


def _vec(items: list[bytes]) -> bytes:
    return wb.uleb(len(items)) + b"".join(items)


def _valtypes(types) -> bytes:
    return _vec([bytes([wb.VALTYPE_CODES[t]]) for t in types])


def _limits(lo: int, hi: int | None) -> bytes:
    return b"\x00" + wb.uleb(lo) if hi is None else b"\x01" + wb.uleb(lo) + wb.uleb(hi)


@dataclass
class ModuleBuilder:
    types: list[tuple[tuple, tuple]] = field(default_factory=list)
    imports: list[bytes] = field(default_factory=list)
    n_imported_funcs: int = 0
    funcs: list[tuple[int, list[str], bytes]] = field(default_factory=list)
    memory: tuple[int, int | None] | None = None
    globals: list[bytes] = field(default_factory=list)
    exports: list[bytes] = field(default_factory=list)
    data: list[tuple[int, bytes]] = field(default_factory=list)
    start: int | None = None

    def type_index(self, params=(), results=()) -> int:
        sig = (tuple(params), tuple(results))
        if sig not in self.types:
            self.types.append(sig)
        return self.types.index(sig)

    def import_func(self, module: str, name: str, params=(), results=()) -> int:
        if self.funcs:
            raise ValueError("imports must be declared before functions")
        t = self.type_index(params, results)
        self.imports.append(wb.name_bytes(module) + wb.name_bytes(name) + b"\x00" + wb.uleb(t))
        self.n_imported_funcs += 1
        return self.n_imported_funcs - 1

    def func(self, code: bytes, params=(), results=(), locals=(), export: str | None = None) -> int:
        t = self.type_index(params, results)
        self.funcs.append((t, list(locals), code))
        index = self.n_imported_funcs + len(self.funcs) - 1
        if export:
            self.export(export, wb.KIND_FUNC, index)
        return index

    def add_memory(self, min_pages: int, max_pages: int | None = None, export: str | None = "memory"):
        self.memory = (min_pages, max_pages)
        if export:
            self.export(export, wb.KIND_MEMORY, 0)

    def add_global(self, valtype: str, init: int, mutable: bool = True, export: str | None = None) -> int:
        const = {"i32": op.I32_CONST, "i64": op.I64_CONST}[valtype]
        self.globals.append(bytes([wb.VALTYPE_CODES[valtype], int(mutable), const]) + wb.sleb(init) + b"\x0b")
        index = len(self.globals) - 1
        if export:
            self.export(export, wb.KIND_GLOBAL, index)
        return index

    def export(self, name: str, kind: int, index: int):
        self.exports.append(wb.name_bytes(name) + bytes([kind]) + wb.uleb(index))

    def add_data(self, offset: int, payload: bytes):
        self.data.append((offset, payload))

    def build(self) -> bytes:
        def section(sec_id, payload):
            return bytes([sec_id]) + wb.uleb(len(payload)) + payload

        out = [wb.HEADER]
        if self.types:
            out.append(section(wb.SEC_TYPE, _vec([b"\x60" + _valtypes(p) + _valtypes(r) for p, r in self.types])))
        if self.imports:
            out.append(section(wb.SEC_IMPORT, _vec(self.imports)))
        if self.funcs:
            out.append(section(wb.SEC_FUNCTION, _vec([wb.uleb(t) for t, _, _ in self.funcs])))
        if self.memory is not None:
            out.append(section(wb.SEC_MEMORY, _vec([_limits(*self.memory)])))
        if self.globals:
            out.append(section(wb.SEC_GLOBAL, _vec(self.globals)))
        if self.exports:
            out.append(section(wb.SEC_EXPORT, _vec(self.exports)))
        if self.start is not None:
            out.append(section(wb.SEC_START, wb.uleb(self.start)))
        if self.funcs:
            bodies = []
            for _, local_types, code in self.funcs:
                decl = _vec([b"\x01" + bytes([wb.VALTYPE_CODES[t]]) for t in local_types])
                body = decl + code
                bodies.append(wb.uleb(len(body)) + body)
            out.append(section(wb.SEC_CODE, _vec(bodies)))
        if self.data:
            segs = [b"\x00" + asm("i32.const", off, "end") + wb.uleb(len(p)) + p for off, p in self.data]
            out.append(section(wb.SEC_DATA, _vec(segs)))
        return b"".join(out)
