"""WebAssembly 1.0 (MVP) opcode table.

Each entry maps an opcode byte to ``(mnemonic, immediate_kind)``.  Opcodes not
listed here are outside the supported core set.
"""

# immediate kinds
NONE = "none"
BLOCKTYPE = "blocktype"
LABEL = "label"
BR_TABLE = "br_table"
FUNC = "func"
CALL_INDIRECT = "call_indirect"
LOCAL = "local"
GLOBAL = "global"
MEMARG = "memarg"
MEMIDX = "memidx"
I32 = "i32"
I64 = "i64"
F32 = "f32"
F64 = "f64"

UNREACHABLE = 0x00
NOP = 0x01
BLOCK = 0x02
LOOP = 0x03
IF = 0x04
ELSE = 0x05
END = 0x0B
BR = 0x0C
BR_IF = 0x0D
BR_TABLE_OP = 0x0E
RETURN = 0x0F
CALL = 0x10
CALL_INDIRECT_OP = 0x11
DROP = 0x1A
SELECT = 0x1B
LOCAL_GET = 0x20
LOCAL_SET = 0x21
LOCAL_TEE = 0x22
GLOBAL_GET = 0x23
GLOBAL_SET = 0x24
MEMORY_SIZE = 0x3F
MEMORY_GROW = 0x40
I32_CONST = 0x41
I64_CONST = 0x42
F32_CONST = 0x43
F64_CONST = 0x44

OPCODES: dict[int, tuple[str, str]] = {
    0x00: ("unreachable", NONE),
    0x01: ("nop", NONE),
    0x02: ("block", BLOCKTYPE),
    0x03: ("loop", BLOCKTYPE),
    0x04: ("if", BLOCKTYPE),
    0x05: ("else", NONE),
    0x0B: ("end", NONE),
    0x0C: ("br", LABEL),
    0x0D: ("br_if", LABEL),
    0x0E: ("br_table", BR_TABLE),
    0x0F: ("return", NONE),
    0x10: ("call", FUNC),
    0x11: ("call_indirect", CALL_INDIRECT),
    0x1A: ("drop", NONE),
    0x1B: ("select", NONE),
    0x20: ("local.get", LOCAL),
    0x21: ("local.set", LOCAL),
    0x22: ("local.tee", LOCAL),
    0x23: ("global.get", GLOBAL),
    0x24: ("global.set", GLOBAL),
    0x28: ("i32.load", MEMARG),
    0x29: ("i64.load", MEMARG),
    0x2A: ("f32.load", MEMARG),
    0x2B: ("f64.load", MEMARG),
    0x2C: ("i32.load8_s", MEMARG),
    0x2D: ("i32.load8_u", MEMARG),
    0x2E: ("i32.load16_s", MEMARG),
    0x2F: ("i32.load16_u", MEMARG),
    0x30: ("i64.load8_s", MEMARG),
    0x31: ("i64.load8_u", MEMARG),
    0x32: ("i64.load16_s", MEMARG),
    0x33: ("i64.load16_u", MEMARG),
    0x34: ("i64.load32_s", MEMARG),
    0x35: ("i64.load32_u", MEMARG),
    0x36: ("i32.store", MEMARG),
    0x37: ("i64.store", MEMARG),
    0x38: ("f32.store", MEMARG),
    0x39: ("f64.store", MEMARG),
    0x3A: ("i32.store8", MEMARG),
    0x3B: ("i32.store16", MEMARG),
    0x3C: ("i64.store8", MEMARG),
    0x3D: ("i64.store16", MEMARG),
    0x3E: ("i64.store32", MEMARG),
    0x3F: ("memory.size", MEMIDX),
    0x40: ("memory.grow", MEMIDX),
    0x41: ("i32.const", I32),
    0x42: ("i64.const", I64),
    0x43: ("f32.const", F32),
    0x44: ("f64.const", F64),
}

_NUMERIC = """
i32.eqz i32.eq i32.ne i32.lt_s i32.lt_u i32.gt_s i32.gt_u i32.le_s i32.le_u i32.ge_s i32.ge_u
i64.eqz i64.eq i64.ne i64.lt_s i64.lt_u i64.gt_s i64.gt_u i64.le_s i64.le_u i64.ge_s i64.ge_u
f32.eq f32.ne f32.lt f32.gt f32.le f32.ge
f64.eq f64.ne f64.lt f64.gt f64.le f64.ge
i32.clz i32.ctz i32.popcnt i32.add i32.sub i32.mul i32.div_s i32.div_u i32.rem_s i32.rem_u
i32.and i32.or i32.xor i32.shl i32.shr_s i32.shr_u i32.rotl i32.rotr
i64.clz i64.ctz i64.popcnt i64.add i64.sub i64.mul i64.div_s i64.div_u i64.rem_s i64.rem_u
i64.and i64.or i64.xor i64.shl i64.shr_s i64.shr_u i64.rotl i64.rotr
f32.abs f32.neg f32.ceil f32.floor f32.trunc f32.nearest f32.sqrt
f32.add f32.sub f32.mul f32.div f32.min f32.max f32.copysign
f64.abs f64.neg f64.ceil f64.floor f64.trunc f64.nearest f64.sqrt
f64.add f64.sub f64.mul f64.div f64.min f64.max f64.copysign
i32.wrap_i64 i32.trunc_f32_s i32.trunc_f32_u i32.trunc_f64_s i32.trunc_f64_u
i64.extend_i32_s i64.extend_i32_u i64.trunc_f32_s i64.trunc_f32_u i64.trunc_f64_s i64.trunc_f64_u
f32.convert_i32_s f32.convert_i32_u f32.convert_i64_s f32.convert_i64_u f32.demote_f64
f64.convert_i32_s f64.convert_i32_u f64.convert_i64_s f64.convert_i64_u f64.promote_f32
i32.reinterpret_f32 i64.reinterpret_f64 f32.reinterpret_i32 f64.reinterpret_i64
""".split()

assert len(_NUMERIC) == 0xBF - 0x45 + 1
for _i, _name in enumerate(_NUMERIC):
    OPCODES[0x45 + _i] = (_name, NONE)

NAMES: dict[str, int] = {name: op for op, (name, _) in OPCODES.items()}

# instructions that delimit straight-line segments for fuel charging
CONTROL = frozenset(
    {UNREACHABLE, BLOCK, LOOP, IF, ELSE, END, BR, BR_IF, BR_TABLE_OP, RETURN, CALL, CALL_INDIRECT_OP}
)

# a few well-known post-MVP encodings, named in UnsupportedFeature messages
POST_MVP_PREFIXES = {
    0xFC: "saturating-truncation / bulk-memory (0xfc prefix)",
    0xFD: "SIMD (0xfd prefix)",
    0xFE: "threads (0xfe prefix)",
}
POST_MVP_SINGLE = {
    0x06: "exception handling (try)",
    0x12: "tail calls (return_call)",
    0x13: "tail calls (return_call_indirect)",
    0x1C: "reference types (typed select)",
    0x25: "reference types (table.get)",
    0x26: "reference types (table.set)",
    0xC0: "sign-extension (i32.extend8_s)",
    0xC1: "sign-extension (i32.extend16_s)",
    0xC2: "sign-extension (i64.extend8_s)",
    0xC3: "sign-extension (i64.extend16_s)",
    0xC4: "sign-extension (i64.extend32_s)",
    0xD0: "reference types (ref.null)",
    0xD1: "reference types (ref.is_null)",
    0xD2: "reference types (ref.func)",
}


def mnemonic(op: int) -> str:
    return OPCODES[op][0]
