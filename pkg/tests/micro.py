"""Hand-assembled modules with hand-traced retired-instruction counts.

Each case lists its functions in index order as ``(items, params, results,
locals)``; the last function is exported as ``_start``.  ``hand_trace`` is the
count worked out by hand (comment above each case shows the trace).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from wasmless.wasm.builder import ModuleBuilder, asm

from oracles import OracleFunction, RetiredCounter


@dataclass
class MicroCase:
    name: str
    functions: list[tuple[tuple, tuple, tuple, tuple]]
    hand_trace: int
    globals_: list[tuple[str, int]] = field(default_factory=list)
    start: int | None = None

    def build(self) -> bytes:
        b = ModuleBuilder()
        for valtype, init in self.globals_:
            b.add_global(valtype, init)
        last = len(self.functions) - 1
        for i, (items, params, results, locals_) in enumerate(self.functions):
            b.func(asm(*items), params, results, locals_, export="_start" if i == last else None)
        b.start = self.start
        return b.build()

    def oracle(self, cost=None) -> int:
        fns = [OracleFunction(items, len(p), len(r), len(l)) for items, p, r, l in self.functions]
        counter = RetiredCounter(fns, [init for _, init in self.globals_], cost)
        if self.start is not None:
            counter.run(self.start)
        counter.run(len(fns) - 1)
        return counter.retired


def _fn(*items, params=(), results=(), locals=()):
    return (items, params, results, locals)


CASES = [
    # const, const, add, drop, end
    MicroCase("straight_add", [_fn("i32.const", 1, "i32.const", 2, "i32.add", "drop", "end")], 5),
    # end
    MicroCase("empty_body", [_fn("end")], 1),
    # get, const, add, set, end
    MicroCase("global_i64", [_fn("global.get", 0, "i64.const", 5, "i64.add", "global.set", 0, "end")], 5,
              globals_=[("i64", 0)]),
    # setup const, set, loop = 3; body get, const, sub, tee, br_if = 5 per iteration x 10;
    # loop end + function end = 2
    MicroCase("countdown_loop_k5_m10", [_fn(
        "i32.const", 10, "local.set", 0,
        "loop", None, "local.get", 0, "i32.const", 1, "i32.sub", "local.tee", 0, "br_if", 0, "end",
        "end", locals=("i32",))], 3 + 10 * 5 + 2),
    # body get, ctz, tee, br_if = 4 per iteration; 65536 -> 16 -> 4 -> 2 -> 1 -> 0 is 5 iterations
    MicroCase("ctz_loop_k4_m5", [_fn(
        "i32.const", 65536, "local.set", 0,
        "loop", None, "local.get", 0, "i32.ctz", "local.tee", 0, "br_if", 0, "end",
        "end", locals=("i32",))], 3 + 5 * 4 + 2),
    # const, if(false) -> nop, end; const, if(true) -> nop, else (skips end); function end
    MicroCase("if_else", [_fn(
        "i32.const", 0, "if", None, "nop", "nop", "else", "nop", "end",
        "i32.const", 1, "if", None, "nop", "else", "nop", "nop", "nop", "end",
        "end")], 9),
    # block, const, br_if (taken, skips unreachable and the block end), nop, end
    MicroCase("block_br_if", [_fn(
        "block", None, "i32.const", 1, "br_if", 0, "unreachable", "end", "nop", "end")], 5),
    # block, block, const, br_table -> default 1 exits both blocks, function end
    MicroCase("br_table_default", [_fn(
        "block", None, "block", None, "i32.const", 1, "br_table", ([0], 1), "end",
        "unreachable", "end", "end")], 5),
    # block, const, drop, return
    MicroCase("early_return", [_fn(
        "block", None, "i32.const", 7, "drop", "return", "end", "unreachable", "end")], 4),
    # caller const, call, [callee get, const, mul, end], drop, end
    MicroCase("call_helper", [
        _fn("local.get", 0, "i32.const", 2, "i32.mul", "end", params=("i32",), results=("i32",)),
        _fn("i32.const", 3, "call", 0, "drop", "end"),
    ], 8),
    # 2 setup + outer loop 1 + 3 x (2 setup + inner loop 1 + 4 x 5 + inner end 1 + 5 outer tail)
    # + outer end + function end
    MicroCase("nested_loops_3x4", [_fn(
        "i32.const", 3, "local.set", 0,
        "loop", None,
        "i32.const", 4, "local.set", 1,
        "loop", None, "local.get", 1, "i32.const", 1, "i32.sub", "local.tee", 1, "br_if", 0, "end",
        "local.get", 0, "i32.const", 1, "i32.sub", "local.tee", 0, "br_if", 0,
        "end",
        "end", locals=("i32", "i32"))], 2 + 1 + 3 * (2 + 1 + 4 * 5 + 1 + 5) + 1 + 1),
    # start function: const, set, end = 3; _start: get, eqz, if (false, skips end), end = 4
    MicroCase("start_section", [
        _fn("i32.const", 1, "global.set", 0, "end"),
        _fn("global.get", 0, "i32.eqz", "if", None, "unreachable", "end", "end"),
    ], 7, globals_=[("i32", 0)], start=0),
]

BY_NAME = {c.name: c for c in CASES}


def countdown(m: int) -> MicroCase:
    """Countdown loop with a variable trip count: 3 + 5m + 2 retired instructions."""
    return MicroCase(f"countdown_{m}", [_fn(
        "i32.const", m, "local.set", 0,
        "loop", None, "local.get", 0, "i32.const", 1, "i32.sub", "local.tee", 0, "br_if", 0, "end",
        "end", locals=("i32",))], 3 + 5 * m + 2)
