"""Independent oracles used by the tests.

``RetiredCounter`` interprets the symbolic instruction lists handed to
``wasmless.wasm.builder.asm`` and counts retired instructions.  It shares no
code with the instrumenter: it has its own immediate table and its own block
matching, and it follows the wasm control semantics directly:

* every executed instruction is retired, including ``block``/``loop``/``if``;
* ``end`` is retired only when control falls through it;
* a taken branch to a block/if label resumes after the matching ``end``;
  to a loop label, at the first instruction of the loop body;
* ``if`` with a false condition resumes after ``else`` (or after ``end``);
* ``else`` reached from the then-arm jumps past ``end``.
"""

from __future__ import annotations

MASK32 = (1 << 32) - 1
MASK64 = (1 << 64) - 1

# mnemonic -> number of immediates in the symbolic form
IMMEDIATES = {
    "unreachable": 0, "nop": 0, "block": 1, "loop": 1, "if": 1, "else": 0, "end": 0,
    "br": 1, "br_if": 1, "br_table": 1, "return": 0, "call": 1, "drop": 0, "select": 0,
    "local.get": 1, "local.set": 1, "local.tee": 1, "global.get": 1, "global.set": 1,
    "i32.const": 1, "i64.const": 1,
    "i32.eqz": 0, "i32.eq": 0, "i32.ne": 0, "i32.lt_s": 0, "i32.lt_u": 0, "i32.gt_s": 0,
    "i32.le_s": 0, "i32.ge_s": 0, "i32.add": 0, "i32.sub": 0, "i32.mul": 0, "i32.and": 0,
    "i32.or": 0, "i32.xor": 0, "i32.shl": 0, "i32.shr_u": 0, "i32.ctz": 0,
    "i64.add": 0, "i64.sub": 0, "i64.mul": 0, "i64.eqz": 0,
}


class OracleTrap(Exception):
    pass


def _s32(v):
    v &= MASK32
    return v - (1 << 32) if v >> 31 else v


def _ctz32(v):
    v &= MASK32
    if v == 0:
        return 32
    return (v & -v).bit_length() - 1


BINOPS = {
    "i32.eq": lambda a, b: int(a & MASK32 == b & MASK32),
    "i32.ne": lambda a, b: int(a & MASK32 != b & MASK32),
    "i32.lt_s": lambda a, b: int(_s32(a) < _s32(b)),
    "i32.lt_u": lambda a, b: int(a & MASK32 < b & MASK32),
    "i32.gt_s": lambda a, b: int(_s32(a) > _s32(b)),
    "i32.le_s": lambda a, b: int(_s32(a) <= _s32(b)),
    "i32.ge_s": lambda a, b: int(_s32(a) >= _s32(b)),
    "i32.add": lambda a, b: (a + b) & MASK32,
    "i32.sub": lambda a, b: (a - b) & MASK32,
    "i32.mul": lambda a, b: (a * b) & MASK32,
    "i32.and": lambda a, b: a & b & MASK32,
    "i32.or": lambda a, b: (a | b) & MASK32,
    "i32.xor": lambda a, b: (a ^ b) & MASK32,
    "i32.shl": lambda a, b: (a << (b & 31)) & MASK32,
    "i32.shr_u": lambda a, b: (a & MASK32) >> (b & 31),
    "i64.add": lambda a, b: (a + b) & MASK64,
    "i64.sub": lambda a, b: (a - b) & MASK64,
    "i64.mul": lambda a, b: (a * b) & MASK64,
}
UNOPS = {
    "i32.eqz": lambda a: int(a & MASK32 == 0),
    "i32.ctz": _ctz32,
    "i64.eqz": lambda a: int(a & MASK64 == 0),
}


def parse(items) -> list[tuple[str, object]]:
    out = []
    it = iter(items)
    for name in it:
        if name not in IMMEDIATES:
            raise ValueError(f"oracle does not model {name!r}")
        imm = next(it) if IMMEDIATES[name] else None
        out.append((name, imm))
    return out


def _match(code):
    """Map each block/loop/if index to (else index or None, end index)."""
    pairs, stack = {}, []
    for i, (name, _) in enumerate(code):
        if name in ("block", "loop", "if"):
            stack.append([i, None])
        elif name == "else":
            stack[-1][1] = i
        elif name == "end":
            if stack:
                start, els = stack.pop()
                pairs[start] = (els, i)
    return pairs


class OracleFunction:
    def __init__(self, items, n_params=0, n_results=0, n_locals=0):
        self.code = parse(items)
        self.pairs = _match(self.code)
        self.n_params, self.n_results, self.n_locals = n_params, n_results, n_locals


class RetiredCounter:
    """Run ``functions[entry]`` and report the schedule-weighted retired count."""

    def __init__(self, functions, globals_=(), cost=None, max_steps=10**7):
        self.functions = functions
        self.globals = list(globals_)
        self.cost = cost or (lambda name: 1)
        self.max_steps = max_steps
        self.retired = 0
        self.steps = 0

    def run(self, entry=0, args=()):
        return self._call(entry, list(args))

    def _call(self, index, args):
        fn = self.functions[index]
        locals_ = list(args) + [0] * fn.n_locals
        stack = []
        # label entries: (kind, start index, end index, stack height)
        labels = [("func", -1, len(fn.code) - 1, 0)]
        pc = 0
        while True:
            name, imm = fn.code[pc]
            self.retired += self.cost(name)
            self.steps += 1
            if self.steps > self.max_steps:
                raise OracleTrap("step budget exceeded")
            nxt = pc + 1
            if name in ("block", "loop", "if"):
                els, end = fn.pairs[pc]
                if name == "if":
                    cond = stack.pop()
                    labels.append(("if", pc, end, len(stack)))
                    if not cond & MASK32:
                        if els is None:
                            labels.pop()
                            nxt = end + 1
                        else:
                            nxt = els + 1
                else:
                    labels.append((name, pc, end, len(stack)))
            elif name == "else":
                kind, start, end, _ = labels.pop()
                nxt = end + 1
            elif name == "end":
                labels.pop()
                if not labels:
                    return stack[len(stack) - fn.n_results:] if fn.n_results else []
            elif name in ("br", "br_if", "br_table"):
                if name == "br_if":
                    if not stack.pop() & MASK32:
                        pc = nxt
                        continue
                    depth = imm
                elif name == "br_table":
                    targets, default = imm
                    i = stack.pop() & MASK32
                    depth = targets[i] if i < len(targets) else default
                else:
                    depth = imm
                target = labels[len(labels) - 1 - depth]
                if target[0] == "func":
                    return stack[len(stack) - fn.n_results:] if fn.n_results else []
                kind, start, end, height = target
                del labels[len(labels) - depth:]
                if kind == "loop":
                    del stack[height:]
                    nxt = start + 1
                else:
                    keep = stack[len(stack) - 1:] if len(stack) > height else []
                    # block results are at most one value in this oracle's modules
                    del stack[height:]
                    stack += keep
                    labels.pop()
                    nxt = end + 1
            elif name == "return":
                return stack[len(stack) - fn.n_results:] if fn.n_results else []
            elif name == "call":
                callee = self.functions[imm]
                args = stack[len(stack) - callee.n_params:] if callee.n_params else []
                del stack[len(stack) - callee.n_params:]
                stack += self._call(imm, args)
            elif name == "unreachable":
                raise OracleTrap("unreachable")
            elif name == "nop":
                pass
            elif name == "drop":
                stack.pop()
            elif name == "select":
                c, b, a = stack.pop(), stack.pop(), stack.pop()
                stack.append(a if c & MASK32 else b)
            elif name == "local.get":
                stack.append(locals_[imm])
            elif name == "local.set":
                locals_[imm] = stack.pop()
            elif name == "local.tee":
                locals_[imm] = stack[-1]
            elif name == "global.get":
                stack.append(self.globals[imm])
            elif name == "global.set":
                self.globals[imm] = stack.pop()
            elif name == "i32.const":
                stack.append(imm & MASK32)
            elif name == "i64.const":
                stack.append(imm & MASK64)
            elif name in BINOPS:
                b, a = stack.pop(), stack.pop()
                stack.append(BINOPS[name](a, b))
            elif name in UNOPS:
                stack.append(UNOPS[name](stack.pop()))
            else:  # pragma: no cover
                raise ValueError(name)
            pc = nxt


def two_pass_mean_stdev(values):
    """Textbook mean and N-1 variance, computed without the statistics module."""
    n = len(values)
    mean = sum(values) / n
    if n == 1:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, var ** 0.5

