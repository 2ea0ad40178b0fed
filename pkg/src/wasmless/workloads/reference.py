"""Pure-Python reference implementations of the guest programs.

These are written from the output conventions alone and share no code with
the C guests.  They are slow; use them at small parameters or to freeze
expected digests.
"""

from __future__ import annotations

import math
from itertools import islice

SOLAR_MASS = 4 * math.pi * math.pi
DAYS_PER_YEAR = 365.24

_PLANETS = [
    (4.84143144246472090e+00, -1.16032004402742839e+00, -1.03622044471123109e-01,
     1.66007664274403694e-03, 7.69901118419740425e-03, -6.90460016972063023e-05, 9.54791938424326609e-04),
    (8.34336671824457987e+00, 4.12479856412430479e+00, -4.03523417114321381e-01,
     -2.76742510726862411e-03, 4.99852801234917238e-03, 2.30417297573763929e-05, 2.85885980666130812e-04),
    (1.28943695621391310e+01, -1.51111514016986312e+01, -2.23307578892655734e-01,
     2.96460137564761618e-03, 2.37847173959480950e-03, -2.96589568540237556e-05, 4.36624404335156298e-05),
    (1.53796971148509165e+01, -2.59193146099879641e+01, 1.79258772950371181e-01,
     2.68067772490389322e-03, 1.62824170038242295e-03, -9.51592254519715870e-05, 5.15138902046611451e-05),
]


def nbody(n: int) -> bytes:
    pos = [[0.0, 0.0, 0.0]] + [[p[0], p[1], p[2]] for p in _PLANETS]
    vel = [[0.0, 0.0, 0.0]] + [[p[3] * DAYS_PER_YEAR, p[4] * DAYS_PER_YEAR, p[5] * DAYS_PER_YEAR] for p in _PLANETS]
    mass = [SOLAR_MASS] + [p[6] * SOLAR_MASS for p in _PLANETS]
    nb = len(mass)

    px = py = pz = 0.0
    for v, m in zip(vel, mass):
        px += v[0] * m
        py += v[1] * m
        pz += v[2] * m
    vel[0] = [-px / SOLAR_MASS, -py / SOLAR_MASS, -pz / SOLAR_MASS]

    def energy():
        e = 0.0
        for i in range(nb):
            vx, vy, vz = vel[i]
            e += 0.5 * mass[i] * (vx * vx + vy * vy + vz * vz)
            for j in range(i + 1, nb):
                dx = pos[i][0] - pos[j][0]
                dy = pos[i][1] - pos[j][1]
                dz = pos[i][2] - pos[j][2]
                e -= (mass[i] * mass[j]) / math.sqrt(dx * dx + dy * dy + dz * dz)
        return e

    pairs = [(i, j) for i in range(nb) for j in range(i + 1, nb)]
    out = [f"{energy():.9f}\n"]
    dt = 0.01
    for _ in range(n):
        for i, j in pairs:
            bi, bj = pos[i], pos[j]
            dx = bi[0] - bj[0]
            dy = bi[1] - bj[1]
            dz = bi[2] - bj[2]
            d = math.sqrt(dx * dx + dy * dy + dz * dz)
            mag = dt / (d * d * d)
            vi, vj = vel[i], vel[j]
            mi, mj = mass[i], mass[j]
            vi[0] -= dx * mj * mag
            vi[1] -= dy * mj * mag
            vi[2] -= dz * mj * mag
            vj[0] += dx * mi * mag
            vj[1] += dy * mi * mag
            vj[2] += dz * mi * mag
        for p, v in zip(pos, vel):
            p[0] += dt * v[0]
            p[1] += dt * v[1]
            p[2] += dt * v[2]
    out.append(f"{energy():.9f}\n")
    return "".join(out).encode()


def permutation_at(index: int, n: int) -> list[int]:
    """The ``index``-th permutation in the benchmark's rotation order."""
    perm = list(range(n))
    fact = math.factorial(n - 1)
    for i in range(n - 1, 0, -1):
        d, index = divmod(index, fact)
        fact //= i
        perm[: i + 1] = perm[d: i + 1] + perm[:d]
    return perm


def _flips(perm: list[int]) -> int:
    perm = list(perm)
    flips = 0
    while perm[0]:
        k = perm[0]
        perm[: k + 1] = perm[k::-1]
        flips += 1
    return flips


def fannkuch_redux(n: int) -> bytes:
    checksum = max_flips = 0
    for idx in range(math.factorial(n)):
        f = _flips(permutation_at(idx, n))
        max_flips = max(max_flips, f)
        checksum += -f if idx % 2 else f
    return f"{checksum}\nPfannkuchen({n}) = {max_flips}\n".encode()


def mandelbrot(n: int) -> bytes:
    w = h = n
    out = bytearray(f"P4\n{w} {h}\n".encode())
    for y in range(h):
        ci = 2.0 * y / h - 1.0
        row = []
        for x in range(w):
            cr = 2.0 * x / w - 1.5
            zr = zi = tr = ti = 0.0
            i = 0
            while i < 50 and tr + ti <= 4.0:
                zi = 2.0 * zr * zi + ci
                zr = tr - ti + cr
                tr = zr * zr
                ti = zi * zi
                i += 1
            row.append(1 if tr + ti <= 4.0 else 0)
        it = iter(row)
        while chunk := list(islice(it, 8)):
            byte = 0
            for bit in chunk:
                byte = (byte << 1) | bit
            out.append(byte << (8 - len(chunk)))
    return bytes(out)


def binary_trees(n: int) -> bytes:
    def nodes(depth):
        return (1 << (depth + 1)) - 1

    min_depth = 4
    max_depth = max(min_depth + 2, n)
    stretch = max_depth + 1
    lines = [f"stretch tree of depth {stretch}\t check: {nodes(stretch)}"]
    for d in range(min_depth, max_depth + 1, 2):
        iterations = 1 << (max_depth - d + min_depth)
        lines.append(f"{iterations}\t trees of depth {d}\t check: {iterations * nodes(d)}")
    lines.append(f"long lived tree of depth {max_depth}\t check: {nodes(max_depth)}")
    return ("\n".join(lines) + "\n").encode()


def nop() -> bytes:
    return b""


def cat_sync(size: int) -> bytes:
    return f"{size}\n".encode()


COMPUTE = {
    "nbody": nbody,
    "fannkuch-redux": fannkuch_redux,
    "mandelbrot": mandelbrot,
    "binary-trees": binary_trees,
}
