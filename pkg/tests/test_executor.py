import os
import statistics
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import pytest

from wasmless.executor import (
    Executor,
    Exited,
    FuelExhausted,
    MemoryExceeded,
    PoolStats,
    ResourceLimits,
    SandboxSpec,
    StartMode,
    Timeout,
    Trapped,
    check_preopens,
)
from wasmless.wasm import tools
from wasmless.wasm.binary import HEADER
from wasmless.wasm.builder import ModuleBuilder, asm


@pytest.fixture(scope="module")
def artifacts(guests):
    names = ["nop", "cat-sync", "nbody", "spin", "spin_read", "mem_hog", "stateful"]
    return {n: tools.validate_and_instrument(guests.wasm(n).read_bytes()) for n in names}


def snapshot(root: Path) -> dict:
    out = {}
    for dirpath, dirnames, filenames in os.walk(root):
        for name in dirnames + filenames:
            p = Path(dirpath) / name
            st = p.lstat()
            out[str(p.relative_to(root))] = (st.st_size, st.st_mtime_ns)
    return out


# -- limits and specs --

def test_limits_validation():
    with pytest.raises(ValueError):
        ResourceLimits(fuel_limit=0)
    with pytest.raises(ValueError):
        ResourceLimits(memory_limit_pages=65537)
    with pytest.raises(ValueError):
        ResourceLimits(wall_timeout_ms=0)
    assert ResourceLimits.from_dict(ResourceLimits(5, 6, 7).to_dict()) == ResourceLimits(5, 6, 7)


@pytest.mark.parametrize("preopens", [
    [("/tmp", "data")],
    [("/tmp", "/data/../etc")],
    [("/tmp", "/data"), ("/var", "/data/sub")],
])
def test_bad_preopens(preopens):
    with pytest.raises(ValueError):
        check_preopens(preopens)


def test_sandbox_spec_checks_preopens():
    with pytest.raises(ValueError):
        SandboxSpec(argv=["x"], preopens=[("/tmp", "d")])


# -- compile and pool --

def test_empty_module_compiles_and_has_no_entry(fresh_executor):
    art = tools.validate_and_instrument(HEADER)
    cm = fresh_executor.compile(art)
    assert cm.content_hash == fresh_executor.compile(art).content_hash
    res = fresh_executor.execute(cm, SandboxSpec(argv=["x"]), ResourceLimits())
    assert isinstance(res.exit_status, Trapped)


def test_pool_fresh_is_zero(fresh_executor):
    assert fresh_executor.pool_stats() == PoolStats(0, 0, 0)


def test_warm_twice_is_one_miss_one_hit(fresh_executor, artifacts):
    spec = SandboxSpec(argv=["nop"])
    first = fresh_executor.execute(artifacts["nop"], spec, ResourceLimits(), StartMode.WARM)
    second = fresh_executor.execute(artifacts["nop"], spec, ResourceLimits(), StartMode.WARM)
    assert first.start_mode is StartMode.COLD
    assert second.start_mode is StartMode.WARM
    assert fresh_executor.pool_stats() == PoolStats(1, 1, 1)


def test_capacity_one_alternating_always_misses(artifacts):
    with Executor(pool_capacity=1) as ex:
        for name in ["nop", "stateful", "nop", "stateful"]:
            res = ex.execute(artifacts[name], SandboxSpec(argv=[name]), ResourceLimits(), StartMode.WARM)
            assert res.start_mode is StartMode.COLD
        assert ex.pool_stats() == PoolStats(1, 0, 4)


def test_cold_always_compiles(fresh_executor, artifacts):
    for _ in range(3):
        res = fresh_executor.execute(artifacts["nop"], SandboxSpec(argv=["nop"]), ResourceLimits(), StartMode.COLD)
        assert res.start_mode is StartMode.COLD
    stats = fresh_executor.pool_stats()
    assert (stats.hits, stats.misses) == (0, 0)


# -- execution --

def test_nop_fuel_is_constant(executor, artifacts):
    results = [executor.execute(artifacts["nop"], SandboxSpec(argv=["nop"]), ResourceLimits()) for _ in range(5)]
    assert all(r.exit_status == Exited(0) and r.stdout == b"" for r in results)
    assert results[0].fuel_consumed > 0
    assert len({r.fuel_consumed for r in results}) == 1


def test_result_timings_are_consistent(executor, artifacts):
    res = executor.execute(artifacts["nop"], SandboxSpec(argv=["nop"]), ResourceLimits(), StartMode.COLD)
    assert res.t_total_us >= res.t_setup_us >= 0
    assert res.t_total_us >= res.t_exec_us
    assert res.memory_peak_pages >= 1


def test_argv_and_stdout(executor, artifacts):
    res = executor.execute(artifacts["nbody"], SandboxSpec(argv=["nbody", "1000"]), ResourceLimits())
    assert res.exit_status == Exited(0)
    assert res.stdout == b"-0.169075164\n-0.169087605\n"


def test_stdin_is_delivered(executor):
    # guest reads one byte of stdin via fd_read and exits with it as status
    b = ModuleBuilder()
    fd_read = b.import_func("wasi_snapshot_preview1", "fd_read", ("i32", "i32", "i32", "i32"), ("i32",))
    proc_exit = b.import_func("wasi_snapshot_preview1", "proc_exit", ("i32",))
    b.add_memory(1)
    # iovec at 0: buf=16, len=1
    b.add_data(0, bytes([16, 0, 0, 0, 1, 0, 0, 0]))
    b.func(asm("i32.const", 0, "i32.const", 0, "i32.const", 1, "i32.const", 8, "call", fd_read, "drop",
               "i32.const", 16, "i32.load8_u", (0, 0), "call", proc_exit, "end"), export="_start")
    art = tools.validate_and_instrument(b.build())
    res = executor.execute(art, SandboxSpec(argv=["x"], stdin_bytes=b"*"), ResourceLimits())
    assert res.exit_status == Exited(ord("*"))


def test_cat_sync_with_preopen(executor, artifacts, tmp_path):
    (tmp_path / "f.txt").write_bytes(b"x" * 1234)
    spec = SandboxSpec(argv=["cat-sync", "/data/f.txt"], preopens=[(str(tmp_path), "/data")])
    res = executor.execute(artifacts["cat-sync"], spec, ResourceLimits())
    assert res.exit_status == Exited(0)
    assert res.stdout == b"1234\n"


def test_cat_sync_denied_without_preopen(executor, artifacts, tmp_path):
    target = tmp_path / "secret.txt"
    target.write_bytes(b"secret")
    before = snapshot(tmp_path)
    for path in (str(target), "/data/secret.txt", "../secret.txt"):
        res = executor.execute(artifacts["cat-sync"], SandboxSpec(argv=["cat-sync", path]), ResourceLimits())
        assert not res.ok
        assert b"secret" not in res.stdout and b"6" not in res.stdout
    assert snapshot(tmp_path) == before


def test_cat_sync_cannot_escape_preopen(executor, artifacts, tmp_path):
    inner = tmp_path / "inner"
    inner.mkdir()
    (tmp_path / "outside.txt").write_bytes(b"nope")
    spec = SandboxSpec(argv=["cat-sync", "/data/../outside.txt"], preopens=[(str(inner), "/data")])
    res = executor.execute(artifacts["cat-sync"], spec, ResourceLimits())
    assert not res.ok


def test_fuel_limit_one(executor, artifacts):
    for name in ("nop", "nbody", "spin"):
        res = executor.execute(artifacts[name], SandboxSpec(argv=[name]), ResourceLimits(fuel_limit=1))
        assert isinstance(res.exit_status, FuelExhausted)
        assert res.fuel_consumed == 1


def test_fuel_exhaustion_reports_limit(executor, artifacts):
    res = executor.execute(artifacts["spin"], SandboxSpec(argv=["spin"]), ResourceLimits(fuel_limit=123_456))
    assert isinstance(res.exit_status, FuelExhausted)
    assert res.fuel_consumed == 123_456


def test_memory_limit(executor, artifacts):
    res = executor.execute(artifacts["mem_hog"], SandboxSpec(argv=["mem_hog"]), ResourceLimits(memory_limit_pages=64))
    assert isinstance(res.exit_status, MemoryExceeded)
    assert res.memory_peak_pages <= 64


def test_memory_limit_below_initial(executor, artifacts):
    res = executor.execute(artifacts["nop"], SandboxSpec(argv=["nop"]), ResourceLimits(memory_limit_pages=1))
    assert isinstance(res.exit_status, MemoryExceeded)


def test_timeout(executor, artifacts):
    res = executor.execute(artifacts["spin_read"], SandboxSpec(argv=["spin_read"]),
                           ResourceLimits(wall_timeout_ms=300))
    assert isinstance(res.exit_status, Timeout)
    assert 240_000 <= res.t_exec_us <= 360_000


def test_each_limit_only_trips_its_own_variant(executor, artifacts):
    spin = SandboxSpec(argv=["spin"])
    big = ResourceLimits(fuel_limit=10**15, memory_limit_pages=65536, wall_timeout_ms=200)
    assert isinstance(executor.execute(artifacts["spin"], spin, big).exit_status, Timeout)
    res = executor.execute(artifacts["spin"], spin, ResourceLimits(fuel_limit=10_000, wall_timeout_ms=60_000))
    assert isinstance(res.exit_status, FuelExhausted)


def test_trap_reason(executor):
    b = ModuleBuilder()
    b.func(asm("unreachable", "end"), export="_start")
    res = executor.execute(tools.validate_and_instrument(b.build()), SandboxSpec(argv=["x"]), ResourceLimits())
    assert isinstance(res.exit_status, Trapped)
    assert res.exit_class == "trap"
    assert "unreachable" in res.exit_status.reason


def test_uninstrumented_runs_unmetered(executor, artifacts):
    raw = tools.validate(artifacts["nbody"].raw_bytes)
    res = executor.execute(raw, SandboxSpec(argv=["nbody", "1000"]), ResourceLimits())
    assert res.stdout == b"-0.169075164\n-0.169087605\n"
    assert res.fuel_consumed == 0


def test_fresh_state_every_invocation(executor, artifacts):
    for mode in (StartMode.COLD, StartMode.WARM, StartMode.WARM):
        res = executor.execute(artifacts["stateful"], SandboxSpec(argv=["stateful"]), ResourceLimits(), mode)
        assert res.stdout == b"1 1\n"


def test_concurrent_invocations_are_isolated(executor, artifacts):
    def one(_):
        return executor.execute(artifacts["stateful"], SandboxSpec(argv=["stateful"]), ResourceLimits())

    with ThreadPoolExecutor(16) as pool:
        results = list(pool.map(one, range(32)))
    assert all(r.stdout == b"1 1\n" and r.ok for r in results)
    assert len({r.fuel_consumed for r in results}) == 1


def test_warm_setup_faster_than_cold(fresh_executor, artifacts):
    spec = SandboxSpec(argv=["nop"])
    cold = [fresh_executor.execute(artifacts["nop"], spec, ResourceLimits(), StartMode.COLD).t_setup_us
            for _ in range(20)]
    warm = [fresh_executor.execute(artifacts["nop"], spec, ResourceLimits(), StartMode.WARM).t_setup_us
            for _ in range(20)]
    assert statistics.median(warm) < statistics.median(cold)
