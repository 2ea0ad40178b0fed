import json
import threading

import pytest

from wasmless.errors import MalformedModule, NameInvalid, NotFound, NotWasm, StorageFailure
from wasmless.executor import ResourceLimits
from wasmless.registry import FunctionManifest, Registry
from wasmless.wasm.binary import HEADER, name_bytes, uleb

from micro import BY_NAME

ADD = BY_NAME["straight_add"].build()
LOOP = BY_NAME["countdown_loop_k5_m10"].build()

MANIFEST_FIELDS = {"name", "content_hash", "limits", "preopens", "created_at",
                   "raw_size_bytes", "instrumented_size_bytes"}


def padded_module(total: int) -> bytes:
    """A valid empty module grown to exactly ``total`` bytes with a custom section."""
    name = name_bytes("pad")
    for size_len in range(1, 6):
        payload_len = total - len(HEADER) - 1 - size_len
        if len(uleb(payload_len)) == size_len:
            return HEADER + b"\x00" + uleb(payload_len) + name + bytes(payload_len - len(name))
    raise ValueError(total)


@pytest.fixture
def reg(tmp_path):
    return Registry(tmp_path / "data")


def test_deploy_nop_sizes_match_files(reg, guests):
    m = reg.deploy("nop", guests.wasm("nop").read_bytes(), ResourceLimits(), [])
    assert m.raw_size_bytes == reg.raw_path(m.content_hash).stat().st_size > 0
    assert m.instrumented_size_bytes == reg.instrumented_path(m.content_hash).stat().st_size > 0
    assert reg.raw_path(m.content_hash).read_bytes() == guests.wasm("nop").read_bytes()


@pytest.mark.parametrize("name", ["NOP!", "", "a" * 65, "has space", "Upper", "dot.name", "../x"])
def test_bad_names(reg, name):
    with pytest.raises(NameInvalid):
        reg.deploy(name, ADD)


def test_name_charset_boundaries(reg):
    reg.deploy("a" * 64, ADD)
    reg.deploy("0-9-z", ADD)


def test_bad_bytes(reg):
    with pytest.raises(NotWasm):
        reg.deploy("x", b"")
    with pytest.raises(NotWasm):
        reg.deploy("x", b"hello")
    with pytest.raises(MalformedModule):
        reg.deploy("x", ADD[:-2])
    assert reg.list() == []


def test_redeploy_replaces_and_collects(reg):
    first = reg.deploy("f", ADD)
    second = reg.deploy("f", LOOP)
    assert second.content_hash != first.content_hash
    assert reg.lookup("f") == second
    assert not reg.raw_path(first.content_hash).exists()


def test_lookup_remove_list(reg):
    reg.deploy("b", ADD)
    m = reg.deploy("a", LOOP)
    assert reg.lookup("a") == m
    assert [x.name for x in reg.list()] == ["a", "b"]
    reg.remove("a")
    with pytest.raises(NotFound):
        reg.lookup("a")
    with pytest.raises(NotFound):
        reg.remove("a")
    assert not reg.raw_path(m.content_hash).exists()
    assert [x.name for x in reg.list()] == ["b"]


def test_identical_bytes_share_artifacts(reg):
    a = reg.deploy("a", ADD)
    b = reg.deploy("b", ADD)
    assert a.content_hash == b.content_hash
    assert len(list(reg.artifacts_dir.iterdir())) == 2
    reg.remove("a")
    assert reg.raw_path(b.content_hash).exists()
    reg.remove("b")
    assert list(reg.artifacts_dir.iterdir()) == []


def test_footprint_report(reg):
    assert reg.footprint_report() == []
    data = padded_module(40_000)
    assert len(data) == 40_000
    reg.deploy("pad", data)
    report = reg.footprint_report()
    assert report[0][:2] == ("pad", 40_000)
    assert report == reg.footprint_report()


def test_manifest_json_schema(reg, tmp_path):
    m = reg.deploy("f", ADD, ResourceLimits(10, 20, 30), [(str(tmp_path), "/data")])
    doc = json.loads(reg.manifest_path("f").read_text())
    assert set(doc) == MANIFEST_FIELDS
    assert doc["limits"] == {"fuel_limit": 10, "memory_limit_pages": 20, "wall_timeout_ms": 30}
    assert FunctionManifest.from_dict(doc) == m


def test_restart_sees_identical_state(tmp_path):
    first = Registry(tmp_path)
    m = first.deploy("f", LOOP)
    again = Registry(tmp_path)
    assert again.lookup("f") == m
    art = again.load_artifact(m)
    assert art.raw_bytes == LOOP
    assert art.instrumented_bytes == first.instrumented_path(m.content_hash).read_bytes()
    assert art.instruction_count_static == 10


def test_no_temp_files_left(reg):
    for i in range(5):
        reg.deploy("f", ADD if i % 2 else LOOP)
    leftovers = [p for p in reg.data_dir.rglob("*") if p.is_file() and p.name.startswith(".")]
    assert leftovers == []


def test_concurrent_deploys_same_name_linearize(reg):
    errors = []

    def deploy(data):
        try:
            reg.deploy("race", data)
        except Exception as exc:  # pragma: no cover
            errors.append(exc)

    threads = [threading.Thread(target=deploy, args=(ADD if i % 2 else LOOP,)) for i in range(16)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert errors == []
    m = reg.lookup("race")
    assert reg.raw_path(m.content_hash).exists()
    # the losing artifact has been collected
    assert len(list(reg.artifacts_dir.iterdir())) == 2


def test_unwritable_data_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("not a dir")
    with pytest.raises(StorageFailure):
        Registry(blocker / "data")
