import numpy as np
import pytest

from rabi_lab import resonances as rs
from rabi_lab.errors import ValidationError
from rabi_lab.util import parallel_map, worker_count


class TestWorkerCount:
    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("RABI_LAB_THREADS", "3")
        assert worker_count() == 3

    def test_default_is_hardware(self, monkeypatch):
        monkeypatch.delenv("RABI_LAB_THREADS", raising=False)
        assert worker_count() >= 1

    def test_rejects_garbage(self, monkeypatch):
        monkeypatch.setenv("RABI_LAB_THREADS", "two")
        with pytest.raises(ValidationError):
            worker_count()
        monkeypatch.setenv("RABI_LAB_THREADS", "0")
        with pytest.raises(ValidationError):
            worker_count()


class TestParallelMap:
    def test_preserves_order(self, monkeypatch):
        monkeypatch.setenv("RABI_LAB_THREADS", "4")
        assert parallel_map(lambda x: x * x, range(17)) == [x * x for x in range(17)]

    def test_single_worker_path(self, monkeypatch):
        monkeypatch.setenv("RABI_LAB_THREADS", "1")
        assert parallel_map(len, ["ab", "c"]) == [2, 1]

    def test_sweep_matches_serial(self, monkeypatch):
        kinds = [rs.ResonanceKind.BS, rs.ResonanceKind.WS]
        grid = [0.05, 0.1]
        monkeypatch.setenv("RABI_LAB_THREADS", "1")
        serial = rs.resonance_curves(kinds, grid)
        monkeypatch.setenv("RABI_LAB_THREADS", "4")
        threaded = rs.resonance_curves(kinds, grid)
        assert serial == threaded
        assert [r["kind"] for r in serial] == ["BS", "BS", "WS", "WS"]
        assert np.all(np.isfinite([r["delta_res"] for r in serial]))
