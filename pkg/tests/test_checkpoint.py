import numpy as np
import pytest

from cooldown import checkpoint as ck_io
from cooldown.schedule import ScheduleSpec
from cooldown.tasks import QuadraticOptions, TaskSpec
from cooldown.trainer import TrainerConfig, _Run, train


@pytest.fixture(scope="module")
def checkpoints():
    cfg = TrainerConfig(TaskSpec("noisy_quadratic", 2, QuadraticOptions(dim=12)),
                        ScheduleSpec("constant", 0.01, 400, 50), batch_size=4, eval_every=50,
                        checkpoint_every=100, swa_h=30)
    return cfg, train(cfg)[1]


def test_round_trip_bit_identical(checkpoints):
    _, cks = checkpoints
    for ck in cks:
        blob = ck_io.dumps(ck)
        back = ck_io.loads(blob)
        assert ck_io.dumps(back) == blob
        assert back.params.tobytes() == ck.params.tobytes()
        assert back.step == ck.step and back.config == ck.config and back.rng_state == ck.rng_state


def test_reload_continues_identically(checkpoints, tmp_path):
    cfg, cks = checkpoints
    ck = cks[2]
    back = ck_io.load(ck_io.save(ck, tmp_path / "a.cdlb"))
    a, b = [], []
    _Run(cfg, cfg.schedule).restore(ck).advance(a, [], set())
    _Run(cfg, cfg.schedule).restore(back).advance(b, [], set())
    assert a == b


def test_header_layout(checkpoints):
    ck = checkpoints[1][0]
    blob = ck_io.dumps(ck)
    assert blob[:5] == b"CDLB1" and blob[5] == 1
    assert int.from_bytes(blob[6:14], "little") == 12
    assert np.array_equal(np.frombuffer(blob[14:14 + 96], "<f8"), ck.params)


def test_rejects_corruption(checkpoints):
    blob = ck_io.dumps(checkpoints[1][-1])
    bad = bytearray(blob)
    bad[0] ^= 0xFF
    for broken in (bytes(bad), blob[:-1], blob[:10], blob[:60], blob + b"x", blob[:5] + b"\x09" + blob[6:]):
        with pytest.raises(ck_io.CheckpointError):
            ck_io.loads(broken)
    end = 14 + 96 + 8
    garbage = blob[:end] + b"{" * (len(blob) - end)
    with pytest.raises(ck_io.CheckpointError):
        ck_io.loads(garbage)


def test_missing_file(tmp_path):
    with pytest.raises(ck_io.CheckpointError):
        ck_io.load(tmp_path / "nope.cdlb")


def test_window_checkpoint(checkpoints):
    ck = checkpoints[1][-1]
    w = ck_io.window_checkpoint(ck, 999, np.ones(12))
    back = ck_io.loads(ck_io.dumps(w))
    assert back.kind == "swa_window" and back.step == 999 and (back.params == 1).all()
