import numpy as np
import pytest

from tspfcn.errors import CheckpointError
from tspfcn.net import ArchConfig, init_model, load_checkpoint, predict, save_checkpoint

TINY = ArchConfig.desk(input_size=32)


@pytest.fixture
def ckpt(tmp_path):
    model = init_model(TINY, seed=4)
    path = tmp_path / "model.ckpt"
    save_checkpoint(model, path)
    return model, path


class TestRoundTrip:
    def test_parameters_bitwise_identical(self, ckpt):
        model, path = ckpt
        loaded = load_checkpoint(path)
        assert loaded.config == model.config
        for name in model.params:
            assert np.array_equal(loaded.params[name], model.params[name]), name
            assert loaded.params[name].dtype == np.float32

    def test_predictions_identical(self, ckpt, rng):
        model, path = ckpt
        loaded = load_checkpoint(path)
        image = rng.random((32, 32, 3)).astype(np.float32)
        assert np.array_equal(predict(model, image), predict(loaded, image))

    def test_header_layout(self, ckpt):
        _, path = ckpt
        data = path.read_bytes()
        assert data[:8] == b"TSPFCN01"
        cfg_len = int.from_bytes(data[8:12], "little")
        import json

        cfg = json.loads(data[12 : 12 + cfg_len])
        assert cfg["input_size"] == 32


class TestErrors:
    def test_wrong_magic(self, tmp_path, ckpt):
        _, path = ckpt
        data = bytearray(path.read_bytes())
        data[:8] = b"NOTMAGIC"
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(bytes(data))
        with pytest.raises(CheckpointError):
            load_checkpoint(bad)

    def test_truncated_blob(self, tmp_path, ckpt):
        _, path = ckpt
        data = path.read_bytes()
        bad = tmp_path / "trunc.ckpt"
        bad.write_bytes(data[: len(data) - 17])
        with pytest.raises(CheckpointError):
            load_checkpoint(bad)

    def test_trailing_garbage(self, tmp_path, ckpt):
        _, path = ckpt
        bad = tmp_path / "trail.ckpt"
        bad.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(CheckpointError):
            load_checkpoint(bad)

    def test_corrupt_config(self, tmp_path, ckpt):
        _, path = ckpt
        data = bytearray(path.read_bytes())
        data[12] = ord("?")
        bad = tmp_path / "cfg.ckpt"
        bad.write_bytes(bytes(data))
        with pytest.raises(CheckpointError):
            load_checkpoint(bad)
