import struct

import numpy as np
import pytest

from loceval_client import PackWriteError, write_scorepack


def test_golden_single_record(tmp_path):
    """1x1 map of 0.5 with id 'a' -> the 31-byte reference file."""
    path = tmp_path / "one.wsep"
    write_scorepack([("a", np.array([[0.5]]))], path)
    expected = (
        b"WSEP"
        + struct.pack("<HHQ", 1, 0, 1)
        + struct.pack("<H", 1)
        + b"a"
        + struct.pack("<II", 1, 1)
        + struct.pack("<f", 0.5)
    )
    assert path.read_bytes() == expected


def test_empty_iterable_writes_valid_count_zero_pack(tmp_path):
    path = tmp_path / "empty.wsep"
    write_scorepack([], path)
    assert path.read_bytes() == b"WSEP" + struct.pack("<HHQ", 1, 0, 0)


def test_count_patched_after_generator_is_consumed(tmp_path):
    path = tmp_path / "gen.wsep"
    write_scorepack(((f"im{i}", np.full((2, 3), i / 10.0)) for i in range(5)), path)
    raw = path.read_bytes()
    assert struct.unpack_from("<Q", raw, 8)[0] == 5


def test_values_stored_as_float32(tmp_path):
    path = tmp_path / "f32.wsep"
    write_scorepack([("x", np.array([[1 / 3, 2 / 3]], dtype=np.float64))], path)
    raw = path.read_bytes()
    stored = np.frombuffer(raw[-8:], dtype="<f4")
    assert stored[0] == np.float32(1 / 3)
    assert stored[1] == np.float32(2 / 3)


def test_row_major_order_and_dims(tmp_path):
    path = tmp_path / "dims.wsep"
    values = np.arange(6, dtype=np.float64).reshape(2, 3)
    write_scorepack([("x", values)], path)
    raw = path.read_bytes()
    height, width = struct.unpack_from("<II", raw, 16 + 2 + 1)
    assert (height, width) == (2, 3)
    assert np.frombuffer(raw[-24:], dtype="<f4").tolist() == [0, 1, 2, 3, 4, 5]


def test_fortran_ordered_input_is_flattened_row_major(tmp_path):
    path = tmp_path / "order.wsep"
    values = np.asfortranarray(np.arange(6, dtype=np.float64).reshape(2, 3))
    write_scorepack([("x", values)], path)
    assert np.frombuffer(path.read_bytes()[-24:], dtype="<f4").tolist() == [0, 1, 2, 3, 4, 5]


def test_duplicate_id_rejected(tmp_path):
    pairs = [("a", np.zeros((2, 2))), ("a", np.ones((2, 2)))]
    with pytest.raises(PackWriteError, match="duplicate"):
        write_scorepack(pairs, tmp_path / "dup.wsep")


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_non_finite_values_rejected(tmp_path, bad):
    values = np.ones((3, 3))
    values[1, 1] = bad
    with pytest.raises(PackWriteError, match="non-finite"):
        write_scorepack([("a", values)], tmp_path / "bad.wsep")


def test_float64_overflowing_float32_rejected(tmp_path):
    # finite in float64 but infinite after the float32 conversion
    with pytest.raises(PackWriteError, match="non-finite"):
        write_scorepack([("a", np.full((1, 1), 1e39))], tmp_path / "ovf.wsep")


@pytest.mark.parametrize("shape", [(4,), (2, 2, 2)])
def test_non_2d_rejected(tmp_path, shape):
    with pytest.raises(PackWriteError, match="2-D"):
        write_scorepack([("a", np.zeros(shape))], tmp_path / "nd.wsep")


@pytest.mark.parametrize("image_id", ["", 7, None])
def test_bad_id_rejected(tmp_path, image_id):
    with pytest.raises(PackWriteError, match="image id"):
        write_scorepack([(image_id, np.zeros((2, 2)))], tmp_path / "id.wsep")


def test_byte_identical_to_toolkit_writer(tmp_path):
    """Same inputs through this writer and the toolkit's produce the same
    file, byte for byte (the cross-package golden contract)."""
    import loceval

    rng = np.random.default_rng(3)
    ids = ["plain", "with space", "uniçode_圖"]
    arrays = [rng.random((5, 7)), rng.random((1, 1)), rng.random((8, 3)) * 0.5]

    ours = tmp_path / "client.wsep"
    theirs = tmp_path / "core.wsep"
    write_scorepack(zip(ids, arrays), ours)
    loceval.write_scorepack(
        (loceval.ScoreMap(i, a) for i, a in zip(ids, arrays)), theirs
    )
    assert ours.read_bytes() == theirs.read_bytes()


def test_readable_by_toolkit_reader(tmp_path):
    import loceval

    rng = np.random.default_rng(4)
    arrays = {f"im{i}": rng.random((4, 6)) for i in range(3)}
    path = tmp_path / "pack.wsep"
    write_scorepack(arrays.items(), path)

    seen = {}
    for smap in loceval.read_scorepack(path):
        seen[smap.image_id] = smap.values
    assert list(seen) == list(arrays)
    for image_id, original in arrays.items():
        np.testing.assert_array_equal(
            seen[image_id], original.astype(np.float32).astype(np.float64)
        )
