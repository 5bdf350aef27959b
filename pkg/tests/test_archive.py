import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from setmatch.archive import (
    EmbeddingArchive,
    ManifestRecord,
    group_id,
    read_archive,
    roundtrip_equal,
    write_archive,
)
from setmatch.data import normalize
from setmatch.errors import (
    BadMagic,
    DimMismatch,
    NormViolation,
    NormViolationWarning,
    TruncatedPayload,
    UnsupportedVersion,
    ZeroVector,
)

from helpers import random_archive


class TestNormalize:
    def test_three_four_five(self):
        assert np.allclose(normalize([3.0, 4.0]), [0.6, 0.8])

    def test_already_unit(self):
        assert np.array_equal(normalize([1.0, 0.0, 0.0]), [1.0, 0.0, 0.0])

    def test_zero_vector_rejected(self):
        with pytest.raises(ZeroVector):
            normalize([0.0, 0.0])

    def test_non_finite_rejected(self):
        with pytest.raises(ZeroVector):
            normalize([1.0, np.nan])

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=16))
    def test_idempotent(self, values):
        if not any(abs(v) > 1e-30 for v in values):
            return
        once = normalize(values)
        twice = normalize(once)
        assert np.max(np.abs(once.astype(np.float64) - twice)) <= 1e-7

    def test_unit_norm_within_tolerance(self, rng):
        for _ in range(50):
            v = normalize(rng.normal(size=8))
            assert abs(np.linalg.norm(v.astype(np.float64)) - 1.0) <= 1e-4


def _write_bytes(archive) -> bytes:
    buf = io.BytesIO()
    n = write_archive(archive, buf)
    data = buf.getvalue()
    assert n == len(data)
    return data


class TestRoundTrip:
    def test_empty_archive(self):
        archive = EmbeddingArchive(dim=512)
        data = _write_bytes(archive)
        back = read_archive(io.BytesIO(data))
        assert roundtrip_equal(archive, back)
        assert len(back) == 0

    def test_single_entry_payload_is_eight_bytes(self):
        rec = ManifestRecord("a", "image", "c", None)
        archive = EmbeddingArchive(
            dim=2, records=(rec,), vectors=np.array([[1.0, 0.0]], dtype=np.float32)
        )
        data = _write_bytes(archive)
        assert data[-8:] == np.array([1.0, 0.0], dtype="<f4").tobytes()

    @settings(max_examples=40, deadline=None)
    @given(n=st.integers(0, 12), dim=st.integers(1, 9), seed=st.integers(0, 2**31))
    def test_randomized_roundtrip_bit_exact(self, n, dim, seed):
        archive = random_archive(np.random.default_rng(seed), n, dim)
        back = read_archive(io.BytesIO(_write_bytes(archive)))
        assert roundtrip_equal(archive, back)

    def test_vector_payload_bit_exact(self, rng):
        archive = random_archive(rng, 7, 5)
        back = read_archive(io.BytesIO(_write_bytes(archive)))
        assert back.vectors.tobytes() == archive.vectors.tobytes()


class TestCorruption:
    def _data(self, rng):
        return _write_bytes(random_archive(rng, 4, 3))

    def test_bad_magic(self, rng):
        data = bytearray(self._data(rng))
        data[:4] = b"NOPE"
        with pytest.raises(BadMagic):
            read_archive(io.BytesIO(bytes(data)))

    def test_unsupported_version(self, rng):
        data = bytearray(self._data(rng))
        data[4] = 99
        with pytest.raises(UnsupportedVersion):
            read_archive(io.BytesIO(bytes(data)))

    def test_truncated_payload(self, rng):
        data = self._data(rng)
        with pytest.raises(TruncatedPayload):
            read_archive(io.BytesIO(data[:-5]))

    def test_count_mismatch_rejected(self, rng):
        data = bytearray(self._data(rng))
        data[10] = data[10] + 1  # bump entry count; manifest disagrees
        with pytest.raises(TruncatedPayload):
            read_archive(io.BytesIO(bytes(data)))

    def test_norm_violation_warns_by_default(self, rng):
        archive = random_archive(rng, 3, 4)
        bad = archive.vectors.copy()
        bad[1] *= 3.0
        broken = EmbeddingArchive(dim=4, records=archive.records, vectors=bad)
        data = _write_bytes(broken)
        with pytest.warns(NormViolationWarning):
            read_archive(io.BytesIO(data))
        with pytest.raises(NormViolation):
            read_archive(io.BytesIO(data), strict_norm=True)


class TestInvariants:
    def test_manifest_vector_count_must_agree(self):
        with pytest.raises(DimMismatch):
            EmbeddingArchive(
                dim=2,
                records=(ManifestRecord("a", "image"),),
                vectors=np.zeros((2, 2), dtype=np.float32),
            )

    def test_vector_dim_must_match(self):
        with pytest.raises(DimMismatch):
            EmbeddingArchive(
                dim=3,
                records=(ManifestRecord("a", "image"),),
                vectors=np.zeros((1, 2), dtype=np.float32),
            )

    def test_group_id(self):
        assert group_id("img7#crop3") == "img7"
        assert group_id("plain") == "plain"
