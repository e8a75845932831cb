from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vcmqp.errors import FormatError, RangeError
from vcmqp.geometry import CtuGrid, SaliencyMask
from vcmqp.qpmap import QpMap, assign_qps, non_salient_qp, parse_qp_delta, parse_qpmap, read_qpmap, write_qpmap


def test_assign_examples():
    grid = CtuGrid(256, 128, 128)
    mask = SaliencyMask(grid, (True, False))
    assert assign_qps(mask, 22, 10).qps == (22, 32)
    assert assign_qps(mask, 22, "max").qps == (22, 63)
    assert assign_qps(mask, 60, 10).qps == (60, 63)
    assert assign_qps(mask, 22, 0).qps == (22, 22)


def test_parse_qp_delta():
    assert parse_qp_delta("max") == "max"
    assert parse_qp_delta(" MAX ") == "max"
    assert parse_qp_delta("7") == 7
    for bad in ("-1", "x", -3, True):
        with pytest.raises(RangeError):
            parse_qp_delta(bad)


@pytest.mark.parametrize("qp_base", [-1, 64])
def test_assign_rejects_bad_base(qp_base):
    with pytest.raises(RangeError):
        assign_qps(SaliencyMask.uniform(CtuGrid(10, 10), True), qp_base, 5)


def test_text_format_and_round_trip(tmp_path):
    grid = CtuGrid(300, 200, 128)
    qpmap = assign_qps(SaliencyMask(grid, (True, False, False, True, True, False)), 27, 10, "frame_01")
    text = qpmap.to_text()
    assert text.splitlines()[:3] == [
        "qpmap/1",
        "image_id frame_01",
        "ctu_size 128  image 300 200  grid 3 2  qp_base 27  qp_delta 10",
    ]
    assert text.splitlines()[3:] == ["27 37 37", "27 27 37"]
    path = tmp_path / "m.qpmap"
    write_qpmap(qpmap, path)
    assert read_qpmap(path) == qpmap
    assert path.read_bytes() == text.encode()


def test_parse_without_optional_fields_infers_base():
    text = "qpmap/1\nimage_id x\nctu_size 64  image 100 64  grid 2 1\n20 63\n"
    qpmap = parse_qpmap(text)
    assert qpmap.qp_base == 20 and qpmap.qps == (20, 63)
    assert qpmap.salient_flags == (True, False)


@pytest.mark.parametrize("text, error", [
    ("qpmap/2\nimage_id x\nctu_size 64  image 64 64  grid 1 1\n20\n", FormatError),
    ("qpmap/1\nimage_id x\nctu_size 64  image 128 64  grid 1 1\n20\n", FormatError),
    ("qpmap/1\nimage_id x\nctu_size 64  image 128 64  grid 2 1\n20\n", FormatError),
    ("qpmap/1\nimage_id x\nctu_size 64  image 128 64  grid 2 1\n20 64\n", RangeError),
    ("qpmap/1\nimage_id x\nctu_size 64  image 64 64  grid 1 1\n20\n20\n", FormatError),
    ("qpmap/1\nimage_id x\nctu_size 64  image 64 64  bogus 1\n20\n", FormatError),
    ("qpmap/1\nimage_id x\nctu_size 64  image 128 64  grid 2 1  qp_base 20  qp_delta 5\n20 30\n", FormatError),
])
def test_parse_rejects_malformed(text, error):
    with pytest.raises(error):
        parse_qpmap(text)


def test_qpmap_rejects_wrong_count():
    with pytest.raises(FormatError):
        QpMap(CtuGrid(256, 128, 128), (22,), 22, 0)


@settings(max_examples=200, deadline=None)
@given(
    st.integers(1, 700), st.integers(1, 500), st.sampled_from([16, 32, 64, 128]),
    st.integers(0, 63), st.one_of(st.integers(0, 70), st.just("max")), st.data(),
)
def test_assigned_values_and_round_trip(width, height, ctu, qp_base, qp_delta, data):
    grid = CtuGrid(width, height, ctu)
    flags = tuple(data.draw(st.lists(st.booleans(), min_size=len(grid), max_size=len(grid))))
    qpmap = assign_qps(SaliencyMask(grid, flags), qp_base, qp_delta)
    assert set(qpmap.qps) <= {qp_base, non_salient_qp(qp_base, qp_delta)}
    assert all(0 <= q <= 63 for q in qpmap.qps)
    assert all(q >= qp_base for q in qpmap.qps)
    back = parse_qpmap(qpmap.to_text())
    assert back == qpmap
