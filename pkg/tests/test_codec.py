from __future__ import annotations

import shlex
import sys

import numpy as np
import pytest

from vcmqp.codec import (
    Image,
    decode_pgm,
    encode_pgm,
    external_encode,
    mock_encode,
    parse_template,
    qp_step,
    read_image,
    write_image,
)
from vcmqp.errors import DimensionError, ExternalToolError, FormatError, ParseError, ProtocolError
from vcmqp.geometry import CtuGrid, SaliencyMask
from vcmqp.qpmap import QpMap, assign_qps

PY = shlex.quote(sys.executable)


def noise_image(seed=0, width=200, height=150):
    rng = np.random.default_rng(seed)
    return Image(rng.integers(0, 256, (height, width), dtype=np.uint8))


def test_pgm_round_trip(tmp_path):
    img = noise_image()
    assert decode_pgm(encode_pgm(img)) == img
    write_image(img, tmp_path / "a.pgm")
    assert read_image(tmp_path / "a.pgm") == img


def test_pgm_header_comments_and_errors():
    body = bytes(range(6))
    assert decode_pgm(b"P5\n# note\n3 2\n255\n" + body).pixel(2, 1) == 5
    with pytest.raises(FormatError):
        decode_pgm(b"P5\n3 2\n65535\n" + body * 2)
    with pytest.raises(FormatError):
        decode_pgm(b"P5\n3 2\n255\n" + body[:4])
    with pytest.raises(FormatError):
        decode_pgm(b"P2\n3 2\n255\n0 1 2 3 4 5")


def test_qp_step_doubles_every_six():
    assert qp_step(4) == 1.0
    assert qp_step(10) == 2.0
    assert qp_step(22) == pytest.approx(8.0)


def test_mock_encode_is_lossless_at_qp4():
    img = noise_image()
    result = mock_encode(img, QpMap.uniform(CtuGrid(200, 150, 64), 4))
    assert result.decoded == img


def test_mock_encode_deterministic_and_rate_monotone():
    img = noise_image(1)
    grid = CtuGrid(200, 150, 64)
    bits = []
    for qp in (10, 22, 34, 46, 63):
        a = mock_encode(img, QpMap.uniform(grid, qp))
        b = mock_encode(img, QpMap.uniform(grid, qp))
        assert a.decoded == b.decoded and a.bits == b.bits
        bits.append(a.bits)
    assert bits == sorted(bits, reverse=True)


def test_constant_ctu_costs_one_bit():
    img = Image(np.full((64, 128), 77, dtype=np.uint8))
    assert mock_encode(img, QpMap.uniform(CtuGrid(128, 64, 64), 30)).bits == 2.0


def test_mock_encode_ctus_are_independent():
    img = noise_image(2, 256, 128)
    grid = CtuGrid(256, 128, 128)
    mask = SaliencyMask(grid, (True, False))
    mixed = mock_encode(img, assign_qps(mask, 22, "max")).decoded.luma
    fine = mock_encode(img, QpMap.uniform(grid, 22)).decoded.luma
    assert np.array_equal(mixed[:, :128], fine[:, :128])
    assert not np.array_equal(mixed[:, 128:], fine[:, 128:])


def test_mock_encode_quantizes_chroma():
    rng = np.random.default_rng(4)
    luma = rng.integers(0, 256, (64, 64), dtype=np.uint8)
    chroma = (rng.integers(0, 256, (64, 64), dtype=np.uint8),)
    img = Image(luma, chroma)
    out = mock_encode(img, QpMap.uniform(CtuGrid(64, 64, 64), 40))
    assert len(out.decoded.chroma) == 1
    assert not np.array_equal(out.decoded.chroma[0], chroma[0])
    luma_only = mock_encode(Image(luma), QpMap.uniform(CtuGrid(64, 64, 64), 40))
    assert out.bits == luma_only.bits


def test_mock_encode_rejects_mismatched_grid():
    with pytest.raises(DimensionError):
        mock_encode(noise_image(), QpMap.uniform(CtuGrid(100, 100), 22))


COPY = "import shutil, sys; shutil.copyfile(sys.argv[1], sys.argv[2])"


def copy_template(encode_extra="", decode_src="{input}"):
    return parse_template(
        f"encode: {PY} -c {shlex.quote(COPY)} {{input}} {{output}} {encode_extra}\n"
        f"decode: {PY} -c {shlex.quote(COPY)} {decode_src} {{recon}}\n"
        "bitstream_ext: .bit\n"
    )


def test_external_encode_with_copy_tool(tmp_path):
    img = noise_image(5, 100, 60)
    qpmap = QpMap.uniform(CtuGrid(100, 60), 30)
    result = external_encode(img, qpmap, copy_template(), tmp_path / "w")
    assert result.decoded == img
    assert result.bits == (tmp_path / "w" / "bitstream.bit").stat().st_size * 8
    assert result.encoder_id.startswith("template:")
    again = external_encode(img, qpmap, copy_template(), tmp_path / "w2")
    assert again.bits == result.bits and again.decoded == result.decoded


def test_external_encode_missing_binary(tmp_path):
    template = parse_template("encode: /nonexistent/encoder {input} {output}\ndecode: true\n")
    with pytest.raises(ExternalToolError, match="could not be started"):
        external_encode(noise_image(), QpMap.uniform(CtuGrid(200, 150), 30), template, tmp_path)


def test_external_encode_failure_keeps_stderr(tmp_path):
    script = "import sys; sys.stderr.write('boom\\n'); sys.exit(4)"
    template = parse_template(f"encode: {PY} -c {shlex.quote(script)}\ndecode: true\n")
    with pytest.raises(ExternalToolError) as info:
        external_encode(noise_image(), QpMap.uniform(CtuGrid(200, 150), 30), template, tmp_path)
    assert "status 4" in str(info.value)
    assert "boom" in info.value.stderr


def test_external_encode_protocol_errors(tmp_path):
    img = noise_image()
    qpmap = QpMap.uniform(CtuGrid(200, 150), 30)
    no_output = parse_template(f"encode: {PY} -c pass\ndecode: {PY} -c pass\n")
    with pytest.raises(ProtocolError, match="did not produce"):
        external_encode(img, qpmap, no_output, tmp_path / "a")
    # decoder returns the wrong picture size
    small = tmp_path / "small.pgm"
    write_image(noise_image(0, 10, 10), small)
    wrong = copy_template(decode_src=shlex.quote(str(small)))
    with pytest.raises(ProtocolError, match="reconstruction is 10x10"):
        external_encode(img, qpmap, wrong, tmp_path / "b")


def test_template_parsing():
    t = parse_template("# comment\nencode: enc {input}\ndecode: dec {output}\n")
    assert t.bitstream_ext == "bin"
    with pytest.raises(ParseError):
        parse_template("encode: x\n")
    with pytest.raises(ParseError):
        parse_template("encode: x\ndecode: y\nfoo: z\n")
    assert parse_template("encode: a\ndecode: b\n").identity != parse_template("encode: a\ndecode: c\n").identity
