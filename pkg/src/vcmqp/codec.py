"""Applying a QP map to an image.

Two back ends share one result type:

* :func:`mock_encode` -- a deterministic per-CTU scalar quantizer whose rate is
  the zero-order entropy of the quantization indices.  It exists so the whole
  pipeline runs without a real encoder.
* :func:`external_encode` -- runs user-supplied encode/decode command lines
  (e.g. wrapper scripts around a VVC reference encoder) and measures the
  bitstream file.
"""

from __future__ import annotations

import hashlib
import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, ExternalToolError, FormatError, ParseError, ProtocolError
from .geometry import CtuGrid
from .qpmap import QpMap, write_qpmap

MOCK_ENCODER_ID = "mock-qstep/1"


@dataclass(frozen=True, eq=False)
class Image:
    """8-bit image; ``luma`` is ``(height, width)`` uint8, chroma planes (if any) match it."""

    luma: np.ndarray
    chroma: tuple[np.ndarray, ...] = ()

    def __post_init__(self) -> None:
        for plane in (self.luma, *self.chroma):
            if plane.dtype != np.uint8 or plane.ndim != 2:
                raise FormatError(f"image planes must be 2-D uint8, got {plane.dtype} with shape {plane.shape}")
            if plane.shape != self.luma.shape:
                raise DimensionError("chroma planes must match the luma plane size")

    @property
    def width(self) -> int:
        return self.luma.shape[1]

    @property
    def height(self) -> int:
        return self.luma.shape[0]

    @property
    def planes(self) -> tuple[np.ndarray, ...]:
        return (self.luma, *self.chroma)

    def pixel(self, x: int, y: int, plane: int = 0) -> int:
        return int(self.planes[plane][y, x])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Image):
            return NotImplemented
        return len(self.planes) == len(other.planes) and all(
            np.array_equal(a, b) for a, b in zip(self.planes, other.planes)
        )

    def digest(self) -> str:
        h = hashlib.sha256(f"{self.width}x{self.height}x{len(self.planes)}".encode())
        for plane in self.planes:
            h.update(np.ascontiguousarray(plane).tobytes())
        return h.hexdigest()


# ---------------------------------------------------------------- image I/O


def _pgm_header(data: bytes) -> tuple[int, int, int, int]:
    """Return (width, height, maxval, offset of the raster)."""
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header")
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise FormatError(f"not a binary PGM (magic {tokens[0]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError("malformed PGM header") from None
    # exactly one whitespace byte separates the header from the raster
    return width, height, maxval, pos + 1


def decode_pgm(data: bytes) -> Image:
    width, height, maxval, offset = _pgm_header(data)
    if width <= 0 or height <= 0:
        raise FormatError(f"PGM size {width}x{height} is not positive")
    if maxval != 255:
        raise FormatError(f"only 8-bit PGM (maxval 255) is supported, got maxval {maxval}")
    raster = data[offset:offset + width * height]
    if len(raster) != width * height:
        raise FormatError(f"PGM raster has {len(raster)} bytes, expected {width * height}")
    return Image(np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy())


def encode_pgm(img: Image) -> bytes:
    return b"P5\n%d %d\n255\n" % (img.width, img.height) + np.ascontiguousarray(img.luma).tobytes()


def read_image(path: str | Path) -> Image:
    path = Path(path)
    if path.suffix.lower() == ".png":
        try:
            from PIL import Image as PILImage
        except ImportError:  # pragma: no cover - depends on environment
            raise FormatError("reading PNG requires Pillow (pip install 'artifact[png]')") from None
        with PILImage.open(path) as im:
            return Image(np.asarray(im.convert("L"), dtype=np.uint8).copy())
    return decode_pgm(path.read_bytes())


def write_image(img: Image, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix.lower() == ".png":
        from PIL import Image as PILImage

        PILImage.fromarray(img.luma).save(path)
        return
    path.write_bytes(encode_pgm(img))


# ---------------------------------------------------------------- mock codec


@dataclass(frozen=True)
class EncodeResult:
    decoded: Image
    bits: float
    encoder_id: str
    qpmap_path: Path | None = None


def qp_step(qp: int) -> float:
    return 2.0 ** ((qp - 4) / 6.0)


def _entropy_bits(indices: np.ndarray) -> float:
    _, counts = np.unique(indices, return_counts=True)
    if len(counts) == 1:
        return 1.0
    n = indices.size
    p = counts / n
    return float(n * -(p * np.log2(p)).sum())


def _check_grid(img: Image, grid: CtuGrid) -> None:
    if (grid.image_width, grid.image_height) != (img.width, img.height):
        raise DimensionError(
            f"QP map is for a {grid.image_width}x{grid.image_height} image, "
            f"image is {img.width}x{img.height}"
        )


def mock_encode(img: Image, qpmap: QpMap) -> EncodeResult:
    """Quantize each CTU independently with step ``2**((QP-4)/6)``.

    Indices are ``rint(p / step)`` (round half to even); reconstruction is
    ``index * step`` rounded back to 8 bits and clamped to [0, 255].  The rate
    of a CTU is its sample count times the zero-order entropy of its luma
    indices, or a flat 1 bit when the CTU is constant.
    """
    grid = qpmap.grid
    _check_grid(img, grid)
    out_planes = [plane.copy() for plane in img.planes]
    bits = 0.0
    size = grid.ctu_size
    for k, qp in enumerate(qpmap.qps):
        row, col = divmod(k, grid.cols)
        ys = slice(row * size, min((row + 1) * size, grid.image_height))
        xs = slice(col * size, min((col + 1) * size, grid.image_width))
        step = qp_step(qp)
        for p, (src, dst) in enumerate(zip(img.planes, out_planes)):
            idx = np.rint(src[ys, xs] / step)
            dst[ys, xs] = np.clip(np.rint(idx * step), 0, 255).astype(np.uint8)
            if p == 0:
                bits += _entropy_bits(idx)
    decoded = Image(out_planes[0], tuple(out_planes[1:]))
    return EncodeResult(decoded, bits, MOCK_ENCODER_ID)


# ---------------------------------------------------------------- external tools

PLACEHOLDERS = ("input", "output", "qpmap", "qp_base", "recon")


@dataclass(frozen=True)
class CommandTemplate:
    encode: str
    decode: str
    bitstream_ext: str = "bin"

    @property
    def identity(self) -> str:
        text = f"encode: {self.encode}\ndecode: {self.decode}\nbitstream_ext: {self.bitstream_ext}\n"
        return "template:" + hashlib.sha256(text.encode()).hexdigest()[:16]


def parse_template(text: str, source: str = "<memory>") -> CommandTemplate:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition(":")
        key = key.strip()
        if not sep or key not in ("encode", "decode", "bitstream_ext"):
            raise ParseError(f"{source} line {lineno}: expected 'encode:', 'decode:' or 'bitstream_ext:'")
        values[key] = value.strip()
    for key in ("encode", "decode"):
        if not values.get(key):
            raise ParseError(f"{source}: missing '{key}:' line")
    return CommandTemplate(values["encode"], values["decode"], values.get("bitstream_ext", "bin").lstrip("."))


def load_template(path: str | Path) -> CommandTemplate:
    path = Path(path)
    return parse_template(path.read_text(encoding="utf-8"), str(path))


def _expand(cmdline: str, values: dict[str, str]) -> list[str]:
    argv = []
    for token in shlex.split(cmdline):
        for name, value in values.items():
            token = token.replace("{" + name + "}", value)
        argv.append(token)
    return argv


def _run(argv: list[str], cwd: Path, stage: str) -> None:
    try:
        proc = subprocess.run(argv, cwd=cwd, capture_output=True, text=True, check=False)
    except OSError as exc:
        raise ExternalToolError(f"{stage} command {argv[0]!r} could not be started: {exc}") from exc
    if proc.returncode != 0:
        raise ExternalToolError(
            f"{stage} command exited with status {proc.returncode}: {shlex.join(argv)}",
            stderr=proc.stderr,
        )


def external_encode(img: Image, qpmap: QpMap, template: CommandTemplate, workdir: str | Path) -> EncodeResult:
    """Encode and decode through external commands inside ``workdir``.

    The image is written as ``input.pgm`` and the map as ``map.qpmap``; the
    template must leave a bitstream at ``{output}`` and an 8-bit PGM
    reconstruction at ``{recon}``.
    """
    _check_grid(img, qpmap.grid)
    workdir = Path(workdir).resolve()
    workdir.mkdir(parents=True, exist_ok=True)
    input_path = workdir / "input.pgm"
    map_path = workdir / "map.qpmap"
    bitstream = workdir / f"bitstream.{template.bitstream_ext}"
    recon = workdir / "recon.pgm"
    for stale in (bitstream, recon):
        stale.unlink(missing_ok=True)
    write_image(img, input_path)
    write_qpmap(qpmap, map_path)
    values = {
        "input": str(input_path),
        "output": str(bitstream),
        "qpmap": str(map_path),
        "qp_base": str(qpmap.qp_base),
        "recon": str(recon),
    }

    _run(_expand(template.encode, values), workdir, "encode")
    if not bitstream.is_file():
        raise ProtocolError(f"encode command did not produce {bitstream}")
    _run(_expand(template.decode, values), workdir, "decode")
    if not recon.is_file():
        raise ProtocolError(f"decode command did not produce {recon}")
    try:
        decoded = read_image(recon)
    except FormatError as exc:
        raise ProtocolError(f"reconstruction {recon} is unreadable: {exc}") from exc
    if (decoded.width, decoded.height) != (img.width, img.height):
        raise ProtocolError(
            f"reconstruction is {decoded.width}x{decoded.height}, input was {img.width}x{img.height}"
        )
    return EncodeResult(decoded, bitstream.stat().st_size * 8, template.identity, map_path)
