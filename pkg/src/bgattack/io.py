"""Bit-exact file formats: F32T tensor container, 8-bit RGB PNG, CSV.

F32T layout: magic "F32T", version byte 0x01, ndim byte, ndim little-endian
unsigned 64-bit extents, then the row-major payload as little-endian 32-bit
IEEE-754 floats.  In-memory 64-bit values round to nearest-even on write;
read -> write -> read is the identity.

PNG: 8-bit truecolor, quantization round(v*255) half away from zero on
write, u/255 on read.  The reader handles all five scanline filters; the
writer emits filter 0.

All writes are atomic (temp file + rename).  Floats in CSV use 9
significant digits so outputs are byte-stable for a fixed config and seed.
"""

import json
import os
import struct
import tempfile
import zlib

import numpy as np

from .errors import FormatError
from .scene import GtBox, Scene
from .tensor import freeze

_MAGIC = b"F32T"
_VERSION = 1


def _atomic_write(path: str, data: bytes) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp_")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def tensor_bytes(tensor: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(tensor, dtype=np.float64)
    if arr.ndim == 0 or arr.ndim > 255:
        raise FormatError(f"tensor rank must be 1..255, got {arr.ndim}")
    if any(e < 1 for e in arr.shape):
        raise FormatError(f"extents must be positive, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise FormatError("refusing to write non-finite tensor")
    header = _MAGIC + struct.pack("<BB", _VERSION, arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return header + arr.astype("<f4").tobytes()


def write_tensor(path: str, tensor: np.ndarray) -> None:
    _atomic_write(path, tensor_bytes(tensor))


def tensor_from_bytes(blob: bytes) -> np.ndarray:
    if len(blob) < 6:
        raise FormatError("truncated container", offset=len(blob))
    if blob[:4] != _MAGIC:
        raise FormatError(f"bad magic {blob[:4]!r}", offset=0)
    version, ndim = struct.unpack_from("<BB", blob, 4)
    if version != _VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    if ndim == 0:
        raise FormatError("empty dims rejected", offset=5)
    need = 6 + 8 * ndim
    if len(blob) < need:
        raise FormatError("truncated extents", offset=len(blob))
    dims = struct.unpack_from(f"<{ndim}Q", blob, 6)
    if any(e < 1 for e in dims):
        raise FormatError(f"extents must be positive, got {dims}", offset=6)
    count = int(np.prod(dims))
    end = need + 4 * count
    if len(blob) != end:
        raise FormatError(
            f"payload has {len(blob) - need} bytes, expected {4 * count}",
            offset=min(len(blob), end))
    flat = np.frombuffer(blob, dtype="<f4", count=count, offset=need)
    return flat.astype(np.float64).reshape(dims)


def read_tensor(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        return tensor_from_bytes(fh.read())


# --- PNG ---------------------------------------------------------------

_PNG_SIG = b"\x89PNG\r\n\x1a\n"


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (struct.pack(">I", len(payload)) + tag + payload
            + struct.pack(">I", zlib.crc32(tag + payload)))


def quantize8(image: np.ndarray) -> np.ndarray:
    """[0,1] float to byte with round-half-away-from-zero."""
    return np.floor(np.clip(image, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def write_png(path: str, image: np.ndarray) -> None:
    """8-bit RGB PNG of an (H, W, 3) image with values in [0, 1]."""
    if image.ndim != 3 or image.shape[2] != 3:
        raise FormatError(f"PNG writer needs (H, W, 3), got {image.shape}")
    h, w, _ = image.shape
    raw = quantize8(image)
    scanlines = b"".join(b"\x00" + raw[r].tobytes() for r in range(h))
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    blob = (_PNG_SIG + _chunk(b"IHDR", ihdr)
            + _chunk(b"IDAT", zlib.compress(scanlines, 9))
            + _chunk(b"IEND", b""))
    _atomic_write(path, blob)


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    return b if pb <= pc else c


def read_png(path: str) -> np.ndarray:
    """(H, W, 3) float image in [0, 1] from an 8-bit truecolor PNG."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != _PNG_SIG:
        raise FormatError("not a PNG file", offset=0)
    pos, ihdr, idat = 8, None, b""
    while pos < len(blob):
        if pos + 8 > len(blob):
            raise FormatError("truncated chunk header", offset=pos)
        length, tag = struct.unpack_from(">I4s", blob, pos)
        payload = blob[pos + 8:pos + 8 + length]
        if len(payload) != length:
            raise FormatError("truncated chunk payload", offset=pos + 8)
        if tag == b"IHDR":
            ihdr = struct.unpack(">IIBBBBB", payload)
        elif tag == b"IDAT":
            idat += payload
        elif tag == b"IEND":
            break
        pos += 12 + length
    if ihdr is None:
        raise FormatError("missing IHDR", offset=8)
    w, h, depth, color, _, _, interlace = ihdr
    if depth != 8 or color != 2 or interlace != 0:
        raise FormatError(
            f"only 8-bit non-interlaced RGB supported, got depth={depth} "
            f"color={color} interlace={interlace}")
    data = zlib.decompress(idat)
    stride = 3 * w
    if len(data) != h * (stride + 1):
        raise FormatError(f"scanline data has {len(data)} bytes, "
                          f"expected {h * (stride + 1)}")
    out = np.zeros((h, stride), dtype=np.uint8)
    prev = np.zeros(stride, dtype=np.int64)
    for r in range(h):
        ftype = data[r * (stride + 1)]
        line = np.frombuffer(
            data, dtype=np.uint8, count=stride,
            offset=r * (stride + 1) + 1).astype(np.int64)
        if ftype == 0:
            cur = line
        elif ftype == 2:  # Up
            cur = (line + prev) & 0xFF
        elif ftype in (1, 3, 4):  # Sub / Average / Paeth need a scan
            cur = np.zeros(stride, dtype=np.int64)
            for i in range(stride):
                a = cur[i - 3] if i >= 3 else 0
                b = prev[i]
                c = prev[i - 3] if i >= 3 else 0
                if ftype == 1:
                    cur[i] = (line[i] + a) & 0xFF
                elif ftype == 3:
                    cur[i] = (line[i] + (a + b) // 2) & 0xFF
                else:
                    cur[i] = (line[i] + _paeth(a, b, c)) & 0xFF
        else:
            raise FormatError(f"unknown PNG filter {ftype}")
        out[r] = cur
        prev = cur
    return out.reshape(h, w, 3).astype(np.float64) / 255.0


# --- CSV ---------------------------------------------------------------

TRACE_HEADER = "t,l_obj,l_box,l_tv,total,grad_sq_norm,e_of_t,lr"
METRICS_HEADER = "metric,clean,attack,asr"


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def trace_csv(trace) -> str:
    lines = [TRACE_HEADER]
    for r in trace.records:
        lines.append(",".join([str(r.t)] + [_fmt(v) for v in (
            r.l_obj, r.l_box, r.l_tv, r.total, r.grad_sq_norm, r.e_of_t, r.lr)]))
    return "\n".join(lines) + "\n"


def write_trace_csv(path: str, trace) -> None:
    _atomic_write(path, trace_csv(trace).encode())


def read_trace_csv(path: str):
    """Rebuild a ConvergenceTrace from its CSV (epoch count is not stored)."""
    from .attack import ConvergenceTrace
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != TRACE_HEADER:
        raise FormatError(f"bad trace header {lines[0] if lines else ''!r}")
    trace = ConvergenceTrace()
    for ln in lines[1:]:
        t, l_obj, l_box, l_tv, total, gsq, _, lr = ln.split(",")
        trace.append(t=int(t), l_obj=float(l_obj), l_box=float(l_box),
                     l_tv=float(l_tv), total=float(total),
                     grad_sq_norm=float(gsq), lr=float(lr))
    return trace


def metrics_csv(rows: list[tuple[str, float, float, float]]) -> str:
    lines = [METRICS_HEADER]
    for name, clean, attacked, asr in rows:
        lines.append(",".join([name, _fmt(clean), _fmt(attacked), _fmt(asr)]))
    return "\n".join(lines) + "\n"


def write_metrics_csv(path: str,
                      rows: list[tuple[str, float, float, float]]) -> None:
    _atomic_write(path, metrics_csv(rows).encode())


# --- Scenes ------------------------------------------------------------

def write_scene(out_dir: str, name: str, scene: Scene) -> None:
    """image PNG + mask tensor + ground-truth JSON."""
    os.makedirs(out_dir, exist_ok=True)
    write_png(os.path.join(out_dir, f"{name}.png"), scene.image)
    write_tensor(os.path.join(out_dir, f"{name}_mask.f32t"), scene.object_mask)
    boxes = [{"x1": g.x1, "y1": g.y1, "x2": g.x2, "y2": g.y2,
              "class_id": g.class_id} for g in scene.ground_truth]
    _atomic_write(os.path.join(out_dir, f"{name}_boxes.json"),
                  (json.dumps(boxes, indent=1) + "\n").encode())


def read_scene(out_dir: str, name: str) -> Scene:
    image = read_png(os.path.join(out_dir, f"{name}.png"))
    mask = read_tensor(os.path.join(out_dir, f"{name}_mask.f32t"))
    with open(os.path.join(out_dir, f"{name}_boxes.json")) as fh:
        boxes = [GtBox(**b) for b in json.load(fh)]
    return Scene(image=freeze(image), object_mask=freeze(mask),
                 ground_truth=boxes)
