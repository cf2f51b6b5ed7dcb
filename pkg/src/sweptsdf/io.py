"""File formats: PGM images, scenes, shapes, motions and trajectories.

Scenes come from a PGM occupancy image (0 = occupied, 255 = free, pixels
below 128 count as occupied, image row 0 is the top of the map) or from JSON.
A PGM carries no geometry; ``<image>.json`` next to it may hold origin,
cell_size, start and goal. JSON scenes hold either ``grid`` (base64 of the
row-major bit-packed occupancy, row 0 at the bottom) or ``rects``
([xmin, ymin, xmax, ymax] in metres; every cell whose centre lies in a rect is
occupied).
"""

from __future__ import annotations

import base64
import json
import os
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import SceneParseError
from .geometry import Motion, Shape
from .planner.scene import Scene
from .traj import PolyTrajectory

PathLike = str | os.PathLike

# ---------------------------------------------------------------------------
# PGM
# ---------------------------------------------------------------------------


def write_pgm(path: PathLike, image: ArrayLike) -> None:
    """Binary (P5) 8-bit greyscale; ``image[0]`` is the top row."""
    img = np.asarray(image)
    if img.ndim != 2 or img.size == 0:
        raise ValueError("image must be a non-empty 2D array")
    if img.dtype != np.uint8:
        if np.any(img < 0) or np.any(img > 255):
            raise ValueError("pixel values must lie in [0, 255]")
        img = img.astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        f.write(np.ascontiguousarray(img).tobytes())


def _pgm_tokens(data: bytes, count: int, pos: int):
    """Read ``count`` whitespace-separated header tokens, skipping # comments.
    Returns (tokens, position after the last token)."""
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise SceneParseError(f"PGM: unexpected end of header at byte offset {pos}")
        tok = data[start:pos]
        if not tok.isdigit():
            raise SceneParseError(f"PGM: expected an integer at byte offset {start}, got {tok[:16]!r}")
        out.append(int(tok))
    return out, pos


def parse_pgm(data: bytes) -> NDArray[np.uint8]:
    """Decode P5 or P2 bytes into an 8-bit image (maxval rescaled to 255)."""
    magic = data[:2]
    if magic not in (b"P5", b"P2"):
        raise SceneParseError(f"PGM: bad magic {magic!r} at byte offset 0")
    (w, h, maxval), pos = _pgm_tokens(data, 3, 2)
    if w <= 0 or h <= 0:
        raise SceneParseError(f"PGM: bad size {w}x{h} in header ending at byte offset {pos}")
    if not 0 < maxval < 65536:
        raise SceneParseError(f"PGM: bad maxval {maxval} in header ending at byte offset {pos}")
    if magic == b"P5":
        if pos >= len(data) or not data[pos:pos + 1].isspace():
            raise SceneParseError(f"PGM: missing whitespace after header at byte offset {pos}")
        pos += 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        need = w * h * dtype.itemsize
        if len(data) - pos < need:
            raise SceneParseError(f"PGM: raster truncated at byte offset {len(data)} "
                                  f"(need {need} bytes from offset {pos})")
        img = np.frombuffer(data, dtype=dtype, count=w * h, offset=pos).reshape(h, w).astype(np.int64)
    else:
        vals, pos = _pgm_tokens(data, w * h, pos)
        img = np.array(vals, dtype=np.int64).reshape(h, w)
    if np.any(img > maxval):
        raise SceneParseError(f"PGM: pixel value above maxval {maxval}")
    if maxval != 255:
        img = np.rint(img * (255.0 / maxval))
    return img.astype(np.uint8)


def read_pgm(path: PathLike) -> NDArray[np.uint8]:
    with open(path, "rb") as f:
        return parse_pgm(f.read())


# ---------------------------------------------------------------------------
# scenes
# ---------------------------------------------------------------------------


def _read_json(path: PathLike) -> Any:
    with open(path) as f:
        text = f.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise SceneParseError(f"{os.fspath(path)}: JSON error at line {e.lineno}, column {e.colno}: {e.msg}") from e


def _pose(v, name: str) -> tuple[float, float, float]:
    try:
        x = [float(a) for a in v]
    except (TypeError, ValueError) as e:
        raise SceneParseError(f"{name} must be [x, y, yaw]") from e
    if len(x) == 2:
        x.append(0.0)
    if len(x) != 3 or not np.all(np.isfinite(x)):
        raise SceneParseError(f"{name} must be [x, y, yaw]")
    return x[0], x[1], x[2]


def _meta(d: dict[str, Any]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    try:
        if "origin" in d:
            out["origin"] = (float(d["origin"][0]), float(d["origin"][1]))
        if "cell_size" in d:
            out["cell_size"] = float(d["cell_size"])
    except (TypeError, ValueError, IndexError, KeyError) as e:
        raise SceneParseError("origin must be [x, y] and cell_size a number") from e
    for k in ("start", "goal"):
        if k in d:
            out[k] = _pose(d[k], k)
    return out


def pack_occupancy(occ: NDArray[np.bool_]) -> str:
    """base64 of the row-major bits (row 0 = bottom), MSB first."""
    return base64.b64encode(np.packbits(np.asarray(occ, dtype=bool).ravel())).decode("ascii")


def unpack_occupancy(text: str, nx: int, ny: int) -> NDArray[np.bool_]:
    try:
        raw = base64.b64decode(text.encode("ascii"), validate=True)
    except (ValueError, UnicodeEncodeError) as e:
        raise SceneParseError(f"grid is not valid base64: {e}") from e
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
    if bits.size < nx * ny or len(raw) != (nx * ny + 7) // 8:
        raise SceneParseError(f"grid holds {len(raw)} bytes, expected {(nx * ny + 7) // 8} for {nx}x{ny}")
    return bits[:nx * ny].reshape(ny, nx).astype(bool)


def rasterize_rects(rects: ArrayLike, nx: int, ny: int, origin=(0.0, 0.0), cell_size: float = 0.1):
    """Occupancy [iy, ix] of the cells whose centre lies in any closed rect
    (edges through a centre count, up to rounding)."""
    r = np.asarray(rects, dtype=float).reshape(-1, 4)
    tol = 1e-9 * cell_size
    xs = origin[0] + (np.arange(nx) + 0.5) * cell_size
    ys = origin[1] + (np.arange(ny) + 0.5) * cell_size
    occ = np.zeros((ny, nx), dtype=bool)
    for x0, y0, x1, y1 in r:
        if x1 < x0 or y1 < y0:
            raise SceneParseError(f"rect [{x0}, {y0}, {x1}, {y1}] has max < min")
        occ |= np.outer((ys >= y0 - tol) & (ys <= y1 + tol), (xs >= x0 - tol) & (xs <= x1 + tol))
    return occ


def scene_from_dict(d: dict[str, Any]) -> Scene:
    if not isinstance(d, dict):
        raise SceneParseError("scene JSON must be an object")
    meta = _meta(d)
    try:
        nx, ny = int(d["nx"]), int(d["ny"])
    except (KeyError, TypeError, ValueError) as e:
        raise SceneParseError("scene JSON needs integer nx and ny") from e
    if nx <= 0 or ny <= 0:
        raise SceneParseError(f"bad grid size {nx}x{ny}")
    if "grid" in d:
        occ = unpack_occupancy(d["grid"], nx, ny)
    elif "rects" in d:
        occ = rasterize_rects(d["rects"], nx, ny, meta.get("origin", (0.0, 0.0)), meta.get("cell_size", 0.1))
    elif "occupancy" in d:
        occ = np.array(d["occupancy"], dtype=bool)
        if occ.shape != (ny, nx):
            raise SceneParseError(f"occupancy is {occ.shape}, expected ({ny}, {nx})")
    else:
        raise SceneParseError("scene JSON needs 'grid', 'rects' or 'occupancy'")
    try:
        return Scene(occ, **meta)
    except ValueError as e:
        raise SceneParseError(str(e)) from e


def scene_to_dict(scene: Scene) -> dict[str, Any]:
    return {"origin": list(scene.origin), "cell_size": scene.cell_size, "nx": scene.nx, "ny": scene.ny,
            "start": list(scene.start), "goal": list(scene.goal), "grid": pack_occupancy(scene.occupancy)}


def load_scene(path: PathLike, **overrides) -> Scene:
    """Scene from ``.pgm`` (plus optional ``<path>.json`` metadata) or JSON.
    Keyword overrides (origin, cell_size, start, goal) win over the file.

    Raises:
        SceneParseError: malformed content, with a line or byte offset.
        OSError: unreadable file.
    """
    p = os.fspath(path)
    if p.lower().endswith(".pgm"):
        img = read_pgm(p)
        meta = _meta(_read_json(p + ".json")) if os.path.exists(p + ".json") else {}
        occ = np.flipud(img < 128)
        meta.update(overrides)
        return Scene(occ, **meta)
    d = _read_json(p)
    if overrides and isinstance(d, dict):
        d = {**d, **overrides}
    return scene_from_dict(d)


def save_scene(scene: Scene, path: PathLike) -> None:
    """``.pgm`` writes the image and a ``<path>.json`` sidecar; anything else
    writes the JSON form."""
    p = os.fspath(path)
    if p.lower().endswith(".pgm"):
        write_pgm(p, np.where(np.flipud(scene.occupancy), 0, 255).astype(np.uint8))
        meta = {k: v for k, v in scene_to_dict(scene).items() if k in ("origin", "cell_size", "start", "goal")}
        with open(p + ".json", "w") as f:
            json.dump(meta, f, indent=1)
        return
    with open(p, "w") as f:
        json.dump(scene_to_dict(scene), f, indent=1)


# ---------------------------------------------------------------------------
# shapes, motions, trajectories
# ---------------------------------------------------------------------------


def load_shape(path: PathLike) -> Shape:
    d = _read_json(path)
    if not isinstance(d, dict):
        raise SceneParseError("shape JSON must be an object")
    try:
        return Shape.from_dict(d)
    except (KeyError, TypeError) as e:
        raise SceneParseError(f"shape JSON is missing or has a bad field: {e}") from e


def save_shape(shape: Shape, path: PathLike) -> None:
    with open(path, "w") as f:
        json.dump(shape.to_dict(), f, indent=1)


def load_motion(path: PathLike) -> Motion:
    """Motion JSON ({"kind": "linear" | "constant" | "trajectory", ...}) or a
    bare trajectory JSON (coeffs, durations, boundary)."""
    d = _read_json(path)
    if not isinstance(d, dict):
        raise SceneParseError("motion JSON must be an object")
    try:
        if "coeffs" in d and "kind" not in d:
            return Motion.from_trajectory(PolyTrajectory.from_dict(d))
        return Motion.from_dict(d)
    except (KeyError, TypeError) as e:
        raise SceneParseError(f"motion JSON is missing or has a bad field: {e}") from e


def load_trajectory(path: PathLike) -> PolyTrajectory:
    d = _read_json(path)
    try:
        return PolyTrajectory.from_dict(d)
    except (KeyError, TypeError) as e:
        raise SceneParseError(f"trajectory JSON is missing or has a bad field: {e}") from e


def save_trajectory(traj: PolyTrajectory, path: PathLike) -> None:
    traj.save_json(path)


def save_json(obj: Any, path: PathLike, sort_keys: bool = True) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=sort_keys, allow_nan=False)
        f.write("\n")

