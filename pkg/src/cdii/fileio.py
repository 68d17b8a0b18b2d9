"""Serialization: field files, run configuration, images, CSV, manifests.

One binary container (format tag ``WLGF1``) covers scalar fields, edge
vector fields, and domain masks.  The header is a single ASCII line

    WLGF1 <nx> <ny> <h> <origin_x> <origin_y> <kind>

with ``kind`` one of ``scalar | vector | mask``; grid reals are written
with ``repr`` so they survive the round trip bit-exactly.  Payloads are
row-major and little-endian: ``nx*ny`` float64 for a scalar, the two
full node-anchored edge planes (px then py, ``2*nx*ny`` float64) for a
vector, and one label byte per node for a mask.  Payload length is fully
determined by the header; any surplus or deficit is a format error.

Run configuration is plain ``key = value`` text with ``#`` comments;
unknown keys are rejected with their line number so typos cannot
silently change an experiment.  Manifests are ``key=value`` text listing
every artifact of a run with its SHA-256, plus the configuration hash
and tool/format versions -- and deliberately no timestamps, so reruns of
a seeded experiment are byte-identical.
"""

import csv
import hashlib

import numpy as np

from dataclasses import dataclass

from .fields import ScalarField, VectorField
from .grids import Grid, Mask

FORMAT_TAG = "WLGF1"

_KINDS = ("scalar", "vector", "mask")


class FormatError(ValueError):
    """Raised for malformed field files, configs, or manifests."""


# ---------------------------------------------------------------------------
# field files


def _header_line(grid, kind):
    return (
        f"{FORMAT_TAG} {grid.nx} {grid.ny} {grid.h!r} "
        f"{grid.origin[0]!r} {grid.origin[1]!r} {kind}\n"
    )


def _parse_header(line, path):
    parts = line.decode("ascii", errors="replace").strip().split(" ")
    if len(parts) != 7 or parts[0] != FORMAT_TAG:
        raise FormatError(f"{path}: not a {FORMAT_TAG} field file")
    try:
        nx, ny = int(parts[1]), int(parts[2])
        h, ox, oy = float(parts[3]), float(parts[4]), float(parts[5])
    except ValueError as exc:
        raise FormatError(f"{path}: bad header number ({exc})") from None
    kind = parts[6]
    if kind not in _KINDS:
        raise FormatError(f"{path}: unknown field kind {kind!r}")
    if nx < 2 or ny < 2 or not h > 0.0:
        raise FormatError(f"{path}: degenerate grid in header")
    return Grid(nx, ny, h, (ox, oy)), kind


def write_field(path, obj):
    """Write a ScalarField, VectorField, or Mask to ``path``."""
    if isinstance(obj, ScalarField):
        kind, payload = "scalar", np.ascontiguousarray(obj.values, dtype="<f8").tobytes()
    elif isinstance(obj, VectorField):
        planes = np.stack([obj.px, obj.py])
        kind, payload = "vector", np.ascontiguousarray(planes, dtype="<f8").tobytes()
    elif isinstance(obj, Mask):
        kind, payload = "mask", np.ascontiguousarray(obj.labels, dtype=np.uint8).tobytes()
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    grid = obj.grid
    with open(path, "wb") as fh:
        fh.write(_header_line(grid, kind).encode("ascii"))
        fh.write(payload)


def read_field(path, mask=None):
    """Read a field file; scalar/vector kinds need the domain ``mask``.

    The mask's grid must equal the file's grid exactly.  Returns a
    ScalarField, VectorField, or Mask according to the header.
    """
    with open(path, "rb") as fh:
        header = fh.readline()
        grid, kind = _parse_header(header, path)
        payload = fh.read()

    shape = grid.shape
    count = shape[0] * shape[1]
    if kind == "mask":
        if len(payload) != count:
            raise FormatError(f"{path}: mask payload length {len(payload)} != {count}")
        labels = np.frombuffer(payload, dtype=np.uint8).reshape(shape).copy()
        return Mask(grid, labels)

    if mask is None:
        raise FormatError(f"{path}: a domain mask is required to read a {kind} field")
    if mask.grid != grid:
        raise FormatError(f"{path}: file grid {grid} does not match the mask's grid")

    if kind == "scalar":
        if len(payload) != 8 * count:
            raise FormatError(f"{path}: scalar payload length {len(payload)} != {8*count}")
        vals = np.frombuffer(payload, dtype="<f8").reshape(shape).astype(np.float64)
        return ScalarField(grid, mask, vals)

    if len(payload) != 16 * count:
        raise FormatError(f"{path}: vector payload length {len(payload)} != {16*count}")
    planes = np.frombuffer(payload, dtype="<f8").reshape((2,) + shape).astype(np.float64)
    return VectorField(grid, mask, planes[0], planes[1])


# ---------------------------------------------------------------------------
# run configuration

_INIT_NAMES = {"ZERO": "zero", "BOUNDARY_HARMONIC": "harmonic"}


def parse_init(text):
    """Map a config initialization name to the solver's spelling."""
    name = text.strip()
    if name in _INIT_NAMES:
        return _INIT_NAMES[name]
    if name.startswith("RANDOM:"):
        try:
            return f"random:{int(name.split(':', 1)[1])}"
        except ValueError:
            raise ValueError(f"bad RANDOM seed in {name!r}") from None
    raise ValueError(
        f"unknown init {name!r} (expected ZERO, BOUNDARY_HARMONIC, or RANDOM:<seed>)"
    )


def _parse_domain(text):
    name = text.strip()
    if name not in ("disk", "square"):
        raise ValueError(f"unknown domain {name!r} (expected disk or square)")
    return name


def _parse_positive_int(text):
    value = int(text)
    if value <= 0:
        raise ValueError("must be a positive integer")
    return value


def _parse_nonneg_float(text):
    value = float(text)
    if value < 0.0:
        raise ValueError("must be non-negative")
    return value


def _parse_positive_float(text):
    value = float(text)
    if value <= 0.0:
        raise ValueError("must be positive")
    return value


@dataclass
class RunConfig:
    """Typed view of one experiment configuration."""

    domain: str = None
    n: int = None
    phantom: str = None
    noise: float = 0.0
    noiseF: float = 0.0
    seed: int = 0
    maxIter: int = 200_000
    gapTol: float = 1e-4
    tau: float = None
    sigmaStep: float = None
    theta: float = 1.0
    init: str = "harmonic"
    delta0: float = None
    epsG: float = None
    spreadTol: float = 1e-3
    refine: int = 1


_CONFIG_SCHEMA = {
    "domain": _parse_domain,
    "n": _parse_positive_int,
    "phantom": str.strip,
    "noise": _parse_nonneg_float,
    "noiseF": _parse_nonneg_float,
    "seed": int,
    "maxIter": _parse_positive_int,
    "gapTol": _parse_positive_float,
    "tau": _parse_positive_float,
    "sigmaStep": _parse_positive_float,
    "theta": float,
    "init": parse_init,
    "delta0": _parse_nonneg_float,
    "epsG": _parse_nonneg_float,
    "spreadTol": _parse_positive_float,
    "refine": _parse_positive_int,
}


def parse_run_config(text, name="<config>"):
    """Parse ``key = value`` configuration text into a RunConfig.

    Unknown keys and unparsable values are rejected with the offending
    line number.  ``#`` starts a comment; blank lines are ignored.
    """
    cfg = RunConfig()
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{name}:{lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_SCHEMA:
            raise FormatError(f"{name}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise FormatError(f"{name}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        try:
            setattr(cfg, key, _CONFIG_SCHEMA[key](value))
        except ValueError as exc:
            raise FormatError(f"{name}:{lineno}: bad value for {key}: {exc}") from None
    return cfg


def read_run_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read config {path}: {exc}") from None
    return parse_run_config(text, name=str(path))


def solver_config_from(cfg):
    """SolverConfig with the solver-relevant keys of a RunConfig."""
    from .minimizer import SolverConfig

    return SolverConfig(
        max_iter=cfg.maxIter,
        gap_tol=cfg.gapTol,
        tau=cfg.tau,
        sigma_step=cfg.sigmaStep,
        theta=cfg.theta,
        init=cfg.init,
    )


# ---------------------------------------------------------------------------
# images


def emit_image(field, path):
    """Render a scalar field as a binary 8-bit PGM (P5).

    Linear min-max scaling over non-exterior nodes; EXTERIOR pixels are
    black, and a constant field renders mid-gray (128) by convention.
    Rows are emitted top-down (largest y first) so the image matches the
    usual mathematical orientation.  The bytes are a pure function of
    the field, so reruns produce identical files.
    """
    vals = field.values
    ext = field.mask.exterior
    sel = ~ext
    if not sel.any():
        raise ValueError("field has no domain nodes to render")
    vmin = float(vals[sel].min())
    vmax = float(vals[sel].max())
    if vmax > vmin:
        pix = np.round(255.0 * (vals - vmin) / (vmax - vmin))
        pix = np.clip(pix, 0.0, 255.0)
    else:
        pix = np.full(field.grid.shape, 128.0)
    pix = pix.astype(np.uint8)
    pix[ext] = 0
    image = np.flipud(pix)
    ny, nx = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(image).tobytes())


# ---------------------------------------------------------------------------
# CSV tables


def write_audit_csv(path, audit):
    """Boundary-intersection audit as CSV, one row per (level, component)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["level", "component", "size", "touchesBoundary"])
        for row in audit.rows:
            writer.writerow(
                [repr(row.level), row.component, row.size,
                 "true" if row.touches_boundary else "false"]
            )


def write_value_check_csv(path, result):
    """Level-line value-spread table as CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["level", "component", "size", "spread"])
        for row in result.rows:
            writer.writerow([repr(row.level), row.component, row.size, repr(row.spread)])


def write_pairwise_csv(path, names, distances):
    """Pairwise distance table: one row per unordered pair."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["initA", "initB", "l1Distance"])
        for (i, j), dist in distances.items():
            writer.writerow([names[i], names[j], repr(dist)])


# ---------------------------------------------------------------------------
# key=value reports and manifests


def format_report(pairs):
    """``key = value`` text block from an ordered mapping."""
    lines = []
    for key, value in pairs:
        if isinstance(value, (bool, np.bool_)):
            value = "true" if value else "false"
        elif isinstance(value, (float, np.floating)):
            value = repr(float(value))
        elif isinstance(value, np.integer):
            value = int(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def sha256_hex(data):
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(path, command, entries, config_text=None, seed=None):
    """Manifest of one run: versions, config hash, seed, artifact hashes.

    ``entries`` maps artifact file names to their paths on disk; each is
    listed with its SHA-256.  No timestamps or durations appear here, so
    a rerun of the same seeded configuration writes identical bytes.
    """
    from . import __version__

    lines = [
        f"command={command}",
        f"tool=cdii {__version__}",
        f"format={FORMAT_TAG}",
    ]
    if config_text is not None:
        lines.append(f"configSha256={sha256_hex(config_text)}")
    if seed is not None:
        lines.append(f"seed={seed}")
    for name in sorted(entries):
        lines.append(f"file.{name}=sha256:{sha256_file(entries[name])}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
