"""Dataset ingestion, synthetic cubes and run serialization.

ENVI support covers the header keys needed for the usual distributions of
Indian Pines, Pavia University and Salinas: ``samples``, ``lines``,
``bands``, ``data type``, ``interleave`` and ``byte order`` (plus ``header
offset``).  Other keys are ignored with a warning.

Synthetic cubes draw every random number from :class:`XorShift64Star`, a
fixed generator defined entirely by the constants below, so a given seed
produces the same cube on every platform and in any language.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .cube import GroundTruth, HyperCube

log = logging.getLogger(__name__)

ENVI_DTYPES = {1: "u1", 4: "f4", 12: "u2"}
ENVI_KEYS = {"samples", "lines", "bands", "data type", "interleave", "byte order",
             "header offset"}
DATA_SUFFIXES = ("", ".img", ".dat", ".raw", ".bsq", ".bil", ".bip")


# --------------------------------------------------------------------------
# ENVI
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EnviHeader:
    samples: int
    lines: int
    bands: int
    data_type: int
    interleave: str
    byte_order: int = 0
    header_offset: int = 0

    def __post_init__(self):
        for name in ("samples", "lines", "bands"):
            if getattr(self, name) < 1:
                raise ValueError(f"ENVI header: {name} must be >= 1")
        if self.data_type not in ENVI_DTYPES:
            raise ValueError(f"ENVI header: unsupported data type {self.data_type} "
                             f"(supported: {sorted(ENVI_DTYPES)})")
        if self.interleave not in ("bsq", "bil", "bip"):
            raise ValueError(f"ENVI header: unknown interleave {self.interleave!r}")
        if self.byte_order not in (0, 1):
            raise ValueError(f"ENVI header: byte order must be 0 or 1, got {self.byte_order}")

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(("<" if self.byte_order == 0 else ">") + ENVI_DTYPES[self.data_type])

    def to_text(self) -> str:
        return (f"ENVI\nsamples = {self.samples}\nlines = {self.lines}\nbands = {self.bands}\n"
                f"header offset = {self.header_offset}\n"
                f"data type = {self.data_type}\ninterleave = {self.interleave}\n"
                f"byte order = {self.byte_order}\n")


def parse_envi_header(text: str) -> EnviHeader:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ENVI":
        raise ValueError("ENVI header must start with the line 'ENVI'")
    fields: dict = {}
    key, buf = None, None
    for n, raw in enumerate(lines[1:], start=2):
        if buf is not None:
            # continuation of a {...} value
            buf.append(raw)
            if "}" in raw:
                fields[key] = " ".join(buf).strip()
                key, buf = None, None
            continue
        if not raw.strip() or raw.lstrip().startswith(";"):
            continue
        if "=" not in raw:
            raise ValueError(f"malformed ENVI header line {n}: {raw!r}")
        k, v = raw.split("=", 1)
        key, v = k.strip().lower(), v.strip()
        if v.startswith("{") and "}" not in v:
            buf = [v]
            continue
        fields[key] = v
    if buf is not None:
        raise ValueError(f"unterminated brace value for ENVI header key {key!r}")
    unknown = sorted(set(fields) - ENVI_KEYS)
    if unknown:
        log.warning("ignoring ENVI header keys: %s", ", ".join(unknown))
    try:
        return EnviHeader(
            samples=int(fields["samples"]),
            lines=int(fields["lines"]),
            bands=int(fields["bands"]),
            data_type=int(fields["data type"]),
            interleave=fields["interleave"].lower(),
            byte_order=int(fields.get("byte order", 0)),
            header_offset=int(fields.get("header offset", 0)),
        )
    except KeyError as e:
        raise ValueError(f"ENVI header missing required key {e.args[0]!r}") from None
    except ValueError as e:
        if "ENVI header" in str(e):
            raise
        raise ValueError(f"malformed ENVI header value: {e}") from None


def _decode(header: EnviHeader, data: bytes) -> np.ndarray:
    n = header.samples * header.lines * header.bands
    need = header.header_offset + n * header.dtype.itemsize
    if len(data) < need:
        raise ValueError(f"ENVI data truncated: {len(data)} bytes, need {need}")
    flat = np.frombuffer(data, dtype=header.dtype, count=n, offset=header.header_offset)
    h, w, b = header.lines, header.samples, header.bands
    if header.interleave == "bsq":
        arr = flat.reshape(b, h, w).transpose(1, 2, 0)
    elif header.interleave == "bil":
        arr = flat.reshape(h, b, w).transpose(0, 2, 1)
    else:
        arr = flat.reshape(h, w, b)
    return np.ascontiguousarray(arr, dtype=header.dtype.newbyteorder("="))


def read_envi(header_text: str, data_bytes: bytes) -> HyperCube:
    """Decode an ENVI cube into canonical ``(row, col, band)`` layout."""
    return HyperCube(_decode(parse_envi_header(header_text), data_bytes))


def write_envi(cube: HyperCube, interleave: str = "bsq", data_type: int = 4,
               byte_order: int = 0) -> tuple:
    """Encode ``cube`` as ``(header_text, data_bytes)``."""
    header = EnviHeader(cube.cols, cube.rows, cube.bands, data_type, interleave, byte_order)
    v = cube.values
    if header.dtype.kind == "u":
        info = np.iinfo(header.dtype)
        if np.any(v != np.round(v)) or v.min() < info.min or v.max() > info.max:
            raise ValueError(f"cube values do not fit ENVI data type {data_type}")
    if interleave == "bsq":
        arr = v.transpose(2, 0, 1)
    elif interleave == "bil":
        arr = v.transpose(0, 2, 1)
    else:
        arr = v
    return header.to_text(), np.ascontiguousarray(arr).astype(header.dtype).tobytes()


def _data_path(hdr: Path) -> Path:
    stem = hdr.with_suffix("")
    for suffix in DATA_SUFFIXES:
        p = Path(str(stem) + suffix)
        if p.exists() and p != hdr:
            return p
    raise FileNotFoundError(f"no data file next to {hdr} (tried {', '.join(DATA_SUFFIXES[1:])})")


def load_envi(path) -> HyperCube:
    """Read ``<name>.hdr`` and its companion binary file."""
    hdr = Path(path)
    if hdr.suffix.lower() != ".hdr":
        hdr = hdr.with_suffix(".hdr")
    return read_envi(hdr.read_text(), _data_path(hdr).read_bytes())


def save_envi(cube: HyperCube, path, interleave: str = "bsq", data_type: int = 4,
              byte_order: int = 0) -> Path:
    """Write ``<stem>.hdr`` and ``<stem>.img``; returns the header path."""
    stem = Path(path).with_suffix("")
    text, data = write_envi(cube, interleave, data_type, byte_order)
    hdr = stem.with_suffix(".hdr")
    hdr.write_text(text)
    stem.with_suffix(".img").write_bytes(data)
    return hdr


# --------------------------------------------------------------------------
# labels
# --------------------------------------------------------------------------

def read_labels(header_text: str, data_bytes: bytes, shape: Optional[tuple] = None) -> GroundTruth:
    """Single-band integer ENVI raster to ``GroundTruth``."""
    header = parse_envi_header(header_text)
    if header.bands != 1:
        raise ValueError(f"label raster must have 1 band, got {header.bands}")
    arr = _decode(header, data_bytes)[:, :, 0]
    if arr.dtype.kind == "f":
        if np.any(arr != np.round(arr)):
            raise ValueError("label raster contains non-integer values")
        if np.any(arr < 0):
            raise ValueError("label raster contains negative labels")
    return _check_shape(GroundTruth(arr.astype(np.int64)), shape)


def read_labels_csv(text: str, shape: tuple) -> GroundTruth:
    """``row,col,label`` lines (an optional header line is skipped); unlisted pixels are 0."""
    rows, cols = shape
    labels = np.zeros((rows, cols), dtype=np.int64)
    for n, rec in enumerate(csv.reader(io.StringIO(text))):
        if not rec or not "".join(rec).strip():
            continue
        try:
            r, c, lab = (int(v) for v in rec[:3])
        except ValueError:
            if n == 0:
                continue
            raise ValueError(f"labels CSV line {n + 1}: expected row,col,label, got {rec}") from None
        if lab < 0:
            raise ValueError(f"labels CSV line {n + 1}: negative label {lab}")
        if not (0 <= r < rows and 0 <= c < cols):
            raise ValueError(f"labels CSV line {n + 1}: pixel ({r}, {c}) outside {rows}x{cols}")
        labels[r, c] = lab
    return GroundTruth(labels)


def _check_shape(gt: GroundTruth, shape) -> GroundTruth:
    if shape is not None and (gt.rows, gt.cols) != tuple(shape):
        raise ValueError(f"label raster is {gt.rows}x{gt.cols}, expected {shape[0]}x{shape[1]}")
    return gt


def load_labels(path, shape: Optional[tuple] = None) -> GroundTruth:
    p = Path(path)
    if p.suffix.lower() == ".csv":
        if shape is None:
            raise ValueError("CSV labels need the cube shape")
        return read_labels_csv(p.read_text(), shape)
    hdr = p if p.suffix.lower() == ".hdr" else p.with_suffix(".hdr")
    return read_labels(hdr.read_text(), _data_path(hdr).read_bytes(), shape)


def save_labels(gt: GroundTruth, path) -> Path:
    data_type = 1 if gt.labels.max(initial=0) < 256 else 12
    return save_envi(HyperCube(gt.labels[:, :, None].astype(np.float64)), path,
                     interleave="bsq", data_type=data_type)


# --------------------------------------------------------------------------
# PRNG
# --------------------------------------------------------------------------

MASK64 = (1 << 64) - 1


class XorShift64Star:
    """xorshift64* generator (shifts 12, 25, 27; multiplier 0x2545F4914F6CDD1D).

    The 64-bit state is the seed passed once through splitmix64
    (increment 0x9E3779B97F4A7C15, multipliers 0xBF58476D1CE4E5B9 and
    0x94D049BB133111EB), replaced by 1 if that yields 0.

    * ``next_u64``: state update, then ``state * 0x2545F4914F6CDD1D mod 2^64``
    * ``uniform``: top 53 bits of ``next_u64`` scaled by 2^-53, in [0, 1)
    * ``normal``: Box-Muller cosine branch,
      ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`` from two consecutive uniforms
    * ``below(n)``: ``(next_u64 * n) >> 64``
    """

    def __init__(self, seed: int):
        z = (int(seed) + 0x9E3779B97F4A7C15) & MASK64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        z ^= z >> 31
        self.state = z or 1

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & MASK64

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def normal(self) -> float:
        u1 = self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)

    def below(self, n: int) -> int:
        return (self.next_u64() * n) >> 64

    def uniforms(self, n: int) -> np.ndarray:
        return np.array([self.uniform() for _ in range(n)])

    def normals(self, n: int) -> np.ndarray:
        return np.array([self.normal() for _ in range(n)])

    def shuffle(self, arr: np.ndarray) -> np.ndarray:
        """Fisher-Yates from the last position down; returns a shuffled copy."""
        out = np.array(arr, copy=True)
        for i in range(out.size - 1, 0, -1):
            j = self.below(i + 1)
            out[i], out[j] = out[j], out[i]
        return out


# --------------------------------------------------------------------------
# synthetic cubes
# --------------------------------------------------------------------------

@dataclass
class Informative:
    """Band = (class - 1) / (C - 1) + noise * N(0, 1)."""
    noise: Optional[float] = None


@dataclass
class Duplicate:
    """Copy of an earlier output band plus noise * N(0, 1)."""
    source: int
    noise: Optional[float] = None


@dataclass
class SynergyPair:
    """Two bands whose binarizations XOR to the class; occupies two bands.

    The first member's bit is fair; the second member's bit is 1 with
    probability ``p_second`` independently of the first.  With
    ``p_second = 0.5`` neither member alone says anything about the class;
    otherwise the first member carries ``1 - H2(p_second)`` bits.
    """
    p_second: float = 0.5


@dataclass
class Noise:
    """Uniform [0, 1) band independent of everything else."""


# gap around 0.5 separating the two halves of a synergy band
SYNERGY_GAP = 0.1


@dataclass
class SynthSpec:
    rows: int
    cols: int
    plan: list
    noise_bands: int = 0
    noise_level: float = 0.0
    n_classes: int = 2
    background: float = 0.0
    seed: int = 0

    @property
    def n_bands(self) -> int:
        return sum(2 if isinstance(e, SynergyPair) else 1 for e in self.plan) + self.noise_bands


def _exact_bits(rng: XorShift64Star, n: int, p: float) -> np.ndarray:
    """``round(p * n)`` ones in random positions."""
    bits = np.zeros(n, dtype=np.int64)
    bits[: int(math.floor(p * n + 0.5))] = 1
    return rng.shuffle(bits)


def synth_cube(spec: SynthSpec) -> tuple:
    """Generate ``(HyperCube, GroundTruth)`` from a plan of planted bands.

    Class labels are balanced exactly across classes (or, when the plan
    holds a synergy pair, are the XOR of the first pair's bits).  Bit
    patterns are drawn with exact counts: the first member has exactly
    half ones and the second has ``round(p_second * m)`` ones within each
    half, so the two are independent in-sample, not just in expectation.
    """
    if not spec.plan and spec.noise_bands == 0:
        raise ValueError("synthetic spec has an empty plan")
    if spec.rows < 1 or spec.cols < 1:
        raise ValueError("synthetic cube needs rows, cols >= 1")
    rng = XorShift64Star(spec.seed)
    n = spec.rows * spec.cols
    bands: list = []
    labels = None
    pair_bits: list = []

    for entry in spec.plan:
        if isinstance(entry, SynergyPair):
            a = _exact_bits(rng, n, 0.5)
            b = np.zeros(n, dtype=np.int64)
            for half in (0, 1):
                members = np.flatnonzero(a == half)
                b[members] = _exact_bits(rng, members.size, entry.p_second)
            pair_bits.append((a, b))
            for bit in (a, b):
                u = rng.uniforms(n)
                bands.append((bit + SYNERGY_GAP / 2 + (1 - SYNERGY_GAP) * u) / 2.0)
        else:
            bands.append(None)  # filled once labels exist

    if pair_bits:
        a, b = pair_bits[0]
        labels = 1 + (a ^ b)
        n_classes = 2
    else:
        n_classes = spec.n_classes
        if n_classes < 2:
            raise ValueError("synthetic cube needs n_classes >= 2")
        labels = rng.shuffle(np.arange(n) % n_classes + 1)

    out: list = []
    it = iter(bands)
    for entry in spec.plan:
        if isinstance(entry, SynergyPair):
            out.extend([next(it), next(it)])
            continue
        next(it)
        noise = spec.noise_level if getattr(entry, "noise", None) is None else entry.noise
        if isinstance(entry, Informative):
            v = (labels - 1) / max(n_classes - 1, 1) + noise * rng.normals(n)
        elif isinstance(entry, Duplicate):
            if not 0 <= entry.source < len(out):
                raise ValueError(f"duplicate source {entry.source} must be an earlier band")
            v = out[entry.source] + noise * rng.normals(n)
        elif isinstance(entry, Noise):
            v = rng.uniforms(n)
        else:
            raise TypeError(f"unknown plan entry {entry!r}")
        out.append(np.asarray(v, dtype=np.float64))
    for _ in range(spec.noise_bands):
        out.append(rng.uniforms(n))

    if spec.background > 0:
        bg = _exact_bits(rng, n, spec.background).astype(bool)
        labels = np.where(bg, 0, labels)
    cube = HyperCube(np.stack(out, axis=-1).reshape(spec.rows, spec.cols, len(out)))
    return cube, GroundTruth(labels.reshape(spec.rows, spec.cols))


def synergy_benchmark(rows: int = 10, cols: int = 10, relevance_p: float = 0.243,
                      seed: int = 7) -> tuple:
    """20-band cube: XOR pair at bands 3 and 4, copies of band 3 at 5 and 6, noise elsewhere.

    Band 4's bit is 1 with probability ``relevance_p``, which gives band 3
    about 0.2 bits of marginal relevance and band 4 none.
    """
    plan = [Noise(), Noise(), Noise(), SynergyPair(p_second=relevance_p),
            Duplicate(3), Duplicate(3)]
    spec = SynthSpec(rows, cols, plan, noise_bands=13, seed=seed)
    return synth_cube(spec)


# --------------------------------------------------------------------------
# reports and traces
# --------------------------------------------------------------------------

def _dump(obj, indent: int = 0) -> str:
    """JSON with every float written to 6 decimal places."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return "null" if not math.isfinite(x) else f"{x:.6f}"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_dump(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in seq):
            return "[" + ", ".join(_dump(v, indent + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + _dump(v, indent + 1) for v in seq) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


@dataclass
class RunReport:
    dataset: str
    method: str
    k: int
    fraction: float
    seed: int
    params: dict
    selected_bands: list
    metrics: dict
    timing_ms: float = 0.0

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "method": self.method,
            "k": self.k,
            "split": {"fraction": self.fraction, "seed": self.seed},
            "params": self.params,
            "selected_bands": [int(b) for b in self.selected_bands],
            "metrics": {key: self.metrics[key] for key in ("oa", "aa", "kappa", "specificity", "ica")},
            "timing_ms": self.timing_ms,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(d["dataset"], d["method"], int(d["k"]), float(d["split"]["fraction"]),
                   int(d["split"]["seed"]), d["params"], list(d["selected_bands"]),
                   d["metrics"], float(d["timing_ms"]))


def write_report(report: RunReport, path=None) -> str:
    text = _dump(report.to_dict()) + "\n"
    if path is not None:
        _write_atomic(Path(path), text)
    return text


def read_report(text: str) -> RunReport:
    return RunReport.from_dict(json.loads(text))


def write_trace(trace, path=None) -> str:
    """One selected band index per line."""
    text = "".join(f"{b}\n" for b in trace.bands)
    if path is not None:
        _write_atomic(Path(path), text)
    return text


def read_trace(text: str) -> list:
    return [int(line) for line in text.split() if line.strip()]


def trace_to_json(trace, config=None, path=None) -> str:
    doc = {"method": trace.method, "k": len(trace.bands)}
    if config is not None:
        doc.update({"levels": config.levels, "beta": config.beta, "threshold": config.threshold})
    doc["steps"] = [
        {"step": i + 1, "band": int(b), "score": s, "relevance": r, "interaction": inter}
        for i, (b, s, r, inter) in enumerate(zip(trace.bands, trace.scores, trace.relevance,
                                                 trace.interaction))
    ]
    text = _dump(doc) + "\n"
    if path is not None:
        _write_atomic(Path(path), text)
    return text


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_text(text)
        tmp.replace(path)
    except OSError as e:
        raise OSError(f"cannot write {path}: {e}") from e


def write_bytes_atomic(path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_bytes(data)
        tmp.replace(path)
    except OSError as e:
        raise OSError(f"cannot write {path}: {e}") from e
