"""Tensor files, dataset manifests, CSV import and the synthetic generator.

Tensor file layout (all integers little-endian)::

    offset  size      field
    0       8         magic  b"TRJL0001"
    8       4         dtype  b"f32\\0" or b"f64\\0"
    12      4         ndim   uint32, 2 or 3
    16      8*ndim    dims   uint64 each, outermost axis first
    ...     n*size    payload, row-major little-endian values
    end-8   8         FNV-1a 64-bit hash of the payload bytes, uint64

Manifest files are INI documents::

    [dataset]
    signal = signal.trjl          ; N x d or N x channels x times
    embedding = embedding.trjl    ; N x layers x dim
    sample_ids = sample_ids.txt   ; optional, one id per line
    channels = channels.txt       ; optional, one label per line
    coordinates = coords.csv      ; optional, header label,x,y,z

    [axis]
    sampling_rate = 500           ; optional, Hz of the time axis
    layer_names = emb, l1, l2     ; optional, comma separated

Relative paths resolve against the manifest's directory.
"""

import configparser
import csv
import io
import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .encoding import EmbeddingTensor, SignalMatrix
from .errors import (
    BadMagic,
    ChecksumMismatch,
    DimMismatch,
    DuplicateIds,
    FormatError,
    InvalidConfig,
    MissingFile,
    TruncatedFile,
)
from .rng import Xoshiro256

MAGIC = b"TRJL0001"
_DTYPES = {b"f32\0": np.dtype("<f4"), b"f64\0": np.dtype("<f8")}
_TAGS = {np.dtype("<f4"): b"f32\0", np.dtype("<f8"): b"f64\0"}


def atomic_write_bytes(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


def encode_tensor(tensor, dtype=None):
    a = np.asarray(tensor)
    if dtype is None:
        dtype = np.float32 if a.dtype == np.float32 else np.float64
    dt = np.dtype(dtype).newbyteorder("<")
    if dt not in _TAGS:
        raise FormatError(f"unsupported dtype {dtype}")
    if a.ndim not in (2, 3):
        raise FormatError(f"tensor must have 2 or 3 axes, got {a.ndim}")
    payload = np.ascontiguousarray(a, dtype=dt).tobytes()
    header = MAGIC + _TAGS[dt] + struct.pack("<I", a.ndim) + struct.pack(f"<{a.ndim}Q", *a.shape)
    footer = struct.pack("<Q", kernels.fnv1a64(payload))
    return header + payload + footer


def decode_tensor(buf):
    if len(buf) < 16:
        raise TruncatedFile("file shorter than the fixed header")
    if buf[:8] != MAGIC:
        raise BadMagic(f"bad magic {buf[:8]!r}")
    tag = bytes(buf[8:12])
    if tag not in _DTYPES:
        raise FormatError(f"unknown dtype tag {tag!r}")
    dt = _DTYPES[tag]
    (ndim,) = struct.unpack("<I", buf[12:16])
    if ndim not in (2, 3):
        raise FormatError(f"ndim must be 2 or 3, got {ndim}")
    head = 16 + 8 * ndim
    if len(buf) < head:
        raise TruncatedFile("file ends inside the dims block")
    dims = struct.unpack(f"<{ndim}Q", buf[16:head])
    nbytes = int(np.prod(dims, dtype=np.int64)) * dt.itemsize
    if len(buf) < head + nbytes + 8:
        raise TruncatedFile(f"expected {head + nbytes + 8} bytes, found {len(buf)}")
    if len(buf) > head + nbytes + 8:
        raise FormatError("trailing bytes after footer")
    payload = bytes(buf[head:head + nbytes])
    (stored,) = struct.unpack("<Q", buf[head + nbytes:])
    if kernels.fnv1a64(payload) != stored:
        raise ChecksumMismatch("payload checksum does not match footer")
    return np.frombuffer(payload, dtype=dt).reshape(dims).copy()


def write_tensor(path, tensor, dtype=None):
    """Write a 2- or 3-axis tensor; float32 input stays f32, anything else is f64."""
    atomic_write_bytes(path, encode_tensor(tensor, dtype))


def read_tensor(path):
    try:
        buf = Path(path).read_bytes()
    except FileNotFoundError as exc:
        raise MissingFile(str(path)) from exc
    return decode_tensor(buf)


def tensor_checksum(path):
    """FNV-1a of the whole file, handy for comparing runs."""
    return kernels.fnv1a64(Path(path).read_bytes())


# -- CSV ---------------------------------------------------------------------

def read_csv_matrix(path):
    """Read a numeric CSV with a mandatory header row.

    Returns ``(header, matrix)``.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty CSV (header row required)")
    header, body = rows[0], rows[1:]
    try:
        float(header[0])
    except ValueError:
        pass
    else:
        raise FormatError(f"{path}: first row is numeric; a header row is required")
    data = np.array([[float(v) for v in r] for r in body if r], dtype=np.float64)
    if data.size and data.shape[1] != len(header):
        raise DimMismatch(f"{path}: {data.shape[1]} columns but {len(header)} header fields")
    return header, data.reshape(-1, len(header))


def format_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    atomic_write_text(path, format_csv(header, rows))


# -- manifests ---------------------------------------------------------------

@dataclass
class DatasetManifest:
    path: Path
    signal: Path
    embedding: Path
    sample_ids: Path | None = None
    channels: Path | None = None
    coordinates: Path | None = None
    sampling_rate: float | None = None
    layer_names: list = field(default_factory=list)

    def to_text(self):
        cp = configparser.ConfigParser()
        base = self.path.parent
        ds = {"signal": _rel(self.signal, base), "embedding": _rel(self.embedding, base)}
        for key in ("sample_ids", "channels", "coordinates"):
            val = getattr(self, key)
            if val is not None:
                ds[key] = _rel(val, base)
        cp["dataset"] = ds
        axis = {}
        if self.sampling_rate is not None:
            axis["sampling_rate"] = repr(float(self.sampling_rate))
        if self.layer_names:
            axis["layer_names"] = ", ".join(self.layer_names)
        cp["axis"] = axis
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _rel(p, base):
    try:
        return str(Path(p).relative_to(base))
    except ValueError:
        return str(p)


@dataclass
class Dataset:
    manifest: DatasetManifest
    signal: SignalMatrix
    embedding: EmbeddingTensor
    channels: list
    coordinates: np.ndarray | None = None


def parse_manifest(path):
    path = Path(path)
    if not path.exists():
        raise MissingFile(str(path))
    cp = configparser.ConfigParser()
    try:
        cp.read_string(path.read_text())
    except configparser.Error as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if "dataset" not in cp:
        raise FormatError(f"{path}: missing [dataset] section")
    ds = cp["dataset"]
    base = path.parent

    def ref(key, required=False):
        if key not in ds:
            if required:
                raise FormatError(f"{path}: [dataset] needs '{key}'")
            return None
        p = Path(ds[key])
        return p if p.is_absolute() else base / p

    axis = cp["axis"] if "axis" in cp else {}
    rate = axis.get("sampling_rate")
    names = axis.get("layer_names", "")
    return DatasetManifest(
        path=path,
        signal=ref("signal", True),
        embedding=ref("embedding", True),
        sample_ids=ref("sample_ids"),
        channels=ref("channels"),
        coordinates=ref("coordinates"),
        sampling_rate=float(rate) if rate else None,
        layer_names=[n.strip() for n in names.split(",") if n.strip()],
    )


def _read_lines(path):
    if not path.exists():
        raise MissingFile(str(path))
    return [ln.strip() for ln in path.read_text().splitlines() if ln.strip()]


def load_manifest(path):
    """Parse a manifest, load every referenced file and cross-check dims."""
    m = parse_manifest(path)
    for p in (m.signal, m.embedding, m.sample_ids, m.channels, m.coordinates):
        if p is not None and not p.exists():
            raise MissingFile(str(p))
    sig = read_tensor(m.signal).astype(np.float64)
    emb = read_tensor(m.embedding).astype(np.float64)
    if emb.ndim != 3:
        raise DimMismatch(f"embedding tensor must be N x layers x dim, got {emb.shape}")
    if sig.shape[0] != emb.shape[0]:
        raise DimMismatch(f"sample count differs: signal {sig.shape[0]} vs embedding {emb.shape[0]}")
    n = sig.shape[0]
    n_channels = sig.shape[1]

    ids = _read_lines(m.sample_ids) if m.sample_ids else [f"s{i}" for i in range(n)]
    if len(ids) != n:
        raise DimMismatch(f"{len(ids)} sample ids for {n} samples")
    if len(set(ids)) != len(ids):
        raise DuplicateIds("sample ids are not unique")

    channels = _read_lines(m.channels) if m.channels else [f"ch{i}" for i in range(n_channels)]
    if len(channels) != n_channels:
        raise DimMismatch(f"{len(channels)} channel labels for {n_channels} channels")
    if len(set(channels)) != len(channels):
        raise DuplicateIds("channel labels are not unique")

    coords = None
    if m.coordinates is not None:
        header, coords = read_csv_matrix_labeled(m.coordinates)
        if len(header) != n_channels:
            raise DimMismatch(f"{len(header)} channel coordinates for {n_channels} channels")
    if m.layer_names and len(m.layer_names) != emb.shape[1]:
        raise DimMismatch(f"{len(m.layer_names)} layer names for {emb.shape[1]} layers")

    signal = SignalMatrix.from_tensor(sig, sample_ids=ids, channels=channels)
    embedding = EmbeddingTensor(emb, sample_ids=ids)
    return Dataset(m, signal, embedding, channels, coords)


def read_csv_matrix_labeled(path):
    """Read ``label,x,y,z`` rows; returns ``(labels, coords)``."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise FormatError(f"{path}: empty CSV (header row required)")
    body = rows[1:]
    labels = [r[0] for r in body]
    coords = np.array([[float(v) for v in r[1:]] for r in body], dtype=np.float64)
    return labels, coords


# -- synthetic data ------------------------------------------------------------

def _auto_channels(d):
    best = 1
    for c in range(1, int(np.sqrt(d)) + 1):
        if d % c == 0:
            best = c
    return best


@dataclass(frozen=True)
class SynthConfig:
    n: int = 200
    d: int = 16
    layers: int = 8
    dim: int = 32
    coupled_layer: int = 3
    noise_sigma: float = 0.5
    seed: int = 0
    channels: int | None = None

    def validate(self):
        for name in ("n", "d", "layers", "dim"):
            if getattr(self, name) < 1:
                raise InvalidConfig(f"{name} must be positive")
        if self.n < 2:
            raise InvalidConfig("n must be at least 2")
        if not 0 <= self.coupled_layer < self.layers:
            raise InvalidConfig(
                f"coupled_layer={self.coupled_layer} must lie in [0, layers={self.layers})")
        if not (np.isfinite(self.noise_sigma) and self.noise_sigma >= 0):
            raise InvalidConfig("noise_sigma must be a nonnegative number")
        ch = self.n_channels
        if ch < 1 or self.d % ch:
            raise InvalidConfig(f"channels={ch} must divide d={self.d}")

    @property
    def n_channels(self):
        return self.channels if self.channels is not None else _auto_channels(self.d)


def synth_generate(cfg):
    """Coupled embedding/signal pair with a known linear readout.

    Draw order from one xoshiro256** stream: embeddings (N, L, D), then
    ``W_true`` (D, d), then the noise (N, d).
    """
    cfg.validate()
    rng = Xoshiro256(cfg.seed)
    emb = rng.standard_normal((cfg.n, cfg.layers, cfg.dim))
    w_true = rng.standard_normal((cfg.dim, cfg.d)) / np.sqrt(cfg.dim)
    noise = rng.standard_normal((cfg.n, cfg.d))
    signals = emb[:, cfg.coupled_layer, :] @ w_true + cfg.noise_sigma * noise

    ids = [f"s{i}" for i in range(cfg.n)]
    ch = cfg.n_channels
    channels = [f"ch{i}" for i in range(ch)]
    sig = SignalMatrix.from_tensor(signals.reshape(cfg.n, ch, cfg.d // ch), ids, channels)
    truth = {
        "coupled_layer": cfg.coupled_layer,
        "noise_sigma": cfg.noise_sigma,
        "seed": cfg.seed,
        "prng": "xoshiro256** seeded by splitmix64",
        "w_true": w_true,
    }
    return EmbeddingTensor(emb, ids), sig, truth


def channel_coordinates(n):
    """Unit-circle layout so downstream tools can draw something."""
    theta = 2.0 * np.pi * np.arange(n) / max(n, 1)
    return np.stack([np.cos(theta), np.sin(theta), np.zeros(n)], axis=1)


def write_synth_dataset(out_dir, cfg):
    """Write tensors, label files, coordinates, manifest and truth record."""
    out_dir = Path(out_dir)
    emb, sig, truth = synth_generate(cfg)
    write_tensor(out_dir / "signal.trjl", sig.epochs)
    write_tensor(out_dir / "embedding.trjl", emb.data)
    atomic_write_text(out_dir / "sample_ids.txt", "\n".join(sig.sample_ids) + "\n")
    atomic_write_text(out_dir / "channels.txt", "\n".join(sig.channels) + "\n")
    xyz = channel_coordinates(len(sig.channels))
    write_csv(out_dir / "channel_coords.csv", ["label", "x", "y", "z"],
              [[lab, *map(float, row)] for lab, row in zip(sig.channels, xyz)])
    manifest = DatasetManifest(
        path=out_dir / "manifest.ini",
        signal=out_dir / "signal.trjl",
        embedding=out_dir / "embedding.trjl",
        sample_ids=out_dir / "sample_ids.txt",
        channels=out_dir / "channels.txt",
        coordinates=out_dir / "channel_coords.csv",
        layer_names=[f"layer{i}" for i in range(cfg.layers)],
    )
    atomic_write_text(manifest.path, manifest.to_text())
    record = dict(truth, w_true=truth["w_true"].tolist(), config=cfg.__dict__)
    atomic_write_text(out_dir / "ground_truth.json", json.dumps(record, indent=2, sort_keys=True) + "\n")
    return manifest
