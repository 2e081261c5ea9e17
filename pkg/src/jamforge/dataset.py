"""Dataset generation, persistence and splitting.

A dataset is a canonical grid over (class, JNR, sample index).  Each
cell element gets a 64-bit seed mixed from (master seed, class id, JNR
index, sample index), and the whole sample (jammer parameters, data
bits, noise) is a pure function of that seed plus the config, so
generation parallelizes over samples with no effect on the bytes
produced.

On disk a dataset is a directory with two files:

  payload.jsd1    magic "JSD1", u32 record count, u16 height, u16 width,
                  then per record: u8 class id + h*w float32 (all LE,
                  pixels row-major, frequency rows ascending)
  manifest.jsonl  line 1: header {format_version, config}; then one JSON
                  record per sample with its seed, draws and byte offset

Regenerating any record from its manifest line reproduces the stored
pixels bit-for-bit.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cwd import CwdConfig, Spectrogram, cwd, to_spectrogram
from .rng import Rng, mix64
from .signals import (
    COMPOUND_PAIRS,
    DEFAULT_FS,
    DEFAULT_N,
    LFMJ,
    MTJ,
    PBNJ,
    PPNJ,
    STJ,
    CompoundSpec,
    GnssParams,
    JammerSpec,
    synthesize_received_parts,
)

PAYLOAD_MAGIC = b"JSD1"
FORMAT_VERSION = 1
PAYLOAD_NAME = "payload.jsd1"
MANIFEST_NAME = "manifest.jsonl"


class DatasetFormatError(ValueError):
    """Persisted dataset bytes do not parse; message locates the fault."""


@dataclass(frozen=True)
class DatasetConfig:
    classes: tuple = tuple(range(len(COMPOUND_PAIRS)))
    jnr_grid_db: tuple = tuple(float(j) for j in range(-20, 12, 2))
    pr_db: object = 0.0  # scalar, or a sequence cycled over sample index
    samples_per_class_per_jnr: int = 20
    master_seed: int = 0
    n: int = DEFAULT_N
    fs: float = DEFAULT_FS
    fc_range_hz: tuple = (0.0, 15.36e6)
    bandwidth_range_hz: tuple = (1.536e6, 7.68e6)
    mtj_tone_count_range: tuple = (2, 5)
    mtj_min_spacing_hz: float = 15.36e6 / 64
    ppnj_periods_range: tuple = (2, 8)
    ppnj_duty_range: tuple = (0.1, 0.5)
    gnss: GnssParams = field(default_factory=GnssParams)
    cwd: CwdConfig = field(default_factory=CwdConfig)

    def __post_init__(self):
        if not self.classes:
            raise ValueError("classes must be non-empty")
        for c in self.classes:
            if not 0 <= c < len(COMPOUND_PAIRS):
                raise ValueError(f"class id {c} out of range 0..{len(COMPOUND_PAIRS) - 1}")
        if not self.jnr_grid_db:
            raise ValueError("jnr_grid_db must be non-empty")
        if self.samples_per_class_per_jnr < 1:
            raise ValueError("samples_per_class_per_jnr must be >= 1")

    def pr_values(self) -> tuple:
        if isinstance(self.pr_db, (int, float)):
            return (float(self.pr_db),)
        return tuple(float(p) for p in self.pr_db)

    def record_count(self) -> int:
        return len(self.classes) * len(self.jnr_grid_db) * self.samples_per_class_per_jnr


def sample_jammer_spec(kind: str, rng: Rng, cfg: DatasetConfig) -> JammerSpec:
    """Draw one jammer's free parameters.

    Draw order is fixed per kind (fc, phase, then extras) so a seed pins
    the spec.  MTJ rejects tone sets with pairwise spacing below the
    configured minimum and redraws.
    """
    fc = float(rng.uniform(*cfg.fc_range_hz))
    phase = float(rng.uniform(0.0, 2.0 * math.pi))
    if kind == STJ:
        return JammerSpec(kind=STJ, fc_hz=fc, phase_rad=phase)
    if kind == MTJ:
        lo, hi = cfg.mtj_tone_count_range
        k = int(rng.integers(lo, hi + 1))
        for _ in range(1000):
            freqs = np.sort(rng.uniform(cfg.fc_range_hz[0], cfg.fc_range_hz[1], k))
            if k == 1 or np.diff(freqs).min() >= cfg.mtj_min_spacing_hz:
                break
        else:
            raise ValueError("could not draw spaced MTJ tones; check mtj_min_spacing_hz")
        phases = rng.uniform(0.0, 2.0 * math.pi, k)
        tones = tuple((1.0, float(f), float(p)) for f, p in zip(freqs, phases))
        return JammerSpec(kind=MTJ, fc_hz=fc, phase_rad=phase, tones=tones)
    if kind == PBNJ:
        bw = float(rng.uniform(*cfg.bandwidth_range_hz))
        return JammerSpec(kind=PBNJ, fc_hz=fc, phase_rad=phase, bandwidth_hz=bw)
    if kind == LFMJ:
        bw = float(rng.uniform(*cfg.bandwidth_range_hz))
        return JammerSpec(kind=LFMJ, fc_hz=fc, phase_rad=phase, bandwidth_hz=bw,
                          sweep_period_s=cfg.n / cfg.fs)
    if kind == PPNJ:
        lo, hi = cfg.ppnj_periods_range
        periods = int(rng.integers(lo, hi + 1))
        duty = float(rng.uniform(*cfg.ppnj_duty_range))
        period_s = (cfg.n / cfg.fs) / periods
        return JammerSpec(kind=PPNJ, fc_hz=fc, phase_rad=phase,
                          pulse_period_s=period_s, pulse_width_s=duty * period_s)
    raise ValueError(f"unknown jammer kind {kind!r}")


def sample_seed(master_seed: int, class_id: int, jnr_index: int, sample_index: int) -> int:
    return mix64(master_seed, class_id, jnr_index, sample_index)


def make_sample(cfg: DatasetConfig, class_id: int, jnr_db: float, pr_db: float,
                seed: int) -> tuple[Spectrogram, dict]:
    """One spectrogram plus its manifest record (sans offset/index)."""
    rng = Rng(seed)
    kind1, kind2 = COMPOUND_PAIRS[class_id]
    first = sample_jammer_spec(kind1, rng, cfg)
    second = sample_jammer_spec(kind2, rng, cfg)
    compound = CompoundSpec(first=first, second=second, pr_db=pr_db, class_id=class_id)
    parts = synthesize_received_parts(cfg.gnss, compound, jnr_db, cfg.n, cfg.fs, rng)
    tf = cwd(parts.received, cfg.cwd)
    image = to_spectrogram(tf, class_id, meta={
        "jnr_db": jnr_db, "pr_db": pr_db, "seed": seed, "compound": compound,
    })
    record = {
        "class_id": class_id,
        "jnr_db": jnr_db,
        "pr_db": pr_db,
        "seed": seed,
        "first": _spec_to_dict(first),
        "second": _spec_to_dict(second),
        "degenerate": bool(image.meta.get("degenerate", False)),
    }
    return image, record


def _spec_to_dict(spec: JammerSpec) -> dict:
    d = dataclasses.asdict(spec)
    d["tones"] = [list(t) for t in spec.tones]
    return d


def _plan(cfg: DatasetConfig) -> list[dict]:
    """Canonical record order: class, then JNR grid, then sample index."""
    prs = cfg.pr_values()
    plan = []
    for c in cfg.classes:
        for ji, jnr in enumerate(cfg.jnr_grid_db):
            for i in range(cfg.samples_per_class_per_jnr):
                plan.append({
                    "class_id": int(c),
                    "jnr_db": float(jnr),
                    "pr_db": prs[i % len(prs)],
                    "seed": sample_seed(cfg.master_seed, int(c), ji, i),
                })
    return plan


def config_to_dict(cfg: DatasetConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["pr_db"] = list(cfg.pr_values()) if not isinstance(cfg.pr_db, (int, float)) else cfg.pr_db
    return d


def config_from_dict(d: dict) -> DatasetConfig:
    d = dict(d)
    gnss = GnssParams(**d.pop("gnss"))
    cwd_cfg = CwdConfig(**d.pop("cwd"))
    for key in ("classes", "jnr_grid_db", "fc_range_hz", "bandwidth_range_hz",
                "mtj_tone_count_range", "ppnj_periods_range", "ppnj_duty_range"):
        d[key] = tuple(d[key])
    if isinstance(d["pr_db"], list):
        d["pr_db"] = tuple(d["pr_db"])
    return DatasetConfig(gnss=gnss, cwd=cwd_cfg, **d)


def generate_dataset(cfg: DatasetConfig, out_dir, threads: int = 1) -> dict:
    """Generate every record and write payload + manifest atomically.

    Returns a small summary (count, per-class counts).  Worker count
    affects wall time only; bytes are identical for any thread count.
    """
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    plan = _plan(cfg)
    h = cfg.cwd.freq_bins
    w = cfg.cwd.time_frames
    os.makedirs(out_dir, exist_ok=True)
    payload_tmp = os.path.join(out_dir, PAYLOAD_NAME + ".tmp")
    manifest_tmp = os.path.join(out_dir, MANIFEST_NAME + ".tmp")

    def build(item: dict) -> tuple[bytes, dict]:
        image, record = make_sample(cfg, item["class_id"], item["jnr_db"],
                                    item["pr_db"], item["seed"])
        blob = struct.pack("<B", item["class_id"]) + image.pixels.astype("<f4").tobytes()
        return blob, record

    header = {"format_version": FORMAT_VERSION, "config": config_to_dict(cfg)}
    per_class: dict[int, int] = {}
    try:
        with open(payload_tmp, "wb") as pf, open(manifest_tmp, "w", encoding="utf-8") as mf:
            pf.write(PAYLOAD_MAGIC)
            pf.write(struct.pack("<IHH", len(plan), h, w))
            mf.write(json.dumps(header) + "\n")
            offset = 4 + 8
            with ThreadPoolExecutor(max_workers=threads) as pool:
                for index, (blob, record) in enumerate(pool.map(build, plan, chunksize=8)):
                    record["index"] = index
                    record["offset"] = offset
                    pf.write(blob)
                    mf.write(json.dumps(record) + "\n")
                    offset += len(blob)
                    per_class[record["class_id"]] = per_class.get(record["class_id"], 0) + 1
        os.replace(payload_tmp, os.path.join(out_dir, PAYLOAD_NAME))
        os.replace(manifest_tmp, os.path.join(out_dir, MANIFEST_NAME))
    except BaseException:
        for tmp in (payload_tmp, manifest_tmp):
            if os.path.exists(tmp):
                os.remove(tmp)
        raise
    return {"count": len(plan), "per_class": per_class,
            "jnr_grid_db": list(cfg.jnr_grid_db)}


@dataclass
class LoadedDataset:
    pixels: np.ndarray  # (count, freq_bins, time_frames) float32
    labels: np.ndarray  # (count,) int64
    records: list[dict]
    config: DatasetConfig
    header: dict


def load_dataset(path) -> LoadedDataset:
    payload_path = os.path.join(path, PAYLOAD_NAME)
    manifest_path = os.path.join(path, MANIFEST_NAME)
    with open(manifest_path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise DatasetFormatError(f"{manifest_path}: empty manifest")
    header = json.loads(lines[0])
    if header.get("format_version") != FORMAT_VERSION:
        raise DatasetFormatError(
            f"{manifest_path}: format_version {header.get('format_version')} unsupported, "
            f"expected {FORMAT_VERSION}")
    records = [json.loads(ln) for ln in lines[1:]]
    cfg = config_from_dict(header["config"])

    with open(payload_path, "rb") as f:
        buf = f.read()
    if buf[:4] != PAYLOAD_MAGIC:
        raise DatasetFormatError(
            f"{payload_path}: bad magic at offset 0: {buf[:4]!r}, expected {PAYLOAD_MAGIC!r}")
    count, h, w = struct.unpack_from("<IHH", buf, 4)
    if count != len(records):
        raise DatasetFormatError(
            f"{payload_path}: header says {count} records at offset 4, manifest has {len(records)}")
    rec_bytes = 1 + h * w * 4
    expected = 12 + count * rec_bytes
    if len(buf) != expected:
        raise DatasetFormatError(
            f"{payload_path}: expected {expected} bytes for {count} records, found {len(buf)}")

    pixels = np.empty((count, h, w), dtype=np.float32)
    labels = np.empty(count, dtype=np.int64)
    for i in range(count):
        off = 12 + i * rec_bytes
        labels[i] = buf[off]
        pixels[i] = np.frombuffer(buf, dtype="<f4", count=h * w, offset=off + 1).reshape(h, w)
        if labels[i] != records[i]["class_id"]:
            raise DatasetFormatError(
                f"{payload_path}: class id {labels[i]} at offset {off} disagrees with "
                f"manifest record {i} ({records[i]['class_id']})")
    return LoadedDataset(pixels=pixels, labels=labels, records=records, config=cfg, header=header)


def split_dataset(records: list[dict], train_fraction: float, seed: int):
    """Stratified split: every (class, JNR) cell is shuffled with its own
    seed-derived stream and the first ceil(fraction * cell) go to train,
    always leaving at least one test sample per cell."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    cells: dict[tuple, list[int]] = {}
    for i, rec in enumerate(records):
        cells.setdefault((rec["class_id"], rec["jnr_db"]), []).append(i)
    train, test = [], []
    for (class_id, jnr_db), idx in sorted(cells.items()):
        if len(idx) < 2:
            raise ValueError(
                f"cell (class {class_id}, jnr {jnr_db}) has {len(idx)} sample(s); "
                f"need at least 2 to split")
        rng = Rng(mix64(seed, int(class_id), int(round(jnr_db * 1000))))
        perm = rng.permutation(len(idx))
        k = min(math.ceil(train_fraction * len(idx)), len(idx) - 1)
        idx = np.asarray(idx)
        train.extend(idx[perm[:k]].tolist())
        test.extend(idx[perm[k:]].tolist())
    return np.sort(np.asarray(train, dtype=np.int64)), np.sort(np.asarray(test, dtype=np.int64))
