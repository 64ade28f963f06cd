"""Synthetic datasets, dataset-level certification, the certified-accuracy curve and reports."""
from __future__ import annotations

import copy
import csv
import io
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .certify import BaseClassifier, certify, predict
from .core import (
    CertifyConfig,
    ConfigError,
    DimensionMismatch,
    EmptyReport,
    Family,
    MismatchedTestSets,
    NoiseSpec,
    OutOfRange,
    Status,
    rng_stream,
)
from .net import (
    Mlp,
    NoiseGenNet,
    TrainConfig,
    pgd_attack,
    save_checkpoint,
    train,
)

SCHEMA_VERSION = 1
REPORT_COLUMNS = ["example_id", "true_label", "status", "certified_label", "radius", "pa_lower", "wall_time_s"]
DEFAULT_RADIUS_GRID = [0.25 * i for i in range(17)]


@dataclass
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    name: str = "dataset"
    split: str = "test"
    num_classes: Optional[int] = None

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2 or len(self.inputs) != len(self.labels):
            raise DimensionMismatch("inputs must be (N, d) with N labels")
        if self.split not in ("train", "test"):
            raise ConfigError("split must be 'train' or 'test'")
        if self.num_classes is None:
            self.num_classes = max(2, int(self.labels.max()) + 1) if len(self.labels) else 2
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise OutOfRange("labels outside [0, num_classes)")

    def __len__(self):
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]


def simplex_means(num_classes: int, dim: int, separation: float) -> np.ndarray:
    """Vertices of a regular simplex with pairwise distance ``separation``, centred at 0."""
    if num_classes - 1 > dim:
        raise DimensionMismatch(f"{num_classes} equidistant means need dim >= {num_classes - 1}")
    centred = np.eye(num_classes) - 1.0 / num_classes
    # orthonormal basis of the sum-zero subspace
    u, _, _ = np.linalg.svd(centred)
    coords = centred @ u[:, : num_classes - 1]
    coords *= separation / np.sqrt(2.0)
    means = np.zeros((num_classes, dim))
    means[:, : num_classes - 1] = coords
    return means


def make_blobs(num_classes: int, points_per_class: int, dim: int, class_separation: float,
               noise_std: float, seed: int, split: str = "train", name: str = "blobs") -> Dataset:
    if min(num_classes, points_per_class, dim) < 1 or class_separation <= 0 or noise_std <= 0:
        raise ConfigError("make_blobs parameters must be positive")
    means = simplex_means(num_classes, dim, class_separation)
    rng = np.random.default_rng([seed, 0 if split == "train" else 1])
    labels = np.repeat(np.arange(num_classes), points_per_class)
    inputs = means[labels] + noise_std * rng.standard_normal((len(labels), dim))
    perm = rng.permutation(len(labels))
    return Dataset(inputs[perm], labels[perm], name, split, num_classes)


def save_dataset(ds: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x_{i}" for i in range(ds.dim)] + ["label"])
        for x, y in zip(ds.inputs, ds.labels):
            w.writerow([repr(float(v)) for v in x] + [int(y)])


def load_dataset(path, split: str = "test", num_classes: Optional[int] = None) -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[-1] != "label" or any(h != f"x_{i}" for i, h in enumerate(header[:-1])):
        raise ConfigError("dataset CSV needs columns x_0..x_{d-1},label")
    inputs = np.array([[float(v) for v in r[:-1]] for r in body]).reshape(len(body), len(header) - 1)
    labels = np.array([int(r[-1]) for r in body], dtype=np.int64)
    return Dataset(inputs, labels, Path(path).stem, split, num_classes)


@dataclass
class ReportRow:
    example_id: int
    true_label: int
    status: Status
    certified_label: Optional[int] = None
    radius: Optional[float] = None
    pa_lower: Optional[float] = None
    wall_time_s: Optional[float] = None

    @property
    def correct(self) -> bool:
        return self.status is Status.CERTIFIED and self.certified_label == self.true_label


@dataclass
class CertificationReport:
    rows: list[ReportRow]
    config: dict = field(default_factory=dict)
    seed: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        fmt = lambda v: "" if v is None else repr(float(v))  # noqa: E731
        for r in self.rows:
            w.writerow([r.example_id, r.true_label, r.status.value,
                        "" if r.certified_label is None else r.certified_label,
                        fmt(r.radius), fmt(r.pa_lower), fmt(r.wall_time_s)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, config: Optional[dict] = None, seed: int = 0) -> "CertificationReport":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if header != REPORT_COLUMNS:
            raise ConfigError(f"unexpected report header {header}")
        opt = lambda v, t: None if v == "" else t(v)  # noqa: E731
        rows = [ReportRow(int(r[0]), int(r[1]), Status(r[2]), opt(r[3], int), opt(r[4], float),
                          opt(r[5], float), opt(r[6], float)) for r in reader if r]
        return cls(rows, config or {}, seed)

    def write(self, csv_path) -> None:
        Path(csv_path).write_text(self.to_csv())
        meta = {"schema_version": SCHEMA_VERSION, "seed": self.seed, "config": self.config}
        Path(csv_path).with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True))

    @classmethod
    def read(cls, csv_path) -> "CertificationReport":
        meta_path = Path(csv_path).with_suffix(".json")
        meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        return cls.from_csv(Path(csv_path).read_text(), meta.get("config"), meta.get("seed", 0))


def certified_accuracy(report: CertificationReport, radius_grid: Sequence[float] = DEFAULT_RADIUS_GRID):
    """[(R, fraction of rows certified correct with radius >= R)]."""
    if not report.rows:
        raise EmptyReport("report has no rows")
    n = len(report.rows)
    radii = np.array([r.radius for r in report.rows if r.correct], dtype=np.float64)
    return [(float(R), float(np.count_nonzero(radii >= R)) / n) for R in radius_grid]


def compare_reports(baseline: CertificationReport, candidate: CertificationReport,
                    radius_grid: Sequence[float] = DEFAULT_RADIUS_GRID):
    """[(R, acc_baseline, acc_candidate, candidate - baseline)]."""
    key = lambda rep: [(r.example_id, r.true_label) for r in rep.rows]  # noqa: E731
    if key(baseline) != key(candidate):
        raise MismatchedTestSets("reports cover different test examples")
    a = certified_accuracy(baseline, radius_grid)
    b = certified_accuracy(candidate, radius_grid)
    return [(R, x, y, y - x) for (R, x), (_, y) in zip(a, b)]


def curve_csv(rows, header=("radius", "accuracy")) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


Noise = Union[NoiseGenNet, NoiseSpec]


def noise_for(noise: Noise, x, family: Optional[Family] = None) -> NoiseSpec:
    if isinstance(noise, NoiseGenNet):
        spec = noise.noise_spec(x)
        if family is not None and Family(family) is not spec.family:
            spec = NoiseSpec(family, spec.mean, spec.scale)
        return spec
    return noise


def _map_examples(fn, n: int, workers: int) -> list:
    if workers <= 1:
        return [fn(j) for j in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n)))


def certify_dataset(f: BaseClassifier, noise: Noise, ds: Dataset, cfg: CertifyConfig,
                    workers: int = 1, timing: bool = True, family: Optional[Family] = None,
                    config: Optional[dict] = None) -> CertificationReport:
    """Certify every example; example j uses stream (cfg.seed, j)."""

    def one(j):
        t0 = time.perf_counter()
        x = ds.inputs[j]
        out = certify(f, x, noise_for(noise, x, family), cfg, rng_stream(cfg.seed, j))
        dt = time.perf_counter() - t0 if timing else None
        return ReportRow(j, int(ds.labels[j]), out.status, out.label, out.radius, out.pa_lower, dt)

    rows = _map_examples(one, len(ds), workers)
    snap = {"n0": cfg.n0, "n": cfg.n, "alpha": cfg.confidence_alpha, "batch_size": cfg.batch_size}
    snap.update(config or {})
    return CertificationReport(rows, snap, cfg.seed)


def predict_dataset(f: BaseClassifier, noise: Noise, ds: Dataset, n: int, alpha: float, seed: int,
                    workers: int = 1, family: Optional[Family] = None, batch_size: int = 1000) -> list[int]:
    def one(j):
        x = ds.inputs[j]
        return predict(f, x, noise_for(noise, x, family), n, alpha, rng_stream(seed, j), batch_size)

    return _map_examples(one, len(ds), workers)


DEFAULT_EXPERIMENT = {
    "schema_version": SCHEMA_VERSION,
    "name": "blobs",
    "mode": "anisotropic",
    "seed": 0,
    "family": "gaussian",
    "sigma": 0.5,
    "dataset": {"num_classes": 2, "dim": 16, "train_per_class": 256, "test_per_class": 128,
                "class_separation": 4.0, "noise_std": 1.0},
    "model": {"hidden": [64, 64], "init_seed_offset": 0},
    "noisegen": {"hidden": 32, "depth": 4, "mean_bound": 1.0, "scale_range": [0.05, 4.0]},
    "train": {"loss_weights": [1.0, 1.0, 0.01], "sigma_target": 0.5, "samples_per_input": 5,
              "learning_rate": 0.05, "epochs": 30, "batch": 32},
    "certify": {"n0": 100, "n": 10000, "alpha": 0.001, "batch_size": 1000},
    "attack": None,
    "radius_grid": DEFAULT_RADIUS_GRID,
    "record_timing": True,
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_experiment_config(source: Union[str, os.PathLike, dict]) -> dict:
    """Validate a JSON experiment config (path or dict) and fill defaults."""
    if isinstance(source, dict):
        raw = source
    else:
        try:
            raw = json.loads(Path(source).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {source}: {exc}") from exc
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"config schema_version must be {SCHEMA_VERSION}")
    cfg = _merge(DEFAULT_EXPERIMENT, raw)
    if cfg["mode"] not in ("isotropic", "anisotropic"):
        raise ConfigError("mode must be 'isotropic' or 'anisotropic'")
    try:
        Family(cfg["family"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    c = cfg["certify"]
    if c["n0"] > c["n"]:
        raise ConfigError(f"n0 ({c['n0']}) > n ({c['n']})")
    certify_config(cfg)
    train_config(cfg)
    if cfg["mode"] == "isotropic" and not cfg["sigma"] > 0:
        raise ConfigError("isotropic mode needs sigma > 0")
    return cfg


def certify_config(cfg: dict) -> CertifyConfig:
    c = cfg["certify"]
    return CertifyConfig(int(c["n0"]), int(c["n"]), float(c["alpha"]), int(c["batch_size"]), int(cfg["seed"]))


def train_config(cfg: dict) -> TrainConfig:
    t = cfg["train"]
    return TrainConfig(tuple(t["loss_weights"]), float(t["sigma_target"]), int(t["samples_per_input"]),
                       float(t["learning_rate"]), int(t["epochs"]), int(t["batch"]), int(cfg["seed"]))


def datasets(cfg: dict) -> tuple[Dataset, Dataset]:
    d = cfg["dataset"]
    if "train_path" in d:
        return (load_dataset(d["train_path"], "train", d.get("num_classes")),
                load_dataset(d["test_path"], "test", d.get("num_classes")))
    args = (d["num_classes"],)
    tr = make_blobs(*args, d["train_per_class"], d["dim"], d["class_separation"], d["noise_std"],
                    cfg["seed"], "train", cfg["name"])
    te = make_blobs(*args, d["test_per_class"], d["dim"], d["class_separation"], d["noise_std"],
                    cfg["seed"], "test", cfg["name"])
    return tr, te


def build_models(cfg: dict, train_ds: Dataset):
    """Train the classifier (and generator in anisotropic mode); returns (f, noise, trace)."""
    dim, k = train_ds.dim, train_ds.num_classes
    seed = int(cfg["seed"])
    f = Mlp.create([dim] + list(cfg["model"]["hidden"]) + [k], seed + cfg["model"].get("init_seed_offset", 0))
    tcfg = train_config(cfg)
    family = Family(cfg["family"])
    if cfg["mode"] == "anisotropic":
        ng = cfg["noisegen"]
        g = NoiseGenNet.create(dim, ng["hidden"], ng["depth"], seed + 1, ng["mean_bound"],
                               tuple(ng["scale_range"]), tcfg.sigma_target, family)
    else:
        g = NoiseSpec.isotropic(cfg["sigma"], dim, family)
    res = train(f, g, train_ds.inputs, train_ds.labels, tcfg)
    return res.f, res.g, res.trace


@dataclass
class ExperimentResult:
    clean: CertificationReport
    attacked: Optional[CertificationReport]
    trace: list
    f: Mlp
    noise: Noise
    config: dict


def run_experiment(source, out_dir=None, workers: int = 1, models=None) -> ExperimentResult:
    """Train (or reuse ``models``), certify the test set, optionally PGD-attack and re-certify."""
    cfg = load_experiment_config(source)
    train_ds, test_ds = datasets(cfg)
    if models is None:
        f, noise, trace = build_models(cfg, train_ds)
    else:
        f, noise = models
        trace = []
    ccfg = certify_config(cfg)
    family = Family(cfg["family"])
    timing = bool(cfg["record_timing"])
    snap = {"mode": cfg["mode"], "name": cfg["name"], "family": family.value}
    clean = certify_dataset(f, noise, test_ds, ccfg, workers, timing, family, snap)

    attacked = None
    if cfg.get("attack"):
        a = cfg["attack"]
        clip = tuple(a["clip"]) if a.get("clip") else None
        adv = pgd_attack(f, test_ds.inputs, test_ds.labels, a["eps_inf"], a.get("iters", 10), a.get("step"), clip)
        adv_ds = Dataset(adv, test_ds.labels, test_ds.name + "-pgd", "test", test_ds.num_classes)
        attacked = certify_dataset(f, noise, adv_ds, ccfg, workers, timing, family, dict(snap, attack=a))

    if out_dir is not None:
        write_artifacts(Path(out_dir), cfg, clean, attacked, trace, f, noise)
    return ExperimentResult(clean, attacked, trace, f, noise, cfg)


def write_artifacts(out: Path, cfg, clean, attacked, trace, f, noise) -> None:
    out.mkdir(parents=True, exist_ok=True)
    grid = cfg["radius_grid"]
    (out / "config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True))
    clean.write(out / "report.csv")
    (out / "curve.csv").write_text(curve_csv(certified_accuracy(clean, grid)))
    if attacked is not None:
        attacked.write(out / "attacked_report.csv")
        (out / "attacked_curve.csv").write_text(curve_csv(certified_accuracy(attacked, grid)))
    if trace:
        keys = list(trace[0])
        (out / "train_trace.csv").write_text(
            ",".join(keys) + "\n" + "".join(",".join(repr(t[k]) for k in keys) + "\n" for t in trace))
    save_checkpoint(out / "model.json", f, cfg["seed"])
    if isinstance(noise, NoiseGenNet):
        save_checkpoint(out / "noisegen.json", noise, cfg["seed"])


def relative_loss(clean_acc: float, attacked_acc: float) -> float:
    """Fraction of clean certified accuracy lost to the attack; 0 when clean accuracy is 0."""
    return 0.0 if clean_acc == 0 else (clean_acc - attacked_acc) / clean_acc


def accuracy_at(report: CertificationReport, radius: float) -> float:
    return certified_accuracy(report, [radius])[0][1]
