"""Sweep orchestration: trials, aggregation, CSV and SVG emission.

A sweep crosses architectures (two classical models plus the quantum-feature
head under each configured filter circuit) with attacks and an epsilon grid,
running `trials` independently seeded repetitions of the four-step protocol:

    1. quanvolve the train/test subsets with the trial's freshly seeded
       filter circuit (classical architectures skip this),
    2. train the model (batch 4, 30 epochs by default),
    3. build adversarial test sets for every epsilon,
    4. evaluate and record accuracy.

Attacks on the quantum model use the configured gradient mode: "surrogate"
builds adversarial images against a classical CNN trained on the raw pixels
(the quantum layer then transforms them), "end_to_end" differentiates
through the quanvolution itself.  Classical architectures are always
attacked with their own gradients.

Determinism: every random draw is derived from base_seed via stable hashes
of the cell coordinates, so any (architecture, ansatz, attack, trial) cell
can be recomputed in isolation and a rerun of the whole sweep -- at any
worker count -- reproduces the output CSV byte for byte.  Quanvolved
feature maps are rounded to float32 so cached and freshly computed values
are bit-identical; caches live in QNVF files when a cache directory is
configured and in per-process memory either way.
"""
from __future__ import annotations

import hashlib
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import nn, quanv
from .ansatz import AnsatzKind, RandomCircuitSpec, build_ansatz
from .attacks import AttackConfig, AttackKind, EndToEndSource, SurrogateSource, attack_batch
from .data import Dataset
from .nn import Architecture
from .quanv import QuanvConfig

DEFAULT_EPSILONS = (0.0, 0.01, 0.05, 0.1, 0.3, 0.5, 1.0, 2.0, 5.0, 10.0)
FGSM_EXTRA_EPSILONS = (15.0,)

CSV_COLUMNS = ("dataset", "architecture", "ansatz", "attack", "mode", "epsilon", "trial", "accuracy")


@dataclass(frozen=True)
class SweepConfig:
    train_data: Dataset
    test_data: Dataset
    architectures: tuple[Architecture, ...] = tuple(Architecture)
    ansatz_kinds: tuple[AnsatzKind, ...] = tuple(AnsatzKind)
    attacks: tuple[AttackKind, ...] = tuple(AttackKind)
    epsilons: tuple[float, ...] = DEFAULT_EPSILONS
    fgsm_extra_epsilons: tuple[float, ...] = FGSM_EXTRA_EPSILONS
    trials: int = 7
    base_seed: int = 0
    mode: str = "surrogate"  # "surrogate" | "end_to_end"
    clamp: tuple[float, float] | None = None
    train_cfg: nn.TrainConfig = field(default_factory=nn.TrainConfig)
    attack_steps: int = 10
    attack_decay: float = 1.0
    random_spec: RandomCircuitSpec = field(default_factory=RandomCircuitSpec)
    rescale_features: bool = False
    cache_dir: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.mode not in ("surrogate", "end_to_end"):
            raise ValueError(f"unknown gradient mode {self.mode!r}")
        for grid in (self.epsilons, self.epsilons_for(AttackKind.FGSM)):
            if list(grid) != sorted(grid):
                raise ValueError("epsilon grid must be sorted ascending")
            if not grid or grid[0] != 0.0:
                raise ValueError("epsilon grid must start at 0")

    def epsilons_for(self, attack: AttackKind) -> tuple[float, ...]:
        if attack is AttackKind.FGSM:
            return self.epsilons + self.fgsm_extra_epsilons
        return self.epsilons


@dataclass(frozen=True)
class SweepRecord:
    dataset: str
    architecture: str
    ansatz: str  # "-" for classical architectures
    attack: str
    mode: str
    epsilon: float
    trial: int
    accuracy: float
    clean_accuracy: float
    train_accuracy: float
    wall_time: float

    def sort_key(self):
        return (self.dataset, self.architecture, self.ansatz, self.attack,
                self.mode, self.epsilon, self.trial)


@dataclass(frozen=True)
class AggregateRecord:
    dataset: str
    architecture: str
    ansatz: str
    attack: str
    mode: str
    epsilon: float
    mean_accuracy: float
    std_accuracy: float
    n_trials: int


def stable_seed(*parts) -> int:
    """64-bit seed from a blake2 hash of the stringified parts."""
    digest = hashlib.blake2b("\x1f".join(str(p) for p in parts).encode(), digest_size=8)
    return int.from_bytes(digest.digest(), "little")


def _subset_fingerprint(ds: Dataset) -> str:
    digest = hashlib.blake2b(digest_size=8)
    digest.update(ds.name.encode())
    digest.update(np.ascontiguousarray(ds.images, dtype="<f8").tobytes())
    digest.update(np.ascontiguousarray(ds.labels, dtype="<i8").tobytes())
    return digest.hexdigest()


# Per-process caches; keyed so results are independent of hit/miss patterns.
_QUANV_MEMO: dict = {}
_SURROGATE_MEMO: dict = {}


def _quanvolve32(images: np.ndarray, qcfg: QuanvConfig) -> np.ndarray:
    """Quanvolve and round to float32, the precision of the QNVF cache.

    Rounding both the cached and the freshly computed path keeps sweep
    output identical whether or not a cache file was hit.
    """
    return quanv.quanvolve_dataset(images, qcfg, validate=False).astype(np.float32)


def _cached_quanvolve(images, qcfg, cache_key: str, cache_dir: str | None) -> np.ndarray:
    if cache_key in _QUANV_MEMO:
        return _QUANV_MEMO[cache_key]
    path = None
    if cache_dir is not None:
        path = os.path.join(cache_dir, f"quanv_{cache_key}.qnvf")
        if os.path.exists(path):
            maps, _ = quanv.read_qnvf(path)
            _QUANV_MEMO[cache_key] = maps
            return maps
    maps = _quanvolve32(images, qcfg)
    if path is not None:
        os.makedirs(cache_dir, exist_ok=True)
        tmp = f"{path}.tmp.{os.getpid()}"
        quanv.write_qnvf(tmp, maps, meta_hash=int(cache_key[:16], 16))
        os.replace(tmp, path)  # atomic; concurrent writers produce identical bytes
    _QUANV_MEMO[cache_key] = maps
    return maps


def _surrogate_model(cfg: SweepConfig, trial: int) -> nn.Model:
    """Classical CNN trained on the raw trial data; the attack surrogate."""
    key = (_subset_fingerprint(cfg.train_data), cfg.base_seed, trial)
    if key in _SURROGATE_MEMO:
        return _SURROGATE_MEMO[key]
    seed = stable_seed(cfg.base_seed, "surrogate", cfg.train_data.name, trial)
    model = nn.build_model(Architecture.CLASSICAL_CNN, cfg.train_data.name, seed)
    nn.train(model, cfg.train_data.images, cfg.train_data.labels,
             replace(cfg.train_cfg, seed=seed))
    _SURROGATE_MEMO[key] = model
    return model


def _attack_config(cfg: SweepConfig, kind: AttackKind, epsilon: float) -> AttackConfig:
    return AttackConfig(kind, epsilon, steps=cfg.attack_steps,
                        decay=cfg.attack_decay, clamp=cfg.clamp)


def run_trial(
    cfg: SweepConfig,
    architecture: Architecture,
    ansatz_kind: AnsatzKind | None,
    attack: AttackKind,
    trial: int,
) -> list[SweepRecord]:
    """Run the four-step protocol for one cell and one trial."""
    t0 = time.perf_counter()
    dataset = cfg.train_data.name
    arch_label = architecture.value
    ansatz_label = ansatz_kind.value if ansatz_kind is not None else "-"
    cell_seed = stable_seed(cfg.base_seed, dataset, arch_label, ansatz_label, trial)

    if architecture is Architecture.QUNN:
        if ansatz_kind is None:
            raise ValueError("quantum architecture needs an ansatz kind")
        circuit = build_ansatz(ansatz_kind, 4, seed=cell_seed, random_spec=cfg.random_spec)
        qcfg = QuanvConfig(circuit=circuit, rescale_unit=cfg.rescale_features)
        fingerprint = _subset_fingerprint(cfg.train_data), _subset_fingerprint(cfg.test_data)
        scale_tag = "u" if cfg.rescale_features else "z"
        train_key = f"{fingerprint[0]}_{ansatz_label}_{scale_tag}_{cell_seed:016x}_train"
        test_key = f"{fingerprint[1]}_{ansatz_label}_{scale_tag}_{cell_seed:016x}_test"
        train_x = _cached_quanvolve(cfg.train_data.images, qcfg, train_key, cfg.cache_dir)
        test_x = _cached_quanvolve(cfg.test_data.images, qcfg, test_key, cfg.cache_dir)
    else:
        qcfg = None
        train_x, test_x = cfg.train_data.images, cfg.test_data.images

    model = nn.build_model(architecture, dataset, cell_seed)
    nn.train(model, train_x, cfg.train_data.labels, replace(cfg.train_cfg, seed=cell_seed))
    train_acc = nn.evaluate(model, train_x, cfg.train_data.labels)
    clean_acc = nn.evaluate(model, test_x, cfg.test_data.labels)

    if architecture is Architecture.QUNN:
        if cfg.mode == "surrogate":
            source = SurrogateSource(_surrogate_model(cfg, trial))
        else:
            source = EndToEndSource(qcfg, model)
    else:
        source = SurrogateSource(model)  # classical models attacked directly

    records = []
    for epsilon in cfg.epsilons_for(attack):
        adv = attack_batch(source, cfg.test_data.images, cfg.test_data.labels,
                           _attack_config(cfg, attack, epsilon))
        if architecture is Architecture.QUNN:
            adv = _quanvolve32(adv, qcfg)
        accuracy = nn.evaluate(model, adv, cfg.test_data.labels)
        records.append(SweepRecord(
            dataset=dataset, architecture=arch_label, ansatz=ansatz_label,
            attack=attack.value, mode=cfg.mode, epsilon=float(epsilon), trial=trial,
            accuracy=accuracy, clean_accuracy=clean_acc, train_accuracy=train_acc,
            wall_time=time.perf_counter() - t0,
        ))
    return records


def _cells(cfg: SweepConfig):
    for architecture in cfg.architectures:
        kinds = cfg.ansatz_kinds if architecture is Architecture.QUNN else (None,)
        for ansatz_kind in kinds:
            for attack in cfg.attacks:
                yield architecture, ansatz_kind, attack


def _run_cell_trial(args):
    cfg, architecture, ansatz_kind, attack, trial = args
    return run_trial(cfg, architecture, ansatz_kind, attack, trial)


def iter_sweep(cfg: SweepConfig, threads: int = 1, progress=None):
    """Yield one (cell, trial)'s records at a time; lets callers keep
    partial results if a later cell fails."""
    tasks = [
        (cfg, architecture, ansatz_kind, attack, trial)
        for architecture, ansatz_kind, attack in _cells(cfg)
        for trial in range(cfg.trials)
    ]
    if progress is None:
        progress = lambda msg: print(msg, file=sys.stderr)

    if threads <= 1:
        for i, task in enumerate(tasks):
            out = _run_cell_trial(task)
            progress(f"[{i + 1}/{len(tasks)}] {task[1].value}/{task[2].value if task[2] else '-'}"
                     f"/{task[3].value} trial {task[4]}")
            yield out
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for i, out in enumerate(pool.map(_run_cell_trial, tasks, chunksize=1)):
                progress(f"[{i + 1}/{len(tasks)}] done")
                yield out


def run_sweep(cfg: SweepConfig, threads: int = 1, progress=None) -> list[SweepRecord]:
    """Run every (cell, trial); records sorted so output is order-independent."""
    records: list[SweepRecord] = []
    for batch in iter_sweep(cfg, threads=threads, progress=progress):
        records.extend(batch)
    return sorted(records, key=SweepRecord.sort_key)


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


def aggregate(records: list[SweepRecord], expected_trials: int | None = None) -> list[AggregateRecord]:
    """Mean and sample standard deviation (n-1) over trials per cell."""
    if not records:
        raise ValueError("no records to aggregate")
    groups: dict = {}
    for r in records:
        key = (r.dataset, r.architecture, r.ansatz, r.attack, r.mode, r.epsilon)
        groups.setdefault(key, {})
        if r.trial in groups[key]:
            raise ValueError(f"duplicate record for {key} trial {r.trial}")
        groups[key][r.trial] = r.accuracy

    out = []
    for key in sorted(groups):
        accs = np.array([groups[key][t] for t in sorted(groups[key])])
        if expected_trials is not None and len(accs) != expected_trials:
            raise ValueError(f"cell {key} has {len(accs)} trials, expected {expected_trials}")
        std = float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0
        out.append(AggregateRecord(*key, float(np.mean(accs)), std, len(accs)))
    return out


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _format_value(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def emit_csv(records: list[SweepRecord], path) -> None:
    """Write the per-trial records; header row, '.' decimals, newline-final."""
    if not records:
        raise ValueError("no records to write")
    lines = [",".join(CSV_COLUMNS)]
    for r in records:
        lines.append(",".join(_format_value(getattr(r, col)) for col in CSV_COLUMNS))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_csv(path) -> list[SweepRecord]:
    """Re-parse an emitted CSV; the timing/diagnostic fields are not stored."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or tuple(lines[0].split(",")) != CSV_COLUMNS:
        raise ValueError(f"{path}: unexpected CSV header")
    records = []
    for line in lines[1:]:
        ds, arch, ansatz_label, attack, mode, eps, trial, acc = line.split(",")
        records.append(SweepRecord(ds, arch, ansatz_label, attack, mode,
                                   float(eps), int(trial), float(acc),
                                   clean_accuracy=float("nan"),
                                   train_accuracy=float("nan"), wall_time=0.0))
    return records


# ---------------------------------------------------------------------------
# SVG robustness chart
# ---------------------------------------------------------------------------

_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")

_PLOT = {"width": 860, "height": 520, "left": 70, "right": 210, "top": 40, "bottom": 50}
_ZERO_GAP = 36  # x-pixels reserved left of the log region for epsilon = 0


def _x_positions(epsilons: list[float]):
    """Log-scale x for positive epsilons; 0 pinned left of a break marker."""
    left = _PLOT["left"]
    right = _PLOT["width"] - _PLOT["right"]
    positive = sorted({e for e in epsilons if e > 0})
    log_left = left + (_ZERO_GAP if 0.0 in epsilons else 0)
    if not positive:
        return {0.0: left}, log_left
    lo, hi = np.log10(positive[0]), np.log10(positive[-1])
    span = hi - lo if hi > lo else 1.0

    def x_of(e):
        if e == 0.0:
            return float(left)
        return float(log_left + (np.log10(e) - lo) / span * (right - log_left))

    return {e: x_of(e) for e in sorted(set(epsilons))}, log_left


def _y_of(acc: float) -> float:
    top, bottom = _PLOT["top"], _PLOT["height"] - _PLOT["bottom"]
    return bottom - acc * (bottom - top)


def emit_plot(aggregated: list[AggregateRecord], path) -> None:
    """Accuracy-versus-epsilon SVG: one polyline per architecture/ansatz
    series, +/- one standard deviation error bars, log-scale x with a break
    marker separating the pinned epsilon = 0 position."""
    if not aggregated:
        raise ValueError("nothing to plot")
    attacks = {a.attack for a in aggregated}
    datasets = {a.dataset for a in aggregated}
    if len(attacks) != 1 or len(datasets) != 1:
        raise ValueError("emit_plot expects records for a single (dataset, attack)")
    attack, dataset = attacks.pop(), datasets.pop()

    series: dict = {}
    for a in sorted(aggregated, key=lambda r: r.epsilon):
        series.setdefault((a.architecture, a.ansatz), []).append(a)
    epsilons = sorted({a.epsilon for a in aggregated})
    xs, log_left = _x_positions(epsilons)

    w, hgt = _PLOT["width"], _PLOT["height"]
    left, right = _PLOT["left"], w - _PLOT["right"]
    top, bottom = _PLOT["top"], hgt - _PLOT["bottom"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{hgt}" '
        f'viewBox="0 0 {w} {hgt}" font-family="sans-serif" font-size="12">',
        f'<text x="{left}" y="{top - 16}" font-size="14">{dataset} / {attack} '
        f'accuracy vs epsilon</text>',
        f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = _y_of(frac)
        parts.append(f'<line x1="{left - 4}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" stroke="black"/>')
        parts.append(f'<text x="{left - 34}" y="{y + 4:.1f}">{frac:.2f}</text>')
    for e in epsilons:
        x = xs[e]
        parts.append(f'<line x1="{x:.1f}" y1="{bottom}" x2="{x:.1f}" y2="{bottom + 4}" stroke="black"/>')
        label = "0" if e == 0 else f"{e:g}"
        parts.append(f'<text x="{x - 8:.1f}" y="{bottom + 18}">{label}</text>')
    if 0.0 in xs and len(epsilons) > 1:
        # axis-break marker between the pinned zero and the log region
        bx = (xs[0.0] + log_left) / 2
        parts.append(f'<line x1="{bx - 3:.1f}" y1="{bottom - 5}" x2="{bx + 1:.1f}" '
                     f'y2="{bottom + 5}" stroke="black"/>')
        parts.append(f'<line x1="{bx + 1:.1f}" y1="{bottom - 5}" x2="{bx + 5:.1f}" '
                     f'y2="{bottom + 5}" stroke="black"/>')

    for i, (key, rows) in enumerate(sorted(series.items())):
        color = _PALETTE[i % len(_PALETTE)]
        points = " ".join(f"{xs[r.epsilon]:.1f},{_y_of(r.mean_accuracy):.1f}" for r in rows)
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>')
        for r in rows:
            x, y0, y1 = xs[r.epsilon], _y_of(r.mean_accuracy - r.std_accuracy), _y_of(r.mean_accuracy + r.std_accuracy)
            parts.append(f'<line x1="{x:.1f}" y1="{y0:.1f}" x2="{x:.1f}" y2="{y1:.1f}" stroke="{color}"/>')
            parts.append(f'<line x1="{x - 3:.1f}" y1="{y0:.1f}" x2="{x + 3:.1f}" y2="{y0:.1f}" stroke="{color}"/>')
            parts.append(f'<line x1="{x - 3:.1f}" y1="{y1:.1f}" x2="{x + 3:.1f}" y2="{y1:.1f}" stroke="{color}"/>')
        label = key[0] if key[1] == "-" else f"{key[0]}/{key[1]}"
        ly = top + 16 * i
        parts.append(f'<line x1="{right + 10}" y1="{ly}" x2="{right + 30}" y2="{ly}" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{right + 36}" y="{ly + 4}">{label}</text>')

    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
