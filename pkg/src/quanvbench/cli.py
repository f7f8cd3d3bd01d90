"""Command-line entry point.

    quanvbench quanvolve ...   transform a dataset subset into a QNVF cache
    quanvbench sweep ...       run a full robustness sweep from a config file
    quanvbench verify          run the oracle suites (release gate)

Exit codes: 0 success, 1 internal failure, 2 usage or config error.

Sweep configs are flat ``key = value`` text files ('#' comments allowed).
Recognized keys, with defaults in brackets:

    dataset        mnist | fmnist                          [mnist]
    source         idx | synthetic                         [idx]
    dataset_dir    directory with the IDX files (source=idx)
    n_train        training subset size                    [50]
    n_test         test subset size                        [30]
    subset_seed    subset selection seed                   [0]
    synth_count    pool size when source=synthetic         [600]
    synth_seed     generator seed when source=synthetic    [7]
    architectures  comma list                              [classical_cnn, classical_fc, qunn]
    ansatz_list    comma list                              [all five]
    attack_list    comma list                              [fgsm, pgd, mim]
    epsilons       comma list, ascending, starts at 0      [0, 0.01, 0.05, 0.1, 0.3, 0.5, 1, 2, 5, 10]
    epsilons_fgsm_extra  appended for FGSM only            [15]
    trials         repetitions per cell                    [7]
    base_seed      master seed                             [0]
    mode           surrogate | end_to_end                  [surrogate]
    clamp          true to clip adversarial pixels to [0,1]  [false]
    rescale        true maps feature channels to [0, 1]    [false]
    cache          true to keep QNVF caches in the out dir [true]
    train.epochs / train.batch_size / train.lr / train.optimizer   [30 / 4 / 0.001 / adam]
    random.depth / random.two_qubit_prob                   [2 / 0.3]

All randomness flows from seeds named above; nothing is seeded from the
clock.  source=idx expects the conventional file names
(train-images-idx3-ubyte, train-labels-idx1-ubyte, t10k-images-idx3-ubyte,
t10k-labels-idx1-ubyte) inside dataset_dir; source=synthetic uses the
built-in procedural stand-in corpus instead.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import traceback

import numpy as np

from . import __version__, data, harness, nn, quanv, synthdata, verify
from .ansatz import AnsatzKind, RandomCircuitSpec, build_ansatz
from .attacks import AttackKind
from .data import Dataset
from .nn import Architecture
from .quanv import QuanvConfig

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

_IDX_NAMES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


class ConfigError(ValueError):
    pass


_CONFIG_DEFAULTS = {
    "dataset": "mnist",
    "source": "idx",
    "dataset_dir": "",
    "n_train": "50",
    "n_test": "30",
    "subset_seed": "0",
    "synth_count": "600",
    "synth_seed": "7",
    "architectures": "classical_cnn, classical_fc, qunn",
    "ansatz_list": "no_entanglement, zz_full, zz_linear, zz_star, random",
    "attack_list": "fgsm, pgd, mim",
    "epsilons": "0, 0.01, 0.05, 0.1, 0.3, 0.5, 1, 2, 5, 10",
    "epsilons_fgsm_extra": "15",
    "trials": "7",
    "base_seed": "0",
    "mode": "surrogate",
    "clamp": "false",
    "rescale": "false",
    "cache": "true",
    "train.epochs": "30",
    "train.batch_size": "4",
    "train.lr": "0.001",
    "train.optimizer": "adam",
    "random.depth": "2",
    "random.two_qubit_prob": "0.3",
}


def parse_config_text(text: str) -> dict[str, str]:
    """Flat key = value lines over the documented defaults."""
    resolved = dict(_CONFIG_DEFAULTS)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        resolved[key] = value
    return resolved


def _parse_bool(key: str, value: str) -> bool:
    if value.lower() in ("true", "yes", "1"):
        return True
    if value.lower() in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {value!r}")


def _parse_list(value: str) -> list[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def _parse_enum_list(key, value, enum_cls):
    out = []
    for name in _parse_list(value):
        try:
            out.append(enum_cls(name))
        except ValueError:
            valid = ", ".join(e.value for e in enum_cls)
            raise ConfigError(f"{key}: unknown name {name!r} (valid: {valid})")
    if not out:
        raise ConfigError(f"{key}: empty list")
    return tuple(out)


def load_dataset_pair(cfg: dict[str, str]) -> tuple[Dataset, Dataset]:
    """Resolve config to stratified train/test subsets."""
    name = cfg["dataset"].lower()
    if name not in ("mnist", "fmnist"):
        raise ConfigError(f"dataset: expected mnist or fmnist, got {cfg['dataset']!r}")
    n_train, n_test = int(cfg["n_train"]), int(cfg["n_test"])
    seed = int(cfg["subset_seed"])

    if cfg["source"] == "synthetic":
        pool = synthdata.synthetic_dataset(name, int(cfg["synth_count"]), int(cfg["synth_seed"]))
        return data.subset(pool, n_train, n_test, seed)
    if cfg["source"] != "idx":
        raise ConfigError(f"source: expected idx or synthetic, got {cfg['source']!r}")
    if not cfg["dataset_dir"]:
        raise ConfigError("dataset_dir is required when source = idx")

    root = os.path.join(cfg["dataset_dir"], name)
    if not os.path.isdir(root):
        root = cfg["dataset_dir"]
    splits = {}
    for split, (img_name, lbl_name) in _IDX_NAMES.items():
        img_path, lbl_path = os.path.join(root, img_name), os.path.join(root, lbl_name)
        for p in (img_path, lbl_path):
            if not os.path.exists(p):
                raise FileNotFoundError(f"missing dataset file: {p}")
        splits[split] = data.load_idx(img_path, lbl_path, name)
    train_pool, test_pool = splits["train"], splits["test"]
    train, _ = data.subset(train_pool, n_train, 0, harness.stable_seed(seed, "train"))
    test, _ = data.subset(test_pool, n_test, 0, harness.stable_seed(seed, "test"))
    return train, test


def build_sweep_config(cfg: dict[str, str], out_dir: str | None) -> harness.SweepConfig:
    train, test = load_dataset_pair(cfg)
    epsilons = tuple(float(e) for e in _parse_list(cfg["epsilons"]))
    extra = tuple(float(e) for e in _parse_list(cfg["epsilons_fgsm_extra"]))
    cache_dir = None
    if _parse_bool("cache", cfg["cache"]) and out_dir is not None:
        cache_dir = os.path.join(out_dir, "cache")
    try:
        return harness.SweepConfig(
            train_data=train,
            test_data=test,
            architectures=_parse_enum_list("architectures", cfg["architectures"], Architecture),
            ansatz_kinds=_parse_enum_list("ansatz_list", cfg["ansatz_list"], AnsatzKind),
            attacks=_parse_enum_list("attack_list", cfg["attack_list"], AttackKind),
            epsilons=epsilons,
            fgsm_extra_epsilons=extra,
            trials=int(cfg["trials"]),
            base_seed=int(cfg["base_seed"]),
            mode=cfg["mode"],
            clamp=(0.0, 1.0) if _parse_bool("clamp", cfg["clamp"]) else None,
            rescale_features=_parse_bool("rescale", cfg["rescale"]),
            train_cfg=nn.TrainConfig(
                batch_size=int(cfg["train.batch_size"]),
                epochs=int(cfg["train.epochs"]),
                learning_rate=float(cfg["train.lr"]),
                optimizer=cfg["train.optimizer"],
            ),
            random_spec=RandomCircuitSpec(
                depth=int(cfg["random.depth"]),
                two_qubit_prob=float(cfg["random.two_qubit_prob"]),
            ),
            cache_dir=cache_dir,
        )
    except ValueError as exc:
        raise ConfigError(str(exc))


def config_hash(cfg: dict[str, str]) -> str:
    canonical = "\n".join(f"{k}={cfg[k]}" for k in sorted(cfg))
    return hashlib.blake2b(canonical.encode(), digest_size=16).hexdigest()


def _write_manifest(out_dir, cfg, status, n_records, error=None):
    manifest = {
        "tool": "quanvbench",
        "version": __version__,
        "status": status,
        "config": cfg,
        "config_hash": config_hash(cfg),
        "records_written": n_records,
    }
    if error is not None:
        manifest["error"] = error
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_quanvolve(args) -> int:
    cfg = dict(_CONFIG_DEFAULTS)
    cfg.update(
        dataset=args.dataset,
        source="synthetic" if args.synthetic else "idx",
        dataset_dir=args.dataset_dir or "",
        n_train=str(args.n_train),
        n_test=str(args.n_test),
    )
    train, test = load_dataset_pair(cfg)
    kind = AnsatzKind(args.ansatz)
    circuit = build_ansatz(kind, 4, seed=args.seed)
    qcfg = QuanvConfig(circuit=circuit)
    images = np.concatenate([train.images, test.images])
    maps = quanv.quanvolve_dataset(images, qcfg).astype(np.float32)
    meta = harness.stable_seed(args.dataset, kind.value, args.seed)
    quanv.write_qnvf(args.out, maps, meta_hash=meta)
    print(
        f"wrote {args.out}: {maps.shape[0]} maps of "
        f"{maps.shape[1]}x{maps.shape[2]}x{maps.shape[3]}, "
        f"values in [{maps.min():.4f}, {maps.max():.4f}] "
        f"({kind.value}, seed {args.seed})"
    )
    return EXIT_OK


def cmd_sweep(args) -> int:
    with open(args.config) as fh:
        cfg = parse_config_text(fh.read())
    if args.seed is not None:
        cfg["base_seed"] = str(args.seed)
    os.makedirs(args.out, exist_ok=True)
    sweep_cfg = build_sweep_config(cfg, args.out)
    csv_path = os.path.join(args.out, "results.csv")

    records = []
    try:
        for batch in harness.iter_sweep(sweep_cfg, threads=args.threads):
            records.extend(batch)
    except Exception as exc:  # preserve partial output, mark the run failed
        records.sort(key=harness.SweepRecord.sort_key)
        if records:
            harness.emit_csv(records, csv_path)
        _write_manifest(args.out, cfg, "FAILED", len(records),
                        error=f"{type(exc).__name__}: {exc}")
        print(f"sweep failed: {exc}", file=sys.stderr)
        traceback.print_exc()
        return EXIT_FAILURE

    records.sort(key=harness.SweepRecord.sort_key)
    harness.emit_csv(records, csv_path)
    aggregated = harness.aggregate(records, expected_trials=sweep_cfg.trials)
    for attack in sweep_cfg.attacks:
        subset_rows = [a for a in aggregated if a.attack == attack.value]
        harness.emit_plot(subset_rows, os.path.join(args.out, f"plot_{attack.value}.svg"))
    _write_manifest(args.out, cfg, "ok", len(records))
    print(f"wrote {csv_path} ({len(records)} records) and "
          f"{len(sweep_cfg.attacks)} plot(s) to {args.out}")
    return EXIT_OK


def cmd_verify(_args) -> int:
    results = verify.run_all()
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"[{status}] {r.name}: {r.detail} ({r.seconds:.1f}s)")
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} oracle suites passed")
    return EXIT_OK if not failed else EXIT_FAILURE


def _default_threads() -> int:
    env = os.environ.get("QUANVBENCH_THREADS")
    return int(env) if env else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quanvbench", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    q = sub.add_parser("quanvolve", help="write a quanvolved QNVF cache")
    q.add_argument("--dataset", default="mnist", choices=("mnist", "fmnist"))
    q.add_argument("--dataset-dir", help="directory with the IDX files")
    q.add_argument("--synthetic", action="store_true",
                   help="use the built-in stand-in corpus instead of IDX files")
    q.add_argument("--ansatz", default="zz_full",
                   choices=[k.value for k in AnsatzKind])
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--n-train", type=int, default=50)
    q.add_argument("--n-test", type=int, default=30)
    q.add_argument("--out", required=True)
    q.set_defaults(fn=cmd_quanvolve)

    s = sub.add_parser("sweep", help="run a robustness sweep from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--threads", type=int, default=_default_threads())
    s.add_argument("--seed", type=int, help="override base_seed from the config")
    s.set_defaults(fn=cmd_sweep)

    v = sub.add_parser("verify", help="run the oracle suites")
    v.set_defaults(fn=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError, data.IdxParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        traceback.print_exc()
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
