"""Command-line pipelines: synthesize data, pretrain, adapt, evaluate,
measure divergence, export features, and sweep the untie depth.

Every run writes a `run.json` echo of its fully resolved configuration next
to its primary output, so identical resolved runs are reproducible bit for
bit. Dataset arguments accept either a manifest JSON (key "entries") or a
synthetic-domain config JSON (key "classes").
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import evaluate as ev
from . import model as md
from . import train as tr
from .data import (DomainDataset, ManifestError, load_domain,
                   synth_config_from_dict, synth_domain, synth_signal)


def _read_json(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"file not found: {p}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ValueError(f"{p}: invalid JSON ({e})")


def _load_dataset(path, domain_label: int) -> DomainDataset:
    obj = _read_json(path)
    if "entries" in obj:
        return load_domain(path, domain_label)
    if "classes" in obj:
        return synth_domain(synth_config_from_dict(obj), domain_label)
    raise ValueError(f"{path}: neither a manifest (entries) nor a "
                     f"synthetic config (classes)")


def _write_run_echo(primary_output, resolved: dict) -> None:
    directory = Path(primary_output).resolve().parent
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "run.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(resolved, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _resolve(flag, config: dict, key: str, default):
    """Flag value if given, else config-file value, else default."""
    if flag is not None:
        return flag
    if key in config:
        return config[key]
    return default


def _limit_threads(n: int | None) -> None:
    if n is None:
        env = os.environ.get("ADDA_THREADS")
        n = int(env) if env else None
    if n is None:
        return
    try:
        from threadpoolctl import threadpool_limits
        threadpool_limits(limits=n)
    except ImportError:
        pass  # sequential numpy paths; the cap is best-effort


# --- subcommands ----------------------------------------------------------------

def _cmd_synth(args) -> int:
    cfg = synth_config_from_dict(_read_json(args.config))
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    # one continuous signal per class; windowing at load time re-cuts it
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x5157]))
    entries = []
    for c, sig in enumerate(cfg.classes, start=1):
        length = cfg.samples_per_class * 4096
        signal = synth_signal(sig, cfg, rng, length=length)
        name = f"class_{c:02d}.f32"
        signal.astype("<f4").tofile(out / name)
        entries.append({"class_label": c, "path": name,
                        "windows": cfg.samples_per_class})
    manifest = {"version": 1, "domain": f"synth-shift{cfg.domain_shift}",
                "sample_rate": 12000.0, "seed": cfg.seed, "entries": entries}
    with open(out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    _write_run_echo(out / "manifest.json", {
        "command": "synth", "config": str(args.config), "out": str(out),
        "resolved": {"seed": cfg.seed, "domain_shift": cfg.domain_shift,
                     "amplitude_scale": cfg.amplitude_scale,
                     "noise_sigma": cfg.noise_sigma,
                     "samples_per_class": cfg.samples_per_class,
                     "num_classes": cfg.num_classes}})
    return 0


def _pretrain_config(args) -> tr.PretrainConfig:
    config = _read_json(args.config) if args.config else {}
    return tr.PretrainConfig(
        m=int(_resolve(args.batch, config, "m", 64)),
        iterations=int(_resolve(args.iters, config, "iterations", 2000)),
        lr=float(_resolve(args.lr, config, "lr", 1e-3)),
        seed=int(_resolve(args.seed, config, "seed", 0)),
    )


def _cmd_pretrain(args) -> int:
    cfg = _pretrain_config(args)
    dataset = _load_dataset(args.data, 0)
    extractor, log = tr.pretrain(dataset, cfg)
    md.save_model(args.out_model, extractor, phase="pretrained")
    if args.out_log:
        log.to_csv(args.out_log)
    _write_run_echo(args.out_model, {
        "command": "pretrain", "data": str(args.data),
        "out_model": str(args.out_model),
        "out_log": None if not args.out_log else str(args.out_log),
        "resolved": {"m": cfg.m, "iterations": cfg.iterations, "lr": cfg.lr,
                     "seed": cfg.seed}})
    return 0


def _finetune_config(args) -> tr.FinetuneConfig:
    config = _read_json(args.config) if args.config else {}
    untie = _resolve(getattr(args, "untie", None), config, "untie_count",
                     config.get("l", 7))
    return tr.FinetuneConfig(
        m=int(_resolve(args.batch, config, "m", 64)),
        iterations=int(_resolve(args.iters, config, "iterations", 3000)),
        k=int(_resolve(args.k, config, "k", 1)),
        untie_count=int(untie),
        lr_d=float(_resolve(args.lr_d, config, "lr_d", 1e-4)),
        lr_mt=float(_resolve(args.lr_mt, config, "lr_mt", 1e-4)),
        seed=int(_resolve(args.seed, config, "seed", 0)),
        snapshot_every=int(_resolve(getattr(args, "snapshot_every", None),
                                    config, "snapshot_every", 0)),
    )


def _snapshot_writer(directory):
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)

    def write(iteration: int, pair: md.TiedPair, _disc) -> None:
        md.save_model(out / f"target_iter{iteration:06d}.bin", pair.target,
                      untie_count=pair.untie_count, phase="adapted")

    return write


def _cmd_adapt(args) -> int:
    cfg = _finetune_config(args)
    source = _load_dataset(args.source, 0)
    target = _load_dataset(args.target, 1)
    source_model, _ = md.load_model(args.model)
    on_snapshot = _snapshot_writer(args.snapshot_dir) if args.snapshot_dir else None
    pair, _disc, log = tr.adversarial_finetune(source_model, source, target, cfg,
                                               on_snapshot=on_snapshot)
    md.save_model(args.out_model, pair.target, untie_count=cfg.untie_count,
                  phase="adapted")
    if args.out_log:
        log.to_csv(args.out_log)
    _write_run_echo(args.out_model, {
        "command": "adapt", "source": str(args.source), "target": str(args.target),
        "model": str(args.model), "out_model": str(args.out_model),
        "out_log": None if not args.out_log else str(args.out_log),
        "resolved": {"m": cfg.m, "iterations": cfg.iterations, "k": cfg.k,
                     "untie_count": cfg.untie_count, "lr_d": cfg.lr_d,
                     "lr_mt": cfg.lr_mt, "seed": cfg.seed,
                     "snapshot_every": cfg.snapshot_every}})
    return 0


def _cmd_eval(args) -> int:
    extractor, _ = md.load_model(args.model)
    dataset = _load_dataset(args.data, 0)
    report = ev.evaluate_classifier(extractor, dataset)
    report.to_json(args.out)
    _write_run_echo(args.out, {
        "command": "eval", "model": str(args.model), "data": str(args.data),
        "out": str(args.out), "resolved": {}})
    return 0


def _cmd_divergence(args) -> int:
    source_model, _ = md.load_model(args.source_model)
    target_model, _ = md.load_model(args.target_model)
    source = _load_dataset(args.source, 0)
    target = _load_dataset(args.target, 1)
    fs = md.extract_features_batch(source_model, source.amplitudes)
    ft = md.extract_features_batch(target_model, target.amplitudes)
    report = ev.proxy_a_distance(fs, ft, split_fraction=args.split_fraction,
                                 seed=args.seed if args.seed is not None else 0)
    report.to_json(args.out)
    _write_run_echo(args.out, {
        "command": "divergence", "source_model": str(args.source_model),
        "target_model": str(args.target_model), "source": str(args.source),
        "target": str(args.target), "out": str(args.out),
        "resolved": {"split_fraction": args.split_fraction,
                     "seed": args.seed if args.seed is not None else 0}})
    return 0


def _cmd_export_features(args) -> int:
    source_model, _ = md.load_model(args.source_model)
    target_model, _ = md.load_model(args.target_model)
    source = _load_dataset(args.source, 0)
    target = _load_dataset(args.target, 1)
    ev.export_features(source_model, target_model, source, target, args.out)
    _write_run_echo(args.out, {
        "command": "export-features", "source_model": str(args.source_model),
        "target_model": str(args.target_model), "source": str(args.source),
        "target": str(args.target), "out": str(args.out), "resolved": {}})
    return 0


def _cmd_sweep_l(args) -> int:
    source = _load_dataset(args.source, 0)
    target = _load_dataset(args.target, 1)
    source_model, _ = md.load_model(args.model)
    rows = ["l,src_accuracy,tgt_accuracy"]
    resolved_cfgs = {}
    for untie in range(1, 8):
        args.untie = untie
        cfg = _finetune_config(args)
        pair, _disc, _log = tr.adversarial_finetune(source_model, source,
                                                    target, cfg)
        src_acc = ev.evaluate_classifier(pair.source, source).accuracy
        tgt_acc = ev.evaluate_classifier(pair.target, target).accuracy
        rows.append(f"{untie},{src_acc!r},{tgt_acc!r}")
        resolved_cfgs[str(untie)] = {"m": cfg.m, "iterations": cfg.iterations,
                                     "k": cfg.k, "lr_d": cfg.lr_d,
                                     "lr_mt": cfg.lr_mt, "seed": cfg.seed}
    with open(args.out_csv, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")
    _write_run_echo(args.out_csv, {
        "command": "sweep-l", "source": str(args.source),
        "target": str(args.target), "model": str(args.model),
        "out_csv": str(args.out_csv), "resolved": resolved_cfgs})
    return 0


# --- argument grammar --------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adda",
        description="Adversarial domain adaptation pipelines for 1-D spectra.")
    parser.add_argument("--seed", type=int, default=None,
                        help="root seed; overrides config-file seeds")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap math-library threads (env ADDA_THREADS)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="materialize a synthetic domain to disk")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("pretrain", help="supervised training on source data")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--out-model", required=True)
    p.add_argument("--out-log")
    p.add_argument("--iters", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.set_defaults(func=_cmd_pretrain)

    p = sub.add_parser("adapt", help="adversarial finetuning toward a target domain")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--untie", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--config")
    p.add_argument("--out-model", required=True)
    p.add_argument("--out-log")
    p.add_argument("--iters", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr-d", type=float, dest="lr_d")
    p.add_argument("--lr-mt", type=float, dest="lr_mt")
    p.add_argument("--snapshot-every", type=int, dest="snapshot_every")
    p.add_argument("--snapshot-dir", dest="snapshot_dir")
    p.set_defaults(func=_cmd_adapt)

    p = sub.add_parser("eval", help="classification metrics of a model on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("divergence", help="proxy divergence between feature sets")
    p.add_argument("--source-model", required=True, dest="source_model")
    p.add_argument("--target-model", required=True, dest="target_model")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split-fraction", type=float, default=0.5,
                   dest="split_fraction")
    p.set_defaults(func=_cmd_divergence)

    p = sub.add_parser("export-features",
                       help="write per-sample features for external embedding")
    p.add_argument("--source-model", required=True, dest="source_model")
    p.add_argument("--target-model", required=True, dest="target_model")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export_features)

    p = sub.add_parser("sweep-l", help="adapt and evaluate for every untie depth")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--config")
    p.add_argument("--out-csv", required=True, dest="out_csv")
    p.add_argument("--iters", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr-d", type=float, dest="lr_d")
    p.add_argument("--lr-mt", type=float, dest="lr_mt")
    p.set_defaults(func=_cmd_sweep_l)
    return parser


def run(argv) -> int:
    """Parse argv and dispatch; raises on pipeline errors."""
    args = _build_parser().parse_args(argv)
    _limit_threads(args.threads)
    return args.func(args)


def main(argv=None) -> int:
    try:
        return run(sys.argv[1:] if argv is None else argv)
    except (ManifestError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
