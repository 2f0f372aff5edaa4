"""Command-line harness: dataset synthesis, training, k-fold evaluation,
inference timing, and enhancement-node sweeps.

Every run command reads a JSON run configuration (validated against the
shipped schema) and writes machine-readable reports plus a human-readable
summary into the output directory. All randomness is seeded through the
config, so re-running a command reproduces identical reports except for
explicit wall-clock fields.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import fixtures
from .bls import BlsConfig, FlatBlsConfig, save_flat
from .data import (
    DatasetManifest,
    SynthConfig,
    encode_clip,
    load_sbu_dir,
    manifest_from_sequences,
    parse_jsonl,
    synth_generate,
    write_jsonl,
)
from .evaluate import (
    dwnet_fold_features,
    load_schema,
    make_runner,
    run_cv,
    sweep_enhancement,
    time_inference,
    validate_report,
)
from .hcn import HcnConfig, save_hcn
from .models import save_dwnet, save_hcnbls
from .nn import SgdConfig, dump_json

DEFAULT_BENCH_MODELS = ["hcn", "dwnet"]


# ---------------------------------------------------------------------------
# Config and dataset loading
# ---------------------------------------------------------------------------

def load_run_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"run config not found: {path}")
    doc = json.loads(path.read_text())
    try:
        jsonschema.validate(doc, load_schema("run_config"))
    except jsonschema.ValidationError as exc:
        raise ValueError(f"run config violates the schema: {exc.message}") from None
    return doc


def load_dataset(ds_config: dict):
    """Resolve the dataset section to (sequences, manifest)."""
    kind = ds_config["kind"]
    if kind == "synthetic":
        return synth_generate(SynthConfig(**ds_config.get("synth", {})))
    if "path" not in ds_config:
        raise ValueError(f"dataset kind {kind!r} requires a path")
    path = Path(ds_config["path"])
    if kind == "jsonl":
        if not path.exists():
            raise FileNotFoundError(f"dataset file not found: {path}")
        manifest_path = ds_config.get("manifest")
        if manifest_path:
            manifest = DatasetManifest.load(manifest_path)
            seqs = parse_jsonl(path, expected_joints=manifest.joints,
                               expected_persons=manifest.persons)
        else:
            seqs = parse_jsonl(path)
            manifest = manifest_from_sequences(seqs)
        return seqs, manifest
    # sbu-dir
    return load_sbu_dir(path)


def resolve_configs(doc: dict, manifest: DatasetManifest
                    ) -> tuple[HcnConfig, BlsConfig, FlatBlsConfig]:
    """Merge config-file overrides over defaults; geometry and class count
    always come from the dataset manifest."""
    seed = int(doc.get("seed", 0))
    h = dict(doc.get("hcn", {}))
    hcn_config = HcnConfig(
        t_frames=h.get("t_frames", 16),
        joints=manifest.joints,
        persons=manifest.persons,
        num_classes=manifest.num_classes,
        channels=tuple(h.get("channels", (64, 32, 32, 64, 128))),
        feature_dim=h.get("feature_dim", 64),
        dropout_rate=h.get("dropout_rate", 0.5),
        crop_ratio=h.get("crop_ratio"),
        sgd=SgdConfig(
            learning_rate=h.get("learning_rate", 0.01),
            momentum=h.get("momentum", 0.9),
            weight_decay=h.get("weight_decay", 1e-4),
            epochs=h.get("epochs", 300),
            batch_size=h.get("batch_size", 32),
            seed=seed,
        ),
    )
    b = dict(doc.get("bls", {}))
    bls_config = BlsConfig(m=b.get("m", 550), scale=b.get("scale", 0.8),
                           ridge_lambda=b.get("ridge_lambda", 1e-8), seed=seed)
    f = dict(doc.get("flat", {}))
    flat_config = FlatBlsConfig(
        n_feature_nodes=f.get("n_feature_nodes", 100), m=f.get("m", 8000),
        scale=f.get("scale", 0.8), ridge_lambda=f.get("ridge_lambda", 1e-8),
        seed=seed,
    )
    return hcn_config, bls_config, flat_config


def _out_dir(args, doc: dict | None = None) -> Path:
    out = args.out or (doc or {}).get("output_dir")
    if not out:
        raise ValueError("no output directory: pass --out or set output_dir")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------

def render_summary(eval_doc: dict | None = None, timing_doc: dict | None = None,
                   sweep_doc: dict | None = None) -> str:
    lines: list[str] = []
    if eval_doc:
        lines.append(f"model: {eval_doc['model']}")
        lines.append(f"{eval_doc['k']}-fold cross-validation over "
                     f"{eval_doc['n_samples']} samples (seed {eval_doc['seed']})")
        for i, acc in enumerate(eval_doc["fold_accuracies"], start=1):
            lines.append(f"  fold {i}: {acc:.2f}%")
        lines.append(f"average accuracy: {eval_doc['average_accuracy']:.2f}%")
        for w in eval_doc["warnings"]:
            lines.append(f"warning: {w}")
        diff = eval_doc.get("reference_diff")
        if diff:
            lines.append(
                f"reference comparison: observed {diff['observed_average']:.2f}% "
                f"vs published {diff['reference_average']:.2f}% "
                f"(difference {diff['difference']:+.2f} points, "
                f"margin {diff['margin']:.1f}) -> {diff['verdict']}"
            )
    if timing_doc:
        lines.append(f"inference timing on {timing_doc['dataset']} "
                     f"({timing_doc['reps']} reps x {timing_doc['n_samples']} samples):")
        for name, sec in sorted(timing_doc["entries"].items()):
            lines.append(f"  {name}: {sec:.3e} s/sample")
        lines.append(f"hardware: {timing_doc['hardware']}")
    if sweep_doc:
        lines.append(f"enhancement-node sweep ({len(sweep_doc['points'])} points, "
                     f"seed {sweep_doc['seed']}):")
        for p in sweep_doc["points"]:
            lines.append(f"  m={p['m']}: {p['average_accuracy']:.2f}%")
        lines.append(f"best m: {sweep_doc['best_m']}")
    if not lines:
        lines.append("nothing to report")
    return "\n".join(lines) + "\n"


def _emit(out: Path, summary: str) -> None:
    (out / "summary.txt").write_text(summary)
    print(summary, end="")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    config = SynthConfig(classes=args.classes,
                         sequences_per_class=args.per_class,
                         joints=args.joints, persons=args.persons,
                         frames=args.frames, noise_sigma=args.noise_sigma,
                         seed=args.seed)
    seqs, manifest = synth_generate(config)
    out = _out_dir(args)
    write_jsonl(seqs, out / "data.jsonl")
    manifest.save(out / "manifest.json")
    print(f"wrote {len(seqs)} sequences ({manifest.num_classes} classes) to {out}")
    return 0


def cmd_eval(args) -> int:
    doc = load_run_config(args.config)
    out = _out_dir(args, doc)
    seqs, manifest = load_dataset(doc["dataset"])
    hcn_config, bls_config, flat_config = resolve_configs(doc, manifest)
    runner = make_runner(doc["model"], hcn_config, bls_config, flat_config,
                         n_mappers=doc.get("n_mappers", 15),
                         seed=doc.get("seed", 0))
    report = run_cv(runner, seqs, manifest, k=doc.get("k_folds", 5),
                    seed=doc.get("seed", 0))
    if doc["dataset"]["kind"] == "sbu-dir":
        report.reference_diff = fixtures.reference_diff(
            doc["model"], report.average_accuracy)
    report_doc = report.to_dict()
    validate_report(report_doc, "eval_report")
    dump_json(report_doc, out / "eval_report.json")
    names = report.class_names
    _write_csv(out / "confusion.csv", ["true\\predicted"] + names,
               [[names[i]] + [int(v) for v in row]
                for i, row in enumerate(report.confusion)])
    _write_csv(out / "confusion_normalized.csv", ["true\\predicted"] + names,
               [[names[i]] + [f"{v:.6f}" for v in row]
                for i, row in enumerate(report.confusion_normalized)])
    _emit(out, render_summary(eval_doc=report_doc))
    return 0


def cmd_train(args) -> int:
    doc = load_run_config(args.config)
    out = _out_dir(args, doc)
    seqs, manifest = load_dataset(doc["dataset"])
    hcn_config, bls_config, flat_config = resolve_configs(doc, manifest)
    kind = doc["model"]
    runner = make_runner(kind, hcn_config, bls_config, flat_config,
                         n_mappers=doc.get("n_mappers", 15),
                         seed=doc.get("seed", 0))
    model = runner.fit(seqs)
    preds = np.asarray(runner.predict(model, seqs))
    truth = np.array([s.label for s in seqs])
    accuracy = float(100.0 * np.mean(preds == truth))
    target = out / "model"
    if kind == "hcn":
        save_hcn(model, target)
    elif kind == "dwnet":
        save_dwnet(model, target)
    elif kind == "hcnbls":
        save_hcnbls(model, target)
    else:
        save_flat(model, target)
    summary = (f"model: {kind}\ntrained on {len(seqs)} sequences\n"
               f"training accuracy: {accuracy:.2f}%\nsaved to: {target}\n")
    _emit(out, summary)
    return 0


def cmd_bench(args) -> int:
    doc = load_run_config(args.config)
    out = _out_dir(args, doc)
    seqs, manifest = load_dataset(doc["dataset"])
    hcn_config, bls_config, flat_config = resolve_configs(doc, manifest)
    kinds = doc.get("bench_models", DEFAULT_BENCH_MODELS)
    predictors = {}
    for kind in kinds:
        runner = make_runner(kind, hcn_config, bls_config, flat_config,
                             n_mappers=doc.get("n_mappers", 15),
                             seed=doc.get("seed", 0))
        model = runner.fit(seqs)
        predictors[kind] = (lambda clip, r=runner, m=model:
                            r.predict_single(m, clip))
    samples = [encode_clip(s, hcn_config.t_frames, hcn_config.joints)
               for s in seqs[:max(1, args.samples)]]
    report = time_inference(predictors, samples, reps=args.reps,
                            dataset=doc["dataset"]["kind"])
    report_doc = report.to_dict()
    validate_report(report_doc, "timing_report")
    dump_json(report_doc, out / "timing_report.json")
    _write_csv(out / "timing.csv", ["dataset"] + list(kinds),
               [[report.dataset] + [f"{report.entries[k]:.6e}" for k in kinds]])
    _emit(out, render_summary(timing_doc=report_doc))
    return 0


def cmd_sweep(args) -> int:
    doc = load_run_config(args.config)
    out = _out_dir(args, doc)
    if doc["model"] != "dwnet":
        raise ValueError("the enhancement sweep applies to the dwnet model only")
    seqs, manifest = load_dataset(doc["dataset"])
    hcn_config, bls_config, _ = resolve_configs(doc, manifest)
    k = doc.get("k_folds", 5)
    seed = doc.get("seed", 0)
    folds = dwnet_fold_features(seqs, manifest, k, hcn_config, seed)
    report = sweep_enhancement(folds, bls_config, args.m_start, args.m_end,
                               args.m_step, manifest.num_classes, k=k, seed=seed)
    report_doc = report.to_dict()
    validate_report(report_doc, "sweep_report")
    dump_json(report_doc, out / "sweep_report.json")
    _write_csv(out / "sweep.csv", ["m", "average_accuracy"],
               [[p["m"], f"{p['average_accuracy']:.6f}"] for p in report.points])
    _emit(out, render_summary(sweep_doc=report_doc))
    return 0


def cmd_report(args) -> int:
    run_dir = Path(args.run)
    if not run_dir.is_dir():
        raise FileNotFoundError(f"run directory not found: {run_dir}")
    docs = {}
    for name in ("eval_report", "timing_report", "sweep_report"):
        path = run_dir / f"{name}.json"
        if path.exists():
            docs[name] = json.loads(path.read_text())
    if not docs:
        raise FileNotFoundError(f"no report JSON files in {run_dir}")
    summary = render_summary(eval_doc=docs.get("eval_report"),
                             timing_doc=docs.get("timing_report"),
                             sweep_doc=docs.get("sweep_report"))
    _emit(run_dir, summary)
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dwnet",
        description="DWnet skeleton action recognition harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--classes", type=int, default=8)
    p.add_argument("--per-class", type=int, default=20, dest="per_class")
    p.add_argument("--joints", type=int, default=15)
    p.add_argument("--persons", type=int, default=2)
    p.add_argument("--frames", type=int, default=40)
    p.add_argument("--noise-sigma", type=float, default=1.5, dest="noise_sigma")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    for name, func, help_text in (
        ("train", cmd_train, "train one model on the full dataset"),
        ("eval", cmd_eval, "k-fold cross-validation"),
        ("bench", cmd_bench, "single-sample inference timing"),
        ("sweep", cmd_sweep, "enhancement-node sweep"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        if name == "bench":
            p.add_argument("--reps", type=int, default=100)
            p.add_argument("--samples", type=int, default=5)
        if name == "sweep":
            p.add_argument("--m-start", type=int, default=50, dest="m_start")
            p.add_argument("--m-end", type=int, default=1100, dest="m_end")
            p.add_argument("--m-step", type=int, default=50, dest="m_step")
        p.set_defaults(func=func)

    p = sub.add_parser("report", help="re-render the summary for a run directory")
    p.add_argument("--run", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
