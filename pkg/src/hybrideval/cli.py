"""Command line entry point.

Subcommands: manifest, eval, project, report, pipeline. Stages communicate
only through documented files, so the pipeline can run end to end from
fixture interchange files with ``--skip-train``. Exit codes: 0 success,
2 data/pool problems, 3 predictions problems, 4 projection problems,
5 report problems, 64 usage errors. Every flag can be defaulted through an
environment variable named HYBRIDEVAL_<FLAG> (dashes become underscores).
"""

from __future__ import annotations

import argparse
import json
import os
import shlex
import subprocess
import sys

import numpy as np

from . import dataspec, metrics, report
from ._fsutil import write_json_atomic
from .clusterqual import ClusterError, LabeledPoints, davies_bouldin, silhouette
from .projection import (
    InterchangeError,
    ProjectionSizingError,
    TsneParams,
    UmapParams,
    read_embeddings,
    read_projection,
    tsne_run,
    umap_run,
    write_projection,
)

EXIT_OK = 0
EXIT_DATA = 2
EXIT_PREDICTIONS = 3
EXIT_PROJECTION = 4
EXIT_REPORT = 5
EXIT_USAGE = 64

ENV_PREFIX = "HYBRIDEVAL_"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _env_default(flag: str, fallback=None):
    return os.environ.get(ENV_PREFIX + flag.upper().replace("-", "_"), fallback)


def _expand_treatments(spec: str) -> list[str]:
    """Parse 'H0,H2' or 'H0..H4' (and mixtures) into a treatment list."""
    out: list[str] = []
    for token in spec.split(","):
        token = token.strip()
        if ".." in token:
            lo, hi = token.split("..", 1)
            lo_i = dataspec.TREATMENTS.index(lo)
            hi_i = dataspec.TREATMENTS.index(hi)
            out.extend(dataspec.TREATMENTS[lo_i : hi_i + 1])
        elif token:
            if token not in dataspec.TREATMENTS:
                raise ValueError(f"unknown treatment {token!r}")
            out.append(token)
    if not out:
        raise ValueError("no treatments requested")
    return out


def _parse_pools(spec: str) -> dict[str, str]:
    """Parse 'real=DIR,synth=DIR[,distractor=DIR]'."""
    out: dict[str, str] = {}
    for token in spec.split(","):
        if not token.strip():
            continue
        if "=" not in token:
            raise ValueError(f"pool spec {token!r} must look like kind=path")
        kind, path = token.split("=", 1)
        kind = kind.strip()
        if kind not in ("real", "synth", "distractor"):
            raise ValueError(f"unknown pool kind {kind!r}")
        out[kind] = path.strip()
    if "real" not in out:
        raise ValueError("pool spec must name a real pool")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hybrideval", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("manifest", help="build treatment manifests from image pools")
    p.add_argument("--pools", default=_env_default("pools"), required=_env_default("pools") is None,
                   help="real=DIR,synth=DIR[,distractor=DIR] (dirs or JSON listings)")
    p.add_argument("--treatments", default=_env_default("treatments", "H0..H4"))
    p.add_argument("--seed", type=int, default=int(_env_default("seed", 0)))
    p.add_argument("--real-per-class", type=int, default=int(_env_default("real_per_class", 750)))
    p.add_argument("--out", default=_env_default("out", "out"))
    p.set_defaults(func=cmd_manifest)

    p = sub.add_parser("eval", help="score a predictions CSV")
    p.add_argument("--predictions", required=True)
    p.add_argument("--out", default=_env_default("out", "out"))
    p.add_argument("--treatment", default="H0")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("project", help="project an embeddings CSV to 2D")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--method", choices=("tsne", "umap", "both"), default="both")
    p.add_argument("--perplexity", type=float, default=float(_env_default("perplexity", 30.0)))
    p.add_argument("--n-neighbors", type=int, default=int(_env_default("n_neighbors", 15)))
    p.add_argument("--min-dist", type=float, default=0.1)
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--seed", type=int, default=int(_env_default("seed", 0)))
    p.add_argument("--out", default=_env_default("out", "out"))
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("report", help="render SVG/markdown reports from stage outputs")
    p.add_argument("--eval-json", required=True)
    p.add_argument("--tsne-csv")
    p.add_argument("--umap-csv")
    p.add_argument("--scores-json")
    p.add_argument("--predictions")
    p.add_argument("--treatment", default="H0")
    p.add_argument("--out", default=_env_default("out", "out"))
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("pipeline", help="manifest -> train -> eval -> project -> report")
    p.add_argument("--pools", default=_env_default("pools"),
                   help="required unless --skip-train with prebuilt manifests")
    p.add_argument("--treatments", default=_env_default("treatments", "H0..H4"))
    p.add_argument("--seed", type=int, default=int(_env_default("seed", 0)))
    p.add_argument("--real-per-class", type=int, default=int(_env_default("real_per_class", 750)))
    p.add_argument("--perplexity", type=float, default=float(_env_default("perplexity", 30.0)))
    p.add_argument("--n-neighbors", type=int, default=int(_env_default("n_neighbors", 15)))
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--trainer-cmd", default=_env_default("trainer_cmd"),
                   help="command template with {manifest} {out} {seed} placeholders")
    p.add_argument("--skip-train", action="store_true")
    p.add_argument("--predictions", default=_env_default("predictions"),
                   help="with --skip-train: directory holding <T>/predictions.csv and <T>/embeddings.csv")
    p.add_argument("--out", default=_env_default("out", "out"))
    p.set_defaults(func=cmd_pipeline)

    return parser


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------


def _load_pools(pool_spec: str):
    pools = _parse_pools(pool_spec)
    real = dataspec.load_pool(pools["real"], "real")
    synth = dataspec.load_pool(pools["synth"], "synthetic") if "synth" in pools else []
    distractor = (
        dataspec.load_pool(pools["distractor"], "distractor") if "distractor" in pools else []
    )
    return real, synth, distractor


def _build_manifests(args, treatments):
    real, synth, distractor = _load_pools(args.pools)
    manifests = {}
    for treatment in treatments:
        cfg = dataspec.default_config(treatment, seed=args.seed, real_per_class=args.real_per_class)
        manifests[treatment] = dataspec.build_treatment(cfg, real, synth, distractor)
    return manifests


def _print_manifest_summary(manifest: dataspec.TreatmentManifest):
    counts = manifest.counts()
    per_class = {}
    for split in dataspec.SPLITS:
        known = [counts[split].get(c, 0) for c in dataspec.KNOWN_CLASSES]
        per_class[split] = known[0] if known else 0
    print(
        f"{manifest.config.treatment}: per-class train {per_class['train']:,} / "
        f"val {per_class['val']:,} / test {per_class['test']:,}"
    )


def cmd_manifest(args) -> int:
    treatments = _expand_treatments(args.treatments)
    manifests = _build_manifests(args, treatments)
    out_dir = os.path.join(args.out, "manifests")
    test_checksums = set()
    for treatment, manifest in manifests.items():
        path = os.path.join(out_dir, f"{treatment}.json")
        dataspec.write_manifest(manifest, path)
        _print_manifest_summary(manifest)
        test_checksums.add(manifest.test_checksum())
    if len(test_checksums) == 1:
        print(f"test checksum (shared): {test_checksums.pop()}")
    else:
        print(f"WARNING: test split differs across treatments: {sorted(test_checksums)}")
        return EXIT_DATA
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def _evaluate_predictions(pred_path, out_dir, treatment):
    records, class_names = metrics.read_predictions(pred_path)
    cm = metrics.confusion_matrix(records, len(class_names), class_names)
    ev = metrics.evaluation_dict(cm)
    path = os.path.join(out_dir, "eval", f"{treatment}.json")
    write_json_atomic(path, ev)
    return records, class_names, ev, path


def cmd_eval(args) -> int:
    records, class_names, ev, path = _evaluate_predictions(args.predictions, args.out, args.treatment)
    print(f"{args.treatment}: {len(records)} records, weighted F1 "
          f"{metrics.format_score(ev['weighted_f1'])} -> {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# project
# ---------------------------------------------------------------------------


def _project_embeddings(emb_path, out_dir, treatment, method, perplexity, n_neighbors,
                        min_dist, iters, epochs, seed):
    emb, class_names, _ = read_embeddings(emb_path)
    proj_dir = os.path.join(out_dir, "projection", treatment)
    scores = []
    outputs = {}

    methods = ("tsne", "umap") if method == "both" else (method,)
    for m in methods:
        if m == "tsne":
            params = TsneParams(perplexity=perplexity, total_iters=iters, seed=seed)
            result = tsne_run(emb, params)
        else:
            params = UmapParams(n_neighbors=n_neighbors, min_dist=min_dist,
                                n_epochs=epochs, seed=seed)
            result = umap_run(emb, params)
        csv_path = os.path.join(proj_dir, f"{m}.csv")
        write_projection(csv_path, result, emb.ids, emb.labels)
        outputs[m] = csv_path
        points = LabeledPoints(coords=result.coords, labels=emb.labels)
        _, sil = silhouette(points)
        scores.append(
            {"method": m, "space": "2d", "silhouette": sil, "dbi": davies_bouldin(points)}
        )

    # raw-space indices for comparison; reports default to the 2d rows
    raw_points = LabeledPoints(coords=emb.vectors, labels=emb.labels)
    _, raw_sil = silhouette(raw_points)
    scores.append(
        {"method": "raw", "space": "raw", "silhouette": raw_sil, "dbi": davies_bouldin(raw_points)}
    )

    scores_path = os.path.join(proj_dir, "cluster_scores.json")
    write_json_atomic(scores_path, scores)
    return outputs, scores, scores_path


def cmd_project(args) -> int:
    treatment = "adhoc"
    outputs, scores, scores_path = _project_embeddings(
        args.embeddings, args.out, treatment, args.method, args.perplexity,
        args.n_neighbors, args.min_dist, args.iters, args.epochs, args.seed,
    )
    for entry in scores:
        print(
            f"{entry['method']}: silhouette {entry['silhouette']:.4f}, dbi {entry['dbi']:.4f}"
        )
    print(f"scores -> {scores_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def _render_report(out_dir, treatment, ev, tsne_csv=None, umap_csv=None,
                   scores=None, records=None, class_names=None):
    rep_dir = os.path.join(out_dir, "report", treatment)
    os.makedirs(rep_dir, exist_ok=True)

    cm = metrics.ConfusionMatrix(
        counts=np.array(ev["confusion"], dtype=np.int64),
        class_names=tuple(ev["class_names"]),
    )
    report.render_confusion_svg(cm, os.path.join(rep_dir, "confusion.svg"),
                                title=f"{treatment} confusion matrix")

    for method, csv_path in (("tsne", tsne_csv), ("umap", umap_csv)):
        if not csv_path:
            continue
        ids, labels, coords = read_projection(csv_path)
        names = [ev["class_names"][l] for l in labels]
        report.render_scatter_svg(coords, names, os.path.join(rep_dir, f"{method}.svg"),
                                  title=f"{treatment} {method}")

    scores_2d = [s for s in (scores or []) if s.get("space", "2d") == "2d"]
    report.render_tables({treatment: ev}, {treatment: scores_2d},
                         os.path.join(rep_dir, "metrics.md"))
    write_json_atomic(os.path.join(rep_dir, "cluster_scores.json"), scores or [])
    if records is not None and class_names is not None:
        report.write_gallery(os.path.join(rep_dir, "gallery.json"), records, class_names)
    return rep_dir


def cmd_report(args) -> int:
    wanted = [args.eval_json] + [
        p for p in (args.tsne_csv, args.umap_csv, args.scores_json, args.predictions) if p
    ]
    missing = [p for p in wanted if not os.path.exists(p)]
    if missing:
        print(f"missing report inputs: {sorted(set(missing))}", file=sys.stderr)
        return EXIT_REPORT
    with open(args.eval_json, "r", encoding="utf-8") as fh:
        ev = json.load(fh)
    scores = None
    if args.scores_json:
        with open(args.scores_json, "r", encoding="utf-8") as fh:
            scores = json.load(fh)
    records = class_names = None
    if args.predictions:
        records, class_names = metrics.read_predictions(args.predictions)
    rep_dir = _render_report(args.out, args.treatment, ev, args.tsne_csv, args.umap_csv,
                             scores, records, class_names)
    print(f"report -> {rep_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------


def _run_trainer(template: str, manifest_path: str, out_dir: str, seed: int, log_path: str) -> int:
    cmd = shlex.split(template.format(manifest=manifest_path, out=out_dir, seed=seed))
    os.makedirs(os.path.dirname(log_path), exist_ok=True)
    with open(log_path, "w", encoding="utf-8") as log:
        proc = subprocess.run(cmd, stdout=log, stderr=subprocess.STDOUT)
    return proc.returncode


def _interchange_paths(root: str, treatment: str) -> tuple[str, str]:
    nested_pred = os.path.join(root, treatment, "predictions.csv")
    nested_emb = os.path.join(root, treatment, "embeddings.csv")
    if os.path.exists(nested_pred):
        return nested_pred, nested_emb
    return (
        os.path.join(root, f"{treatment}_predictions.csv"),
        os.path.join(root, f"{treatment}_embeddings.csv"),
    )


def cmd_pipeline(args) -> int:
    treatments = _expand_treatments(args.treatments)

    manifest_paths = {}
    if args.pools:
        manifests = _build_manifests(args, treatments)
        for treatment, manifest in manifests.items():
            path = os.path.join(args.out, "manifests", f"{treatment}.json")
            dataspec.write_manifest(manifest, path)
            _print_manifest_summary(manifest)
            manifest_paths[treatment] = path
    elif not args.skip_train:
        print("pipeline needs --pools unless --skip-train provides interchange files",
              file=sys.stderr)
        return EXIT_USAGE

    all_ev = {}
    all_scores = {}
    for treatment in treatments:
        if args.skip_train:
            if not args.predictions:
                print("--skip-train needs --predictions DIR", file=sys.stderr)
                return EXIT_USAGE
            pred_path, emb_path = _interchange_paths(args.predictions, treatment)
        else:
            if not args.trainer_cmd:
                print("pipeline needs --trainer-cmd or --skip-train", file=sys.stderr)
                return EXIT_USAGE
            train_out = os.path.join(args.out, "interchange", treatment)
            log_path = os.path.join(args.out, "logs", f"trainer_{treatment}.log")
            code = _run_trainer(args.trainer_cmd, manifest_paths[treatment], train_out,
                                args.seed, log_path)
            if code != 0:
                print(f"trainer failed for {treatment} (exit {code}); log: {log_path}",
                      file=sys.stderr)
                return code
            pred_path = os.path.join(train_out, "predictions.csv")
            emb_path = os.path.join(train_out, "embeddings.csv")

        if not os.path.exists(pred_path):
            print(f"missing predictions for {treatment}: {pred_path}", file=sys.stderr)
            return EXIT_PREDICTIONS
        records, class_names, ev, _ = _evaluate_predictions(pred_path, args.out, treatment)
        all_ev[treatment] = ev

        tsne_csv = umap_csv = None
        scores = []
        if os.path.exists(emb_path):
            outputs, scores, _ = _project_embeddings(
                emb_path, args.out, treatment, "both", args.perplexity,
                args.n_neighbors, 0.1, args.iters, args.epochs, args.seed,
            )
            tsne_csv = outputs.get("tsne")
            umap_csv = outputs.get("umap")
        all_scores[treatment] = [s for s in scores if s.get("space") == "2d"]

        _render_report(args.out, treatment, ev, tsne_csv, umap_csv, scores,
                       records, class_names)
        print(f"{treatment}: pipeline complete")

    report.render_tables(all_ev, all_scores, os.path.join(args.out, "report", "summary.md"))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (dataspec.PoolDeficiencyError, dataspec.DuplicateIdError, dataspec.SizingError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except metrics.PredictionsFormatError as exc:
        print(f"predictions error: {exc}", file=sys.stderr)
        return EXIT_PREDICTIONS
    except (ProjectionSizingError, InterchangeError) as exc:
        print(f"projection error: {exc}", file=sys.stderr)
        return EXIT_PROJECTION
    except ClusterError as exc:
        print(f"projection scoring error: {exc}", file=sys.stderr)
        return EXIT_PROJECTION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_REPORT


if __name__ == "__main__":
    sys.exit(main())
