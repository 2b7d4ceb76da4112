"""
Command-line driver.  Each stage reads and writes files under ``--out-dir`` so
intermediate results can be inspected or plotted:

    synth        WAVs + manifest.json from a scenario
    features     features.svfm, features.csv, windows.csv
    reconstruct  one WAV per coefficient band + band_energies.csv
    embed        embedding.csv, eigenvalues.csv
    cluster      clusters.csv
    knn          predictions.csv, confusion.json
    eval         confusion.json from predictions.csv or clusters.csv
    pipeline     features -> embed -> cluster -> knn
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import audio, classify, embedding, features, graph, synth
from .config import PipelineConfig
from .errors import VehAudioError

# flag -> config field
_FLAG_FIELDS = {
    "window_frames": "window_len_frames",
    "hop_frames": "hop_frames",
    "taper": "taper",
    "m": "m",
    "n_neighbors": "n_neighbors",
    "k_eigs": "k_eigs",
    "auto_k": "auto_k",
    "drop_trivial": "drop_trivial",
    "normalize_rows": "normalize_rows",
    "n_report_eigs": "n_report_eigs",
    "eigengap_k_max": "eigengap_k_max",
    "kmeans_k": "kmeans_k",
    "restarts": "kmeans_restarts",
    "kmeans_max_iters": "kmeans_max_iters",
    "knn_k": "knn_k",
    "seed": "seed",
    "threads": "threads",
    "out_dir": "out_dir",
}


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--out-dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--window-frames", type=int)
    p.add_argument("--hop-frames", type=int)
    p.add_argument("--taper", choices=("box", "hamming"))
    p.add_argument("--m", type=int)
    p.add_argument("--n-neighbors", type=int)
    p.add_argument("--k-eigs", type=int)
    p.add_argument("--auto-k", action="store_const", const=True)
    p.add_argument("--drop-trivial", action="store_const", const=True)
    p.add_argument("--normalize-rows", action="store_const", const=True)
    p.add_argument("--n-report-eigs", type=int)
    p.add_argument("--eigengap-k-max", type=int)
    p.add_argument("--kmeans-k", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--kmeans-max-iters", type=int)
    p.add_argument("--knn-k", type=int)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="vehaudio", description=__doc__.splitlines()[1])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="render a synthetic labeled dataset")
    p.add_argument("--scenario", help="scenario JSON (default: built-in three-vehicle scenario)")

    p = sub.add_parser("features", parents=[common], help="STFT magnitude features")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="mono or stereo WAV")
    src.add_argument("--manifest", help="segment manifest JSON")

    p = sub.add_parser("reconstruct", parents=[common], help="band-limited reconstructions")
    p.add_argument("--input", required=True)
    p.add_argument("--ranges", required=True, help="comma-separated lo:hi coefficient ranges")

    p = sub.add_parser("embed", parents=[common], help="spectral embedding")
    p.add_argument("--features", required=True, help="features.csv or features.svfm")

    p = sub.add_parser("cluster", parents=[common], help="K-means on the embedding")
    p.add_argument("--embedding", required=True)
    p.add_argument("--windows", help="windows.csv with true labels, for scoring")

    p = sub.add_parser("knn", parents=[common], help="KNN classification on the embedding")
    p.add_argument("--embedding", required=True)
    lab = p.add_mutually_exclusive_group(required=True)
    lab.add_argument("--manifest")
    lab.add_argument("--windows")

    p = sub.add_parser("eval", parents=[common], help="score predictions or clusters")
    what = p.add_mutually_exclusive_group(required=True)
    what.add_argument("--predictions")
    what.add_argument("--clusters")

    p = sub.add_parser("pipeline", parents=[common], help="features, embed, cluster and knn in one go")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input")
    src.add_argument("--manifest")
    return parser


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    overrides = {
        field: getattr(args, flag)
        for flag, field in _FLAG_FIELDS.items()
        if getattr(args, flag, None) is not None
    }
    return cfg.update(overrides).validate()


# --------------------------------------------------------------------------- #
# file helpers
# --------------------------------------------------------------------------- #
def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_windows(path: Path, times: np.ndarray, labels, train) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window_index", "time_s", "label", "role"])
        for i, t in enumerate(times):
            lab = "" if labels is None or labels[i] is None else labels[i]
            role = "train" if train is not None and train[i] else "test"
            w.writerow([i, _fmt(t), lab, role])
    return path


def read_windows(path: str | Path) -> tuple[np.ndarray, list[str | None], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    times = np.array([float(r["time_s"]) for r in rows])
    labels = [r["label"] or None for r in rows]
    train = np.array([r["role"] == "train" for r in rows], dtype=bool)
    return times, labels, train


def _class_order(labels) -> tuple[str, ...]:
    return tuple(dict.fromkeys(l for l in labels if l is not None))


def _out(cfg: PipelineConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --------------------------------------------------------------------------- #
# stages
# --------------------------------------------------------------------------- #
def cmd_synth(cfg: PipelineConfig, scenario_path: str | None) -> Path:
    if scenario_path:
        try:
            data = json.loads(Path(scenario_path).read_text())
        except OSError as exc:
            raise VehAudioError(f"{scenario_path}: {exc.strerror or exc}") from exc
        scen = synth.Scenario.from_dict(data)
    else:
        scen = synth.Scenario(seed=cfg.seed)
    out = _out(cfg)
    manifest = scen.render(out)
    print(f"wrote {len(manifest.entries)} passages, {len(manifest.classes())} classes -> {out / 'manifest.json'}")
    return out / "manifest.json"


def _load_source(cfg: PipelineConfig, wav: str | None, manifest: str | None):
    if manifest:
        comp = audio.composite(audio.SegmentManifest.load(manifest))
        labels, train = comp.window_labels(cfg.window_len_frames, cfg.hop_frames)
        return comp.signal, labels, train
    return audio.load_audio(wav), None, None


def cmd_features(cfg: PipelineConfig, wav: str | None = None, manifest: str | None = None) -> Path:
    sig, labels, train = _load_source(cfg, wav, manifest)
    sig = audio.remove_dc(sig)
    win = audio.window(sig, cfg.window_len_frames, cfg.hop_frames, cfg.taper)
    fm = features.stft(win, cfg.m)
    bad = fm.degenerate_rows()
    if bad.size:
        raise VehAudioError(f"window {bad[0]} has an all-zero spectrum (silent audio?)")
    out = _out(cfg)
    fm.save_binary(out / "features.svfm")
    fm.save_csv(out / "features.csv")
    write_windows(out / "windows.csv", fm.window_times_s, labels, train)
    dur = cfg.window_len_frames / sig.sample_rate_hz
    print(f"n={fm.n} windows, m={fm.m} coefficients, window={dur:g} s")
    return out / "features.csv"


def _parse_ranges(text: str) -> list[tuple[int, int]]:
    ranges = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        try:
            lo, hi = part.split(":")
            ranges.append((int(lo), int(hi)))
        except ValueError:
            raise VehAudioError(f"bad range {part!r}; expected lo:hi") from None
    if not ranges:
        raise VehAudioError("no coefficient ranges given")
    return ranges


def cmd_reconstruct(cfg: PipelineConfig, wav: str, ranges_text: str) -> list[Path]:
    ranges = _parse_ranges(ranges_text)
    sig = audio.load_audio(wav)
    w = cfg.window_len_frames
    out = _out(cfg)
    paths = []
    for lo, hi in ranges:
        rec = features.band_reconstruct(sig, [(lo, hi)], w)
        paths.append(audio.write_wav(out / f"band_{lo}_{hi}.wav", rec, encoding="float64"))
    energies = features.band_energies(sig, ranges, w)
    times = np.arange(energies.shape[0]) * w / sig.sample_rate_hz
    with open(out / "band_energies.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["time_s"] + [f"band_{lo}_{hi}" for lo, hi in ranges])
        for t, row in zip(times, energies):
            wr.writerow([_fmt(t)] + [_fmt(v) for v in row])
    print(f"wrote {len(paths)} band reconstructions to {out}")
    return paths


def _load_features(path: str) -> features.FeatureMatrix:
    p = Path(path)
    if not p.is_file():
        raise VehAudioError(f"{p}: no such file")
    if p.suffix == ".svfm":
        sibling = p.with_name("windows.csv")
        times = read_windows(sibling)[0] if sibling.is_file() else None
        return features.FeatureMatrix.load_binary(p, times)
    return features.FeatureMatrix.load_csv(p)


def cmd_embed(cfg: PipelineConfig, features_path: str) -> Path:
    fm = _load_features(features_path)
    if cfg.k_eigs > fm.n:
        raise VehAudioError(f"k_eigs={cfg.k_eigs} exceeds the number of windows ({fm.n})")
    g = graph.build_graph(fm.X, cfg.n_neighbors)
    L = embedding.build_sngl(g)
    n_eigs = min(fm.n, max(cfg.k_eigs, cfg.n_report_eigs))
    full = embedding.smallest_eigenpairs(L, n_eigs)
    evals = full.eigenvalues
    k_hi = min(cfg.eigengap_k_max, evals.size - 1)
    gap_k = embedding.eigengap_select(evals, 2, k_hi) if k_hi >= 2 else None
    k = gap_k if cfg.auto_k and gap_k is not None else cfg.k_eigs
    emb = embedding.Embedding(evals[:k], full.vectors[:, :k])

    out = _out(cfg)
    emb.save_csv(out / "embedding.csv", fm.window_times_s)
    with open(out / "eigenvalues.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["index", "eigenvalue", "gap_after"])
        for i, lam in enumerate(evals):
            gap = evals[i + 1] - lam if i + 1 < evals.size else float("nan")
            wr.writerow([i + 1, _fmt(lam), _fmt(gap)])
    report = {"eigenvalues": [float(v) for v in evals], "eigengap_k": gap_k, "k_used": k}
    (out / "eigengap.json").write_text(json.dumps(report, indent=2) + "\n")
    print(f"k={k} eigenvectors; largest eigengap after eigenvalue {gap_k}")
    return out / "embedding.csv"


def _embedding_points(cfg: PipelineConfig, path: str) -> tuple[np.ndarray, np.ndarray]:
    if not Path(path).is_file():
        raise VehAudioError(f"{path}: no such file")
    emb, times = embedding.Embedding.load_csv(path)
    return emb.coordinates(cfg.drop_trivial, cfg.normalize_rows), times


def cmd_cluster(cfg: PipelineConfig, embedding_path: str, windows_path: str | None = None) -> Path:
    pts, times = _embedding_points(cfg, embedding_path)
    res = classify.kmeans(
        pts, cfg.kmeans_k, cfg.kmeans_restarts, cfg.kmeans_max_iters, cfg.seed, cfg.threads
    )
    out = _out(cfg)
    truth = read_windows(windows_path)[1] if windows_path else None
    with open(out / "clusters.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["window_index", "time_s", "true_label", "cluster"])
        for i, (t, c) in enumerate(zip(times, res.labels)):
            lab = truth[i] if truth and truth[i] is not None else ""
            wr.writerow([i, _fmt(t), lab, int(c)])
    msg = f"K={cfg.kmeans_k}, best sse={res.sse:.6g} (restart {res.best_restart} of {cfg.kmeans_restarts})"
    if truth and any(l is not None for l in truth):
        keep = [i for i, l in enumerate(truth) if l is not None]
        _, acc = classify.align_clusters(res.labels[keep], [truth[i] for i in keep])
        msg += f", aligned accuracy={acc:.4f}"
    print(msg)
    return out / "clusters.csv"


def _manifest_windows(cfg: PipelineConfig, manifest: str):
    comp = audio.composite(audio.SegmentManifest.load(manifest))
    labels, train = comp.window_labels(cfg.window_len_frames, cfg.hop_frames)
    return labels, train, comp.classes


def cmd_knn(cfg: PipelineConfig, embedding_path: str, manifest: str | None = None, windows_path: str | None = None) -> float:
    pts, times = _embedding_points(cfg, embedding_path)
    if manifest:
        labels, train, classes = _manifest_windows(cfg, manifest)
    else:
        _, labels, train = read_windows(windows_path)
        classes = _class_order(labels)
    if len(labels) != pts.shape[0]:
        raise VehAudioError(f"{len(labels)} labeled windows but {pts.shape[0]} embedded rows")
    idx = np.flatnonzero(train & np.array([l is not None for l in labels]))
    if idx.size == 0:
        raise VehAudioError("no labeled training windows")
    lset = classify.LabeledSet(idx, [labels[i] for i in idx], classes)
    pred = classify.knn_classify(pts, lset, cfg.knn_k)

    out = _out(cfg)
    with open(out / "predictions.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["window_index", "time_s", "true_label", "predicted_label"])
        for i, (t, p) in enumerate(zip(times, pred)):
            wr.writerow([i, _fmt(t), labels[i] or "", p])
    scored = [i for i, l in enumerate(labels) if l is not None]
    cm = classify.confusion([labels[i] for i in scored], [pred[i] for i in scored], lset.classes)
    cm.save(out / "confusion.json")
    acc = classify.accuracy(cm)
    print(f"KNN K={cfg.knn_k}: accuracy={acc:.4f} over {len(scored)} windows")
    return acc


def cmd_eval(cfg: PipelineConfig, predictions: str | None = None, clusters: str | None = None) -> float:
    path = predictions or clusters
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.DictReader(fh) if r.get("true_label")]
    except OSError as exc:
        raise VehAudioError(f"{path}: {exc.strerror or exc}") from exc
    if not rows:
        raise VehAudioError(f"{path}: no rows with a true label")
    truth = [r["true_label"] for r in rows]
    classes = _class_order(truth)
    if predictions:
        pred = [r["predicted_label"] for r in rows]
        classes = classes + tuple(c for c in dict.fromkeys(pred) if c not in classes)
    else:
        mapping, _ = classify.align_clusters(np.array([int(r["cluster"]) for r in rows]), truth, classes)
        pred = [mapping[int(r["cluster"])] for r in rows]
        if None in pred:
            classes = classes + ("unmatched",)
            pred = ["unmatched" if p is None else p for p in pred]
    cm = classify.confusion(truth, pred, classes)
    cm.save(_out(cfg) / "confusion.json")
    acc = classify.accuracy(cm)
    print(f"accuracy={acc:.4f} over {len(rows)} windows")
    for cls, row in zip(classes, cm.counts):
        print(f"  {cls}: {' '.join(str(int(v)) for v in row)}")
    return acc


def cmd_pipeline(cfg: PipelineConfig, wav: str | None = None, manifest: str | None = None) -> None:
    feats = cmd_features(cfg, wav, manifest)
    emb = cmd_embed(cfg, str(feats))
    windows = Path(cfg.out_dir) / "windows.csv"
    cmd_cluster(cfg, str(emb), str(windows) if manifest else None)
    if manifest:
        cmd_knn(cfg, str(emb), windows_path=str(windows))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "synth":
            cmd_synth(cfg, args.scenario)
        elif args.command == "features":
            cmd_features(cfg, args.input, args.manifest)
        elif args.command == "reconstruct":
            cmd_reconstruct(cfg, args.input, args.ranges)
        elif args.command == "embed":
            cmd_embed(cfg, args.features)
        elif args.command == "cluster":
            cmd_cluster(cfg, args.embedding, args.windows)
        elif args.command == "knn":
            cmd_knn(cfg, args.embedding, args.manifest, args.windows)
        elif args.command == "eval":
            cmd_eval(cfg, args.predictions, args.clusters)
        elif args.command == "pipeline":
            cmd_pipeline(cfg, args.input, args.manifest)
    except (VehAudioError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
