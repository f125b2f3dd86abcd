"""Command-line pipeline driver.

Subcommands:
  synth       render a synthetic corpus (ground truth + corrupted masks)
  filter      gate predicted masks with box-motion attention maps
  eval        score predictions against ground truth (J, F, J&F)
  train-pt    fit the learned motion model on ground-truth box tracks
  gradcheck   finite-difference audit of all analytic gradients
  transplant  copy prefixed weights from one checkpoint into another

Exit codes: 0 success, 1 internal error (or failed gradcheck), 2 malformed
input, 3 missing dependency input (e.g. the pt variant without weights).
Every command is deterministic given its flags: rerunning writes the same
bytes.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import __version__, checkpoint, corpus, metrics, synth
from .boxes import bbox_from_mask
from .gradcheck import run_all
from .motion_mlp import MotionPredictor, dataset_loss, extract_triples, train_pt
from .tracker import FilterConfig, TrackRow, compose_label, filter_stream, write_track_csv

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_MISSING = 3


class MissingInputError(Exception):
    """A required companion input (weights file, mask dir) is absent."""


def _fail(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


def _dump_json(data: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_synth(args) -> int:
    with open(args.scene) as fh:
        data = json.load(fh)
    try:
        base = synth.scene_from_json(data)
    except (TypeError, ValueError) as exc:
        raise synth.SceneError(f"{args.scene}: {exc}") from exc
    if args.sequences < 1:
        raise synth.SceneError(f"--sequences must be >= 1, got {args.sequences}")
    os.makedirs(args.out, exist_ok=True)
    for k in range(args.sequences):
        cfg = dataclasses.replace(base, seed=base.seed + k)
        labels, tracks, clips = synth.generate(cfg)
        channels, _blobs = synth.corrupt(labels, cfg)
        seq_dir = os.path.join(args.out, f"{args.prefix}{k:04d}")
        corpus.write_mask_dir(os.path.join(seq_dir, corpus.GT_DIR), labels)
        composed = (
            compose_label(frame, (cfg.height, cfg.width)) for frame in channels
        )
        corpus.write_mask_dir(os.path.join(seq_dir, corpus.PRED_DIR), composed)
        rows = [
            TrackRow(frame=t, object_id=oid, box=box, source="gt")
            for oid in sorted(tracks)
            for t, box in enumerate(tracks[oid], start=1)
        ]
        rows.sort(key=lambda r: (r.frame, r.object_id))
        write_track_csv(rows, os.path.join(seq_dir, corpus.TRACKS_NAME))
        echo = synth.scene_to_json(cfg)
        echo["clipped"] = [[t, oid] for t, oid in clips]
        _dump_json(echo, os.path.join(seq_dir, corpus.SCENE_NAME))
    print(f"wrote {args.sequences} sequence(s) to {args.out}")
    return EXIT_OK


def _load_predictor(path) -> MotionPredictor:
    if not path:
        raise MissingInputError("variant 'pt' requires --weights")
    if not os.path.isfile(path):
        raise MissingInputError(f"weights file not found: {path}")
    store = checkpoint.load(path)
    try:
        return MotionPredictor.from_param_items(dict(store.items()))
    except ValueError as exc:
        raise checkpoint.CheckpointError(f"{path}: {exc}") from exc


def cmd_filter(args) -> int:
    model = _load_predictor(args.weights) if args.variant == "pt" else None
    cfg = FilterConfig(
        margin_frac=args.margin,
        threshold=args.threshold,
        keep_gates=args.dump_overlay,
    )
    sequences = corpus.list_sequences(args.in_corpus)
    for seq in sequences:
        mask_dir = corpus.sequence_mask_dir(args.in_corpus, seq, "pred")
        ids: set[int] = set()
        for frame in corpus.iter_mask_dir(mask_dir):
            ids.update(int(v) for v in np.unique(frame) if v != 0)
        id_list = sorted(ids)
        seq_out = os.path.join(args.out_corpus, seq)
        pred_out = os.path.join(seq_out, corpus.PRED_DIR)
        os.makedirs(pred_out, exist_ok=True)

        if not id_list:
            # Nothing to track; copy frames through and leave an empty log.
            for i, frame in enumerate(corpus.iter_mask_dir(mask_dir), start=1):
                corpus.write_pgm(os.path.join(pred_out, corpus.frame_name(i)), frame)
            write_track_csv([], os.path.join(seq_out, corpus.TRACKS_NAME))
            continue

        frames = (
            corpus.channels_from_labels(frame, id_list)
            for frame in corpus.iter_mask_dir(mask_dir)
        )
        rows: list[TrackRow] = []
        for out in filter_stream(frames, variant=args.variant, model=model, config=cfg):
            corpus.write_pgm(
                os.path.join(pred_out, corpus.frame_name(out.frame)), out.label
            )
            rows.extend(out.rows)
            if args.dump_overlay:
                for oid, gate in out.gates.items():
                    gate_dir = os.path.join(seq_out, "overlays", f"{oid:03d}")
                    os.makedirs(gate_dir, exist_ok=True)
                    corpus.write_pgm(
                        os.path.join(gate_dir, corpus.frame_name(out.frame)),
                        gate * np.uint8(255),
                    )
        write_track_csv(rows, os.path.join(seq_out, corpus.TRACKS_NAME))
    print(f"filtered {len(sequences)} sequence(s) to {args.out_corpus}")
    return EXIT_OK


def cmd_eval(args) -> int:
    pairs: dict[str, tuple[list, list]] = {}
    for seq in corpus.list_sequences(args.gt_corpus):
        gt_dir = corpus.sequence_mask_dir(args.gt_corpus, seq, "gt")
        pred_dir = corpus.sequence_mask_dir(args.pred_corpus, seq, "pred", required=False)
        if pred_dir is None:
            pred_dir = corpus.sequence_mask_dir(args.pred_corpus, seq, "gt")
        gt = corpus.read_mask_dir(gt_dir)
        pred = corpus.read_mask_dir(pred_dir)
        if len(pred) != len(gt):
            raise corpus.CorpusError(
                f"{seq}: prediction has {len(pred)} frames, ground truth {len(gt)}"
            )
        if pred[0].shape != gt[0].shape:
            raise corpus.CorpusError(
                f"{seq}: mask dims {pred[0].shape} vs {gt[0].shape}"
            )
        pairs[seq] = (pred, gt)
    report = metrics.evaluate_corpus(pairs)
    if args.report:
        metrics.write_report_csv(report, args.report)
    for line in metrics.summary_lines(report):
        print(line)
    return EXIT_OK


def cmd_train_pt(args) -> int:
    triples = []
    dims: tuple[int, int] | None = None
    for root in args.corpus:
        for seq in corpus.list_sequences(root):
            gt_dir = corpus.sequence_mask_dir(root, seq, "gt")
            frames = corpus.read_mask_dir(gt_dir)
            if dims is None:
                dims = frames[0].shape
            elif frames[0].shape != dims:
                raise corpus.CorpusError(
                    f"{seq}: frame dims {frames[0].shape} differ from {dims}; "
                    "motion normalization needs one frame size per run"
                )
            tracks = {
                oid: [bbox_from_mask(f, object_id=oid) for f in frames]
                for oid in corpus.label_ids(frames)
            }
            triples.extend(extract_triples(tracks))
    if not triples:
        raise corpus.CorpusError("no training examples (need runs of 3 boxes)")
    predictor = MotionPredictor.for_frame(dims[0], dims[1], seed=args.seed)
    history = train_pt(
        predictor,
        triples,
        epochs=args.epochs,
        batch=args.batch,
        lr=args.lr,
        lambda_small=args.lambda_small,
        weight_decay=args.weight_decay,
        seed=args.seed,
    )
    final = history[-1] if history else dataset_loss(predictor, triples, args.lambda_small)
    store = checkpoint.ParamStore.from_items(predictor.param_items())
    checkpoint.save(store, args.out)
    print(f"examples: {len(triples)}")
    print(f"final train loss: {final:.6f}")
    print(f"wrote weights to {args.out}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    results = run_all(base_seed=args.seed, n_seeds=args.seeds, size=args.size)
    failed = False
    for r in results:
        status = "PASS" if r.ok else "FAIL"
        print(f"{r.name:14s} max err {r.max_err:.3e}  tol {r.tol:.0e}  {status}")
        failed = failed or not r.ok
    return EXIT_INTERNAL if failed else EXIT_OK


def cmd_transplant(args) -> int:
    target = checkpoint.load(args.target)
    source = checkpoint.load(args.source)
    merged, report = checkpoint.transplant(
        target, source, prefix=args.prefix, strict=args.strict
    )
    checkpoint.save(merged, args.out)
    for line in report.lines():
        print(line)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voskit",
        description="Mask-sequence filtering, scoring, and motion-model tools.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic corpus from a scene config")
    p.add_argument("scene", help="scene config JSON")
    p.add_argument("out", help="output corpus directory")
    p.add_argument("--sequences", type=int, default=1, help="sequence count (seeds step by 1)")
    p.add_argument("--prefix", default="seq", help="sequence directory name prefix")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("filter", help="gate predicted masks with tracked boxes")
    p.add_argument("in_corpus", help="corpus with masks_pred to filter")
    p.add_argument("out_corpus", help="output corpus directory")
    p.add_argument("--variant", choices=["cv", "pt"], default="cv")
    p.add_argument("--weights", help="TVCK weights for the pt variant")
    p.add_argument("--margin", type=float, default=0.1, help="box expansion fraction")
    p.add_argument("--threshold", type=float, default=0.5, help="mask binarization threshold")
    p.add_argument("--dump-overlay", action="store_true", help="write attention-map PGMs")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("pred_corpus", help="corpus with masks_pred (falls back to masks_gt)")
    p.add_argument("gt_corpus", help="corpus with masks_gt")
    p.add_argument("--report", help="write per-frame scores CSV here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("train-pt", help="train the motion model on ground-truth tracks")
    p.add_argument("corpus", nargs="+", help="corpora with masks_gt")
    p.add_argument("--out", required=True, help="output TVCK weights path")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--lambda-small", type=float, default=2.0, dest="lambda_small")
    p.add_argument("--weight-decay", type=float, default=0.0, dest="weight_decay")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_pt)

    p = sub.add_parser("gradcheck", help="audit analytic gradients against finite differences")
    p.add_argument("--seed", type=int, default=0, help="first seed")
    p.add_argument("--seeds", type=int, default=10, help="number of seeds per check")
    p.add_argument("--size", type=int, default=16, help="grid side length for loss checks")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("transplant", help="copy prefixed weights between checkpoints")
    p.add_argument("--target", required=True, help="checkpoint receiving values")
    p.add_argument("--source", required=True, help="checkpoint providing values")
    p.add_argument("--prefix", required=True, help="name prefix to transplant")
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.add_argument("--strict", action="store_true", help="fail on shape mismatch")
    p.set_defaults(func=cmd_transplant)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MissingInputError as exc:
        _fail(str(exc))
        return EXIT_MISSING
    except (
        corpus.CorpusError,
        synth.SceneError,
        checkpoint.CheckpointError,
        json.JSONDecodeError,
        FileNotFoundError,
        NotADirectoryError,
    ) as exc:
        _fail(str(exc))
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - defensive
        _fail(f"internal: {type(exc).__name__}: {exc}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
