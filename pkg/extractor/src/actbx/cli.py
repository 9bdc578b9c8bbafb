"""actbx command line: export Inception-v3 activations as ACTB files and
class-probability tables as CSV.

    actbx extract --input DIR|FILE.idx --layer pool64 --out acts.actb
    actbx probs   --input DIR|FILE.idx --out probs.csv
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .actb import write_actb
from .errors import ActbxError
from .inputs import load_source
from .model import LAYER_DIMS, ExtractionJob, InceptionTaps


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="image directory or IDX file")
    p.add_argument("--out", required=True)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--weights", default=None, help="state-dict file for the backbone")
    p.add_argument(
        "--pretrained",
        action="store_true",
        help="download the stock pretrained weights (needs network access)",
    )
    p.add_argument(
        "--seed",
        type=int,
        default=0,
        help="init seed used when no weights are given (keeps runs reproducible)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="actbx", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="write a feature-activation ACTB file")
    _add_common(p)
    p.add_argument("--layer", required=True, choices=sorted(LAYER_DIMS))
    p = sub.add_parser("probs", help="write a class-probability CSV")
    _add_common(p)
    return parser


def _load(args):
    images, skipped = load_source(args.input)
    for name in skipped:
        print(f"actbx: warning: skipped undecodable file {name}", file=sys.stderr)
    taps = InceptionTaps(
        weights_path=args.weights, pretrained=args.pretrained, seed=args.seed
    )
    if args.weights is None and not args.pretrained:
        print(
            f"actbx: note: no weights given; using seed-{args.seed} random "
            "initialization (pass --weights or --pretrained for trained features)",
            file=sys.stderr,
        )
    return images, taps


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "extract":
            job = ExtractionJob(
                input=args.input, layer=args.layer, output=args.out, batch=args.batch
            )
            images, taps = _load(args)
            acts = taps.activations(images, job.layer, batch=job.batch)
            write_actb(
                job.output, acts, layer_tag=job.layer, source_tag=Path(args.input).name
            )
            print(
                f"actbx: wrote {acts.shape[0]}x{acts.shape[1]} activations to {job.output}",
                file=sys.stderr,
            )
        else:
            images, taps = _load(args)
            probs = taps.class_probs(images, batch=args.batch)
            header = ",".join(f"c{i}" for i in range(probs.shape[1]))
            lines = [header]
            lines += [",".join(repr(float(v)) for v in row) for row in probs]
            Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
            print(
                f"actbx: wrote {probs.shape[0]}x{probs.shape[1]} probabilities to {args.out}",
                file=sys.stderr,
            )
    except ActbxError as exc:
        print(f"actbx {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
