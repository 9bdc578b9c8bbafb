"""Command-line surface.

Every subcommand writes a RunReport JSON document to stdout and a short
human-readable summary to stderr. Exit codes: 0 success, 1 validation or
format errors, 2 numerical errors, 3 external-command errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings as _warnings
from pathlib import Path

import numpy as np

from . import __version__
from .activations import (
    ActivationSet,
    ProbTable,
    load_activations,
    save_activations,
    summarize,
)
from .errors import (
    ExternalError,
    FormatError,
    GenmetricError,
    InfiniteDivergence,
    NumericalError,
    SingularCovarianceWarning,
    TuningError,
    ValidationError,
)
from .lfid import GateConfig, SelectionSpec, lfid_score, quality_gate, rank_features
from .metrics import (
    Curve,
    DiscreteDist,
    KernelConfig,
    MetricReport,
    discrete_frechet,
    frechet_gaussian_distance,
    inception_score,
    js_divergence,
    kl_divergence,
    mmd,
    short_digest,
    wasserstein_1d,
)
from .monitoring import (
    MonitorConfig,
    MonitorState,
    grid_search,
    monitor_update,
    parse_grid_file,
    run_external_evaluation,
)
from .plotting import emit_plot
from .report import RunReport, bytes_digest, file_digest, validate_report
from .toygen import AdamConfig, AdamState, ToyGenerator, adam_step, sample_toy


def _default_seed() -> int:
    return int(os.environ.get("GENMETRIC_SEED", "0"))


def _extend(report: MetricReport, params=(), extra_warnings=()) -> MetricReport:
    return MetricReport(
        metric_name=report.metric_name,
        value=report.value,
        params=report.params + tuple(params),
        warnings=report.warnings + tuple(extra_warnings),
        inputs_digest=report.inputs_digest,
    )


def _summarize_catching(acts: ActivationSet):
    """summarize() with singular-covariance warnings captured as strings."""
    with _warnings.catch_warnings(record=True) as caught:
        _warnings.simplefilter("always")
        summ = summarize(acts)
    notes = tuple(
        str(w.message)
        for w in caught
        if issubclass(w.category, SingularCovarianceWarning)
    )
    return summ, notes


def _summary_report(acts: ActivationSet, digest: str) -> MetricReport:
    summ, notes = _summarize_catching(acts)
    return MetricReport(
        metric_name="summary",
        value=float(np.trace(summ.cov)),
        params=(
            ("n_samples", acts.n_samples),
            ("dim", acts.dim),
            ("layer_tag", acts.layer_tag),
            ("source_tag", acts.source_tag),
            ("mean_norm", float(np.linalg.norm(summ.mean))),
        ),
        warnings=notes,
        inputs_digest=digest,
    )


def _read_numbers(path) -> np.ndarray:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    tokens = text.replace(",", " ").split()
    if not tokens:
        raise FormatError(f"{path}: no numeric values")
    try:
        return np.array([float(t) for t in tokens])
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric token: {exc}") from exc


def _read_dist(path, normalize: bool) -> DiscreteDist:
    values = _read_numbers(path)
    return DiscreteDist.normalized(values) if normalize else DiscreteDist(values)


def _read_curve(path) -> Curve:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append([float(c) for c in line.split(",")])
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise FormatError(f"{path}: empty curve file")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise FormatError(f"{path}: rows have inconsistent coordinate counts")
    return Curve(points=np.array(rows))


def _read_probs(path) -> ProbTable:
    try:
        lines = [
            ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()
        ]
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if not lines:
        raise FormatError(f"{path}: empty probability table")
    start = 0
    try:
        [float(c) for c in lines[0].split(",")]
    except ValueError:
        start = 1  # header line
    rows = []
    for lineno, line in enumerate(lines[start:], start=start + 1):
        try:
            rows.append([float(c) for c in line.split(",")])
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise FormatError(f"{path}: no probability rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise FormatError(f"{path}: rows have inconsistent class counts")
    return ProbTable(probs=np.array(rows))


# ---------------------------------------------------------------------------
# subcommand handlers; each returns (RunReport, [summary lines])
# ---------------------------------------------------------------------------


def _cmd_summarize(args):
    acts = load_activations(args.acts)
    run = RunReport(subcommand="summarize")
    run.add_input(args.acts, file_digest(args.acts))
    run.add(_summary_report(acts, run.inputs[0]["digest"]))
    rep = run.reports[0]
    return run, [
        f"summarize: N={rep.param('n_samples')} D={rep.param('dim')} "
        f"cov_trace={rep.value:.6g} mean_norm={rep.param('mean_norm'):.6g}"
    ]


def _cmd_fid(args):
    real = load_activations(args.real)
    gen = load_activations(args.gen)
    sr, wr = _summarize_catching(real)
    sg, wg = _summarize_catching(gen)
    rep = _extend(frechet_gaussian_distance(sr, sg), extra_warnings=wr + wg)
    run = RunReport(subcommand="fid")
    run.add_input(args.real, file_digest(args.real))
    run.add_input(args.gen, file_digest(args.gen))
    run.add(rep)
    return run, [f"fid: {rep.value:.9g} (d2={rep.param('d2'):.6g} trace={rep.param('trace'):.6g})"]


def _cmd_lfid(args):
    real = load_activations(args.real)
    gen = load_activations(args.gen)
    spec = (
        SelectionSpec(mode="top_k", k=args.top_k)
        if args.top_k is not None
        else SelectionSpec()
    )
    gate = GateConfig(threshold_T=args.threshold)
    rep = lfid_score(real, gen, spec)
    decision = quality_gate(rep.value, gate)
    rep = _extend(
        rep, params=(("gate_threshold", gate.threshold_T), ("decision", decision.value))
    )
    run = RunReport(subcommand="lfid")
    run.add_input(args.real, file_digest(args.real))
    run.add_input(args.gen, file_digest(args.gen))
    run.add(rep)
    return run, [
        f"lfid: {rep.value:.9g} (k={rep.param('k')}, threshold={gate.threshold_T:g}, "
        f"decision={decision.value})"
    ]


def _cmd_rank(args):
    acts = load_activations(args.acts)
    ranking = rank_features(acts)
    rep = MetricReport(
        metric_name="feature_ranking",
        value=float(ranking.variances[ranking.order[0]]),
        params=(
            ("dim", ranking.dim),
            ("computed_on", ranking.computed_on),
            ("order", [int(i) for i in ranking.order]),
            ("variances", [float(v) for v in ranking.variances]),
        ),
        inputs_digest=file_digest(args.acts),
    )
    run = RunReport(subcommand="rank")
    run.add_input(args.acts, rep.inputs_digest)
    run.add(rep)
    top = ", ".join(str(int(i)) for i in ranking.order[:8])
    return run, [f"rank: D={ranking.dim}, top columns by variance: {top}"]


def _cmd_is(args):
    table = _read_probs(args.probs)
    rep = inception_score(table)
    run = RunReport(subcommand="is")
    run.add_input(args.probs, file_digest(args.probs))
    run.add(rep)
    return run, [f"inception score: {rep.value:.9g} (C={table.n_classes})"]


def _cmd_div(args):
    run = RunReport(subcommand=f"div {args.kind}")
    run.add_input(args.a, file_digest(args.a))
    run.add_input(args.b, file_digest(args.b))
    if args.kind in ("kl", "js"):
        p = _read_dist(args.a, args.normalize)
        q = _read_dist(args.b, args.normalize)
        if args.kind == "kl":
            try:
                rep = kl_divergence(p, q, smoothing=args.smoothing)
            except InfiniteDivergence:
                rep = MetricReport(
                    metric_name="kl",
                    value=float("inf"),
                    params=(("support_size", p.support_size), ("smoothing", None)),
                    warnings=("infinite-divergence",),
                    inputs_digest=short_digest(p.probs, q.probs),
                )
        else:
            rep = js_divergence(p, q)
    elif args.kind == "w":
        rep = wasserstein_1d(_read_numbers(args.a), _read_numbers(args.b))
    else:  # mmd
        x = load_activations(args.a)
        y = load_activations(args.b)
        bandwidth = (
            "median-heuristic"
            if args.bandwidth in (None, "median-heuristic")
            else float(args.bandwidth)
        )
        rep = mmd(
            x,
            y,
            KernelConfig(kind="rbf", bandwidth=bandwidth),
            estimator=args.estimator,
        )
    run.add(rep)
    return run, [f"{rep.metric_name}: {rep.value:.9g}"]


def _cmd_frechet_curve(args):
    a = _read_curve(args.a)
    b = _read_curve(args.b)
    rep = discrete_frechet(a, b)
    run = RunReport(subcommand="frechet-curve")
    run.add_input(args.a, file_digest(args.a))
    run.add_input(args.b, file_digest(args.b))
    run.add(rep)
    return run, [f"discrete frechet: {rep.value:.9g}"]


def _monitor_config(args) -> MonitorConfig:
    return MonitorConfig(
        epsilon=args.epsilon,
        patience=args.patience,
        min_epochs=args.min_epochs,
        gate=GateConfig(threshold_T=args.threshold),
    )


def _cmd_monitor(args):
    config = _monitor_config(args)
    spec = (
        SelectionSpec(mode="top_k", k=args.top_k)
        if args.top_k is not None
        else SelectionSpec()
    )
    run = RunReport(subcommand="monitor")
    state = MonitorState()
    if args.pair:
        for epoch, (real_path, gen_path) in enumerate(args.pair, start=1):
            if state.stopped:
                break
            real = load_activations(real_path)
            gen = load_activations(gen_path)
            run.add_input(real_path, file_digest(real_path))
            run.add_input(gen_path, file_digest(gen_path))
            value = lfid_score(real, gen, spec).value
            state = monitor_update(state, config, epoch, value)
    else:
        raw = sys.stdin.read()
        run.add_input("-", bytes_digest(raw.encode("utf-8")))
        for lineno, line in enumerate(raw.splitlines(), start=1):
            if not line.strip():
                continue
            if state.stopped:
                break  # ignore the rest of the stream after the stop fires
            try:
                epoch_s, value_s = line.split(",", 1)
                epoch, value = int(epoch_s.strip()), float(value_s.strip())
            except ValueError as exc:
                raise FormatError(f"stdin:{lineno}: expected `epoch,value`: {exc}") from exc
            state = monitor_update(state, config, epoch, value)
    if not state.history:
        raise ValidationError("monitor received no observations")
    run.monitor = state
    run.monitor_config = config
    decision = quality_gate(state.last_value, config.gate)
    run.add(
        MetricReport(
            metric_name="lfid_last",
            value=state.last_value,
            params=(
                ("epoch", state.last_epoch),
                ("gate_threshold", config.gate.threshold_T),
                ("decision", decision.value),
            ),
            inputs_digest=short_digest(np.array([v for _, v in state.history])),
        )
    )
    lines = [
        f"monitor: {len(state.history)} epochs, "
        + (f"stopped at epoch {state.stop_epoch}" if state.stopped else "not stopped"),
        f"last lfid {state.last_value:.9g} -> {decision.value} (T={config.gate.threshold_T:g})",
    ]
    return run, lines


def _cmd_tune(args):
    grid = parse_grid_file(args.grid)
    real = load_activations(args.real)
    spec = (
        SelectionSpec(mode="top_k", k=args.top_k)
        if args.top_k is not None
        else SelectionSpec()
    )

    def evaluate(params):
        return run_external_evaluation(args.cmd, params, real, spec)

    result = grid_search(grid, evaluate, jobs=args.jobs)
    run = RunReport(subcommand="tune")
    run.add_input(args.grid, file_digest(args.grid))
    run.add_input(args.real, file_digest(args.real))
    run.tuning = result
    run.add(
        MetricReport(
            metric_name="lfid_best",
            value=result.best_lfid,
            params=tuple(result.best_params),
            warnings=tuple(f"skipped: {f}" for f in result.failures),
            inputs_digest=file_digest(args.real),
        )
    )
    best = ", ".join(f"{n}={v}" for n, v in result.best_params)
    lines = [
        f"tune: {len(result.trace)} evaluated, {len(result.failures)} skipped",
        f"best lfid {result.best_lfid:.9g} at {best}",
    ]
    return run, lines


def _cmd_toy_gen(args):
    seed = _default_seed() if args.seed is None else args.seed
    offset = args.mean_offset
    if args.latent_dim is not None:
        if args.latent_dim < 1:
            raise ValidationError("latent-dim must be >= 1")
        # stand-in capacity knob: misfit shrinks as the latent dim grows
        offset += 4.0 / (1.0 + args.latent_dim)
    gen = ToyGenerator(
        mu=np.full(args.dim, offset),
        log_sigma=np.log(np.full(args.dim, args.sigma_scale)),
        seed=seed,
    )
    acts = sample_toy(gen, args.n, seed)
    save_activations(acts, args.out)
    run = RunReport(subcommand="toy-gen")
    run.add(_summary_report(acts, file_digest(args.out)))
    return run, [f"toy-gen: wrote {args.n}x{args.dim} samples to {args.out}"]


def _cmd_demo_toy(args):
    seed = _default_seed() if args.seed is None else args.seed
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    true_gen = ToyGenerator(
        mu=np.array([2.0, -1.0]), log_sigma=np.log(np.array([1.5, 0.6])), seed=seed
    )
    real = ActivationSet(
        data=sample_toy(true_gen, args.n, seed).data,
        layer_tag="toy",
        source_tag="real",
    )
    real_path = out_dir / "real.actb"
    save_activations(real, real_path)

    config = _monitor_config(args)
    adam_cfg = AdamConfig(alpha=args.alpha)
    d = real.dim
    target_mu = real.data.mean(axis=0)
    target_sigma = real.data.std(axis=0, ddof=1)
    state = AdamState.fresh(np.zeros(2 * d))
    monitor = MonitorState()

    def evaluate(epoch: int):
        gen = ToyGenerator(
            mu=state.theta[:d], log_sigma=state.theta[d:], seed=seed + 1000 + epoch
        )
        sample = sample_toy(gen, args.n)
        return sample, lfid_score(real, sample).value

    sample, initial = evaluate(0)
    monitor = monitor_update(monitor, config, 0, initial)
    for epoch in range(1, args.epochs + 1):
        for _ in range(args.steps_per_epoch):
            mu, log_sigma = state.theta[:d], state.theta[d:]
            sigma = np.exp(log_sigma)
            grad = np.concatenate(
                [2.0 * (mu - target_mu), 2.0 * (sigma - target_sigma) * sigma]
            )
            state = adam_step(state, grad, adam_cfg)
        sample, value = evaluate(epoch)
        monitor = monitor_update(monitor, config, epoch, value)
        if monitor.stopped:
            break

    gen_path = out_dir / "gen_final.actb"
    save_activations(sample, gen_path)
    svg_path = out_dir / "lfid_curve.svg"
    emit_plot(monitor.history, svg_path, title="toy run", xlabel="epoch", ylabel="lfid")

    final = monitor.last_value
    decision = quality_gate(final, config.gate)
    run = RunReport(subcommand="demo-toy")
    run.monitor = monitor
    run.monitor_config = config
    run.add(
        MetricReport(
            metric_name="lfid_initial",
            value=initial,
            params=(("epoch", 0), ("seed", seed)),
            inputs_digest=short_digest(real.data),
        )
    )
    run.add(
        MetricReport(
            metric_name="lfid_final",
            value=final,
            params=(
                ("epoch", monitor.last_epoch),
                ("seed", seed),
                ("gate_threshold", config.gate.threshold_T),
                ("decision", decision.value),
            ),
            inputs_digest=short_digest(real.data),
        )
    )
    lines = [
        f"demo-toy: lfid {initial:.6g} -> {final:.6g} over {monitor.last_epoch} epochs"
        + (f", stopped at {monitor.stop_epoch}" if monitor.stopped else ""),
        f"gate: {decision.value} (T={config.gate.threshold_T:g})",
        f"outputs: {real_path}, {gen_path}, {svg_path}",
    ]
    return run, lines


def _cmd_report(args):
    if args.report == "-":
        text = sys.stdin.read()
        digest = bytes_digest(text.encode("utf-8"))
    else:
        text = Path(args.report).read_text(encoding="utf-8")
        digest = file_digest(args.report)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"not valid JSON: {exc}") from exc
    validate_report(doc)
    lines = [f"report: valid RunReport from subcommand {doc.get('subcommand')!r}"]
    for rep in doc.get("reports", []):
        lines.append(f"  {rep['metric_name']}: {rep['value']}")
    run = _PassthroughReport(doc, [{"path": args.report, "digest": digest}])
    return run, lines


class _PassthroughReport:
    """Pretty-print wrapper so `report` re-emits the validated document."""

    def __init__(self, doc: dict, inputs: list):
        self._doc = doc
        self.inputs = inputs

    def stamp(self) -> None:
        pass

    def to_json(self, indent=2) -> str:
        from .report import dumps

        return dumps(self._doc, indent=indent)


# ---------------------------------------------------------------------------
# parser and dispatch
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument(
        "--no-timestamp",
        action="store_true",
        help="omit the timestamp so identical runs emit identical JSON",
    )

    parser = _Parser(prog="genmetric", description=__doc__)
    parser.add_argument("--version", action="version", version=f"genmetric {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = sub.add_parser("summarize", parents=[common], help="mean/covariance summary of a set")
    p.add_argument("acts")
    p.set_defaults(handler=_cmd_summarize)

    p = sub.add_parser("fid", parents=[common], help="Frechet distance between two sets")
    p.add_argument("real")
    p.add_argument("gen")
    p.set_defaults(handler=_cmd_fid)

    p = sub.add_parser("lfid", parents=[common], help="low-dimensional Frechet distance")
    p.add_argument("real")
    p.add_argument("gen")
    p.add_argument("--top-k", type=int, default=None, help="keep the k highest-variance columns")
    p.add_argument("--threshold", type=float, default=20.0, help="quality-gate threshold")
    p.set_defaults(handler=_cmd_lfid)

    p = sub.add_parser("rank", parents=[common], help="variance ranking of feature columns")
    p.add_argument("acts")
    p.set_defaults(handler=_cmd_rank)

    p = sub.add_parser("is", parents=[common], help="inception score of a probability table")
    p.add_argument("probs")
    p.set_defaults(handler=_cmd_is)

    p = sub.add_parser("div", parents=[common], help="divergence between two inputs")
    p.add_argument("kind", choices=["kl", "js", "w", "mmd"])
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--smoothing", type=float, default=None, help="kl: eps added to q")
    p.add_argument("--normalize", action="store_true", help="kl/js: normalize the inputs")
    p.add_argument("--bandwidth", default=None, help="mmd: numeric or median-heuristic")
    p.add_argument("--estimator", choices=["biased", "unbiased"], default="biased")
    p.set_defaults(handler=_cmd_div)

    p = sub.add_parser("frechet-curve", parents=[common], help="discrete Frechet distance")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(handler=_cmd_frechet_curve)

    p = sub.add_parser("monitor", parents=[common], help="early-stopping monitor")
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--patience", type=int, default=1)
    p.add_argument("--min-epochs", type=int, default=2)
    p.add_argument("--threshold", type=float, default=20.0)
    p.add_argument("--top-k", type=int, default=None)
    p.add_argument(
        "--pair",
        nargs=2,
        metavar=("REAL", "GEN"),
        action="append",
        help="per-epoch activation file pair (repeatable); otherwise stdin epoch,value lines",
    )
    p.set_defaults(handler=_cmd_monitor)

    p = sub.add_parser("tune", parents=[common], help="grid search over an external generator")
    p.add_argument("--grid", required=True, help="grid file: `name = v1, v2, ...` lines")
    p.add_argument("--cmd", required=True, help="command template with {param:NAME} and {out}")
    p.add_argument("--real", required=True, help="real activations (ACTB or CSV)")
    p.add_argument("--top-k", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(handler=_cmd_tune)

    p = sub.add_parser("toy-gen", parents=[common], help="bundled stand-in generator")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--mean-offset", type=float, default=0.0)
    p.add_argument("--sigma-scale", type=float, default=1.0)
    p.add_argument("--latent-dim", type=int, default=None)
    p.set_defaults(handler=_cmd_toy_gen)

    p = sub.add_parser("demo-toy", parents=[common], help="end-to-end toy pipeline")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=25)
    p.add_argument("--steps-per-epoch", type=int, default=40)
    p.add_argument("--n", type=int, default=512)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--patience", type=int, default=2)
    p.add_argument("--min-epochs", type=int, default=2)
    p.add_argument("--threshold", type=float, default=20.0)
    p.add_argument("--out-dir", default="demo-toy-out")
    p.set_defaults(handler=_cmd_demo_toy)

    p = sub.add_parser("report", parents=[common], help="validate and pretty-print a report")
    p.add_argument("report", help="RunReport JSON path, or - for stdin")
    p.set_defaults(handler=_cmd_report)

    return parser


def exit_code_for(exc: GenmetricError) -> int:
    if isinstance(exc, NumericalError):
        return 2
    if isinstance(exc, (ExternalError, TuningError)):
        return 3
    return 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        run, lines = args.handler(args)
        if not args.no_timestamp:
            run.stamp()
        indent = 2 if args.subcommand == "report" else None
        sys.stdout.write(run.to_json(indent=indent) + "\n")
    except GenmetricError as exc:
        print(f"genmetric {args.subcommand}: error: {exc}", file=sys.stderr)
        if isinstance(exc, ExternalError) and exc.output:
            print(exc.output, file=sys.stderr)
        return exit_code_for(exc)
    for line in lines:
        print(line, file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
