"""Training-loop monitoring: LFID-based early stopping with patience, the
keep-if-improved hyperparameter grid search, and the bridge that evaluates
grid points through an external generator command.

The stop rule compares consecutive epochs: once |score_i - score_{i-1}| stays
below epsilon for `patience` qualifying epochs (and the epoch index has
reached min_epochs), training is flagged stopped.
"""

from __future__ import annotations

import itertools
import shlex
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .activations import ActivationSet, load_activations
from .errors import (
    ExternalError,
    FormatError,
    GenmetricError,
    SequenceError,
    StateError,
    TuningError,
    ValidationError,
)
from .lfid import GateConfig, SelectionSpec, lfid_score


@dataclass(frozen=True)
class MonitorConfig:
    """Early-stopping thresholds; epsilon and patience control sensitivity."""

    epsilon: float = 0.5
    patience: int = 1
    min_epochs: int = 2
    gate: GateConfig = field(default_factory=GateConfig)

    def __post_init__(self):
        if not (self.epsilon > 0):
            raise ValidationError("epsilon must be > 0")
        if self.patience < 1:
            raise ValidationError("patience must be >= 1")
        if self.min_epochs < 2:
            raise ValidationError("min_epochs must be >= 2")


@dataclass(frozen=True)
class MonitorState:
    """History of (epoch, score) pairs plus the stop decision."""

    history: tuple = ()
    stopped: bool = False
    stop_epoch: int | None = None
    qualifying_streak: int = 0

    def __post_init__(self):
        epochs = [e for e, _ in self.history]
        if any(b <= a for a, b in zip(epochs, epochs[1:])):
            raise ValidationError("history epochs must be strictly increasing")
        if self.stopped and self.stop_epoch is None:
            raise ValidationError("stopped state needs a stop_epoch")

    @property
    def last_epoch(self) -> int | None:
        return self.history[-1][0] if self.history else None

    @property
    def last_value(self) -> float | None:
        return self.history[-1][1] if self.history else None

    def to_dict(self) -> dict:
        return {
            "history": [[int(e), float(v)] for e, v in self.history],
            "stopped": self.stopped,
            "stop_epoch": self.stop_epoch,
            "qualifying_streak": self.qualifying_streak,
        }


def monitor_update(
    state: MonitorState, config: MonitorConfig, epoch: int, score: float
) -> MonitorState:
    """Record one (epoch, score) observation and apply the stop rule."""
    if state.stopped:
        raise StateError("monitor already stopped; no further updates accepted")
    score = float(score)
    if not np.isfinite(score) or score < 0:
        raise ValidationError(f"score must be finite and >= 0, got {score}")
    epoch = int(epoch)
    if state.last_epoch is not None and epoch <= state.last_epoch:
        raise SequenceError(
            f"epoch {epoch} not greater than last recorded {state.last_epoch}"
        )
    streak = 0
    if state.history and epoch >= config.min_epochs:
        if abs(score - state.history[-1][1]) < config.epsilon:
            streak = state.qualifying_streak + 1
    stopped = streak >= config.patience
    return MonitorState(
        history=state.history + ((epoch, score),),
        stopped=stopped,
        stop_epoch=epoch if stopped else None,
        qualifying_streak=streak,
    )


@dataclass(frozen=True)
class TuningGrid:
    """Ordered (name, candidate values) pairs defining a Cartesian sweep."""

    parameters: tuple

    def __post_init__(self):
        params = tuple(
            (str(n), tuple(v.item() if isinstance(v, np.generic) else v for v in vs))
            for n, vs in self.parameters
        )
        if not params:
            raise ValidationError("grid needs at least one parameter")
        names = [n for n, _ in params]
        if len(set(names)) != len(names):
            raise ValidationError("grid parameter names must be unique")
        if any(len(vs) < 1 for _, vs in params):
            raise ValidationError("every grid parameter needs >= 1 candidate")
        object.__setattr__(self, "parameters", params)

    @property
    def size(self) -> int:
        out = 1
        for _, vs in self.parameters:
            out *= len(vs)
        return out

    def points(self):
        """Cartesian product in lexicographic order of the declared values."""
        names = [n for n, _ in self.parameters]
        for combo in itertools.product(*(vs for _, vs in self.parameters)):
            yield dict(zip(names, combo))


@dataclass(frozen=True)
class TracePoint:
    params: dict
    lfid: float
    kept: bool


@dataclass(frozen=True)
class TuningResult:
    """Best configuration plus the full evaluation trace."""

    best_params: tuple
    best_lfid: float
    trace: tuple
    failures: tuple = ()

    def to_dict(self) -> dict:
        return {
            "best_params": [[n, v] for n, v in self.best_params],
            "best_lfid": self.best_lfid,
            "trace": [
                {
                    "params": [[n, v] for n, v in p.params.items()],
                    "lfid": p.lfid,
                    "kept": p.kept,
                }
                for p in self.trace
            ],
            "failures": list(self.failures),
        }


def grid_search(grid: TuningGrid, evaluator, jobs: int = 1) -> TuningResult:
    """Scan the full grid, keeping a configuration only on strict improvement.

    Evaluation failures are recorded and skipped; kept flags are folded in
    declared lexicographic order even when points are evaluated concurrently.
    """
    points = list(grid.points())
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(lambda p: _safe_eval(evaluator, p), points))
    else:
        outcomes = [_safe_eval(evaluator, p) for p in points]

    trace: list[TracePoint] = []
    failures: list[str] = []
    best_value = None
    best_params = None
    for params, (value, error) in zip(points, outcomes):
        if error is not None:
            failures.append(f"{params}: {error}")
            continue
        kept = best_value is None or value < best_value
        if kept:
            best_value = value
            best_params = params
        trace.append(TracePoint(params=params, lfid=value, kept=kept))
    if best_value is None:
        raise TuningError(f"all {len(points)} grid evaluations failed")
    return TuningResult(
        best_params=tuple(best_params.items()),
        best_lfid=best_value,
        trace=tuple(trace),
        failures=tuple(failures),
    )


def _safe_eval(evaluator, params) -> tuple[float | None, str | None]:
    try:
        value = float(evaluator(params))
    except GenmetricError as exc:
        return None, f"{type(exc).__name__}: {exc}"
    if not np.isfinite(value):
        return None, f"non-finite evaluation {value}"
    return value, None


def parse_grid_file(path) -> TuningGrid:
    """Read a `name = v1, v2, v3` grid document; '#' starts a comment."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read grid file {path}: {exc}") from exc
    params = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{lineno}: expected `name = v1, v2, ...`")
        name, rhs = line.split("=", 1)
        values = [_parse_scalar(v.strip()) for v in rhs.split(",") if v.strip()]
        if not values:
            raise FormatError(f"{path}:{lineno}: no candidate values")
        params.append((name.strip(), tuple(values)))
    if not params:
        raise FormatError(f"{path}: grid file declares no parameters")
    return TuningGrid(parameters=tuple(params))


def _parse_scalar(token: str):
    for cast in (int, float):
        try:
            return cast(token)
        except ValueError:
            continue
    return token


def render_command(template: str, params: dict, out_path: str) -> list[str]:
    """Substitute {param:NAME} and {out} placeholders and split the command."""
    cmd = template
    for name, value in params.items():
        cmd = cmd.replace("{param:" + name + "}", str(value))
    if "{out}" not in cmd:
        raise ValidationError("command template is missing the {out} placeholder")
    cmd = cmd.replace("{out}", str(out_path))
    if "{param:" in cmd:
        start = cmd.index("{param:")
        raise ValidationError(f"unresolved placeholder near {cmd[start:start + 32]!r}")
    return shlex.split(cmd)


def run_external_evaluation(
    command_template: str,
    params: dict,
    real_acts,
    spec: SelectionSpec = SelectionSpec(),
    timeout: float | None = None,
) -> float:
    """Run one external generator invocation and score its output.

    The command must write an ACTB file to the {out} placeholder path; the
    produced activations are scored with the low-dimensional Frechet distance
    against the real activations.
    """
    real = (
        real_acts
        if isinstance(real_acts, ActivationSet)
        else load_activations(real_acts)
    )
    with tempfile.TemporaryDirectory(prefix="genmetric-eval-") as tmp:
        out_path = str(Path(tmp) / "generated.actb")
        argv = render_command(command_template, params, out_path)
        try:
            proc = subprocess.run(
                argv, capture_output=True, text=True, timeout=timeout
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise ExternalError(f"external command failed to run: {exc}") from exc
        if proc.returncode != 0:
            raise ExternalError(
                f"external command exited {proc.returncode}",
                output=proc.stdout + proc.stderr,
            )
        if not Path(out_path).exists():
            raise FormatError("external command produced no {out} file")
        generated = load_activations(out_path)
    return lfid_score(real, generated, spec).value
