"""Command-line pipeline: gen, preprocess, train, predict, eval, sweep."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Sequence

from . import __version__
from .core import GridSpec, Trajectory, as_segment, read_trajectories, split_dataset, write_trajectories
from .datagen import generate, spec_from_dict
from .errors import NoTestCases, VgmmTrajError
from .evaluate import (
    constant_velocity_baseline,
    evaluate_cases,
    sweep_observable_length,
    vgmm_forecaster,
    window_cases,
)
from .predict import CandidateGrid, predict_future, select_model
from .preprocess import DbscanParams, preprocess_trajectories
from .vbgmm import effective_components, load_model, save_model

VALIDATION_FRACTION = 0.2


class CliError(Exception):
    pass


@dataclass
class RunConfig:
    eps: Optional[float] = None
    min_pts: Optional[int] = None
    grid_origin: tuple[float, float] = (0.0, 0.0)
    cell_size: float = 1.0
    k_values: tuple[int, ...] = (1, 2, 4, 8)
    h_values: tuple[int, ...] = (2, 4, 6)
    horizon: int = 5
    tol: float = 1e-6
    max_iter: int = 200
    seed: int = 0
    eta_paper_exact: bool = False
    alpha0: Optional[float] = None
    beta0: Optional[float] = None
    v0: Optional[float] = None

    def dbscan(self) -> DbscanParams:
        if self.eps is None:
            raise CliError("eps is required (--eps or config)")
        if self.min_pts is None:
            raise CliError("min_pts is required (--min-pts or config)")
        try:
            return DbscanParams(self.eps, self.min_pts)
        except ValueError as exc:
            raise CliError(str(exc)) from None

    def grid(self) -> GridSpec:
        return GridSpec(self.grid_origin[0], self.grid_origin[1], self.cell_size)


_CONFIG_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


def parse_int_range(text: str) -> tuple[int, ...]:
    """'2,4,6', '2..6' or '2:6:2' (inclusive bounds)."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return tuple(range(int(lo), int(hi) + 1))
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            lo, hi = parts[0], parts[1]
            step = parts[2] if len(parts) > 2 else 1
            if step < 1:
                raise ValueError
            return tuple(range(lo, hi + 1, step))
        return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer list or range: {text!r}") from None


def _origin(text: str) -> tuple[float, float]:
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'x,y', got {text!r}") from None
    return x, y


def load_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the --config file, then explicit flags."""
    values: dict[str, Any] = {}
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise CliError("config must be a JSON object")
        for key, value in doc.items():
            if key not in _CONFIG_FIELDS:
                raise CliError(f"unknown config field {key!r}")
            if key in ("k_values", "h_values", "grid_origin"):
                value = tuple(value)
            values[key] = value
    for key in _CONFIG_FIELDS:
        flag = getattr(args, key, None)
        if flag is not None and flag is not False:
            values[key] = flag
    return RunConfig(**values)


def _segments(trajs: Sequence[Trajectory], cfg: RunConfig, required: bool = True):
    if cfg.eps is None and cfg.min_pts is None and not required:
        return [as_segment(t) for t in trajs]
    return preprocess_trajectories(trajs, cfg.dbscan())


def cmd_gen(args) -> int:
    try:
        doc = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(f"cannot read spec: {exc}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"spec parse error: {exc}") from None
    if isinstance(doc, dict) and args.seed is not None:
        doc = {**doc, "seed": args.seed}
    try:
        spec, n_points = spec_from_dict(doc)
    except ValueError as exc:
        raise CliError(f"bad scenario spec: {exc}") from None
    write_trajectories(args.out, generate(spec, n_points))
    return 0


def cmd_preprocess(args) -> int:
    cfg = load_config(args)
    segs = preprocess_trajectories(read_trajectories(args.data), cfg.dbscan())
    write_trajectories(args.out, segs)
    print(f"segments={len(segs)} points={sum(len(s) for s in segs)}")
    return 0


def _train(trajs, cfg: RunConfig):
    segs = _segments(trajs, cfg)
    if len(segs) < 2:
        raise CliError(f"need at least 2 segments after preprocessing, got {len(segs)}")
    fit_segs, val_segs = split_dataset(segs, VALIDATION_FRACTION, cfg.seed)
    grid = CandidateGrid(cfg.k_values, cfg.h_values, cfg.horizon, cfg.alpha0, cfg.beta0, cfg.v0)
    return select_model(fit_segs, val_segs, grid, cfg.tol, cfg.max_iter, cfg.seed + 1, cfg.eta_paper_exact)


def cmd_train(args) -> int:
    cfg = load_config(args)
    cfg.dbscan()
    sel = _train(read_trajectories(args.data), cfg)
    save_model(sel.model, args.out)
    print(
        f"K={sel.K} H={sel.H} elbo={sel.model.elbo:.6f} score={sel.score:.6f} "
        f"effective={effective_components(sel.model)}"
    )
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    try:
        H, F = int(model.metadata["H"]), int(model.metadata["F"])
    except KeyError as exc:
        raise CliError(f"model parse error: missing {exc.args[0]!r}") from None
    eta = bool(model.metadata.get("eta_paper_exact", False)) or args.eta_paper_exact
    trajs = read_trajectories(args.recent)
    if len(trajs) != 1:
        raise CliError(f"recent CSV must hold exactly one object, found {len(trajs)}")
    preds = predict_future(model, trajs[0].points, H, F, args.steps, eta_paper_exact=eta)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "x", "y"])
        for i, p in enumerate(preds, start=1):
            w.writerow([i, repr(p.x), repr(p.y)])
    return 0


def cmd_eval(args) -> int:
    cfg = load_config(args)
    model = load_model(args.model)
    H, F = int(model.metadata["H"]), int(model.metadata["F"])
    segs = _segments(read_trajectories(args.test), cfg, required=False)
    cases = window_cases(segs, H, F)
    if not cases:
        raise NoTestCases("no test cases")
    rows = [
        ("vgmm", *evaluate_cases(vgmm_forecaster(model, cfg.eta_paper_exact or None), cases, cfg.grid())),
        ("constant_velocity", *evaluate_cases(constant_velocity_baseline, cases, cfg.grid())),
    ]
    text = "method,rmse,accuracy,n_cases\n" + "".join(f"{m},{e:.6f},{a:.6f},{len(cases)}\n" for m, e, a in rows)
    Path(args.out).write_text(text, encoding="utf-8")
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args)
    test_trajs = read_trajectories(args.test)
    if not test_trajs:
        raise NoTestCases("no test cases")
    H_range = cfg.h_values
    forecasters = {}
    if args.model:
        horizons = set()
        for path in args.model:
            m = load_model(path)
            forecasters[int(m.metadata["H"])] = vgmm_forecaster(m)
            horizons.add(int(m.metadata["F"]))
        missing = sorted(set(H_range) - set(forecasters))
        if missing:
            raise CliError(f"no model supplied for observable length(s) {missing}")
        if len(horizons) != 1:
            raise CliError("models disagree on the horizon F")
        horizon = horizons.pop()
    elif args.train:
        train_trajs = read_trajectories(args.train)
        horizon = cfg.horizon
        for H in H_range:
            sel = _train(train_trajs, dataclasses.replace(cfg, h_values=(H,)))
            forecasters[H] = vgmm_forecaster(sel.model)
    else:
        raise CliError("sweep needs --train or --model")
    segs = _segments(test_trajs, cfg, required=False)
    report = sweep_observable_length(
        forecasters, segs, H_range, horizon, cfg.grid(), seed=cfg.seed, max_cases=args.max_cases
    )
    report.write_csv(args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vgmmtraj", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, pipeline=True):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", required=True, help="output path")
        if not pipeline:
            return
        p.add_argument("--eps", type=float, help="DBSCAN radius in meters")
        p.add_argument("--min-pts", dest="min_pts", type=int, help="DBSCAN minimum neighbourhood size")
        p.add_argument("--cell-size", dest="cell_size", type=float)
        p.add_argument("--grid-origin", dest="grid_origin", type=_origin, metavar="X,Y")
        p.add_argument("--k-values", dest="k_values", type=parse_int_range)
        p.add_argument("--h-values", dest="h_values", type=parse_int_range)
        p.add_argument("--horizon", type=int, help="future steps F per window")
        p.add_argument("--tol", type=float)
        p.add_argument("--max-iter", dest="max_iter", type=int)
        p.add_argument("--eta-paper-exact", dest="eta_paper_exact", action="store_true")
        p.add_argument("--alpha0", type=float)
        p.add_argument("--beta0", type=float)
        p.add_argument("--v0", type=float)

    p = sub.add_parser("gen", help="generate synthetic trajectories")
    p.add_argument("spec", help="scenario JSON")
    common(p, pipeline=False)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("preprocess", help="denoise and segment trajectories")
    p.add_argument("data")
    common(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="fit and select a prediction model")
    p.add_argument("data")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="forecast positions from a recent track")
    p.add_argument("model")
    p.add_argument("recent")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--eta-paper-exact", dest="eta_paper_exact", action="store_true")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score a model against the constant-velocity baseline")
    p.add_argument("model")
    p.add_argument("test")
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="error/accuracy versus observable length")
    p.add_argument("test")
    p.add_argument("--train", help="training CSV; one model is selected per H")
    p.add_argument("--model", action="append", help="pre-trained model JSON (repeatable)")
    p.add_argument("--max-cases", dest="max_cases", type=int)
    common(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, VgmmTrajError, ValueError, OSError) as exc:
        print(f"vgmmtraj {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
