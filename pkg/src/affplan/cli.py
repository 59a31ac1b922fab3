"""Command-line interface.

Subcommands:
  plan             detections (+ optional keeper) + goal -> plan
  metrics          score prediction maps against ground-truth masks
  check-attention  self-test: analytic gradients vs finite differences
  simulate         run a scenario spec end to end and report per trial

Exit codes: 0 success; 1 usage, file or format errors; 2 the operation ran
but failed (no plan exists, gradient check failed, simulation had failing
trials is NOT an error: simulate returns 0 once the report is produced).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import backend_name
from .attention import AttentionParams, RegionFeature, attention_backward, attention_forward
from .config import ConfigError, ENV_VAR, load_config
from .formats import (
    FormatError,
    load_detections,
    load_keeper,
    load_objects,
    read_pgm,
    save_keeper,
)
from .losses import _bce_core, _ce_grid, _ce_scalar, _kl_grid, _l1_core
from .metrics import (
    EmptyGroundTruthWarning,
    GroundTruthMask,
    MetricParams,
    PredictionMap,
    ranked_weighted_fmeasure,
    weighted_fmeasure,
)
from .numeric import Tensor, finite_diff_grad
from .pddl import (
    PddlError,
    Unsolvable,
    ground,
    parse_domain,
    parse_goal,
    plan as search_plan,
    problem_to_pddl,
)
from .scene import StateKeeper, UngroundableGoalError, build_problem, update_keeper
from .sim import run_scenario

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILED = 2

AFFORDANCE_NAMES = ("grasp", "cut", "scoop", "contain", "pound", "support", "wrap-grasp")


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this project reserves 2 for
    'ran but failed', so remap usage errors to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    p = _Parser(prog="affplan", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"affplan {__version__}")
    p.add_argument(
        "--config",
        help=f"key=value config file (default: ${ENV_VAR} when set)",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("plan", help="plan from detections and a goal")
    sp.add_argument("domain", help="domain file (.pddl)")
    sp.add_argument("detections", help="affordance detections (.json)")
    sp.add_argument("--goal", required=True, help="goal, e.g. '(and (in fork bowl))'")
    sp.add_argument("--objects", help="object detections (.json)")
    sp.add_argument("--keeper", help="keeper state file (.json); loaded when present")
    sp.add_argument(
        "--update-keeper",
        action="store_true",
        help="write the post-plan keeper back to --keeper",
    )
    sp.add_argument("--planner", choices=["fast", "optimal"])
    sp.add_argument("--iou-min", type=float, dest="iou_min")
    sp.add_argument("--pixel-threshold", type=int, dest="pixel_threshold")
    sp.add_argument("--dump-problem", help="also write the generated problem PDDL here")

    sm = sub.add_parser("metrics", help="score predictions against ground truth")
    sm.add_argument("pred_dir", help="directory of prediction maps (.pgm)")
    sm.add_argument("gt_dir", help="directory of ground-truth masks (.pgm)")
    sm.add_argument(
        "--ranked",
        action="store_true",
        help="treat files <name>_r1/_r2/_r3.pgm as ranked predictions",
    )
    sm.add_argument("--out", help="write CSV here instead of stdout")
    sm.add_argument("--beta", type=float)
    sm.add_argument("--sigma", type=float)
    sm.add_argument("--alpha", type=float)

    sc = sub.add_parser("check-attention", help="gradient self-test")
    sc.add_argument("--seed", type=int)
    sc.add_argument("--trials", type=int, default=120)
    sc.add_argument("--tolerance", type=float, default=1e-4)

    ss = sub.add_parser("simulate", help="run a scenario spec")
    ss.add_argument("spec", help="scenario spec (.json)")
    ss.add_argument("--seed", type=int, help="override the spec's seed")
    ss.add_argument("--out", help="write the JSON report here")

    return p


# ---------------------------------------------------------------------------
# plan


def _cmd_plan(args, cfg) -> int:
    planner = args.planner or cfg.planner
    iou_min = cfg.iou_min if args.iou_min is None else args.iou_min
    threshold = (
        cfg.pixel_threshold if args.pixel_threshold is None else args.pixel_threshold
    )

    domain = parse_domain(Path(args.domain).read_text())
    detections = load_detections(args.detections)
    objects = load_objects(args.objects) if args.objects else []
    keeper = StateKeeper.empty()
    if args.keeper and Path(args.keeper).exists():
        keeper = load_keeper(args.keeper)
    goal = parse_goal(args.goal)

    try:
        prob = build_problem(
            detections,
            objects,
            keeper,
            goal,
            domain,
            iou_min=iou_min,
            pixel_threshold=threshold,
        )
    except UngroundableGoalError as e:
        print(f"no plan: {e}", file=sys.stderr)
        return EXIT_FAILED
    if args.dump_problem:
        Path(args.dump_problem).write_text(problem_to_pddl(prob))

    task = ground(domain, prob)
    found = search_plan(task, mode=planner)
    if isinstance(found, Unsolvable):
        print(f"no plan: {found.reason}", file=sys.stderr)
        for atom in found.unreachable_goals:
            print(f"  unreachable goal: ({' '.join(atom)})", file=sys.stderr)
        return EXIT_FAILED

    for step in found.steps:
        print(step)
    if not found.steps:
        print("; goal already satisfied", file=sys.stderr)

    if args.update_keeper:
        if not args.keeper:
            print("--update-keeper needs --keeper", file=sys.stderr)
            return EXIT_USAGE
        save_keeper(args.keeper, update_keeper(keeper, task, found))
    return EXIT_OK


# ---------------------------------------------------------------------------
# metrics


def _affordance_of(stem: str) -> str:
    tail = stem.rsplit("_", 1)[-1]
    return tail if tail in AFFORDANCE_NAMES else "-"


def _cmd_metrics(args, cfg) -> int:
    params = MetricParams(
        beta=cfg.beta if args.beta is None else args.beta,
        sigma=cfg.sigma if args.sigma is None else args.sigma,
        alpha=cfg.alpha if args.alpha is None else args.alpha,
    )
    pred_dir, gt_dir = Path(args.pred_dir), Path(args.gt_dir)
    for d in (pred_dir, gt_dir):
        if not d.is_dir():
            print(f"not a directory: {d}", file=sys.stderr)
            return EXIT_USAGE

    preds = sorted(p.relative_to(pred_dir) for p in pred_dir.rglob("*.pgm"))
    gts = sorted(p.relative_to(gt_dir) for p in gt_dir.rglob("*.pgm"))
    if not preds:
        print(f"no .pgm files under {pred_dir}", file=sys.stderr)
        return EXIT_USAGE

    import warnings

    rows: list[tuple[str, str, float]] = []
    if args.ranked:
        groups: dict[str, dict[int, Path]] = {}
        for rel in preds:
            stem = rel.with_suffix("").as_posix()
            base, _, rank = stem.rpartition("_r")
            if not base or not rank.isdigit() or not (1 <= int(rank) <= 3):
                print(f"{rel}: ranked mode needs _r1.._r3 suffixes", file=sys.stderr)
                return EXIT_USAGE
            groups.setdefault(base, {})[int(rank)] = pred_dir / rel
        gt_set = {g.with_suffix("").as_posix(): gt_dir / g for g in gts}
        missing = sorted(set(groups) ^ set(gt_set))
        if missing:
            print(f"unpaired stems: {', '.join(missing)}", file=sys.stderr)
            return EXIT_USAGE
        for base in sorted(groups):
            ranks = groups[base]
            if sorted(ranks) != list(range(1, len(ranks) + 1)):
                print(f"{base}: ranks must be contiguous from 1", file=sys.stderr)
                return EXIT_USAGE
            gt = GroundTruthMask((read_pgm(gt_set[base]) >= 0.5).astype(np.uint8))
            maps = []
            for r in sorted(ranks):
                m = read_pgm(ranks[r])
                if m.shape != gt.shape:
                    print(
                        f"shape mismatch: {ranks[r]} is {m.shape}, "
                        f"{gt_set[base]} is {gt.shape}",
                        file=sys.stderr,
                    )
                    return EXIT_USAGE
                maps.append(PredictionMap(m))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", EmptyGroundTruthWarning)
                score = ranked_weighted_fmeasure(maps, gt, params)
            rows.append((base, _affordance_of(base), score))
    else:
        if preds != gts:
            only_p = sorted(set(map(str, preds)) - set(map(str, gts)))
            only_g = sorted(set(map(str, gts)) - set(map(str, preds)))
            for f in only_p:
                print(f"missing ground truth for {f}", file=sys.stderr)
            for f in only_g:
                print(f"missing prediction for {f}", file=sys.stderr)
            return EXIT_USAGE
        for rel in preds:
            pm = read_pgm(pred_dir / rel)
            gm = read_pgm(gt_dir / rel)
            if pm.shape != gm.shape:
                print(
                    f"shape mismatch: {pred_dir / rel} is {pm.shape}, "
                    f"{gt_dir / rel} is {gm.shape}",
                    file=sys.stderr,
                )
                return EXIT_USAGE
            gt = GroundTruthMask((gm >= 0.5).astype(np.uint8))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", EmptyGroundTruthWarning)
                score = weighted_fmeasure(PredictionMap(pm), gt, params)
            stem = rel.with_suffix("").as_posix()
            rows.append((stem, _affordance_of(stem), score))

    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(["image", "affordance", "score"])
        for name, aff, score in rows:
            w.writerow([name, aff, f"{score:.6f}"])
        by_aff: dict[str, list[float]] = {}
        for _, aff, score in rows:
            by_aff.setdefault(aff, []).append(score)
        for aff in AFFORDANCE_NAMES:
            if aff in by_aff:
                w.writerow(
                    ["MEAN", aff, f"{sum(by_aff[aff]) / len(by_aff[aff]):.6f}"]
                )
        w.writerow(["MEAN", "all", f"{sum(r[2] for r in rows) / len(rows):.6f}"])
    finally:
        if args.out:
            out.close()
    return EXIT_OK


# ---------------------------------------------------------------------------
# check-attention


def _rel_err(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
    return float(np.max(np.abs(a - b) / denom))


def _check_attention_grads(rng: np.random.Generator, trials: int) -> float:
    worst = 0.0
    for _ in range(trials):
        c = int(rng.integers(1, 5))
        u = int(rng.integers(1, 6))
        v = int(rng.integers(1, 6))
        a = RegionFeature(Tensor.from_array(rng.standard_normal((c, u, v))))
        p = AttentionParams(
            wk=Tensor.from_array(rng.standard_normal((c, c)) / np.sqrt(c)),
            wq=Tensor.from_array(rng.standard_normal((c, c)) / np.sqrt(c)),
            wv=Tensor.from_array(rng.standard_normal((c, c)) / np.sqrt(c)),
            alpha=float(rng.uniform(-1.0, 1.0)),
        )
        up = rng.standard_normal((c, u, v))
        upstream = RegionFeature(Tensor.from_array(up))

        def loss_of(feature: Tensor, params: AttentionParams) -> float:
            out, _ = attention_forward(RegionFeature(feature), params)
            return float(np.sum(out.values.to_array() * up))

        ga, gp = attention_backward(a, p, upstream)

        fd_a = finite_diff_grad(lambda t: loss_of(t, p), a.values)
        worst = max(worst, _rel_err(ga.values.to_array(), fd_a.to_array()))
        for field_name in ("wk", "wq", "wv"):
            def f(t: Tensor, fn=field_name) -> float:
                kw = {"wk": p.wk, "wq": p.wq, "wv": p.wv, "alpha": p.alpha}
                kw[fn] = t
                return loss_of(a.values, AttentionParams(**kw))

            fd_w = finite_diff_grad(f, getattr(p, field_name))
            worst = max(
                worst,
                _rel_err(
                    getattr(gp, field_name).to_array(), fd_w.to_array()
                ),
            )
        fd_alpha = finite_diff_grad(
            lambda t: loss_of(
                a.values,
                AttentionParams(wk=p.wk, wq=p.wq, wv=p.wv, alpha=float(t.data[0])),
            ),
            Tensor((1,), [p.alpha]),
        )
        worst = max(worst, _rel_err(np.array([gp.alpha]), fd_alpha.to_array()))
    return worst


def _check_loss_grads(rng: np.random.Generator, trials: int) -> float:
    worst = 0.0
    for _ in range(trials):
        # detection loss pieces
        rho = float(rng.uniform(0.05, 0.95))
        cls = int(rng.integers(0, 2))
        _, d_rho = _ce_scalar(rho, cls)
        fd = finite_diff_grad(
            lambda t: _ce_scalar(float(t.data[0]), cls)[0], Tensor((1,), [rho])
        )
        worst = max(worst, _rel_err(np.array([d_rho]), fd.to_array()))

        b = rng.uniform(-2, 2, size=4)
        b_star = rng.uniform(-2, 2, size=4)
        _, db = _l1_core(b, b_star)
        fd = finite_diff_grad(
            lambda t: _l1_core(t.to_array(), b_star)[0], Tensor.from_array(b)
        )
        worst = max(worst, _rel_err(db, fd.to_array()))

        attr = rng.uniform(0.05, 0.95, size=7)
        y = rng.integers(0, 2, size=7)
        _, dattr = _bce_core(attr, y)
        fd = finite_diff_grad(
            lambda t: _bce_core(t.to_array(), y)[0], Tensor.from_array(attr)
        )
        worst = max(worst, _rel_err(dattr, fd.to_array()))

        # region losses on raw grids
        rows_n = int(rng.integers(1, 5))
        cols_n = int(rng.integers(2, 6))
        q = rng.uniform(0.05, 1.0, size=(rows_n, cols_n))
        q /= q.sum(axis=1, keepdims=True)
        onehot = np.zeros_like(q)
        onehot[np.arange(rows_n), rng.integers(0, cols_n, size=rows_n)] = 1.0
        _, dq = _ce_grid(q, onehot)
        fd = finite_diff_grad(
            lambda t: _ce_grid(t.to_array(), onehot)[0], Tensor.from_array(q)
        )
        worst = max(worst, _rel_err(dq, fd.to_array()))

        soft = rng.uniform(0.05, 1.0, size=(rows_n, cols_n))
        soft /= soft.sum(axis=1, keepdims=True)
        _, dq = _kl_grid(q, soft)
        fd = finite_diff_grad(
            lambda t: _kl_grid(t.to_array(), soft)[0], Tensor.from_array(q)
        )
        worst = max(worst, _rel_err(dq, fd.to_array()))
    return worst


def _cmd_check_attention(args, cfg) -> int:
    if args.trials < 1:
        print("--trials must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    seed = cfg.seed if args.seed is None else args.seed
    rng = np.random.default_rng(seed)
    print(f"kernel backend: {backend_name()}")
    worst_att = _check_attention_grads(rng, args.trials)
    print(f"attention gradients, {args.trials} instances: max rel err {worst_att:.3e}")
    worst_loss = _check_loss_grads(rng, max(1, args.trials // 4))
    print(
        f"loss gradients, {max(1, args.trials // 4)} instances: "
        f"max rel err {worst_loss:.3e}"
    )
    worst = max(worst_att, worst_loss)
    ok = worst < args.tolerance
    print(f"overall max rel err {worst:.3e} "
          f"({'PASS' if ok else 'FAIL'} at {args.tolerance:g})")
    return EXIT_OK if ok else EXIT_FAILED


# ---------------------------------------------------------------------------
# simulate


def _cmd_simulate(args, cfg) -> int:
    report = run_scenario(
        args.spec,
        seed=args.seed,
        iou_min=cfg.iou_min,
        pixel_threshold=cfg.pixel_threshold,
    )
    print(report.format_table())
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_json_dict(), indent=1) + "\n")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "plan":
            return _cmd_plan(args, cfg)
        if args.command == "metrics":
            return _cmd_metrics(args, cfg)
        if args.command == "check-attention":
            return _cmd_check_attention(args, cfg)
        if args.command == "simulate":
            return _cmd_simulate(args, cfg)
        parser.error(f"unknown command {args.command!r}")
    except (FormatError, PddlError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
