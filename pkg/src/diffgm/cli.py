"""Command-line experiment runner.

    diffgm generate --n 10 --points 8 --seed 7 --out data/
    diffgm solve data/*.json --solver gms --alpha 0.5 --out results/
    diffgm train --solver gms --alpha-sweep --epochs 5 --out runs/
    diffgm report runs/*.csv --out runs/

Exit codes: 0 success, 1 usage error, 2 data error, 3 solver node cap hit.
"""

from __future__ import annotations

import argparse
import csv
import io
import re
import sys
import time
from pathlib import Path

import numpy as np

from .graph import ContractError, accuracy, dumps_instance, loads_instance, score_linear
from .generator import GeneratorConfig, generate_dataset, inner_product_instance
from .learn import (
    SOLVERS, SimilarityModel, TrainConfig, compute_similarities, read_metrics_csv, train,
    write_metrics_csv,
)
from .layer import DEFAULT_LAMBDA, SinkhornPipeline
from .solver import MAX_EXPANDED, QualityLevel, solve_gms, solve_gms_star

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_EXHAUSTED = 0, 1, 2, 3
RESULTS_HEADER = "id,solver,alpha,score,lb,ub,gap,acc,wall_ms,tree_nodes,root_optimal"
SWEEP_ALPHAS = (0.0, 0.5, 1.0, 1.5, 2.0)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _num(x) -> str:
    return "" if x is None else repr(float(x))


def _metrics_name(solver: str, alpha: float) -> str:
    return f"metrics_{solver}_alpha{alpha:g}.csv"


def _generator_config(args, seed: int) -> GeneratorConfig:
    if args.points < 3:
        raise UsageError("--points must be >= 3 (a triangulation needs three points)")
    if args.outliers < 0 or args.noise < 0:
        raise UsageError("--outliers and --noise must be >= 0")
    dim = args.dim if args.dim is not None else args.points
    if dim < 1:
        raise UsageError("--dim must be >= 1")
    return GeneratorConfig(args.points, dim, args.noise, args.outliers, seed, args.position_noise)


# ----------------------------------------------------------------- generate

def cmd_generate(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    samples = generate_dataset(_generator_config(args, args.seed), args.n)
    model = SimilarityModel.load(args.model) if args.model else None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    width = max(4, len(str(args.n - 1)))
    for idx, s in enumerate(samples):
        inst = inner_product_instance(s) if model is None else compute_similarities(model, s)
        text = dumps_instance(inst, s.v_gt)
        (out / f"instance_{idx:0{width}d}.json").write_text(text + "\n")
    print(f"wrote {args.n} instances to {out}")
    return EXIT_OK


# -------------------------------------------------------------------- solve

def _instance_paths(inputs) -> list[Path]:
    paths = []
    for p in map(Path, inputs):
        paths.extend(sorted(p.glob("*.json")) if p.is_dir() else [p])
    return paths


def _solve_one(instance, solver: str, alpha: float, max_nodes: int):
    if solver == "gms":
        r = solve_gms(instance, QualityLevel(alpha), max_expanded=max_nodes)
        return r.assignment, r.score, r.lb, r.ub, r.gap, r.tree_nodes_expanded, r.root_optimal, r.exhausted
    if solver == "gms-star":
        r = solve_gms_star(instance)
        return r.assignment, r.score, r.lb, r.ub, r.gap, 0, True, False
    a = SinkhornPipeline()(instance)
    s = score_linear(instance, a)
    return a, s, s, None, None, 0, None, False


def cmd_solve(args) -> int:
    if args.alpha < 0:
        raise UsageError("--alpha must be >= 0")
    paths = _instance_paths(args.inputs)
    if not paths:
        raise UsageError("no instance files given")
    buf = io.StringIO()
    buf.write(RESULTS_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    failures = exhausted = 0
    for path in paths:
        try:
            instance, v_gt = loads_instance(path.read_text())
        except (OSError, ValueError) as exc:
            failures += 1
            print(f"{path}: {exc}", file=sys.stderr)
            w.writerow([path.stem, args.solver, _num(args.alpha)] + ["error"] + [""] * 7)
            continue
        t0 = time.perf_counter()
        a, score, lb, ub, gap, nodes, root_opt, hit_cap = _solve_one(
            instance, args.solver, args.alpha, args.max_nodes)
        wall_ms = 1000.0 * (time.perf_counter() - t0)
        exhausted += hit_cap
        acc = accuracy(v_gt, a.v) if v_gt is not None and v_gt.any() else None
        w.writerow([path.stem, args.solver, _num(args.alpha), _num(score), _num(lb), _num(ub),
                    _num(gap), _num(acc), "" if args.no_timing else f"{wall_ms:.3f}", nodes,
                    "" if root_opt is None else int(root_opt)])
    _emit(buf.getvalue(), args.out, "results.csv")
    if failures == len(paths):
        return EXIT_DATA
    if exhausted:
        print(f"{exhausted} instance(s) hit the node cap", file=sys.stderr)
        return EXIT_EXHAUSTED
    return EXIT_OK


def _emit(text: str, out, filename: str) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / filename).write_text(text)


# -------------------------------------------------------------------- train

def cmd_train(args) -> int:
    if args.n < 1 or args.test_n < 0:
        raise UsageError("--n must be >= 1 and --test-n >= 0")
    alphas = SWEEP_ALPHAS if args.alpha_sweep else (args.alpha,)
    if args.alpha_sweep and args.solver != "gms":
        raise UsageError("--alpha-sweep only applies to --solver gms")
    try:
        configs = [TrainConfig(learning_rate=args.lr, batch_size=args.batch, epochs=args.epochs,
                               lam=args.lam, alpha=a, seed=args.seed) for a in alphas]
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    train_set = generate_dataset(_generator_config(args, args.seed), args.n)
    test_set = generate_dataset(_generator_config(args, args.seed + 1), args.test_n)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for cfg in configs:
        model, history = train(train_set, cfg, args.solver, test_set)
        name = _metrics_name(args.solver, cfg.alpha)
        write_metrics_csv(out / name, history)
        model.save(out / (name[len("metrics_"):-len(".csv")] + ".model.npz"))
        last = history[-1] if history else None
        print(f"{name}: test_acc={last.test_acc:.4f}" if last else f"{name}: no epochs")
    return EXIT_OK


# ------------------------------------------------------------------- report

_RUN_RE = re.compile(r"metrics_(?P<solver>[a-z-]+)_alpha(?P<alpha>[0-9.eE+-]+)$")


def _run_key(path: Path):
    m = _RUN_RE.match(path.stem)
    if m:
        return m["solver"], float(m["alpha"])
    return path.stem, None


def summarize(paths) -> list[dict]:
    """One summary row per metrics CSV."""
    rows = []
    for path in map(Path, paths):
        history = read_metrics_csv(path)
        if not history:
            raise ContractError(f"{path}: no epochs")
        solver, alpha = _run_key(path)
        last = history[-1]
        rows.append({
            "run": path.stem, "solver": solver, "alpha": alpha, "epochs": last.epoch,
            "train_acc": last.train_acc, "test_acc": last.test_acc,
            "best_test_acc": max(h.test_acc for h in history),
            "mean_tree_nodes": float(np.mean([h.mean_tree_nodes for h in history])),
            "history": history,
        })
    rows.sort(key=lambda r: (r["solver"], -1.0 if r["alpha"] is None else r["alpha"], r["run"]))
    return rows


def format_table(rows) -> str:
    cols = ["solver", "alpha", "epochs", "train_acc", "test_acc", "best_test_acc", "mean_tree_nodes"]
    cells = [cols]
    for r in rows:
        cells.append([r["solver"], "-" if r["alpha"] is None else f"{r['alpha']:g}", str(r["epochs"]),
                      f"{r['train_acc']:.4f}", f"{r['test_acc']:.4f}",
                      f"{r['best_test_acc']:.4f}", f"{r['mean_tree_nodes']:.1f}"])
    widths = [max(len(c[j]) for c in cells) for j in range(len(cols))]
    lines = ["  ".join(c[j].rjust(widths[j]) for j in range(len(cols))) for c in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def plot_data(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run", "solver", "alpha", "epoch", "train_acc", "test_acc"])
    for r in rows:
        for h in r["history"]:
            w.writerow([r["run"], r["solver"], "" if r["alpha"] is None else _num(r["alpha"]),
                        h.epoch, _num(h.train_acc), _num(h.test_acc)])
    return buf.getvalue()


def cmd_report(args) -> int:
    paths = list(_expand_csvs(args.inputs))
    if not paths:
        raise UsageError("no metrics CSV given")
    rows = summarize(paths)
    table = format_table(rows)
    sys.stdout.write(table)
    if args.out is not None:
        _emit(table, args.out, "report.txt")
        _emit(plot_data(rows), args.out, "plot_data.csv")
    return EXIT_OK


def _expand_csvs(inputs):
    for p in map(Path, inputs):
        if p.is_dir():
            yield from sorted(p.glob("metrics_*.csv"))
        else:
            yield p


# --------------------------------------------------------------------- main

def _dataset_flags(p):
    p.add_argument("--points", type=int, default=8)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--outliers", type=int, default=0)
    p.add_argument("--position-noise", type=float, default=0.0)
    p.add_argument("--dim", type=int, default=None, help="descriptor dimension (default: --points)")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="diffgm", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write synthetic instances as JSON")
    g.add_argument("--n", type=int, default=10)
    _dataset_flags(g)
    g.add_argument("--model", default=None,
                   help="trained model file; similarities come from it instead of inner products")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="solve instance files, one CSV row each")
    s.add_argument("inputs", nargs="+", help="instance files or directories")
    s.add_argument("--solver", choices=SOLVERS, default="gms")
    s.add_argument("--alpha", type=float, default=0.0)
    s.add_argument("--max-nodes", type=int, default=MAX_EXPANDED)
    s.add_argument("--no-timing", action="store_true", help="leave wall_ms empty")
    s.add_argument("--out", default=None, help="directory for results.csv (default: stdout)")
    s.set_defaults(func=cmd_solve)

    t = sub.add_parser("train", help="train a similarity model, one metrics CSV per run")
    t.add_argument("--solver", choices=SOLVERS, default="gms")
    t.add_argument("--alpha", type=float, default=0.0)
    t.add_argument("--alpha-sweep", action="store_true", help="run alpha in 0, 0.5, 1, 1.5, 2")
    t.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    t.add_argument("--epochs", type=int, default=10)
    t.add_argument("--batch", type=int, default=8)
    t.add_argument("--lr", type=float, default=2e-3)
    t.add_argument("--n", type=int, default=32, help="training pairs")
    t.add_argument("--test-n", type=int, default=20, help="test pairs")
    _dataset_flags(t)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("report", help="summarize metrics CSVs")
    r.add_argument("inputs", nargs="+", help="metrics CSVs or directories")
    r.add_argument("--out", default=None, help="directory for report.txt and plot_data.csv")
    r.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"diffgm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ContractError, OSError, ValueError, csv.Error, KeyError) as exc:
        print(f"diffgm: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
