"""
Command-line entry point: ``hullft {select,schedule,toytrain,bench}``.

Exit codes: 2 usage / contract violation, 3 file format, 4 numerical failure.
Set ``HULLFT_THREADS`` to cap BLAS threads.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from contextlib import nullcontext

import numpy as np

from .errors import ContractError, NumericalError, PoolFormatError
from .formats import (
    atomic_write,
    dumps,
    multiset_from_selection,
    read_json,
    read_pool,
    read_query,
    read_schedule,
    read_sequence,
    schedule_to_dict,
    selection_to_dict,
)
from .frank_wolfe import FWConfig
from .geometry import CandidatePool, normalize_rows
from .pipeline import INTEGERIZERS, SELECTORS, SelectionRequest, hullft_select, knn_preselect
from .schedule import (
    BLOCK_ORDERS,
    build_reuse_schedule,
    consecutive_group,
    global_dedup,
    schedule_from_groups,
    TrainingSchedule,
)
from .toy_trainer import ToyModel, grad_reuse_train, plain_train

EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_NUMERICAL = 4


class UsageError(Exception):
    pass


def _emit(text: str, out=None):
    if out:
        atomic_write(out, text.encode("utf-8"))
    else:
        sys.stdout.write(text)


def _fw_config(args) -> FWConfig:
    return FWConfig(
        epsilon=args.epsilon,
        support_cap=args.support_cap,
        max_iters=args.max_iters,
        gap_tolerance=args.gap_tolerance,
    )


def cmd_select(args):
    if not args.pool and not args.corpus:
        raise UsageError("one of --pool or --corpus is required")
    query, query_id = read_query(args.query, args.query_row)
    if args.query_id is not None:
        query_id = args.query_id
    if args.corpus:
        corpus = read_pool(args.corpus)
        pool = knn_preselect(corpus, query, args.k_pool, metric=args.metric)
    else:
        pool = read_pool(args.pool)
    if args.normalize:
        pool = normalize_rows(pool)
    req = SelectionRequest(
        query=query,
        budget=args.budget,
        fw_config=_fw_config(args),
        swap_passes=args.swap_passes,
        selector=args.selector,
        integerizer=args.integerizer,
        pca_dim=args.pca_dim,
    )
    result = hullft_select(req, pool)
    if result.warning:
        print(f"warning: {result.warning}", file=sys.stderr)
    doc = selection_to_dict(result, pool, req, query_id=query_id, timing=not args.no_timing)
    _emit(dumps(doc), args.out)


def cmd_schedule(args):
    if bool(args.selection) == bool(args.sequence):
        raise UsageError("give exactly one of --selection or --sequence")
    if args.refresh < 1:
        raise UsageError("--refresh must be >= 1")
    known = None
    if args.pool:
        known = {str(i) for i in read_pool(args.pool).ids}

    if args.selection:
        doc = read_json(args.selection)
        ms, ids = multiset_from_selection(doc, source=args.selection)
        used = [ids[i] for i, _ in ms.nonzero()]
        schedule = build_reuse_schedule(ms, args.refresh, block_order=args.block_order, ids=ids)
    else:
        seq = read_sequence(args.sequence)
        used = seq
        if args.transform == "global-dedup":
            groups = global_dedup(seq)
        else:
            # a schedule is always run-based, so "none" and "consecutive" coincide
            groups = consecutive_group(seq)
        schedule = schedule_from_groups(groups, args.refresh)

    if known is not None:
        unknown = sorted({str(ex) for ex in used} - known)
        if unknown:
            raise UsageError(f"ids not in pool: {', '.join(unknown)}")
    _emit(dumps(schedule_to_dict(schedule)), args.out)


def _load_targets(path):
    doc = read_json(path)
    if not isinstance(doc, dict) or not doc:
        raise PoolFormatError(f"{path}: targets must be a non-empty object mapping id -> vector")
    try:
        targets = {str(k): np.asarray(v, dtype=np.float64) for k, v in doc.items()}
    except (TypeError, ValueError) as e:
        raise PoolFormatError(f"{path}: bad target vector ({e})") from None
    dims = {v.shape for v in targets.values()}
    if len(dims) != 1 or len(next(iter(dims))) != 1:
        raise PoolFormatError(f"{path}: target vectors must be 1-D with equal length")
    return targets


def cmd_toytrain(args):
    schedule = read_schedule(args.schedule)
    targets = _load_targets(args.targets)
    # targets are keyed by string, so ids are compared as strings
    schedule = TrainingSchedule(tuple((str(ex), a) for ex, a in schedule.steps), schedule.refresh_interval)
    missing = sorted({ex for ex in schedule.example_ids if ex not in targets})
    if missing:
        raise PoolFormatError(f"{args.targets}: no target for scheduled ids: {', '.join(missing)}")

    dim = next(iter(targets.values())).shape[0]
    if args.theta0:
        theta0 = np.asarray(read_json(args.theta0), dtype=np.float64)
        if theta0.shape != (dim,):
            raise PoolFormatError(f"{args.theta0}: theta0 must have length {dim}")
    else:
        theta0 = np.random.default_rng(args.seed).standard_normal(dim)
    model = ToyModel(targets, theta0)

    if args.plain:
        res = plain_train(model, schedule.example_ids, lr=args.lr)
    else:
        res = grad_reuse_train(model, schedule, lr=args.lr)
    doc = {
        "mode": "plain" if args.plain else "grad_reuse",
        "refresh_interval": schedule.refresh_interval,
        "steps": res.steps,
        "fb_passes": res.fb_passes,
        "schedule_fb_passes": schedule.stats().fb_passes,
        "initial_loss": res.loss_trace[0],
        "final_loss": res.final_loss,
        "loss_trace": list(res.loss_trace),
        "theta": res.theta.tolist(),
    }
    _emit(dumps(doc), args.out)


def _parse_budgets(spec: str):
    out = []
    for part in spec.split(","):
        part = part.strip()
        if ":" in part:
            lo, hi = part.split(":")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out or min(out) < 1:
        raise UsageError(f"bad --budgets {spec!r}")
    return out


def synthetic_instance(k: int, dim: int, seed: int):
    """Unit-norm pool around a shared topic direction, plus a query near that direction.

    Mimics a kNN candidate pool: every row leans toward the query, so the
    query's projection onto the hull spreads over many points.
    """
    rng = np.random.default_rng(seed)
    topic = rng.standard_normal(dim)
    topic /= np.linalg.norm(topic)
    X = topic + rng.standard_normal((k, dim)) / np.sqrt(dim)
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    q = topic + 0.3 * rng.standard_normal(dim) / np.sqrt(dim)
    q /= np.linalg.norm(q)
    return CandidatePool(X.astype(np.float32)), q


BENCH_COLUMNS = [
    "selector",
    "integerizer",
    "budget",
    "fw_error",
    "integer_error",
    "fidelity_l2",
    "support_size",
    "iterations",
    "stop_reason",
    "select_seconds",
    "integerize_seconds",
]


def run_bench(pool, query, budgets, selectors, integerizers, fw_config, swap_passes):
    rows = []
    for sel in selectors:
        for integ in integerizers:
            for n in budgets:
                req = SelectionRequest(query, n, fw_config, swap_passes, sel, integ)
                res = hullft_select(req, pool)
                rows.append(
                    {
                        "selector": sel,
                        "integerizer": integ,
                        "budget": n,
                        "fw_error": res.metrics["fw_error"],
                        "integer_error": res.metrics["integer_error"],
                        "fidelity_l2": res.metrics["fidelity_l2"],
                        "support_size": res.metrics["support_size"],
                        "iterations": res.iterations,
                        "stop_reason": res.stop_reason,
                        "select_seconds": res.timings["select"],
                        "integerize_seconds": res.timings["integerize"],
                    }
                )
    return rows


def cmd_bench(args):
    if args.pool:
        pool = read_pool(args.pool)
        if not args.query:
            raise UsageError("--query is required with --pool")
        query, _ = read_query(args.query, args.query_row)
    else:
        pool, query = synthetic_instance(args.k, args.dim, args.seed)
    selectors = [s.strip() for s in args.selectors.split(",")]
    integerizers = [s.strip() for s in args.integerizers.split(",")]
    for s in selectors:
        if s not in SELECTORS:
            raise UsageError(f"unknown selector {s!r}")
    for s in integerizers:
        if s not in INTEGERIZERS:
            raise UsageError(f"unknown integerizer {s!r}")
    rows = run_bench(pool, query, _parse_budgets(args.budgets), selectors, integerizers, _fw_config(args), args.swap_passes)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    _emit(buf.getvalue(), args.out)


def _add_fw_flags(p):
    p.add_argument("--epsilon", type=float, default=1e-5, help="FW squared-error tolerance (default 1e-5)")
    p.add_argument("--support-cap", type=int, default=None, help="FW support cap m (default: the budget N)")
    p.add_argument("--max-iters", type=int, default=None, help="FW iteration limit (default 10*m)")
    p.add_argument("--gap-tolerance", type=float, default=1e-12, help="stop when the FW gap falls below this")
    p.add_argument("--swap-passes", type=int, default=2, help="local-swap passes T (default 2)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hullft", description="Convex-hull data selection and gradient-reuse schedules.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select", help="select an N-example training multiset for a query")
    p.add_argument("--pool", help="candidate pool file (HFT1)")
    p.add_argument("--corpus", help="corpus file (HFT1); preselects --k-pool nearest neighbours first")
    p.add_argument("--query", required=True, help="query: JSON vector/object or HFT1 file")
    p.add_argument("--query-row", type=int, default=0, help="row to use when --query is an HFT1 file")
    p.add_argument("--query-id", default=None, help="override the query id written to the output")
    p.add_argument("--budget", type=int, required=True, help="budget N (multiset size)")
    p.add_argument("--k-pool", type=int, default=200, help="kNN pool size with --corpus (default 200)")
    p.add_argument("--metric", choices=["inner_product", "euclidean"], default="inner_product")
    p.add_argument("--normalize", action="store_true", help="normalize pool rows to unit norm first")
    p.add_argument("--selector", choices=SELECTORS, default="fw")
    p.add_argument("--integerizer", choices=INTEGERIZERS, default="geometric")
    p.add_argument("--pca-dim", type=int, default=None, help="run selection in a d'-dimensional PCA space")
    _add_fw_flags(p)
    p.add_argument("--no-timing", action="store_true", help="omit stage timings from the output")
    p.add_argument("--out", help="write here instead of standard output")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("schedule", help="build a gradient-reuse training schedule")
    p.add_argument("--selection", help="selection JSON from 'hullft select'")
    p.add_argument("--sequence", help="plain text file, one example id per line")
    p.add_argument("--transform", choices=["none", "global-dedup", "consecutive"], default="none")
    p.add_argument("--refresh", type=int, default=2, help="refresh interval r (default 2)")
    p.add_argument("--block-order", choices=BLOCK_ORDERS, default="count_descending")
    p.add_argument("--pool", help="optional pool file; scheduled ids must exist in it")
    p.add_argument("--out", help="write here instead of standard output")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("toytrain", help="run the schedule on the least-squares toy model with Adam")
    p.add_argument("--schedule", required=True, help="schedule JSON")
    p.add_argument("--targets", required=True, help="JSON object mapping example id -> target vector")
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0, help="seed for the initial parameters")
    p.add_argument("--theta0", help="JSON list with explicit initial parameters")
    p.add_argument("--plain", action="store_true", help="ignore reuse flags; recompute every gradient")
    p.add_argument("--out", help="write here instead of standard output")
    p.set_defaults(func=cmd_toytrain)

    p = sub.add_parser("bench", help="time selectors and integerizers over a budget sweep (CSV)")
    p.add_argument("--pool", help="pool file; default is a synthetic pool")
    p.add_argument("--query", help="query file (required with --pool)")
    p.add_argument("--query-row", type=int, default=0)
    p.add_argument("--k", type=int, default=200, help="synthetic pool size")
    p.add_argument("--dim", type=int, default=768, help="synthetic dimension")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budgets", default="1:50", help="e.g. '1:50' or '5,10,20'")
    p.add_argument("--selectors", default="fw,caratheodory")
    p.add_argument("--integerizers", default="geometric,pad_by_weights")
    _add_fw_flags(p)
    p.add_argument("--out", help="write here instead of standard output")
    p.set_defaults(func=cmd_bench)
    return parser


def _thread_limit():
    raw = os.environ.get("HULLFT_THREADS")
    if raw is None:
        return nullcontext()
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise UsageError(f"HULLFT_THREADS must be a positive integer, got {raw!r}")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with _thread_limit():
            args.func(args)
    except (UsageError, ContractError) as e:
        print(f"hullft {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (PoolFormatError, OSError) as e:
        print(f"hullft {args.command}: {e}", file=sys.stderr)
        return EXIT_FORMAT
    except (NumericalError, FloatingPointError) as e:
        print(f"hullft {args.command}: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    return 0


if __name__ == "__main__":
    sys.exit(main())

