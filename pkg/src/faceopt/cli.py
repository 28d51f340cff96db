"""Command-line entry points: run, report, compare, serve-sim, analyze."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import analysis
from .config import CampaignConfig, ConfigError, load_config
from .evaluators import EMOTIONS
from .facesim import DEFAULT_TEMPERATURE, FaceSimulator
from .loop import incumbent_trace, random_baseline, run_campaign
from .space import ParameterSpace, SpaceError
from .store import CampaignStore, StoreError, recording_hook

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_ABORTED = 3

log = logging.getLogger("faceopt")


class UsageError(Exception):
    pass


def _parse_seeds(text: str) -> list[int]:
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError("empty seed list")
    return seeds


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())


def _fmt(x) -> str:
    return "" if x is None else repr(x)


# -- run ---------------------------------------------------------------------


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.target is not None:
        overrides["target"] = args.target
    if args.rounds is not None:
        overrides["rounds"] = args.rounds
    try:
        cfg = cfg.with_loop(**overrides)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    campaign_id = args.campaign_id or f"{cfg.loop.target}-seed{cfg.loop.seed}"
    store = CampaignStore(args.store)
    evaluator = cfg.build_evaluator()

    if args.resume:
        manifest = store.manifest(campaign_id)
        dataset, start = store.resume(campaign_id, cfg.space)
        loop_cfg = manifest.loop_config
        records = store.load_records(campaign_id)
        print(f"resuming {campaign_id} at round {start} with {len(dataset)} observations")
    else:
        if store.exists(campaign_id):
            raise UsageError(f"campaign {campaign_id!r} already exists in {args.store}; use --resume")
        loop_cfg = cfg.loop
        store.create(campaign_id, loop_cfg, cfg.space, evaluator.evaluator_id)
        records = []

    result = run_campaign(cfg.space, evaluator, loop_cfg, records=records,
                          on_record=recording_hook(store, campaign_id))
    store.set_status(campaign_id, result.status)
    print(f"{campaign_id}: {result.status} after {len(result.records)} rounds; "
          f"best {loop_cfg.target} = {_fmt(result.best_value)} at {list(result.best_point or [])}")
    return EXIT_OK if result.status == "complete" else EXIT_ABORTED


# -- report --------------------------------------------------------------------


def cmd_report(args) -> int:
    store = CampaignStore(args.store)
    manifest = store.manifest(args.campaign_id)
    space = store.load_space(args.campaign_id)
    records = store.load_records(args.campaign_id)
    if not records:
        raise UsageError(f"campaign {args.campaign_id!r} has no rounds yet")
    trace = incumbent_trace(records)
    target = manifest.config["target"]

    print(f"campaign {args.campaign_id} ({manifest.status}), target {target}, {len(records)} rounds")
    print("round,incumbent")
    for i, v in trace:
        print(f"{i},{v!r}")
    best = max((r for r in records if r.ok), key=lambda r: r.objective, default=None)
    if best is not None:
        print(f"best round {best.index}: {target} = {best.objective!r}")
        print("best point: " + " ".join(str(c) for c in best.point))
        print("best vector: " + " ".join(f"{a}={v}" for a, v in space.expand(best.point).items()))
    if args.table:
        print("round,status,objective,incumbent," + ",".join(EMOTIONS) + ",coords")
        for r in records:
            scores = ",".join(_fmt(r.scores[e]) if r.scores else "" for e in EMOTIONS)
            print(f"{r.index},{r.status},{_fmt(r.objective)},{_fmt(r.incumbent)},{scores},"
                  + " ".join(map(str, r.point)))

    out = Path(args.out) if args.out else store.root / args.campaign_id / "report"
    incumbents = dict(trace)
    _write_csv(out / "trace.csv", ("round", "objective", "incumbent"),
               [(r.index, _fmt(r.objective), _fmt(incumbents.get(r.index))) for r in records])
    (out / "export.csv").write_text(store.export_table([args.campaign_id]))
    if not args.no_figures:
        from .plotting import incumbent_figure

        observed = [(r.index, r.objective) for r in records if r.ok]
        incumbent_figure({target: trace}, out / "trace.png", observed={target: observed})
    print(f"wrote {out}")
    return EXIT_OK


# -- compare -------------------------------------------------------------------


def _compare_one(cfg: CampaignConfig, target: str, seed: int, budget: int):
    space = cfg.space
    evaluator = cfg.build_evaluator()
    loop_cfg = replace(cfg.loop, target=target, seed=seed, rounds=budget)
    bo = run_campaign(space, evaluator, loop_cfg).trace()
    rnd = random_baseline(space, evaluator, budget, seed, target)
    return target, seed, bo, rnd


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    budget = args.budget or cfg.loop.rounds
    if budget < 1:
        raise UsageError("budget must be at least 1")
    if args.target == "all":
        targets = list(EMOTIONS)
    else:
        targets = [args.target or cfg.loop.target]
    jobs = [(t, s) for t in targets for s in args.seeds]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_compare_one, *zip(*[(cfg, t, s, budget) for t, s in jobs])))
    else:
        results = [_compare_one(cfg, t, s, budget) for t, s in jobs]

    rows = []
    print("target,median_bo_final,median_random_final,bo_wins,pairs")
    for t in targets:
        mine = [r for r in results if r[0] == t]
        bo_final = [r[2][-1][1] for r in mine]
        rnd_final = [r[3][-1][1] for r in mine]
        wins = sum(b >= r for b, r in zip(bo_final, rnd_final))
        print(f"{t},{statistics.median(bo_final)!r},{statistics.median(rnd_final)!r},{wins},{len(mine)}")
        rows.extend((t, r[1], repr(r[2][-1][1]), repr(r[3][-1][1])) for r in mine)
    if args.out:
        out = Path(args.out)
        _write_csv(out / "compare.csv", ("target", "seed", "bo_final", "random_final"), rows)
        if not args.no_figures:
            from .plotting import incumbent_figure

            for t in targets:
                mine = [r for r in results if r[0] == t]
                med_bo = [(i, statistics.median(r[2][i][1] for r in mine)) for i in range(budget)]
                med_rnd = [(i, statistics.median(r[3][i][1] for r in mine)) for i in range(budget)]
                incumbent_figure({"BO median": med_bo, "random median": med_rnd}, out / f"compare_{t}.png",
                                 ylabel=f"{t} score")
        print(f"wrote {out}")
    return EXIT_OK


# -- serve-sim -----------------------------------------------------------------


def cmd_serve(args) -> int:
    from .server import make_server

    space = ParameterSpace.load(args.space) if args.space else ParameterSpace.default()
    sim = FaceSimulator(space, temperature=args.temperature)
    server = make_server(sim, space, args.host, args.port, args.path)
    host, port = server.server_address[:2]
    print(f"serving face simulator on http://{host}:{port}{args.path}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


# -- analyze -------------------------------------------------------------------


def cmd_analyze(args) -> int:
    human = analysis.read_ratings(args.ratings)
    normalized = list(analysis.normalized_rows(human))
    summary = analysis.summarize(human)
    machine = analysis.read_ratings(args.machine) if args.machine else None
    corr = analysis.correlate_by_emotion(machine, human, args.normalized) if machine else {}

    print("stimulus,condition,target,rater,normalized_target_rating")
    for row, value in normalized:
        print(f"{row.stimulus},{row.condition},{row.target},{row.rater},{value!r}")
    print("target,condition,n,mean_raw,mean_normalized")
    for (t, c), s in summary.items():
        print(f"{t},{c},{s['n']},{s['raw']!r},{s['normalized']!r}")
    if corr:
        print("target,n,pearson_r,slope,intercept")
        for e, (c, pairs) in corr.items():
            if c is None:
                print(f"{e},{len(pairs)},,,")
            else:
                print(f"{e},{c.n},{c.r!r},{c.slope!r},{c.intercept!r}")

    if args.out:
        out = Path(args.out)
        _write_csv(out / "normalized.csv", ("stimulus", "condition", "target", "rater", "normalized_target_rating"),
                   [(r.stimulus, r.condition, r.target, r.rater, repr(v)) for r, v in normalized])
        _write_csv(out / "summary.csv", ("target", "condition", "n", "mean_raw", "mean_normalized"),
                   [(t, c, s["n"], repr(s["raw"]), repr(s["normalized"])) for (t, c), s in summary.items()])
        if corr:
            _write_csv(out / "correlations.csv", ("target", "n", "pearson_r", "slope", "intercept"),
                       [(e, len(p), *(("", "", "") if c is None else (repr(c.r), repr(c.slope), repr(c.intercept))))
                        for e, (c, p) in corr.items()])
            if not args.no_figures:
                from .plotting import correlation_figure

                panels = {e: ([p[1] for p in pairs], [p[2] for p in pairs], None if c is None else (c.slope, c.intercept))
                          for e, (c, pairs) in corr.items()}
                correlation_figure(panels, out / "correlation.png")
        print(f"wrote {out}")
    return EXIT_OK


# -- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="faceopt", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run or resume one campaign from a config file")
    run.add_argument("--config", required=True, help="campaign YAML config")
    run.add_argument("--seed", type=int, help="override loop.seed")
    run.add_argument("--target", choices=EMOTIONS, help="override loop.target")
    run.add_argument("--rounds", type=int, help="override loop.rounds")
    run.add_argument("--store", default="runs", help="campaign store directory (default: runs)")
    run.add_argument("--campaign-id", help="campaign id (default: <target>-seed<seed>)")
    run.add_argument("--resume", action="store_true", help="continue an interrupted campaign")
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="incumbent trace, best vector, CSV and figure files")
    rep.add_argument("--store", default="runs")
    rep.add_argument("--campaign-id", required=True)
    rep.add_argument("--table", action="store_true", help="also print the per-round table")
    rep.add_argument("--out", help="output directory (default: <store>/<id>/report)")
    rep.add_argument("--no-figures", action="store_true", help="write CSV only")
    rep.set_defaults(func=cmd_report)

    cmp_ = sub.add_parser("compare", help="BO against uniform random search over paired seeds")
    cmp_.add_argument("--config", required=True)
    cmp_.add_argument("--seeds", type=_parse_seeds, default=_parse_seeds("1-10"), help="e.g. 1-10 or 1,4,9")
    cmp_.add_argument("--target", help="emotion, or 'all' (default: config target)")
    cmp_.add_argument("--budget", type=int, help="evaluations per run (default: loop.rounds)")
    cmp_.add_argument("--jobs", type=int, default=1, help="worker processes")
    cmp_.add_argument("--out", help="directory for compare.csv and figures")
    cmp_.add_argument("--no-figures", action="store_true")
    cmp_.set_defaults(func=cmd_compare)

    srv = sub.add_parser("serve-sim", help="host the face simulator behind the JSON wire protocol")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8765)
    srv.add_argument("--path", default="/evaluate")
    srv.add_argument("--temperature", type=float, default=DEFAULT_TEMPERATURE)
    srv.add_argument("--space", help="space YAML (default: bundled 14-group space)")
    srv.set_defaults(func=cmd_serve)

    ana = sub.add_parser("analyze", help="normalized ratings and machine/human correlations")
    ana.add_argument("ratings", help="ratings CSV")
    ana.add_argument("--machine", help="machine-score CSV in the same format for correlations")
    ana.add_argument("--normalized", action="store_true", help="correlate normalized target ratings")
    ana.add_argument("--out", help="directory for CSV and figure output")
    ana.add_argument("--no-figures", action="store_true")
    ana.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "compare" and args.target not in (None, "all") and args.target not in EMOTIONS:
        parser.error(f"--target must be an emotion or 'all', got {args.target!r}")
    try:
        return args.func(args)
    except (ConfigError, UsageError, StoreError, SpaceError, analysis.RatingsError) as exc:
        print(f"faceopt {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
