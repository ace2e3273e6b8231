"""Run one config over a grid of seeds / observability ratios / placements.

    python scripts/sweep.py configs/delay_68.yaml --seeds 0 1 2 \
        --ratios 0.15 0.2 0.25 0.3 --algorithms random greedy --out out/sweep

Every run writes ``<out>/<id>/report.json``; the summary tables from
``faultloc.report`` land in ``<out>``.
"""
import argparse
from dataclasses import replace
from pathlib import Path

from faultloc.experiment import ExperimentConfig, run_experiment
from faultloc.report import emit_report


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config", type=Path)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--ratios", type=float, nargs="*", default=[])
    ap.add_argument("--algorithms", nargs="*", default=[])
    ap.add_argument("--out", type=Path, default=Path("out/sweep"))
    ap.add_argument("--svg", action="store_true")
    args = ap.parse_args(argv)

    base = ExperimentConfig.load(args.config)
    ratios = args.ratios or [base.placement.ratio]
    algorithms = args.algorithms or [base.placement.algorithm]
    reports = []
    for algo in algorithms:
        for ratio in ratios:
            for seed in args.seeds:
                run_id = f"{base.name}_{algo}_r{ratio}_s{seed}"
                placement = replace(base.placement, algorithm=algo, ratio=ratio,
                                    K=None if ratio is not None else base.placement.K)
                cfg = replace(base, name=run_id, seed=seed, placement=placement)
                rep = run_experiment(cfg, placement_out=args.out / run_id / "placement.json")
                rep.save(args.out / run_id / "report.json")
                print(f"{run_id}: {rep.status} LAR={rep.lar}")
                reports.append(rep)
    for path in emit_report(reports, args.out, ["csv", "svg"] if args.svg else ["csv"]):
        print(path)


if __name__ == "__main__":
    main()
