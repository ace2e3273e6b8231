"""Greedy vs random vs 2-hop cover placement on one set of 68-bus data.

Trains a full-budget CNN on each bus set and prints the test LAR; the
random baseline is averaged over ``--random-seeds`` seeds.

    python scripts/compare_placements.py configs/placement_68_greedy.yaml
"""
import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

from faultloc.experiment import ExperimentConfig, PlacementConfig, run_experiment


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config", type=Path)
    ap.add_argument("--random-seeds", type=int, default=5)
    ap.add_argument("--out", type=Path, default=Path("out/placements"))
    args = ap.parse_args(argv)

    cfg = ExperimentConfig.load(args.config)
    pc = cfg.placement

    def run(tag, placement):
        rep = run_experiment(replace(cfg, name=tag, placement=placement),
                             placement_out=args.out / f"{tag}.json")
        rep.save(args.out / f"{tag}_report.json")
        if rep.failed:
            raise SystemExit(f"{tag}: {rep.error}")
        print(f"{tag:>10}: |S|={len(rep.observed):2d} LAR={rep.lar:.4f} ARC={rep.arc:.2f}")
        return rep.lar

    greedy = run("greedy", replace(pc, algorithm="greedy"))
    rand = [run(f"random{s}", PlacementConfig("random", K=pc.K, ratio=pc.ratio, seed=s))
            for s in range(args.random_seeds)]
    run("two_hop_vc", PlacementConfig("two_hop_vc"))
    print(f"greedy - mean(random) = {greedy - np.mean(rand):+.4f}")


if __name__ == "__main__":
    main()
