"""Best two-color inversion as both colors are scaled by a power multiplier."""

import argparse
from pathlib import Path

from swingup.config import ExperimentConfig
from swingup.io import write_table
from swingup.protocols import run_super_power_extension


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--multipliers", type=float, nargs="+")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="out/extension.csv")
    args = ap.parse_args()
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    ext = run_super_power_extension(cfg, args.multipliers, workers=args.workers)
    rows = list(zip(ext.multipliers, ext.best_detuning, ext.best_inversion))
    for m, d, v in rows:
        print(f"x{m:5.2f}  {d:7.1f} GHz  {v:.4f}")
    if ext.non_monotone:
        print("drops before the plateau at multipliers", ext.non_monotone)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_table(args.out, ["multiplier", "best_detuning_GHz", "best_inversion"], rows)


if __name__ == "__main__":
    main()
