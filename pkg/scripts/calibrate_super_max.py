"""Peak of the max-amplitude scan row versus the scanned color's maximum rotation.

Used to pick the default ``super.max_rotation``: the fixed color stays at its
configured rotation while the scanned color's top amplitude is varied.

    python scripts/calibrate_super_max.py --rotations 3.0 3.6 5.0 7.0 --workers 4
"""

import argparse

from swingup.config import ExperimentConfig
from swingup.protocols import run_super_scan


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--rotations", type=float, nargs="+", default=[3.0, 3.4, 3.6, 4.0, 7.0])
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    print("max_rotation_pi  peak_inversion  peak_detuning_GHz")
    for r in args.rotations:
        c = cfg.with_overrides(super={"max_rotation": r, "n_amplitudes": 1})
        inv, det = run_super_scan(c, workers=args.workers).best()
        print(f"{r:15.2f}  {inv:14.4f}  {det:17.1f}")


if __name__ == "__main__":
    main()
