"""Single-emitter experiments: Rabi sweeps, lifetime, quasi-CW and g2.

Writes one CSV per experiment and prints the fitted quantities.
"""

import argparse
from pathlib import Path

from swingup.config import ExperimentConfig
from swingup.estimators import estimate_inversion_fidelity, fit_damped_rabi
from swingup.io import write_decay_histogram, write_table
from swingup.protocols import run_g2, run_lifetime_experiment, run_quasi_cw, run_rabi_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out-dir", default="out/experiments")
    args = ap.parse_args()
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    cfg = cfg.with_overrides(run={"seed": args.seed})
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    for shape in ("narrowband", "subpicosecond"):
        sw = run_rabi_sweep(cfg.with_overrides(sweep={"noisy": True}), shape)
        fit = fit_damped_rabi(sw.amplitudes, sw.counts)
        f, e = estimate_inversion_fidelity(fit)
        print(f"{shape}: kappa {fit['kappa']:.3f} /sqrt(pJ), fidelity {f:.4f} +/- {e:.4f}")
        write_table(out / f"rabi_{shape}.csv",
                    ["amplitude_sqrt_pJ", "rotation_rad", "inversion", "counts"],
                    zip(sw.amplitudes, sw.rotation, sw.inversion, sw.counts))

    life = run_lifetime_experiment(cfg)
    write_decay_histogram(out / "lifetime.csv", life.histogram)
    if life.fit is not None:
        print(f"lifetime: T1 {life.fit['tau']:.3f} +/- {life.fit.error('tau'):.3f} ns")

    q = run_quasi_cw(cfg.with_overrides(emitter={"t2_star": 10.9}))
    write_table(out / "quasi_cw.csv", ["time_ns", "population", "counts"],
                zip(q.times, q.population, q.counts))
    print(f"quasi-CW: T2* {q.fit['t2_star']:.3f} +/- {q.fit.error('t2_star'):.3f} ns")

    for shape in ("narrowband", "subpicosecond"):
        g2, _ = run_g2(cfg, shape)
        print(f"g2(0) {shape}: {g2:.2e}")


if __name__ == "__main__":
    main()
