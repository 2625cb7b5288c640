"""Membrane-error MSE: Monte-Carlo vs closed forms vs exact variance.

Prints one table per theta and writes stability_<theta>.csv plus the
5-95% band file used for the LIF/TA-LIF error-spread comparison.

    python3 scripts/stability_table.py --out stability-out
"""

import argparse
from pathlib import Path

from hosnn.stability import (
    ClosedFormError,
    StabilityConfig,
    analytic_mse_lif,
    analytic_mse_talif,
    exact_mse,
    error_band_report,
    simulate_error_sde,
    write_bands_csv,
    write_stability_csv,
)


def closed_form(t, c):
    if c.theta == 0:
        return float(analytic_mse_lif(t, c.tau_m, c.sigma))
    try:
        return float(analytic_mse_talif(t, c.tau_m, c.r, c.theta, c.sigma))
    except ClosedFormError:
        return float("nan")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--thetas", type=float, nargs="+", default=[0.0, 1.0])
    ap.add_argument("--trials", type=int, default=4000)
    ap.add_argument("--dt", type=float, default=1e-2)
    ap.add_argument("--horizon", type=float, default=20.0)
    ap.add_argument("--out", default="stability-out")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    for theta in args.thetas:
        c = StabilityConfig(theta=theta, dt_sim=args.dt, n_trials=args.trials, horizon=args.horizon, output_every=1.0)
        res = simulate_error_sde(c)
        write_stability_csv(res, out / f"stability_{theta:g}.csv")
        print(f"theta={theta:g}")
        print("     t   empirical   closed-form   exact")
        for t, m in zip(res.t, res.mse):
            if t in (1, 2, 5, 10, 20) or t == res.t[-1]:
                print(f"{t:6.1f}  {m:10.4f}  {closed_form(t, c):12.4f}  {float(exact_mse(t, c.tau_m, c.r, theta, c.sigma)):7.4f}")
    rows = error_band_report(thetas=args.thetas, horizon=args.horizon, n_trials=args.trials, dt_sim=args.dt)
    write_bands_csv(rows, out / "bands.csv")
    print(f"wrote {out}/")


if __name__ == "__main__":
    main()
