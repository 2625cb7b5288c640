"""FashionMNIST desk comparison of adversarially trained LIF and HoSNN networks.

Trains the desk models for each seed, reports white-box PGD accuracy at
8/255, runs the obfuscation checklist on the HoSNN and compares per-layer
PSC error under black-box PGD. Writes per-seed CSVs under --out.

    python3 scripts/run_desk.py --seeds 0 1 2 --out desk-out
"""

import argparse
import time
from pathlib import Path

import numpy as np

from hosnn.attacks import AttackConfig, accuracy, pgd
from hosnn.data import load_fashion_subset
from hosnn.evaluation import obfuscation_checklist, psc_error_distribution
from hosnn.pipeline import DeskConfig, run_desk


def evaluate_seed(seed, train_set, test_set, cfg_kw, out):
    cfg = DeskConfig(seed=seed, **cfg_kw)
    desk = run_desk(train_set, cfg)
    x, y = test_set.x, test_set.y
    attack = AttackConfig("pgd", eps=8 / 255, seed=seed)
    row = {"seed": seed}
    for m in (desk.lif, desk.hosnn):
        row[f"{m.model_id}_clean"] = accuracy(m.net, x, y, m.mode)
        row[f"{m.model_id}_pgd8"] = accuracy(m.net, pgd(m.net, x, y, attack, m.mode).x_adv, y, m.mode)

    checklist = obfuscation_checklist(desk.hosnn, desk.surrogate, x, y, seed=seed)
    row["checklist"] = checklist.passed
    x_adv = pgd(desk.surrogate.net, x, y, attack).x_adv
    psc = {m.model_id: psc_error_distribution(m, x, x_adv) for m in (desk.lif, desk.hosnn)}
    row["psc_lif"] = psc["lif"].means
    row["psc_hosnn"] = psc["hosnn"].means

    if out:
        d = Path(out) / f"seed{seed}"
        d.mkdir(parents=True, exist_ok=True)
        checklist.write_csv(d / "checklist.csv")
        checklist.sweep.write_csv(d / "sweep.csv")
        psc["lif"].write_csv(d / "psc_error.csv")
        psc["hosnn"].write_csv(d / "psc_error.csv", append=True)
    return row, checklist


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--train", type=int, default=2000)
    ap.add_argument("--test", type=int, default=500)
    ap.add_argument("--epochs", type=int, default=DeskConfig.epochs)
    ap.add_argument("--theta0", type=float, default=DeskConfig.theta0)
    ap.add_argument("--train-mode", default=DeskConfig.train_mode)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    train_set = load_fashion_subset("train").head(args.train)
    test_set = load_fashion_subset("test").head(args.test)
    cfg_kw = {"epochs": args.epochs, "theta0": args.theta0, "train_mode": args.train_mode}
    rows = []
    for seed in args.seeds:
        t0 = time.perf_counter()
        row, checklist = evaluate_seed(seed, train_set, test_set, cfg_kw, args.out)
        rows.append(row)
        print(f"seed {seed} ({time.perf_counter() - t0:.0f}s)")
        print(f"  clean  lif {row['lif_clean']:.3f}  hosnn {row['hosnn_clean']:.3f}")
        print(f"  pgd8   lif {row['lif_pgd8']:.3f}  hosnn {row['hosnn_pgd8']:.3f}")
        for r in checklist.rows:
            print(f"  check {r.test} {r.status:4s} {r.evidence}")
        print("  psc lif   " + " ".join(f"{v:.4f}" for v in row["psc_lif"]))
        print("  psc hosnn " + " ".join(f"{v:.4f}" for v in row["psc_hosnn"]))
    gap = np.mean([r["hosnn_pgd8"] - r["lif_pgd8"] for r in rows])
    print(f"mean PGD-8 gap (hosnn - lif): {100 * gap:+.2f} pp")


if __name__ == "__main__":
    main()
