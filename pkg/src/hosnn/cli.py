"""Command-line entry point: ``hosnn <subcommand> [--config FILE] [flags]``.

Every subcommand writes its artifacts plus ``resolved_config.txt`` into
the output directory (``--out-dir``, else ``out_dir`` from the config,
else ``$HOSNN_OUT_DIR``, else ``./hosnn-out``). Budgets are given as
integer numerators over 255.

Exit codes: 0 success, 2 configuration error, 3 file/IO error,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from hosnn.attacks import AttackConfig, accuracy, run_attack
from hosnn.config import load_config
from hosnn.data import Dataset, load_fashion_subset, load_idx, synth_blobs
from hosnn.errors import ConfigError, FileFormatError, NumericDomainError
from hosnn.evaluation import Model, obfuscation_checklist, psc_error_distribution, robustness_sweep
from hosnn.network import ForwardMode, Network, load_network, predict, save_network
from hosnn.nds import extract_nds, load_nds, save_nds
from hosnn.stability import StabilityConfig, error_band_report, simulate_error_sde, write_bands_csv, write_stability_csv
from hosnn.training import AdversarialTraining, TrainConfig, train, write_metrics_csv

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("hosnn")


def load_dataset(cfg) -> Dataset:
    source = cfg["dataset"]
    if source == "blobs":
        ds = synth_blobs(cfg["blobs.n_classes"], cfg["blobs.n_per_class"], cfg["blobs.dim"], cfg["blobs.separation"], cfg["seed"])
    elif source.startswith("fashion:"):
        ds = load_fashion_subset(source.split(":", 1)[1])
    elif source.startswith("idx:"):
        parts = source[4:].split(",")
        if len(parts) != 2:
            raise ConfigError("dataset idx:IMAGES,LABELS needs two paths")
        ds = load_idx(*parts)
    else:
        raise ConfigError(f"unknown dataset {source!r}")
    limit = cfg["dataset.limit"]
    return ds.head(limit) if limit else ds


def _require(cfg, key):
    if cfg[key] is None:
        raise ConfigError(f"{key} is required (flag or config key)")
    return cfg[key]


def _model(cfg, net_key="checkpoint"):
    net = load_network(_require(cfg, net_key))
    if cfg["nds"] is not None and net_key == "checkpoint":
        nds = load_nds(cfg["nds"], net, cfg["horizon"])
        return net, ForwardMode.talif(nds)
    return net, ForwardMode.lif()


def _attack_config(cfg) -> AttackConfig:
    alpha = cfg["attack.alpha_255"]
    return AttackConfig(
        cfg["attack.family"],
        eps=cfg["attack.eps_255"] / 255,
        alpha=None if alpha is None else alpha / 255,
        steps=cfg["attack.steps"],
        random_start=cfg["attack.random_start"],
        seed=cfg["seed"],
    )


def cmd_train(cfg, out: Path):
    ds = load_dataset(cfg)
    sizes = [ds.dim, *cfg["net.hidden"], ds.class_count]
    net = Network.init(sizes, np.random.default_rng(cfg["seed"]), gain=cfg["net.gain"], theta=cfg["net.theta0"])
    kind = cfg["train.mode"]
    if kind == "lif":
        mode = ForwardMode.lif()
    elif kind in ("frozen", "live"):
        nds = load_nds(_require(cfg, "nds"), net, cfg["horizon"])
        mode = ForwardMode.frozen(nds) if kind == "frozen" else ForwardMode.talif(nds)
    else:
        raise ConfigError(f"train.mode must be lif, frozen or live, got {kind!r}")
    adv = None
    if cfg["train.adv_eps_255"] > 0:
        adv = AdversarialTraining(eps=cfg["train.adv_eps_255"] / 255, mix=cfg["train.adv_mix"])
    tc = TrainConfig(
        lr=cfg["train.lr"],
        theta_lr_ratio=cfg["train.theta_lr_ratio"],
        batch_size=cfg["train.batch_size"],
        epochs=cfg["train.epochs"],
        seed=cfg["seed"],
        horizon=cfg["horizon"],
        adversarial=adv,
    )
    trained, metrics = train(net, ds, tc, mode)
    save_network(trained, out / "model.json")
    write_metrics_csv(metrics, out / "metrics.csv")
    if metrics:
        log.info("final train accuracy %.4f", metrics[-1]["accuracy"])


def cmd_extract_nds(cfg, out: Path):
    net = load_network(_require(cfg, "checkpoint"))
    nds = extract_nds(net, load_dataset(cfg), cfg["horizon"])
    save_nds(nds, out / "nds.json")
    log.info("nds over %d samples", nds.sample_count)


def cmd_attack(cfg, out: Path):
    ds = load_dataset(cfg)
    net, mode = _model(cfg)
    ac = _attack_config(cfg)
    source, source_mode = (load_network(cfg["surrogate"]), ForwardMode.lif()) if cfg["surrogate"] else (net, mode)
    batch = run_attack(source, ds.x, ds.y, ac, source_mode, cfg["horizon"])
    clean_pred = predict(net, ds.x, mode, cfg["horizon"])
    adv_pred = predict(net, batch.x_adv, mode, cfg["horizon"])
    with open(out / "attack.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "label", "clean_pred", "adv_pred", "linf"])
        for i, (yl, c, a, d) in enumerate(zip(ds.y, clean_pred, adv_pred, batch.linf)):
            w.writerow([i, int(yl), int(c), int(a), repr(float(d))])
    log.info("accuracy clean %.4f adversarial %.4f", np.mean(clean_pred == ds.y), np.mean(adv_pred == ds.y))


def cmd_evaluate(cfg, out: Path):
    ds = load_dataset(cfg)
    x, y = ds.x[: cfg["eval.limit"]], ds.y[: cfg["eval.limit"]]
    net, mode = _model(cfg)
    target = Model(Path(cfg["checkpoint"]).stem, net, mode)
    surrogate = Model("surrogate", load_network(cfg["surrogate"]), ForwardMode.lif()) if cfg["surrogate"] else None
    sweep = robustness_sweep([target], cfg["eval.families"], cfg["eval.eps_grid"], x, y, surrogate, cfg["eval.boxes"], cfg["attack.steps"], cfg["seed"], cfg["horizon"])
    sweep.write_csv(out / "sweep.csv")
    if surrogate is not None:
        ac = _attack_config(cfg)
        x_adv = run_attack(surrogate.net, x, y, ac, surrogate.mode, cfg["horizon"]).x_adv
        psc_error_distribution(target, x, x_adv, horizon=cfg["horizon"]).write_csv(out / "psc_error.csv")


def cmd_stability_sim(cfg, out: Path):
    sc = StabilityConfig(
        tau_m=cfg["stability.tau_m"],
        r=cfg["stability.r"],
        theta=cfg["stability.theta"],
        sigma=cfg["stability.sigma"],
        dt_sim=cfg["stability.dt_sim"],
        horizon=cfg["stability.horizon"],
        n_trials=cfg["stability.n_trials"],
        seed=cfg["seed"],
        output_every=cfg["stability.output_every"],
    )
    write_stability_csv(simulate_error_sde(sc), out / "stability.csv")
    rows = error_band_report(
        cfg["stability.band_thetas"], sc.tau_m, sc.r, sc.sigma, sc.horizon, sc.dt_sim, cfg["stability.band_trials"], sc.seed, sc.output_every
    )
    write_bands_csv(rows, out / "bands.csv")


def cmd_obfuscation_check(cfg, out: Path):
    ds = load_dataset(cfg)
    x, y = ds.x[: cfg["eval.limit"]], ds.y[: cfg["eval.limit"]]
    net, mode = _model(cfg)
    target = Model(Path(cfg["checkpoint"]).stem, net, mode)
    surrogate = Model("surrogate", load_network(_require(cfg, "surrogate")), ForwardMode.lif())
    report = obfuscation_checklist(target, surrogate, x, y, cfg["eval.eps_grid"], steps=cfg["attack.steps"], seed=cfg["seed"], horizon=cfg["horizon"])
    report.write_csv(out / "checklist.csv")
    report.sweep.write_csv(out / "sweep.csv")
    for r in report.rows:
        log.info("test %d %-40s %s", r.test, r.name, r.status)


COMMANDS = {
    "train": (cmd_train, "train a network (LIF, or HoSNN anchored to --nds)"),
    "extract-nds": (cmd_extract_nds, "average membrane traces of a trained LIF network"),
    "attack": (cmd_attack, "craft adversarial examples and write per-sample results"),
    "evaluate": (cmd_evaluate, "robustness sweep over an eps grid, plus PSC error with --surrogate"),
    "stability-sim": (cmd_stability_sim, "Monte Carlo of the membrane-error SDE"),
    "obfuscation-check": (cmd_obfuscation_check, "gradient-obfuscation sanity checklist"),
}

# flag dest -> config key
FLAG_KEYS = {
    "dataset": "dataset",
    "checkpoint": "checkpoint",
    "nds": "nds",
    "surrogate": "surrogate",
    "seed": "seed",
    "family": "attack.family",
    "eps": "attack.eps_255",
    "alpha": "attack.alpha_255",
    "steps": "attack.steps",
    "epochs": "train.epochs",
    "lr": "train.lr",
    "mode": "train.mode",
    "theta": "stability.theta",
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hosnn", description="Homeostatic spiking network laboratory.")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", type=Path, help="key = value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
        p.add_argument("--out-dir", "--out", dest="out_dir", help="output directory")
        p.add_argument("--dataset", help="blobs | fashion:train | fashion:test | idx:IMAGES,LABELS")
        p.add_argument("--checkpoint")
        p.add_argument("--nds")
        p.add_argument("--surrogate", help="checkpoint of a black-box surrogate")
        p.add_argument("--seed")
        if name in ("attack", "evaluate", "obfuscation-check"):
            p.add_argument("--family")
            p.add_argument("--eps", help="budget as an integer numerator over 255")
            p.add_argument("--alpha", help="step size as a numerator over 255")
            p.add_argument("--steps")
        if name == "train":
            p.add_argument("--epochs")
            p.add_argument("--lr")
            p.add_argument("--mode", help="lif | frozen | live")
        if name == "stability-sim":
            p.add_argument("--theta")
    return ap


def _overrides(args) -> dict:
    out = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v
    for dest, key in FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            out[key] = str(value)
    if args.out_dir is not None:
        out["out_dir"] = args.out_dir
    return out


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    try:
        cfg = load_config(args.config, _overrides(args))
        out = Path(cfg["out_dir"])
        out.mkdir(parents=True, exist_ok=True)
        cfg.write(out / "resolved_config.txt")
        COMMANDS[args.command][0](cfg, out)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except NumericDomainError as exc:
        log.error("numeric error: %s", exc)
        return EXIT_NUMERIC
    except (FileFormatError, OSError, json.JSONDecodeError) as exc:
        log.error("io error: %s", exc)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
