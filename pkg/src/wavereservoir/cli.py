"""Command-line front end: ``python -m wavereservoir <command> ...``.

Every command writes its fully resolved configuration (``config.json``) and
the tool version next to its outputs. Exit codes: 0 success, 2 configuration
error, 3 file or model-format error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

logger = logging.getLogger("wavereservoir")


class _ArgParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _common(p: argparse.ArgumentParser, out_required: bool = True):
    p.add_argument("--config", type=Path, help="JSON experiment config")
    p.add_argument("--seed", action="append", default=[], metavar="NAME=INT|INT",
                   help="override a named seed, or all seeds with a bare integer")
    p.add_argument("--out", type=Path, required=out_required, help="output directory")
    p.add_argument("--threads", type=int, default=None,
                   help="cap on BLAS/OpenMP threads")


def _adapt_flags(p: argparse.ArgumentParser):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--adapt", dest="adapt", action="store_true", default=False)
    g.add_argument("--no-adapt", dest="adapt", action="store_false")
    m = p.add_mutually_exclusive_group()
    m.add_argument("--sync-only", action="store_true")
    m.add_argument("--ds-only", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = _ArgParser(prog="wavereservoir", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_ArgParser)

    p = sub.add_parser("gen", help="write a training dataset")
    _common(p)

    p = sub.add_parser("train", help="train a readout on a dataset")
    _common(p)
    p.add_argument("--dataset", type=Path, help="dataset directory (default: generate from config)")
    p.add_argument("--resume", type=Path, help="model file to continue training from")

    p = sub.add_parser("eval", help="offset metrics on the test suite")
    _common(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--tests", type=Path, help="directory of test signals (default: built-in suite)")
    _adapt_flags(p)

    p = sub.add_parser("sweep-c", help="peak shift under fixed speed-field scalings")
    _common(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--deltas", type=float, nargs="+", default=[-0.1, -0.05, 0.05, 0.1])
    p.add_argument("--tests", type=Path)

    p = sub.add_parser("spectra", help="per-neuron spectra under a multi-frequency drive")
    _common(p)
    p.add_argument("--model", type=Path, help="model file (default: fresh model from config)")
    p.add_argument("--base-hz", type=float, default=1.2)
    p.add_argument("--ratio", default="1:2")
    p.add_argument("--duration", type=float, default=30.0)

    p = sub.add_parser("baseline", help="train and evaluate a random sparse reservoir")
    _common(p)
    p.add_argument("--dataset", type=Path)
    return ap


def _parse_seeds(items: list[str]) -> dict:
    from .config import SEED_NAMES, ConfigError
    out = {}
    for item in items:
        name, sep, value = item.partition("=")
        try:
            if not sep:
                out.update({n: int(name) for n in SEED_NAMES})
            else:
                out[name.strip()] = int(value)
        except ValueError as err:
            raise ConfigError(f"bad --seed value {item!r}") from err
    return out


def _resolve(args):
    from .config import ExperimentConfig, load_config
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    seeds = _parse_seeds(args.seed)
    return cfg.with_seeds(**seeds) if seeds else cfg


def _prepare_out(out: Path, cfg) -> Path:
    from . import __version__
    out.mkdir(parents=True, exist_ok=True)
    cfg.dump(out / "config.json")
    (out / "VERSION").write_text(__version__ + "\n")
    return out


def _signals(path, cfg):
    from .experiment import build_dataset
    from .io import read_dataset
    return read_dataset(path) if path is not None else build_dataset(cfg).signals


def _test_signals(path, cfg):
    from .experiment import test_signals
    from .io import read_dataset
    if path is None:
        return test_signals(cfg)
    sigs = read_dataset(path)
    if any(s.interval_s is None for s in sigs):
        raise ValueError("test signals need an interval_s annotation")
    return sigs


def _load(path):
    from .io import load_model
    mf = load_model(path)
    if mf.readout is None:
        raise ValueError(f"{path} holds no trained readout")
    return mf


def _provenance(cfg) -> dict:
    from .io import config_hash
    return {"config_hash": config_hash(cfg.to_dict())}


def cmd_gen(args, cfg) -> int:
    from .experiment import build_dataset
    from .io import write_dataset
    out = _prepare_out(args.out, cfg)
    ds = build_dataset(cfg)
    path = write_dataset(out, ds)
    logger.info("wrote %d samples, manifest %s", len(ds), path)
    return EXIT_OK


def cmd_train(args, cfg) -> int:
    from .experiment import build_model, train_model
    from .io import ModelFile, save_model, write_matrix_csv
    out = _prepare_out(args.out, cfg)
    readout, start = None, 0
    if args.resume is not None:
        mf = _load(args.resume)
        model, readout = mf.model, mf.readout
        start = int(mf.provenance.get("epochs_done", 0))
    else:
        model = build_model(cfg)
    signals = _signals(args.dataset, cfg)
    res = train_model(cfg, model, signals, readout, start,
                      progress=lambda e, l: logger.info("epoch %d mse %.6g", e, l))
    epochs = start + len(res.loss_curve)
    prov = {**_provenance(cfg), "epochs_done": epochs}
    save_model(out / "model.json", ModelFile(model, res.readout,
                                             dict(vars(cfg.seeds)), prov))
    write_matrix_csv(out / "loss_curve.csv",
                     [[start + i, l] for i, l in enumerate(res.loss_curve)],
                     header=["epoch", "mse"])
    return EXIT_OK


def _public(rec: dict) -> dict:
    return {k: v for k, v in rec.items() if not k.startswith("_")}


def cmd_eval(args, cfg) -> int:
    from .experiment import evaluate_suite
    from .io import write_jsonl
    out = _prepare_out(args.out, cfg)
    mf = _load(args.model)
    sigs = _test_signals(args.tests, cfg)
    if not sigs:
        raise FileNotFoundError("no test signals")
    records = evaluate_suite(mf.model, mf.readout, sigs, cfg, args.adapt,
                             sync_on=not args.ds_only, ds_on=not args.sync_only)
    for rec in records:
        if "_log" in rec:
            rec["_log"].to_jsonl(out / f"adaptation_{rec['index']}.jsonl")
    write_jsonl(out / "metrics.jsonl", [_public(r) for r in records])
    return EXIT_OK


def cmd_sweep_c(args, cfg) -> int:
    from .experiment import sweep_c
    from .io import write_jsonl
    out = _prepare_out(args.out, cfg)
    mf = _load(args.model)
    records = sweep_c(mf.model, mf.readout, _test_signals(args.tests, cfg),
                      args.deltas, cfg)
    write_jsonl(out / "sweep_c.jsonl", records)
    return EXIT_OK


def cmd_spectra(args, cfg) -> int:
    from .experiment import build_model, spectra
    from .io import write_matrix_csv
    out = _prepare_out(args.out, cfg)
    model = _load(args.model).model if args.model else build_model(cfg)
    rmap, heat = spectra(model, args.base_hz, args.ratio, cfg, args.duration)
    write_matrix_csv(out / "spectra.csv", rmap.spectra,
                     header=[f"{f:.6g}" for f in rmap.freqs])
    write_matrix_csv(out / "dominant_freq.csv", rmap.dominant_freq)
    write_matrix_csv(out / "heatmap.csv", heat)
    return EXIT_OK


def cmd_baseline(args, cfg) -> int:
    from .experiment import (baseline_lags, build_baseline, evaluate_suite,
                             test_signals, train_model)
    from .io import ModelFile, save_model, write_jsonl, write_matrix_csv
    out = _prepare_out(args.out, cfg)
    model = build_baseline(cfg)
    res = train_model(cfg, model, _signals(args.dataset, cfg))
    base = {"density": cfg.baseline.density,
            "spectral_radius": cfg.baseline.spectral_radius,
            "seed": cfg.seeds.input_seed}
    save_model(out / "model.json", ModelFile(model, res.readout, dict(vars(cfg.seeds)),
                                             _provenance(cfg), base))
    write_matrix_csv(out / "loss_curve.csv",
                     [[i, l] for i, l in enumerate(res.loss_curve)],
                     header=["epoch", "mse"])
    sigs = test_signals(cfg)
    records = evaluate_suite(model, res.readout, sigs, cfg)
    for rec, lag in zip(records, baseline_lags(model, res.readout, sigs, cfg)):
        rec["lag_s"] = lag["lag_s"]
    write_jsonl(out / "metrics.jsonl", records)
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "eval": cmd_eval,
            "sweep-c": cmd_sweep_c, "spectra": cmd_spectra, "baseline": cmd_baseline}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from .config import ConfigError
    from .io import ModelFormatError
    from .readout import TrainingDiverged
    try:
        cfg = _resolve(args)
        return COMMANDS[args.command](args, cfg)
    except ModelFormatError as err:
        print(f"model file error: {err}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO
    except (TrainingDiverged, FloatingPointError, ArithmeticError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
