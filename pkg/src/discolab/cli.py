"""Command-line driver. Every subcommand reads the same run-config file.

Exit codes: 0 success, 1 usage or config error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .attacks import AttackConfig
from .classifier import ClassifierModel, accuracy, train_classifier
from .config import ConfigError, RunConfig, load_config
from .data import LabeledDataset, PairDataset, dten, gen_synthetic, load_checkpoint, load_cifar10, save_checkpoint
from .defense import Defense, defend, make_pairs, randomized_defend, train_disco
from .disco import DiscoModel
from .evaluation import cost_ratio, emit_report, eval_sa_ra, timing_eval, transfer_eval

log = logging.getLogger("discolab")

COMMANDS = ("gen-data", "train-classifier", "make-pairs", "train-disco", "eval", "transfer", "timing", "defend-image")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="discolab", description="Adversarial purification experiments on a numpy autodiff core.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    helps = {
        "gen-data": "build train/test datasets",
        "train-classifier": "train the target classifier",
        "make-pairs": "attack the classifier to build (adversarial, clean) training pairs",
        "train-disco": "train the purifier on the pairs",
        "eval": "measure SA/RA and write a report",
        "transfer": "train-attack x test-attack RA grid",
        "timing": "BPDA attack vs defense wall time per cascade depth",
        "defend-image": "purify a DTEN image file",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", required=True, help="run-config JSON file")
        p.add_argument("--seed", type=int, default=None, help="override every seed in the config")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "defend-image":
            p.add_argument("--input", help="DTEN image (3,H,W) or batch (N,3,H,W)")
            p.add_argument("--output", help="where to write the purified DTEN")
    return parser


# -- loaders -------------------------------------------------------------------------------
def _datasets(cfg: RunConfig) -> tuple[LabeledDataset, LabeledDataset]:
    return LabeledDataset.load(cfg.path(cfg.data.train)), LabeledDataset.load(cfg.path(cfg.data.test))


def _classifier(cfg: RunConfig) -> ClassifierModel:
    return load_checkpoint(cfg.path(cfg.classifier.checkpoint))


def _disco(cfg: RunConfig) -> DiscoModel:
    return load_checkpoint(cfg.path(cfg.disco.checkpoint))


def _concat(sets: list[LabeledDataset], name: str) -> LabeledDataset:
    return LabeledDataset(
        np.concatenate([s.images for s in sets]), np.concatenate([s.labels for s in sets]), sets[0].class_count, name
    )


# -- subcommands -------------------------------------------------------------------------------
def cmd_gen_data(cfg: RunConfig, args) -> None:
    d = cfg.data
    if d.source == "synthetic":
        train = gen_synthetic(d.n_train, d.class_count, d.side, d.noise_std, seed=d.seed)
        test = gen_synthetic(d.n_test, d.class_count, d.side, d.noise_std, seed=d.seed + 1_000_003)
    else:
        if not d.cifar_train or not d.cifar_test:
            raise ConfigError("cifar10 source needs data.cifar_train and data.cifar_test")
        train = _concat([load_cifar10(cfg.path(p)) for p in d.cifar_train], "cifar10")
        test = _concat([load_cifar10(cfg.path(p)) for p in d.cifar_test], "cifar10")
        train, test = train.subset(np.arange(min(d.n_train, len(train)))), test.subset(np.arange(min(d.n_test, len(test))))
    train.save(cfg.path(d.train))
    test.save(cfg.path(d.test))
    log.info("wrote %d train / %d test images", len(train), len(test))


def cmd_train_classifier(cfg: RunConfig, args) -> None:
    c = cfg.classifier
    train, test = _datasets(cfg)
    model = ClassifierModel(c.model, seed=c.seed)
    history = train_classifier(model, train, c.epochs, c.batch_size, c.lr, c.seed)
    save_checkpoint(model, cfg.path(c.checkpoint))
    log.info("final loss %.4f, train acc %.3f, test acc %.3f", history[-1], accuracy(model, train), accuracy(model, test))


def cmd_make_pairs(cfg: RunConfig, args) -> None:
    clf = _classifier(cfg)
    train, test = _datasets(cfg)
    make_pairs(clf, cfg.attack, train, classifier_id=cfg.classifier.checkpoint).save(cfg.path(cfg.disco.pairs))
    make_pairs(clf, cfg.attack, test, classifier_id=cfg.classifier.checkpoint).save(cfg.path(cfg.disco.heldout_pairs))


def cmd_train_disco(cfg: RunConfig, args) -> None:
    pairs = PairDataset.load(cfg.path(cfg.disco.pairs))
    model = DiscoModel(cfg.disco.model, seed=cfg.disco.seed)
    history = train_disco(model, pairs, cfg.disco.train)
    save_checkpoint(model, cfg.path(cfg.disco.checkpoint))
    if history:
        log.info("loss %.5f -> %.5f over %d steps", history[0], history[-1], len(history))


def cmd_eval(cfg: RunConfig, args) -> None:
    ev = cfg.eval
    clf = _classifier(cfg)
    _, test = _datasets(cfg)
    if ev.n_eval is not None:
        test = test.subset(np.arange(min(ev.n_eval, len(test))))
    reports = []
    if ev.baseline and cfg.attack.method != "bpda":
        reports.append(eval_sa_ra(clf, test, cfg.attack, None, ev.batch_size, f"{ev.run_id}-none", ev.record_wall_time))
    if cfg.defense is not None:
        defense = Defense(_disco(cfg), cfg.defense)
        reports.append(eval_sa_ra(clf, test, cfg.attack, defense, ev.batch_size, f"{ev.run_id}-disco", ev.record_wall_time))
    if not reports:
        raise ConfigError("nothing to evaluate: BPDA needs defense.enabled")
    emit_report(reports, cfg.path(ev.report), ev.format)
    for r in reports:
        log.info("%s: SA %.3f RA %.3f", r.run_id, r.sa, r.ra)


def cmd_transfer(cfg: RunConfig, args) -> None:
    ev = cfg.eval
    if not ev.transfer_train or not ev.transfer_test:
        raise ConfigError("transfer needs eval.transfer_train and eval.transfer_test")
    clf = _classifier(cfg)
    train, test = _datasets(cfg)
    if ev.n_eval is not None:
        test = test.subset(np.arange(min(ev.n_eval, len(test))))
    tm = transfer_eval(
        clf, train, test,
        [AttackConfig.from_dict(a) for a in ev.transfer_train],
        [AttackConfig.from_dict(a) for a in ev.transfer_test],
        cfg.disco.model, cfg.disco.train, cfg.defense,
    )
    out = {"train": tm.train_labels, "test": tm.test_labels, "ra": tm.ra.tolist(), "undefended_ra": tm.undefended_ra}
    cfg.path(ev.transfer_report).write_text(json.dumps(out, indent=2) + "\n", encoding="utf-8")


def cmd_timing(cfg: RunConfig, args) -> None:
    ev = cfg.eval
    clf, model = _classifier(cfg), _disco(cfg)
    _, test = _datasets(cfg)
    n = min(ev.timing_images, len(test))
    tr = timing_eval(clf, model, ev.k_values, test.images[:n], test.labels[:n], cfg.attack)
    n_c = ev.n_c if ev.n_c is not None else tr.n_c
    out = {
        "k": tr.k_values,
        "attack_s": tr.attack_s,
        "defense_s": tr.defense_s,
        "image_size": list(tr.image_size),
        "n_c": n_c,
        "n_d": tr.n_d,
        "cost_ratio": [cost_ratio(n_c, tr.n_d, k) for k in tr.k_values],
    }
    cfg.path(ev.timing_report).write_text(json.dumps(out, indent=2) + "\n", encoding="utf-8")


def cmd_defend_image(cfg: RunConfig, args) -> None:
    src = args.input or cfg.eval.input
    dst = args.output or cfg.eval.output
    if not src or not dst:
        raise ConfigError("defend-image needs an input and an output path")
    if cfg.defense is None:
        raise ConfigError("defend-image needs defense.enabled")
    model = _disco(cfg)
    x = dten.load(cfg.path(src) if args.input is None else src)
    single = x.ndim == 3
    batch = x[None] if single else x
    if cfg.defense.k_range is None:
        out = defend(model, cfg.defense, batch)
    else:
        rng = np.random.default_rng(cfg.defense.seed)
        out = np.stack([randomized_defend(model, cfg.defense, img[None], rng)[0][0] for img in batch])
    dten.save(out[0] if single else out, cfg.path(dst) if args.output is None else dst)


HANDLERS = {
    "gen-data": cmd_gen_data,
    "train-classifier": cmd_train_classifier,
    "make-pairs": cmd_make_pairs,
    "train-disco": cmd_train_disco,
    "eval": cmd_eval,
    "transfer": cmd_transfer,
    "timing": cmd_timing,
    "defend-image": cmd_defend_image,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"discolab: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.seed)
        cfg.root.mkdir(parents=True, exist_ok=True)
        HANDLERS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"discolab: config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - any failure past config parsing is a runtime error
        print(f"discolab: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
