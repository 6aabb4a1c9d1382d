"""Batch entry points: ``clusterrank {train,predict,evaluate}``.

A JSON run-config file (``--config``) supplies defaults; flags override it.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Optional

from .config import ConfigError, RunConfig, TrainConfig
from .corpus import CorpusError, read_documents, write_extended_json

log = logging.getLogger("clusterrank")


class CLIError(Exception):
    pass


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=("prefilter", "hybrid", "fine"))
    p.add_argument("--threshold", type=float)
    p.add_argument("--no-cluster-history", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="clusterrank", description="Cluster-ranking anaphora resolution")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="train a model")
    tr.add_argument("--config")
    tr.add_argument("--train", dest="train_path")
    tr.add_argument("--dev", dest="dev_path")
    tr.add_argument("--output-dir")
    tr.add_argument("--steps", type=int)
    tr.add_argument("--seed", type=int)
    _add_model_flags(tr)
    tr.add_argument("--no-position-emb", action="store_true")
    tr.add_argument("--no-width-emb", action="store_true")
    tr.add_argument("--system-clusters", action="store_true",
                    help="train on the decoder's own clusters instead of oracle clusters")
    tr.add_argument("--no-singletons-nr", action="store_true",
                    help="drop singleton clusters and non-referring markables from training data")
    tr.add_argument("--singletons", choices=("included", "excluded", "both"))
    tr.add_argument("--mention-loss-weight", type=float,
                    help="weight of the auxiliary mention-detection loss (default 0: off)")

    pr = sub.add_parser("predict", help="resolve documents with a trained model")
    pr.add_argument("--config")
    pr.add_argument("--checkpoint", dest="checkpoint_path")
    pr.add_argument("--input", dest="input_path")
    pr.add_argument("--output", dest="output_path")
    pr.add_argument("--seed", type=int)
    _add_model_flags(pr)

    ev = sub.add_parser("evaluate", help="score a response file against a key file")
    ev.add_argument("--config")
    ev.add_argument("--key", dest="key_path")
    ev.add_argument("--response", dest="response_path")
    ev.add_argument("--output", dest="output_path")
    ev.add_argument("--singletons", choices=("included", "excluded", "both"))
    ev.add_argument("--fine", action="store_true", help="require matching fine NR types")
    ev.add_argument("--seed", type=int)
    return ap


def config_from_args(args: argparse.Namespace) -> RunConfig:
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise CLIError(f"cannot read config {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise CLIError(f"invalid config {args.config}: {exc.msg}") from None
    else:
        data = {}
    data = dict(data)
    data["command"] = args.command
    model = dict(data.get("model", {}))
    for name in ("train_path", "dev_path", "output_dir", "input_path", "output_path", "checkpoint_path",
                 "key_path", "response_path", "singletons"):
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
        model["seed"] = args.seed
    if getattr(args, "mode", None):
        model["nr_mode"] = args.mode
    if getattr(args, "threshold", None) is not None:
        model["threshold"] = args.threshold
    if getattr(args, "no_cluster_history", False):
        model["use_history"] = False
    if getattr(args, "no_position_emb", False):
        model["use_position_emb"] = False
    if getattr(args, "no_width_emb", False):
        model["use_width_emb"] = False
    if getattr(args, "system_clusters", False):
        model["oracle_clusters"] = False
    if getattr(args, "no_singletons_nr", False):
        model["train_with_singletons_nr"] = False
    if getattr(args, "mention_loss_weight", None) is not None:
        model["mention_loss_weight"] = args.mention_loss_weight
    if getattr(args, "steps", None) is not None:
        model["train_steps"] = args.steps
    data["model"] = model
    try:
        return RunConfig.from_dict(data)
    except (ConfigError, TypeError) as exc:
        raise CLIError(f"invalid configuration: {exc}") from None


def _read(path: Optional[str], what: str):
    if not path:
        raise CLIError(f"no {what} path given")
    if not os.path.isfile(path):
        raise CLIError(f"{what} file not found: {path}")
    try:
        return read_documents(path)
    except CorpusError as exc:
        raise CLIError(f"cannot parse {what} file {path}: {exc}") from None


def cmd_train(cfg: RunConfig) -> int:
    from .trainer import train

    train_docs = _read(cfg.train_path, "training corpus")
    dev_docs = _read(cfg.dev_path, "dev corpus") if cfg.dev_path else None
    if not cfg.output_dir:
        raise CLIError("--output-dir is required for training")
    os.makedirs(cfg.output_dir, exist_ok=True)
    if not cfg.model.genres:
        cfg.model.genres = sorted({d.genre for d in train_docs})
    with open(os.path.join(cfg.output_dir, "config.json"), "w", encoding="utf-8") as fh:
        fh.write(cfg.to_json())
    with open(os.path.join(cfg.output_dir, "train.log"), "a", encoding="utf-8") as log_fh:
        result = train(cfg.model, train_docs, dev_docs, output_dir=cfg.output_dir,
                       run_config=cfg.to_dict(), log_stream=log_fh)
    msg = f"trained {result.steps_run} steps"
    if result.best_score is not None:
        msg += f"; best dev CoNLL {100 * result.best_score:.2f} at step {result.best_step}"
    print(msg)
    return 0


def cmd_predict(cfg: RunConfig, overrides: dict) -> int:
    from .model import CorefModel
    from .numcore import load_checkpoint

    if not cfg.checkpoint_path or not os.path.isfile(cfg.checkpoint_path):
        raise CLIError(f"checkpoint not found: {cfg.checkpoint_path}")
    docs = _read(cfg.input_path, "input")
    if not cfg.output_path:
        raise CLIError("--output is required")
    ckpt = load_checkpoint(cfg.checkpoint_path)
    if overrides.get("explicit_config"):
        model_cfg = cfg.model
    else:
        model_cfg = TrainConfig.from_dict(ckpt["config"]["model"])
        for key in ("nr_mode", "threshold", "use_history"):
            if key in overrides:
                setattr(model_cfg, key, overrides[key])
    model = CorefModel(model_cfg)
    try:
        model.store.load_state_dict(ckpt["params"])
    except ValueError as exc:
        raise CLIError(str(exc)) from None
    preds = [model.predict(d) for d in docs]
    with open(cfg.output_path, "w", encoding="utf-8") as fh:
        write_extended_json(preds, fh)
    return 0


def cmd_evaluate(cfg: RunConfig, fine: bool = False) -> int:
    from .metrics import MetricError, evaluate, reports_to_json

    keys = _read(cfg.key_path, "key")
    responses = _read(cfg.response_path, "response")
    modes = {"included": [True], "excluded": [False], "both": [True, False]}[cfg.singletons]
    try:
        reports = [evaluate(keys, responses, singletons=m, fine=fine) for m in modes]
    except MetricError as exc:
        raise CLIError(str(exc)) from None
    print("\n\n".join(r.format() for r in reports))
    if cfg.output_path:
        with open(cfg.output_path, "w", encoding="utf-8") as fh:
            fh.write(reports_to_json(reports) + "\n")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        if cfg.command == "train":
            return cmd_train(cfg)
        if cfg.command == "predict":
            overrides = {"explicit_config": bool(args.config)}
            if args.mode:
                overrides["nr_mode"] = args.mode
            if args.threshold is not None:
                overrides["threshold"] = args.threshold
            if args.no_cluster_history:
                overrides["use_history"] = False
            return cmd_predict(cfg, overrides)
        return cmd_evaluate(cfg, fine=args.fine)
    except CLIError as exc:
        print(f"clusterrank: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
