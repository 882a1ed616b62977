"""Command-line entry point.

Subcommands: ``gen-synthetic``, ``pretrain``, ``train-aa``, ``evaluate``,
``analyze-ap``. Every run is seeded and bit-reproducible; every output
artifact embeds the fully resolved configuration (the fixed-schema corpus
JSONL is the exception: its config echo lives in the stats sidecar).

Settings resolve in order: built-in defaults, then ``--config`` key=value
file, then ``--preset``, then explicit flags. Exit codes: 0 success,
2 usage/config, 3 numeric failure, 4 I/O or format.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import aa as aa_mod
from . import corpus as corpus_mod
from . import embeddings as emb_mod
from . import metrics as metrics_mod
from . import pretrain as pretrain_mod
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import (
    CompatibilityError,
    FormatError,
    NumericError,
    ParameterError,
    ParseError,
    UndefinedMetricError,
)

log = logging.getLogger("lexembed.cli")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

DEFAULTS: dict[str, dict] = {
    "gen-synthetic": {
        "out": None, "stats_out": None, "vocab_size": 200, "scripts": 50,
        "mean_len": 80, "error_rate_lo": 0.0, "error_rate_hi": 0.3,
        "score_min": 1.0, "score_max": 40.0, "seed": 0,
    },
    "pretrain": {
        "corpus": None, "out": None, "method": None, "n": 3, "dim": 50,
        "epochs": 20, "lr": 0.01, "batch": None, "alpha": 0.1, "k_noisy": 20,
        "hidden": 100, "seed": 0, "min_count": 1, "init_scale": 0.05,
        "init_vectors": None,
    },
    "train-aa": {
        "train": None, "dev": None, "out": None, "embeddings": "random",
        "dim": 50, "m": 3, "h": 100, "epochs": 50, "lr": 0.001, "l2": 0.0001,
        "batch": 8, "seed": 0, "min_count": 1, "init_scale": 0.05,
        "freeze_embeddings": False,
    },
    "evaluate": {
        "checkpoint": None, "corpus": None, "out": None,
        "dump_predictions": None,
    },
    "analyze-ap": {
        "checkpoint": None, "corpus": None, "out": None, "n": None,
        "baseline_draws": 100, "seed": 0,
    },
}

PRESETS: dict[str, dict[str, dict]] = {
    "pretrain": {
        "fce-small": {"n": 3},
        "fce-large": {"n": 9},
    },
    "train-aa": {
        "fce-small": {"m": 3, "lr": 0.001},
        "fce-large": {"m": 9, "lr": 0.0001},
    },
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lexembed",
        description="Error-oriented embedding pre-training and script scoring.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-synthetic", help="generate a seeded synthetic corpus")
    gen.add_argument("--out")
    gen.add_argument("--stats-out", dest="stats_out")
    gen.add_argument("--vocab-size", dest="vocab_size", type=int)
    gen.add_argument("--scripts", type=int)
    gen.add_argument("--mean-len", dest="mean_len", type=int)
    gen.add_argument("--error-rate-lo", dest="error_rate_lo", type=float)
    gen.add_argument("--error-rate-hi", dest="error_rate_hi", type=float)
    gen.add_argument("--score-min", dest="score_min", type=float)
    gen.add_argument("--score-max", dest="score_max", type=float)
    gen.add_argument("--seed", type=int)
    gen.add_argument("--config")

    pre = sub.add_parser("pretrain", help="pre-train embeddings on a corpus")
    pre.add_argument("--corpus")
    pre.add_argument("--out")
    pre.add_argument("--method", choices=("eswe", "ecswe", "sswe"))
    pre.add_argument("--n", type=int)
    pre.add_argument("--dim", type=int)
    pre.add_argument("--epochs", type=int)
    pre.add_argument("--lr", type=float)
    pre.add_argument("--batch", type=int)
    pre.add_argument("--alpha", type=float)
    pre.add_argument("--k-noisy", dest="k_noisy", type=int)
    pre.add_argument("--hidden", type=int)
    pre.add_argument("--seed", type=int)
    pre.add_argument("--min-count", dest="min_count", type=int)
    pre.add_argument("--init-vectors", dest="init_vectors")
    pre.add_argument("--init-scale", dest="init_scale", type=float)
    pre.add_argument("--preset", choices=sorted(PRESETS["pretrain"]))
    pre.add_argument("--config")

    taa = sub.add_parser("train-aa", help="train the scoring model")
    taa.add_argument("--train")
    taa.add_argument("--dev")
    taa.add_argument("--out")
    taa.add_argument("--embeddings",
                     help="'random', a pretrain checkpoint, or a text vector file")
    taa.add_argument("--dim", type=int)
    taa.add_argument("--m", type=int)
    taa.add_argument("--h", type=int)
    taa.add_argument("--epochs", type=int)
    taa.add_argument("--lr", type=float)
    taa.add_argument("--l2", type=float)
    taa.add_argument("--batch", type=int)
    taa.add_argument("--seed", type=int)
    taa.add_argument("--min-count", dest="min_count", type=int)
    taa.add_argument("--init-scale", dest="init_scale", type=float)
    taa.add_argument("--freeze-embeddings", dest="freeze_embeddings",
                     action="store_const", const=True)
    taa.add_argument("--preset", choices=sorted(PRESETS["train-aa"]))
    taa.add_argument("--config")

    ev = sub.add_parser("evaluate", help="score a test corpus with an AA checkpoint")
    ev.add_argument("--checkpoint")
    ev.add_argument("--corpus")
    ev.add_argument("--out")
    ev.add_argument("--dump-predictions", dest="dump_predictions")
    ev.add_argument("--config")

    ana = sub.add_parser("analyze-ap", help="error-detection AP of a pretrain checkpoint")
    ana.add_argument("--checkpoint")
    ana.add_argument("--corpus")
    ana.add_argument("--out")
    ana.add_argument("--n", type=int)
    ana.add_argument("--baseline-draws", dest="baseline_draws", type=int)
    ana.add_argument("--seed", type=int)
    ana.add_argument("--config")

    return p


def _parse_config_value(raw: str):
    raw = raw.strip()
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    for caster in (int, float):
        try:
            return caster(raw)
        except ValueError:
            pass
    return raw


def _load_config_file(path: str, allowed: set[str]) -> dict:
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ParameterError(f"{path} line {lineno}: expected key=value")
                key, _, raw = line.partition("=")
                key = key.strip().replace("-", "_")
                if key not in allowed:
                    raise ParameterError(f"{path} line {lineno}: unknown key {key!r}")
                values[key] = _parse_config_value(raw)
    except OSError as exc:
        raise ParameterError(f"cannot read config file {path}: {exc}") from exc
    return values


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    """Defaults, then config file, then preset, then explicit flags."""
    cfg = dict(DEFAULTS[command])
    config_path = getattr(args, "config", None)
    if config_path:
        cfg.update(_load_config_file(config_path, set(cfg)))
    preset = getattr(args, "preset", None)
    if preset:
        cfg.update(PRESETS[command][preset])
        cfg["preset"] = preset
    for key in DEFAULTS[command]:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _require(cfg: dict, command: str, *keys: str) -> None:
    missing = [k for k in keys if cfg.get(k) in (None, "")]
    if missing:
        flags = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise ParameterError(f"{command}: missing required option(s) {flags}")


def _json_safe(value):
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def _write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def _write_csv(path, cfg: dict, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("# config: " + json.dumps(cfg) + "\n")
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(f"{v:.17g}" if isinstance(v, float) else str(v)
                             for v in row) + "\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_gen_synthetic(cfg: dict) -> int:
    _require(cfg, "gen-synthetic", "out")
    if cfg["stats_out"] is None:
        cfg["stats_out"] = str(cfg["out"]) + ".stats.json"
    scripts = corpus_mod.generate_synthetic_corpus(
        vocab_size=cfg["vocab_size"],
        script_count=cfg["scripts"],
        mean_len=cfg["mean_len"],
        error_rate_range=(cfg["error_rate_lo"], cfg["error_rate_hi"]),
        seed=cfg["seed"],
        score_range=(cfg["score_min"], cfg["score_max"]),
    )
    corpus_mod.save_corpus(scripts, cfg["out"])
    stats = corpus_mod.compute_stats(scripts)
    _write_json(cfg["stats_out"], {
        "script_count": stats.script_count,
        "token_count": stats.token_count,
        "error_token_ratio": stats.error_token_ratio,
        "score_error_spearman": _json_safe(stats.score_error_spearman),
        "config": cfg,
    })
    rho = stats.score_error_spearman
    print(f"wrote {cfg['out']} ({stats.script_count} scripts); "
          f"score-error spearman: "
          + ("undefined" if math.isnan(rho) else f"{rho:.4f}"))
    return EXIT_OK


def cmd_pretrain(cfg: dict) -> int:
    _require(cfg, "pretrain", "corpus", "out", "method")
    scripts = corpus_mod.load_corpus(cfg["corpus"])
    vocab = emb_mod.build_vocab(scripts, cfg["min_count"])
    if cfg["init_vectors"]:
        emb, misses = emb_mod.load_text_vectors(
            cfg["init_vectors"], vocab, seed=cfg["seed"], scale=cfg["init_scale"])
        log.info("loaded vectors from %s (%d vocab words uncovered)",
                 cfg["init_vectors"], misses)
    else:
        emb = emb_mod.init_random(vocab, cfg["dim"], cfg["init_scale"], cfg["seed"])
    pconf = pretrain_mod.PretrainConfig(
        method=cfg["method"], n=cfg["n"], epochs=cfg["epochs"], lr=cfg["lr"],
        batch_size=cfg["batch"], seed=cfg["seed"], alpha=cfg["alpha"],
        k_noisy=cfg["k_noisy"], hidden_size=cfg["hidden"],
    )
    cfg["batch"] = pconf.effective_batch_size()
    trainer = {
        "eswe": pretrain_mod.train_eswe,
        "ecswe": pretrain_mod.train_ecswe,
        "sswe": pretrain_mod.train_sswe,
    }[cfg["method"]]
    result = trainer(scripts, emb, pconf)
    save_checkpoint(cfg["out"], cfg["method"], result.model, result.embeddings, cfg)
    _write_csv(str(cfg["out"]) + ".loss.csv", cfg, ["epoch", "mean_loss"],
               [(e, loss) for e, loss in enumerate(result.epoch_losses)])
    print(f"wrote {cfg['out']}; final epoch mean loss {result.epoch_losses[-1]:.6f}")
    return EXIT_OK


def _load_embedding_source(cfg: dict, train_scripts) -> emb_mod.EmbeddingMatrix:
    source = cfg["embeddings"]
    if source == "random":
        vocab = emb_mod.build_vocab(train_scripts, cfg["min_count"])
        return emb_mod.init_random(vocab, cfg["dim"], cfg["init_scale"], cfg["seed"])
    with open(source, "r", encoding="utf-8") as f:
        first = f.read(1)
    if first == "{":
        return load_checkpoint(source).embeddings
    vocab = emb_mod.build_vocab(train_scripts, cfg["min_count"])
    emb, misses = emb_mod.load_text_vectors(
        source, vocab, seed=cfg["seed"], scale=cfg["init_scale"])
    log.info("loaded vectors from %s (%d vocab words uncovered)", source, misses)
    return emb


def cmd_train_aa(cfg: dict) -> int:
    _require(cfg, "train-aa", "train", "dev", "out")
    train_scripts = corpus_mod.load_corpus(cfg["train"])
    dev_scripts = corpus_mod.load_corpus(cfg["dev"])
    emb = _load_embedding_source(cfg, train_scripts)
    model_cfg = aa_mod.AaModelConfig(
        m=cfg["m"], h=cfg["h"], frozen_embeddings=bool(cfg["freeze_embeddings"]))
    train_cfg = aa_mod.AaTrainConfig(
        epochs=cfg["epochs"], lr=cfg["lr"], l2=cfg["l2"],
        seed=cfg["seed"], batch_size=cfg["batch"])
    result = aa_mod.train_aa(train_scripts, dev_scripts, emb, model_cfg, train_cfg)
    save_checkpoint(cfg["out"], "aa", result.model, result.embeddings, cfg)
    _write_csv(str(cfg["out"]) + ".history.csv", cfg,
               ["epoch", "train_mse", "dev_mse"],
               [(r.epoch, r.train_mse, r.dev_mse) for r in result.history])
    best = result.history[result.best_epoch]
    print(f"wrote {cfg['out']}; best epoch {result.best_epoch} "
          f"(dev mse {best.dev_mse:.6f})")
    return EXIT_OK


def cmd_evaluate(cfg: dict) -> int:
    _require(cfg, "evaluate", "checkpoint", "corpus", "out")
    ck = load_checkpoint(cfg["checkpoint"])
    if ck.kind != "aa":
        raise CompatibilityError(
            f"evaluate needs an 'aa' checkpoint, got {ck.kind!r}")
    scripts = corpus_mod.load_corpus(cfg["corpus"])
    if not scripts:
        raise ParameterError(f"empty test corpus {cfg['corpus']}")
    preds = aa_mod.predict_corpus(ck.model, ck.embeddings, scripts)
    golds = np.array([s.gold_score for s in scripts])
    report = metrics_mod.evaluate_scores(preds, golds)
    _write_json(cfg["out"], {**report.to_dict(), "config": cfg})
    if cfg["dump_predictions"]:
        _write_csv(cfg["dump_predictions"], cfg, ["id", "gold", "pred"],
                   [(s.id, float(g), float(p))
                    for s, g, p in zip(scripts, golds, preds)])
    r = "n/a" if report.pearson is None else f"{report.pearson:.4f}"
    rho = "n/a" if report.spearman is None else f"{report.spearman:.4f}"
    print(f"pearson {r} spearman {rho} rmse {report.rmse:.4f} (n={report.n})")
    return EXIT_OK


def cmd_analyze_ap(cfg: dict) -> int:
    _require(cfg, "analyze-ap", "checkpoint", "corpus", "out")
    ck = load_checkpoint(cfg["checkpoint"])
    if ck.kind not in ("eswe", "ecswe", "sswe"):
        raise CompatibilityError(
            f"analyze-ap needs a pretrain checkpoint, got {ck.kind!r}")
    n = ck.model.n
    if cfg["n"] is not None and cfg["n"] != n:
        raise ParameterError(f"--n {cfg['n']} does not match checkpoint n={n}")
    cfg["n"] = n
    scripts = corpus_mod.load_corpus(cfg["corpus"])
    labels: list[int] = []
    windows: list[np.ndarray] = []
    for s in scripts:
        idx = emb_mod.script_token_indices(s, ck.embeddings.vocab)
        for g in corpus_mod.extract_ngrams(s, n):
            windows.append(idx[g.start:g.start + n])
            labels.append(int(g.gold_error_score < 1.0))
    if not windows:
        raise ParameterError(f"no ngrams of size {n} in {cfg['corpus']}")
    if ck.kind in ("eswe", "ecswe"):
        scores = 1.0 - pretrain_mod.eswe_scores(
            ck.model, ck.embeddings, np.array(windows, dtype=np.int64))
    else:
        scores = metrics_mod.sswe_errorness(ck.model, ck.embeddings, windows)
    report = metrics_mod.average_precision(labels, scores)
    baseline = metrics_mod.random_baseline_ap(
        labels, draws=cfg["baseline_draws"], seed=cfg["seed"])
    _write_json(cfg["out"], {**report.to_dict(),
                             "random_baseline_mean": baseline,
                             "config": cfg})
    print(f"ap {report.ap:.4f} vs random baseline {baseline:.4f} "
          f"({report.positives}/{report.total} erroneous ngrams)")
    return EXIT_OK


# ---------------------------------------------------------------------------

_DISPATCH = {
    "gen-synthetic": cmd_gen_synthetic,
    "pretrain": cmd_pretrain,
    "train-aa": cmd_train_aa,
    "evaluate": cmd_evaluate,
    "analyze-ap": cmd_analyze_ap,
}

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging() -> None:
    name = os.environ.get("LEXEMBED_LOG", "info").strip().lower()
    level = _LOG_LEVELS.get(name)
    if level is None:
        level = logging.INFO
        logging.basicConfig(level=level)
        log.warning("unknown LEXEMBED_LOG value %r; using 'info'", name)
    else:
        logging.basicConfig(level=level)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging()
    try:
        cfg = resolve_config(args.command, args)
        return _DISPATCH[args.command](cfg)
    except (ParameterError, CompatibilityError) as exc:
        print(f"lexembed: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UndefinedMetricError, NumericError) as exc:
        print(f"lexembed: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParseError, FormatError, OSError) as exc:
        print(f"lexembed: I/O or format error: {exc}", file=sys.stderr)
        return EXIT_IO


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
