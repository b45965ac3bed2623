"""Command-line surface.

Commands: ingest, synth, train, summarize, evaluate, oracle, ablate-k,
ablate-lambda. Flag precedence is flags > --config file > defaults; the
config file is flat JSON whose keys mirror the dataclass fields (plus
"lambda" for the MMR balance). Randomized commands default to seed 0.

Summaries are JSON lines:

    {"set_id": ..., "extracted": [{"doc_id", "index_in_doc",
     "global_index", "text"}, ...], "word_count": ...}

Evaluation reports are JSON; learning curves and ablation grids are CSV.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Any, Sequence

from . import checkpoint as ckpt
from .corpus import (
    AllSentencesFiltered,
    CorpusError,
    DocumentSet,
    FilterConfig,
    filter_sentences,
    load_corpus,
    rejection_reason,
    save_corpus,
)
from .encoder import Dims
from .extractor import extract_summary
from .mmr import MmrConfig, fit_tfidf, mmr_extract
from .rouge import METRIC_NAMES, RougeConfig, score_all
from .synth import synth_corpus
from .training import TrainConfig, oracle_summary, summary_text, train

CLI_VARIANTS = ("mmr", "vanilla", "hard-cut", "hard-comb", "soft-comb", "soft-attn")


def _internal_variant(name: str) -> str:
    return name.replace("-", "_")


class ConfigResolver:
    """flags > config file > defaults."""

    def __init__(self, config_path: str | None):
        self.values: dict[str, Any] = {}
        if config_path:
            path = Path(config_path)
            if not path.exists():
                raise FileNotFoundError(f"config file not found: {path}")
            self.values = json.loads(path.read_text())

    def get(self, key: str, flag_value, default):
        if flag_value is not None:
            return flag_value
        if key in self.values:
            return self.values[key]
        return default


def _resolve_mmr(res: ConfigResolver, args) -> MmrConfig:
    return MmrConfig(
        lambda_=res.get("lambda", getattr(args, "lambda_", None), 0.6),
        word_limit=int(res.get("word_limit", getattr(args, "word_limit", None), 100)),
    )


def _resolve_rouge(res: ConfigResolver, args) -> RougeConfig:
    limit = res.get("length_limit_words", getattr(args, "length_limit", None), 100)
    return RougeConfig(
        stemming=res.get("stemming", getattr(args, "stemming", None), True),
        length_limit_words=None if limit in (0, "none") else int(limit),
        su_max_gap=int(res.get("su_max_gap", getattr(args, "su_max_gap", None), 4)),
        multi_ref_mode=res.get("multi_ref_mode", getattr(args, "multi_ref_mode", None), "average"),
    )


def _resolve_dims(res: ConfigResolver, args) -> Dims:
    return Dims(
        emb_dim=int(res.get("emb_dim", getattr(args, "emb_dim", None), 32)),
        filters=int(res.get("filters", getattr(args, "filters", None), 8)),
        hidden=int(res.get("hidden", getattr(args, "hidden", None), 32)),
    )


def _parse_k(text: str | None):
    if text is None:
        return None
    if str(text).lower() in ("inf", "none", "infinity"):
        return None
    return int(text)


def _write_text(payload: str, out: str | None) -> None:
    if out:
        Path(out).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)


def _summary_record(ds: DocumentSet, indices: Sequence[int]) -> dict:
    sentences = ds.sentences
    extracted = [
        {
            "doc_id": sentences[j].doc_id,
            "index_in_doc": sentences[j].index_in_doc,
            "global_index": sentences[j].global_index,
            "text": sentences[j].text,
        }
        for j in indices
    ]
    return {
        "set_id": ds.set_id,
        "extracted": extracted,
        "word_count": sum(sentences[j].word_count for j in indices),
    }


def _write_summaries(records: list[dict], out: str | None) -> None:
    payload = "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records)
    _write_text(payload, out)


def _score_dict(score) -> dict:
    return {"precision": score.precision, "recall": score.recall, "f1": score.f1}


def _mean_scores(per_set: dict[str, dict[str, dict]]) -> dict[str, dict]:
    mean: dict[str, dict] = {}
    n = len(per_set)
    for metric in METRIC_NAMES:
        mean[metric] = {
            fld: sum(scores[metric][fld] for scores in per_set.values()) / n
            for fld in ("precision", "recall", "f1")
        }
    return mean


# ---------------------------------------------------------------- commands


def cmd_ingest(args) -> int:
    res = ConfigResolver(args.config)
    cfg = FilterConfig(
        min_words=int(res.get("min_words", args.min_words, 8)),
        max_words=int(res.get("max_words", args.max_words, 55)),
        reject_leading_quote=res.get("reject_leading_quote", args.reject_leading_quote, True),
        require_terminal_period=res.get("require_terminal_period", args.require_terminal_period, True),
    )
    sets = load_corpus(args.in_path)
    removed: dict[str, int] = {}
    kept_sets = []
    dropped_sets = []
    sentences_in = 0
    sentences_out = 0
    for ds in sets:
        sentences_in += len(ds)
        for sent in ds.sentences:
            reason = rejection_reason(sent, cfg)
            if reason is not None:
                removed[reason] = removed.get(reason, 0) + 1
        try:
            filtered = filter_sentences(ds, cfg)
        except AllSentencesFiltered:
            dropped_sets.append(ds.set_id)
            continue
        sentences_out += len(filtered)
        kept_sets.append(filtered)
    save_corpus(kept_sets, args.out)
    report = {
        "sets_in": len(sets),
        "sets_out": len(kept_sets),
        "sentences_in": sentences_in,
        "sentences_out": sentences_out,
        "removed": removed,
        "dropped_sets": dropped_sets,
        "filter": asdict(cfg),
    }
    payload = json.dumps(report, indent=2) + "\n"
    _write_text(payload, args.report)
    return 0


def cmd_synth(args) -> int:
    res = ConfigResolver(args.config)
    seed = int(res.get("seed", args.seed, 0))
    sets = synth_corpus(
        seed=seed,
        n_sets=args.sets,
        docs_per_set=args.docs,
        sents_per_doc=args.sents,
        planted_per_set=args.planted,
        duplicate_rate=args.duplicate_rate,
    )
    save_corpus(sets, args.out)
    print(f"wrote {len(sets)} sets to {args.out}")
    return 0


def cmd_train(args) -> int:
    res = ConfigResolver(args.config)
    variant = _internal_variant(res.get("variant", args.variant, "soft-attn"))
    cfg = TrainConfig(
        learning_rate=res.get("learning_rate", args.learning_rate, None),
        epochs=int(res.get("epochs", args.epochs, 10000)),
        eval_every=int(res.get("eval_every", args.eval_every, 10)),
        patience=int(res.get("patience", args.patience, 30)),
        gamma=float(res.get("gamma", args.gamma, 0.95)),
        grad_clip_norm=float(res.get("grad_clip_norm", args.grad_clip_norm, 2.0)),
        seed=int(res.get("seed", args.seed, 0)),
    )
    dims = _resolve_dims(res, args)
    mmr_cfg = _resolve_mmr(res, args)
    rouge_cfg = _resolve_rouge(res, args)
    beta = float(res.get("beta", args.beta, 0.5))
    k = _parse_k(res.get("k", args.k, None))
    train_sets = load_corpus(args.train)
    val_sets = load_corpus(args.val) if args.val else []
    result = train(
        train_sets, val_sets, cfg,
        dims=dims, mmr_cfg=mmr_cfg, rouge_cfg=rouge_cfg,
        variant=variant, beta=beta, k=k, curve_path=args.curve,
    )
    meta = {
        "dims": asdict(dims),
        "seed": cfg.seed,
        "variant": variant,
        "beta": beta,
        "k": k,
        "lambda": mmr_cfg.lambda_,
        "word_limit": mmr_cfg.word_limit,
        "best_val_score": result.best_val_score,
        "best_epoch": result.best_epoch,
        "epochs_run": result.epochs_run,
    }
    ckpt.save_checkpoint(
        args.out, result.vocab, meta, result.encoder, result.extractor, result.critic
    )
    print(
        f"trained {variant} for {result.epochs_run} epochs; "
        f"best val ROUGE-1 F1 {result.best_val_score:.4f} at epoch {result.best_epoch}"
    )
    return 0


def cmd_summarize(args) -> int:
    res = ConfigResolver(args.config)
    variant = _internal_variant(res.get("variant", args.variant, "mmr"))
    mmr_cfg = _resolve_mmr(res, args)
    sets = load_corpus(args.corpus)
    records = []
    if variant == "mmr":
        model = fit_tfidf(sets)
        for ds in sets:
            records.append(_summary_record(ds, mmr_extract(ds, mmr_cfg, model)))
    else:
        if not args.checkpoint:
            raise ValueError(f"variant {args.variant!r} requires --checkpoint")
        encoder, extractor, _, meta = ckpt.restore_models(ckpt.load_checkpoint(args.checkpoint))
        extractor.variant = variant
        if args.beta is not None:
            extractor.beta = float(args.beta)
        if args.k is not None:
            extractor.k = _parse_k(args.k)
        model = fit_tfidf(sets) if variant != "vanilla" else None
        for ds in sets:
            A = encoder.encode_set(ds)
            indices = extract_summary(
                ds, A, extractor, model, mmr_cfg,
                mode="greedy", allow_stop=not args.no_stop,
            )
            records.append(_summary_record(ds, indices))
    _write_summaries(records, args.out)
    return 0


def cmd_evaluate(args) -> int:
    res = ConfigResolver(args.config)
    rouge_cfg = _resolve_rouge(res, args)
    sets = {ds.set_id: ds for ds in load_corpus(args.corpus)}
    per_set: dict[str, dict[str, dict]] = {}
    with open(args.summaries, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            set_id = record["set_id"]
            if set_id not in sets:
                raise CorpusError(f"summary references unknown set_id {set_id!r}")
            candidate = " ".join(item["text"] for item in record["extracted"])
            scores = score_all(candidate, sets[set_id].references, rouge_cfg)
            per_set[set_id] = {m: _score_dict(s) for m, s in scores.items()}
    if not per_set:
        raise ValueError("no summaries to evaluate")
    report = {
        "rouge_config": asdict(rouge_cfg),
        "per_set": per_set,
        "mean": _mean_scores(per_set),
    }
    _write_text(json.dumps(report, indent=2) + "\n", args.out)
    return 0


def cmd_oracle(args) -> int:
    res = ConfigResolver(args.config)
    rouge_cfg = _resolve_rouge(res, args)
    word_limit = int(res.get("word_limit", args.word_limit, 100))
    sets = load_corpus(args.corpus)
    records = [
        _summary_record(ds, oracle_summary(ds, rouge_cfg, word_limit)) for ds in sets
    ]
    _write_summaries(records, args.out)
    return 0


def _evaluate_indices(
    sets: Sequence[DocumentSet],
    summaries: dict[str, Sequence[int]],
    rouge_cfg: RougeConfig,
) -> dict[str, float]:
    """Corpus means of R-1/R-2/R-SU4 F1 for in-memory summaries."""
    totals = {"rouge-1": 0.0, "rouge-2": 0.0, "rouge-su4": 0.0}
    for ds in sets:
        scores = score_all(
            summary_text(ds, summaries[ds.set_id]), ds.references, rouge_cfg
        )
        for metric in totals:
            totals[metric] += scores[metric].f1
    return {m: v / len(sets) for m, v in totals.items()}


def cmd_ablate_k(args) -> int:
    res = ConfigResolver(args.config)
    mmr_cfg = _resolve_mmr(res, args)
    rouge_cfg = _resolve_rouge(res, args)
    k_values = [_parse_k(part) for part in args.k_list.split(",")]
    sets = load_corpus(args.corpus)
    encoder, extractor, _, _ = ckpt.restore_models(ckpt.load_checkpoint(args.checkpoint))
    extractor.variant = "hard_cut"
    model = fit_tfidf(sets)
    rows = []
    for k in k_values:
        extractor.k = k
        summaries = {}
        for ds in sets:
            A = encoder.encode_set(ds)
            # STOP disabled: every K row fills the same word budget, so the
            # sweep isolates the cutoff effect (K=1 degenerates to pure MMR).
            summaries[ds.set_id] = extract_summary(
                ds, A, extractor, model, mmr_cfg, mode="greedy", allow_stop=False
            )
        means = _evaluate_indices(sets, summaries, rouge_cfg)
        rows.append(("inf" if k is None else k, means))
    lines = ["k,rouge1_f1,rouge2_f1,rougesu4_f1"]
    for k, means in rows:
        lines.append(
            f"{k},{means['rouge-1']:.6f},{means['rouge-2']:.6f},{means['rouge-su4']:.6f}"
        )
    _write_text("\n".join(lines) + "\n", args.out)
    return 0


def cmd_ablate_lambda(args) -> int:
    res = ConfigResolver(args.config)
    word_limit = int(res.get("word_limit", args.word_limit, 100))
    rouge_cfg = _resolve_rouge(res, args)
    lambdas = [float(part) for part in args.lambda_list.split(",")]
    weights = [float(part) for part in args.weight_list.split(",")]
    sets = load_corpus(args.corpus)
    model = fit_tfidf(sets)
    lines = ["lambda,weight,rouge1_f1"]
    for lam in lambdas:
        for w in weights:
            if abs(w - 1.0) > 1e-9:
                raise ValueError(
                    "only the TF-IDF provider is built in, so provider weights "
                    f"must be 1.0 (got {w})"
                )
            cfg = MmrConfig(lambda_=lam, word_limit=word_limit)
            summaries = {ds.set_id: mmr_extract(ds, cfg, model) for ds in sets}
            means = _evaluate_indices(sets, summaries, rouge_cfg)
            lines.append(f"{lam},{w},{means['rouge-1']:.6f}")
    _write_text("\n".join(lines) + "\n", args.out)
    return 0


# ---------------------------------------------------------------- parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat JSON config file")
    p.add_argument("--seed", type=int, default=None)


def _add_rouge_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--no-stemming", dest="stemming", action="store_false", default=None)
    p.add_argument("--length-limit", dest="length_limit", default=None,
                   help="word truncation for scoring (0 = none)")
    p.add_argument("--su-gap", dest="su_max_gap", type=int, default=None)
    p.add_argument("--multi-ref", dest="multi_ref_mode", choices=("average", "best"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmrsum",
        description="MMR-guided RL extractive multi-document summarization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="filter a corpus and report removals")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None)
    p.add_argument("--min-words", type=int, default=None)
    p.add_argument("--max-words", type=int, default=None)
    p.add_argument("--keep-leading-quote", dest="reject_leading_quote",
                   action="store_false", default=None)
    p.add_argument("--no-terminal-period", dest="require_terminal_period",
                   action="store_false", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic planted corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--sets", type=int, default=20)
    p.add_argument("--docs", type=int, default=3)
    p.add_argument("--sents", type=int, default=8)
    p.add_argument("--planted", type=int, default=2)
    p.add_argument("--duplicate-rate", type=float, default=0.0)
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train an extraction policy")
    p.add_argument("--train", required=True)
    p.add_argument("--val", default=None)
    p.add_argument("--variant", choices=CLI_VARIANTS[1:], default=None)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--curve", default=None, help="learning-curve CSV path")
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--eval-every", type=int, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--grad-clip-norm", type=float, default=None)
    p.add_argument("--emb-dim", type=int, default=None)
    p.add_argument("--filters", type=int, default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--lambda", dest="lambda_", type=float, default=None)
    p.add_argument("--word-limit", type=int, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--k", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("summarize", help="emit summaries as JSON lines")
    p.add_argument("--corpus", required=True)
    p.add_argument("--variant", choices=CLI_VARIANTS, default=None)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--lambda", dest="lambda_", type=float, default=None)
    p.add_argument("--word-limit", type=int, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--k", default=None)
    p.add_argument("--no-stop", action="store_true", default=False,
                   help="disable the STOP action (fill the word budget)")
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("evaluate", help="score summaries against references")
    p.add_argument("--summaries", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", default=None)
    _add_rouge_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("oracle", help="greedy reference-aware upper bound")
    p.add_argument("--corpus", required=True)
    p.add_argument("--word-limit", type=int, default=None)
    p.add_argument("--out", default=None)
    _add_rouge_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("ablate-k", help="ROUGE vs hard-cut K sweep")
    p.add_argument("--corpus", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--k-list", default="1,7,10,50,100,inf")
    p.add_argument("--lambda", dest="lambda_", type=float, default=None)
    p.add_argument("--word-limit", type=int, default=None)
    p.add_argument("--out", default=None)
    _add_rouge_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_ablate_k)

    p = sub.add_parser("ablate-lambda", help="pure-MMR lambda/weight grid")
    p.add_argument("--corpus", required=True)
    p.add_argument("--lambda-list", default="0.5,0.6,0.7,0.8,1.0")
    p.add_argument("--weight-list", default="1.0")
    p.add_argument("--word-limit", type=int, default=None)
    p.add_argument("--out", default=None)
    _add_rouge_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_ablate_lambda)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CorpusError, ValueError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
