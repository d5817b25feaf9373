"""Command-line entry point: ``cfextract <command> [--config FILE] [--flags]``.

Every run writes into ``<root>/<timestamp>-<command>-seed<seed>`` (or
``--out``), starting with the resolved ``config.ini``. The root defaults to
``$CFEXTRACT_RUNS`` or ``./runs``.
"""

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import baseline, corpus, ensemble, evaluation, synth
from .config import COMMANDS, ConfigError, dump_config, load_config, require_inputs
from .decode import DecodeConstraints, write_predictions
from .neural import Model, ModelConfig, grad_check, tiny_configs
from .optim import TrainConfig, train_loop
from .tasks import (ClsDataset, SpanDataset, build_vocab, cls_evaluate, decode_dataset,
                    predict_probs, span_evaluator)
from .tokenizer import BpeModel, Vocab, tokenize, train_bpe

log = logging.getLogger("cfextract")


class UsageError(Exception):
    pass


def _delim(value):
    return "\t" if value in ("tab", "\\t") else value


def run_dir(command, seed, out=None):
    if out:
        path = Path(out)
    else:
        root = Path(os.environ.get("CFEXTRACT_RUNS", "runs"))
        stamp = time.strftime("%Y%m%d-%H%M%S")
        path = root / f"{stamp}-{command}-seed{seed}"
        n = 1
        while path.exists():
            n += 1
            path = root / f"{stamp}-{command}-seed{seed}-{n}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load(task, path, delimiter):
    if task == 1:
        return corpus.load_subtask1(path, delimiter=delimiter)
    return corpus.load_subtask2(path, delimiter=delimiter)


# commands


def cmd_gen_data(cfg, out):
    spans, labeled = synth.generate_synthetic(synth.SynthConfig(
        cfg.n, cfg.counterfactual_ratio, cfg.no_consequent_ratio, cfg.seed, cfg.vocab_size))
    d = _delim(cfg.delimiter)
    corpus.write_subtask1(labeled, out / "subtask1.csv", delimiter=d)
    corpus.write_subtask2(spans, out / "subtask2.csv", delimiter=d)
    print(f"wrote {len(labeled)} labeled and {len(spans)} span examples to {out}")


def cmd_stats(cfg, out):
    data = _load(cfg.task, cfg.data, _delim(cfg.delimiter))
    bpe = None
    if cfg.tokenizer == "bpe":
        bpe = train_bpe([r.text for r in data], cfg.bpe_merges)
        bpe.save(out / "bpe_merges.txt")
    hist = corpus.length_stats(data, lambda t: tokenize(t, cfg.tokenizer, bpe),
                               cfg.bucket_width, cfg.limit)
    hist.write(out / "lengths.tsv")
    (out / "lengths.txt").write_text(hist.to_table(), encoding="utf-8")
    print(hist.to_table(), end="")


def _split(data, mode, n, seed):
    return corpus.make_split(data, corpus.SplitSpec(mode, n, seed))


def cmd_train_baseline(cfg, out):
    data = corpus.load_subtask1(cfg.train, delimiter=_delim(cfg.delimiter))
    val, train = _split(data, cfg.split_mode, cfg.split_n, cfg.split_seed)
    tfidf = baseline.fit_tfidf([r.text for r in train], cfg.min_df)
    Xtr = tfidf.transform([r.text for r in train])
    Xva = tfidf.transform([r.text for r in val])
    hp = {} if cfg.kind == "nb" else {"seed": cfg.seed}
    clf = baseline.train_classifier(cfg.kind, Xtr, [r.label for r in train], hp)
    preds = baseline.predict(clf, Xva)
    m = evaluation.binary_prf(preds, [r.label for r in val])
    tfidf.save(out / "tfidf.json")
    baseline.save_classifier(clf, out / "classifier.npz")
    (out / "metrics.json").write_text(json.dumps(dataclasses.asdict(m), indent=2) + "\n")
    wrong = [(r.id, r.label, int(p), r.text) for r, p in zip(val, preds) if int(p) != r.label]
    corpus._write(out / "misclassified.csv", ["id", "gold", "pred", "text"], wrong, ",")
    print(f"{cfg.kind}: P={m.precision:.2f} R={m.recall:.2f} F1={m.f1:.2f} "
          f"({len(wrong)} misclassified of {len(val)})")


def _tokenizer_for(cfg, texts, out):
    bpe = None
    if cfg.tokenizer == "bpe":
        bpe = train_bpe(texts, cfg.bpe_merges)
        bpe.save(out / "bpe_merges.txt")
    vocab = build_vocab(texts, cfg.tokenizer, bpe)
    vocab.save(out / "vocab.tsv")
    return vocab, bpe


def _datasets(task, examples, vocab, max_len, mode, bpe):
    cls = ClsDataset if task == 1 else SpanDataset
    return cls.build(examples, vocab, max_len, mode, bpe)


def cmd_train_neural(cfg, out):
    data = _load(cfg.task, cfg.train, _delim(cfg.delimiter))
    val, train = _split(data, cfg.split_mode, cfg.split_n, cfg.split_seed)
    vocab, bpe = _tokenizer_for(cfg, [r.text for r in train], out)
    tr = _datasets(cfg.task, train, vocab, cfg.max_len, cfg.tokenizer, bpe)
    va = _datasets(cfg.task, val, vocab, cfg.max_len, cfg.tokenizer, bpe)
    if cfg.task == 2:
        tr = tr.trainable()
    mcfg = ModelConfig(vocab_size=len(vocab), max_len=cfg.max_len, d_in=cfg.d_model,
                       d_out=cfg.d_model, n_layers=cfg.layers, n_heads=cfg.heads, d_ff=cfg.d_ff,
                       dropout=cfg.dropout, task="cls" if cfg.task == 1 else "span", seed=cfg.seed)
    tcfg = TrainConfig(batch_size=cfg.batch_size, lr=cfg.lr, epochs=cfg.epochs,
                       max_updates=cfg.max_updates, max_grad_norm=cfg.max_grad_norm,
                       weight_decay=cfg.weight_decay, adam_eps=cfg.adam_eps,
                       patience=cfg.patience, eval_metric="F1" if cfg.task == 1 else "EM",
                       lookahead_k=cfg.lookahead_k, lookahead_alpha=cfg.lookahead_alpha,
                       use_lookahead=cfg.lookahead, seed=cfg.seed)
    constraints = DecodeConstraints(cfg.max_antecedent_len, cfg.max_consequent_len)
    evaluate = cls_evaluate if cfg.task == 1 else span_evaluator(constraints)
    model = Model(mcfg)
    result = train_loop(model, tr, va, tcfg, evaluate, log_path=out / "train_log.jsonl")
    model.params = result.best_params
    extra = {"tokenizer": cfg.tokenizer, "task": cfg.task,
             "max_antecedent_len": cfg.max_antecedent_len,
             "max_consequent_len": cfg.max_consequent_len}
    model.save(out / "checkpoint.npz", result.best_updates, extra)
    probs = predict_probs(model, va)
    member = ensemble.Member(out.name, probs, {tcfg.eval_metric: result.best_metric})
    ensemble.CandidatePool([r.id for r in val], [member]).save(out / "pool")
    (out / "metrics.json").write_text(json.dumps(
        {"best_epoch": result.best_epoch, "best_updates": result.best_updates,
         **result.log[result.best_epoch - 1]["val"]}, indent=2) + "\n")
    print(f"best {tcfg.eval_metric} {result.best_metric:.2f} at epoch {result.best_epoch} "
          f"({result.best_updates} updates)")


def _run_dir_of(checkpoint):
    """Accept either a train-neural run directory or its checkpoint.npz."""
    path = Path(checkpoint)
    return path.parent if path.is_file() else path


def _restore(ckpt_dir):
    ckpt_dir = _run_dir_of(ckpt_dir)
    model = Model.load(ckpt_dir / "checkpoint.npz")
    vocab = Vocab.load(ckpt_dir / "vocab.tsv")
    bpe_path = ckpt_dir / "bpe_merges.txt"
    bpe = BpeModel.load(bpe_path) if bpe_path.exists() else None
    return model, vocab, bpe


def cmd_predict(cfg, out):
    model, vocab, bpe = _restore(cfg.checkpoint)
    extra = model.header["extra"]
    task = extra["task"]
    data = _load(task, cfg.data, _delim(cfg.delimiter))
    ds = _datasets(task, data, vocab, model.config.max_len, extra["tokenizer"], bpe)
    probs = predict_probs(model, ds)
    ensemble.CandidatePool([r.id for r in data], [ensemble.Member(_run_dir_of(cfg.checkpoint).name, probs)]
                           ).save(out / "pool")
    if task == 1:
        labels = np.argmax(probs, axis=1)
        corpus.write_subtask1([corpus.LabeledSentence(r.id, r.text, int(y)) for r, y in zip(data, labels)],
                              out / "predictions.csv")
    else:
        constraints = DecodeConstraints(extra["max_antecedent_len"], extra["max_consequent_len"])
        preds = decode_dataset(probs, ds, constraints, cfg.joint)
        write_predictions(preds, ds.seqs, out / "predictions.csv")
    print(f"wrote {len(data)} predictions to {out / 'predictions.csv'}")


def cmd_ensemble_search(cfg, out):
    pool = ensemble.CandidatePool.load(cfg.pool)
    golds = _load(cfg.task, cfg.gold, _delim(cfg.delimiter))
    by_id = {g.id: g for g in golds}
    try:
        golds = [by_id[i] for i in pool.example_ids]
    except KeyError as exc:
        raise corpus.DataError(f"pool example {exc} missing from {cfg.gold}") from None
    if cfg.task == 1:
        scorer = ensemble.classification_f1([g.label for g in golds])
    else:
        bpe = BpeModel.load(cfg.bpe_file) if cfg.tokenizer == "bpe" else None
        seqs = SpanDataset.build(golds, Vocab.build([]), cfg.max_len, cfg.tokenizer, bpe).seqs
        scorer = ensemble.span_em(seqs, golds, DecodeConstraints(cfg.max_antecedent_len,
                                                                 cfg.max_consequent_len))
    if cfg.method == "exhaustive":
        spec = ensemble.best_combination(pool, scorer, min(cfg.top_k, len(pool.members)))
    elif cfg.method == "greedy":
        spec = ensemble.greedy_smallest_subset(pool, scorer)
    else:
        raise ConfigError(f"unknown ensemble method {cfg.method!r}")
    (out / "ensemble.json").write_text(spec.to_json(), encoding="utf-8")
    print(f"{cfg.method}: members {spec.members} metric {spec.metric:.2f} "
          f"({spec.n_evaluated} fused evaluations)")


def cmd_evaluate(cfg, out):
    d = _delim(cfg.delimiter)
    if cfg.task == 1:
        gold = corpus.load_subtask1(cfg.gold, delimiter=d)
        pred = {r.id: r.label for r in corpus.load_subtask1(cfg.pred, delimiter=d)}
        missing = [g.id for g in gold if g.id not in pred]
        if missing:
            raise corpus.DataError(f"{cfg.pred}: no prediction for id {missing[0]!r}")
        m = evaluation.binary_prf([pred[g.id] for g in gold], [g.label for g in gold])
        text = (f"precision {m.precision:.2f}\nrecall    {m.recall:.2f}\nF1        {m.f1:.2f}\n"
                f"accuracy  {m.accuracy:.2f}\n")
        (out / "report.json").write_text(json.dumps(dataclasses.asdict(m), indent=2) + "\n")
    else:
        gold = corpus.load_subtask2(cfg.gold, delimiter=d)
        pred = {r.id: r for r in corpus.load_subtask2(cfg.pred, delimiter=d)}
        missing = [g.id for g in gold if g.id not in pred]
        if missing:
            raise corpus.DataError(f"{cfg.pred}: no prediction for id {missing[0]!r}")
        report = evaluation.subtask2_report([pred[g.id] for g in gold], gold)
        text = report.to_table()
        (out / "report.json").write_text(report.to_json())
    (out / "report.txt").write_text(text, encoding="utf-8")
    print(text, end="")


def cmd_grad_check(cfg, out):
    worst = 0.0
    rows = []
    for i, mcfg in enumerate(tiny_configs(cfg.configs, cfg.seed)):
        err, _ = grad_check(mcfg, cfg.trials, seed=cfg.seed + i)
        rows.append({"config": dataclasses.asdict(mcfg), "max_rel_error": err})
        worst = max(worst, err)
        print(f"config {i}: layers={mcfg.n_layers} d={mcfg.d_in} heads={mcfg.n_heads} "
              f"task={mcfg.task} max_rel_error={err:.3e}")
    (out / "grad_check.json").write_text(json.dumps(rows, indent=2) + "\n")
    print(f"max relative error {worst:.3e} (threshold {cfg.threshold:g})")
    return 0 if worst < cfg.threshold else 1


HANDLERS = {
    "gen-data": cmd_gen_data,
    "stats": cmd_stats,
    "train-baseline": cmd_train_baseline,
    "train-neural": cmd_train_neural,
    "predict": cmd_predict,
    "ensemble-search": cmd_ensemble_search,
    "evaluate": cmd_evaluate,
    "grad-check": cmd_grad_check,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="cfextract", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, cls in COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI file; the [%s] section is read" % name)
        p.add_argument("--out", help="run directory (default: timestamped under the runs root)")
        for f in dataclasses.fields(cls):
            p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=None)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {f.name: getattr(args, f.name) for f in dataclasses.fields(COMMANDS[args.command])}
    try:
        cfg = load_config(args.command, args.config, overrides)
        require_inputs(args.command, cfg)
    except ConfigError as exc:
        print(f"cfextract: config error: {exc}", file=sys.stderr)
        return 2
    out = run_dir(args.command, getattr(cfg, "seed", 0), args.out)
    (out / "config.ini").write_text(dump_config(args.command, cfg), encoding="utf-8")
    try:
        status = HANDLERS[args.command](cfg, out)
    except (corpus.DataError, ConfigError, ValueError, OSError, ArithmeticError) as exc:
        print(f"cfextract: error: {exc}", file=sys.stderr)
        return 1
    return status or 0


if __name__ == "__main__":
    sys.exit(main())
