"""Command line pipeline: kbgen, supervise, train, decompose, answer, eval, gradcheck.

Settings come from an optional JSON config file; command-line flags win.
Every random choice draws from ``numpy.random.default_rng([seed, stage])``
with a fixed stage number per command.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import os
import sys
from importlib.resources import files
from pathlib import Path
from typing import Any

import click
import numpy as np

from qdecomp import align, evalharness
from qdecomp.backend import API_KEY_ENV, SnippetBackend, SnippetClient, load_fixture
from qdecomp.comptree import AnswerSet, evaluate, op_simpqa
from qdecomp.decomp import Program, compile, rule_based_split, select_strategy, tokenize
from qdecomp.errors import BothEmpty, ConfigError, QDecompError, QuotaError
from qdecomp.kbgen import generate, load_kb
from qdecomp.ptrnet import ModelConfig, PointerNet, predict_batch
from qdecomp.ptrnet.train import build_model, grad_check, train


DATA = files("qdecomp") / "data"
STAGES = {"kbgen": 10, "gradcheck": 13}
EXIT_QUOTA = 3

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "backend": "fixture",
    "kb": str(DATA / "demo_kb.tsv"),
    "templates": str(DATA / "templates.tsv"),
    "seeds": str(DATA / "demo_seeds.jsonl"),
    "synonyms": str(DATA / "synonyms.tsv"),
    "embeddings": str(DATA / "demo_embeddings.txt"),
    "fixture": str(DATA / "hand_backend.jsonl"),
    "endpoint": None,
    "cache_dir": ".qdecomp_cache",
    "threshold": align.DEFAULT_THRESHOLD,
    "n_records": 200,
    "noise_rate": 0.0,
    "swap_rate": 0.0,
    "quota": dict(generate.DEFAULT_QUOTA),
    "model": {},
}


def stage_rng(seed: int, stage: str) -> np.random.Generator:
    return np.random.default_rng([seed, STAGES[stage]])


def load_config(path: str | None, overrides: dict[str, Any]) -> dict[str, Any]:
    cfg = json.loads(json.dumps(DEFAULTS))
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                user = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError("config", f"file {path} not found") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config", "top level must be an object")
        for key, value in user.items():
            if key not in DEFAULTS:
                raise ConfigError(key, "unknown setting")
            cfg[key] = value
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    _check_config(cfg)
    return cfg


def _check_config(cfg: dict[str, Any]) -> None:
    if not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool) or cfg["seed"] < 0:
        raise ConfigError("seed", "must be a non-negative integer")
    if cfg["backend"] not in ("fixture", "http"):
        raise ConfigError("backend", "must be 'fixture' or 'http'")
    for key in ("threshold", "noise_rate", "swap_rate"):
        v = cfg[key]
        if not isinstance(v, (int, float)) or not 0.0 <= v <= 1.0:
            raise ConfigError(key, "must be a number in [0, 1]")
    if not isinstance(cfg["n_records"], int) or cfg["n_records"] <= 0:
        raise ConfigError("n_records", "must be a positive integer")
    quota = cfg["quota"]
    if not isinstance(quota, dict) or set(quota) - set(generate.COMP_TYPES) or not quota:
        raise ConfigError("quota", f"must map a subset of {list(generate.COMP_TYPES)} to weights")
    if any(not isinstance(v, int) or v < 0 for v in quota.values()) or sum(quota.values()) == 0:
        raise ConfigError("quota", "weights must be non-negative integers, not all zero")
    if not isinstance(cfg["model"], dict):
        raise ConfigError("model", "must be an object")
    known = {f.name for f in dataclasses.fields(ModelConfig)}
    for key in cfg["model"]:
        if key not in known:
            raise ConfigError(f"model.{key}", "unknown model setting")


def model_config(cfg: dict[str, Any], **overrides: Any) -> ModelConfig:
    fields = {"seed": cfg["seed"], **cfg["model"], **{k: v for k, v in overrides.items() if v is not None}}
    try:
        return ModelConfig(**fields)
    except (TypeError, ValueError) as exc:
        raise ConfigError("model", str(exc)) from exc


def require_path(cfg: dict[str, Any], key: str) -> Path:
    value = cfg.get(key)
    if value is None or not Path(value).exists():
        raise ConfigError(key, f"path {value!r} does not exist")
    return Path(value)


def read_jsonl(path: str | Path) -> list[dict[str, Any]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                try:
                    out.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise click.ClickException(f"{path}:{lineno}: {exc}") from exc
    return out


def write_jsonl(rows: list[dict[str, Any]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


def make_backend(cfg: dict[str, Any]):
    if cfg["backend"] == "fixture":
        return load_fixture(require_path(cfg, "fixture"))
    if not cfg.get("endpoint"):
        raise ConfigError("endpoint", "the http backend needs an endpoint URL")
    return SnippetBackend(SnippetClient(cfg["endpoint"], cfg["cache_dir"], os.environ.get(API_KEY_ENV)))


def _answers_json(answers: AnswerSet) -> list[dict[str, Any]]:
    return [{"a": m.answer.to_json(), "s": m.score} for m in answers]


def _answers_from_json(rows: list[dict[str, Any]]) -> AnswerSet:
    return AnswerSet.of(*[(r["a"], float(r.get("s", 0.0))) for r in rows])


def common(fn):
    fn = click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON settings file.")(fn)
    fn = click.option("--seed", type=int, help="Master seed for every random choice.")(fn)
    fn = click.option("--backend", type=click.Choice(["fixture", "http"]), help="QA backend.")(fn)
    return fn


def settings(config_path: str | None, **overrides: Any) -> dict[str, Any]:
    try:
        return load_config(config_path, overrides)
    except ConfigError as exc:
        raise click.ClickException(str(exc)) from exc


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool) -> None:
    """Answer complex questions by decomposing them into simple ones."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(message)s")


@main.command()
@common
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Dataset JSONL to write.")
@click.option("-n", "--n-records", type=int, help="Number of records to sample.")
@click.option("--noise", "noise_rate", type=float, help="Synonym substitution rate for the NL side.")
def kbgen(config_path, seed, backend, out, n_records, noise_rate):
    """Generate complex questions with known MG split points."""
    cfg = settings(config_path, seed=seed, backend=backend, n_records=n_records, noise_rate=noise_rate)
    try:
        kb = load_kb(require_path(cfg, "kb"))
        seeds = generate.load_seeds(require_path(cfg, "seeds"))
        templates = generate.load_templates(require_path(cfg, "templates"))
        synonyms = generate.load_synonyms(require_path(cfg, "synonyms"))
    except (ConfigError, QDecompError) as exc:
        raise click.ClickException(str(exc)) from exc
    records = generate.generate_dataset(
        seeds, kb, templates, cfg["n_records"], stage_rng(cfg["seed"], "kbgen"),
        synonyms, cfg["noise_rate"], cfg["swap_rate"], cfg["quota"],
    )
    if not records:
        raise click.ClickException("no records generated")
    generate.write_records(records, out)
    counts = {k: sum(r.comp_type == k for r in records) for k in generate.COMP_TYPES}
    click.echo(f"wrote {len(records)} records to {out} " + " ".join(f"{k}={v}" for k, v in counts.items()))


@main.command()
@common
@click.option("--dataset", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--threshold", type=float, help="Cosine threshold for token similarity.")
def supervise(config_path, seed, backend, dataset, out, threshold):
    """Label generated records with noisy decomposition programs."""
    cfg = settings(config_path, seed=seed, backend=backend, threshold=threshold)
    try:
        store = align.EmbeddingStore.load(require_path(cfg, "embeddings"))
    except (ConfigError, QDecompError) as exc:
        raise click.ClickException(str(exc)) from exc
    result = align.make_supervision(read_jsonl(dataset), store, cfg["threshold"])
    align.write_supervision(result.examples, out)
    click.echo(f"wrote {len(result.examples)} examples to {out}; dropped={result.dropped} skipped={result.skipped}")


@main.command("train")
@common
@click.option("--data", required=True, type=click.Path(exists=True, dir_okay=False), help="Supervision JSONL.")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Model file to write.")
@click.option("--epochs", type=int)
@click.option("--hidden", "hidden_dim", type=int)
def train_cmd(config_path, seed, backend, data, out, epochs, hidden_dim):
    """Fit the pointer network on supervision examples."""
    cfg = settings(config_path, seed=seed, backend=backend)
    try:
        mcfg = model_config(cfg, epochs=epochs, hidden_dim=hidden_dim)
        store = align.EmbeddingStore.load(require_path(cfg, "embeddings"))
        examples = align.read_supervision(data)
    except (ConfigError, QDecompError) as exc:
        raise click.ClickException(str(exc)) from exc
    if not examples:
        raise click.ClickException(f"{data} holds no examples")
    result = train(examples, mcfg, store)
    result.net.save(out)
    click.echo(f"trained {mcfg.epochs} epochs; final loss {result.loss_log[-1]:.5f}; saved {out}")


def _programs(questions: list[str], records: list[dict[str, Any]], model: str | None, rule: bool) -> list[Program]:
    tokenized = [tokenize(q) for q in questions]
    out: list[Program | None] = [Program.parse(r["program"]) if "program" in r else None for r in records]
    missing = [k for k, p in enumerate(out) if p is None]
    if missing and model is not None:
        net = PointerNet.load(model)
        for k, p in zip(missing, predict_batch(net, [tokenized[k] for k in missing])):
            out[k] = p
    elif missing:
        for k in missing:
            out[k] = rule_based_split(tokenized[k]) if rule else Program.simpqa()
    for p, q in zip(out, tokenized):
        p.check(len(q))
    return out


@main.command()
@common
@click.option("--questions", required=True, type=click.Path(exists=True, dir_okay=False), help="JSONL with 'question'.")
@click.option("--model", type=click.Path(exists=True, dir_okay=False))
@click.option("--rule", is_flag=True, help="Use the when/during splitter instead of a model.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def decompose(config_path, seed, backend, questions, model, rule, out):
    """Predict a decomposition program for each question."""
    settings(config_path, seed=seed, backend=backend)
    if model is None and not rule:
        raise click.UsageError("pass --model or --rule")
    rows = read_jsonl(questions)
    texts = [r["question"] for r in rows]
    try:
        programs = _programs(texts, [{} for _ in rows], model, rule)
    except QDecompError as exc:
        raise click.ClickException(str(exc)) from exc
    out_rows = []
    for text, prog in zip(texts, programs):
        q = tokenize(text)
        tree = compile(prog, q)
        out_rows.append({"question": text, "program": str(prog), "tree": str(tree)})
    write_jsonl(out_rows, out)
    click.echo(f"decomposed {len(out_rows)} questions into {out}")


def answer_one(question: str, program: Program, backend) -> dict[str, Any]:
    """Run the decomposed and whole-question strategies and pick the winner."""
    q = tokenize(question)
    plain = op_simpqa(question, backend)
    decomposed = AnswerSet() if program.op.value == "SimpQA" else evaluate(compile(program, q), backend)
    row: dict[str, Any] = {
        "question": question,
        "program": str(program),
        "decomposed_answers": _answers_json(decomposed),
        "plain_answers": _answers_json(plain),
    }
    try:
        best, from_decomposed = select_strategy(decomposed, plain)
    except BothEmpty:
        row.update(answer=None, score=None, strategy="none", answers=[])
        return row
    chosen = decomposed if from_decomposed else plain
    row.update(
        answer=best.answer.to_json(),
        score=best.score,
        strategy="decomposed" if from_decomposed else "plain",
        answers=_answers_json(chosen),
    )
    return row


@main.command()
@common
@click.option("--questions", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", type=click.Path(exists=True, dir_okay=False), help="Decode questions lacking a program.")
@click.option("--rule", is_flag=True, help="Fall back to the when/during splitter.")
@click.option("--fixture", type=click.Path(exists=True, dir_okay=False), help="Fixture backend file.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def answer(config_path, seed, backend, questions, model, rule, fixture, out):
    """Answer questions; resumes from OUT.cursor after a quota stop."""
    cfg = settings(config_path, seed=seed, backend=backend, fixture=fixture)
    rows = read_jsonl(questions)
    texts = [r["question"] for r in rows]
    try:
        qa = make_backend(cfg)
        programs = _programs(texts, rows, model, rule)
    except (ConfigError, QDecompError) as exc:
        raise click.ClickException(str(exc)) from exc
    cursor = Path(str(out) + ".cursor")
    start = 0
    if cursor.exists():
        start = int(json.loads(cursor.read_text())["next"])
        mode = "a"
    else:
        mode = "w"
    with open(out, mode, encoding="utf-8") as fh:
        for k in range(start, len(texts)):
            try:
                row = answer_one(texts[k], programs[k], qa)
            except QuotaError as exc:
                fh.flush()
                cursor.write_text(json.dumps({"next": k}))
                click.echo(f"quota exhausted at question {k}: {exc}; rerun to resume", err=True)
                sys.exit(EXIT_QUOTA)
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")
    if cursor.exists():
        cursor.unlink()
    won = [r["strategy"] for r in read_jsonl(out)]
    click.echo(f"answered {len(won)} questions: decomposed={won.count('decomposed')} plain={won.count('plain')} none={won.count('none')}")


def _key(question: str) -> str:
    return " ".join(question.lower().split())


@main.command("eval")
@common
@click.option("--predictions", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--gold", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), help="Write the JSON report here.")
def eval_cmd(config_path, seed, backend, predictions, gold, out):
    """Score predictions against gold answers and programs."""
    settings(config_path, seed=seed, backend=backend)
    golds = {_key(r["question"]): r for r in read_jsonl(gold)}
    records = []
    for p in read_jsonl(predictions):
        g = golds.get(_key(p["question"]))
        if g is None:
            raise click.ClickException(f"no gold record for {p['question']!r}")
        answers = g.get("gold", g.get("answers"))
        predicted = _answers_from_json(p.get("answers", []))
        top = predicted.top()
        if p.get("answer") is not None:
            top = predicted.get(_answers_from_json([{"a": p["answer"]}]).top().key) or top
        records.append(evalharness.EvalRecord(
            question=p["question"],
            gold=list(answers) if answers else None,
            predicted=predicted,
            top=top,
            comp_type=g.get("comp_type", ""),
            decomposed={"decomposed": True, "plain": False}.get(p.get("strategy")),
            gold_program=Program.parse(g["program"]) if "program" in g else None,
            pred_program=Program.parse(p["program"]) if "program" in p else None,
        ))
    summary = evalharness.report(records)
    if out:
        Path(out).write_text(evalharness.report_json(summary) + "\n", encoding="utf-8")
    click.echo(evalharness.report_table(summary))


@main.command()
@common
@click.option("--hidden", "hidden_dim", type=int, default=8, show_default=True)
@click.option("-n", "--n-examples", type=int, default=10, show_default=True)
@click.option("--epsilon", type=float, default=1e-4, show_default=True)
@click.option("--coords", "n_coords", type=int, default=200, show_default=True)
@click.option("--tolerance", type=float, default=1e-4, show_default=True)
def gradcheck(config_path, seed, backend, hidden_dim, n_examples, epsilon, n_coords, tolerance):
    """Compare backprop gradients to central differences; exit 0 iff they agree."""
    cfg = settings(config_path, seed=seed, backend=backend)
    rng = stage_rng(cfg["seed"], "gradcheck")
    try:
        kb = load_kb(require_path(cfg, "kb"))
        seeds = generate.load_seeds(require_path(cfg, "seeds"))
        templates = generate.load_templates(require_path(cfg, "templates"))
        store = align.EmbeddingStore.load(require_path(cfg, "embeddings"))
        mcfg = model_config(cfg, hidden_dim=hidden_dim, dropout=0.0)
    except (ConfigError, QDecompError) as exc:
        raise click.ClickException(str(exc)) from exc
    pairs = generate.synthetic_pairs(seeds, kb, templates, n_examples, rng)
    examples = align.make_supervision([r.to_json() for r in pairs], store).examples
    net = build_model(examples, mcfg, store)
    err = grad_check(net, examples, epsilon=epsilon, n_coords=n_coords, seed=cfg["seed"])
    ok = err < tolerance
    click.echo(f"max relative error {err:.3e} over {n_coords} coordinates: {'ok' if ok else 'FAILED'}")
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
