"""``topic-trends`` command line.

Stages talk to each other through files in a working directory, so each
one can be rerun on its own:

    ingest   <input>            -> records.jsonl, ingest_report.txt
    prep     records.jsonl      -> vocab.tsv, docs.jsonl, prep_report.txt
    geotag   records + docs     -> docs_geo.jsonl
    train    docs.jsonl         -> model.npz, loglik.tsv
    trends   docs_geo + model   -> topics.csv, trends*.csv, topic_totals.csv, ...
    report   <input>            -> every stage above plus model_dump.tsv, config.txt

Exit status: 0 success, 1 usage or configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections import Counter
from pathlib import Path

from . import __version__
from .config import PipelineConfig, file_digest, resolve
from .corpus import IngestReport, ingest, read_sampled, week_index, write_records
from .errors import ConfigError, DataError
from .geotag import (
    DEFAULT_GAZETTEER_PATH,
    TARGET_COUNTRIES,
    assign_countries,
    compile_gazetteer,
    load_gazetteer,
    match_locations,
    write_gazetteer,
)
from .lda import (
    dump_model,
    load_model,
    perplexity,
    save_model,
    sweep_k,
    train,
    train_chains,
    write_loglik_tsv,
    write_sweep_tsv,
)
from .textprep import (
    DEFAULT_DOMAIN_TERMS_PATH,
    DEFAULT_STOPLIST_PATH,
    TextPipeline,
    Vocabulary,
    build_vocabulary,
    document_from_stems,
    read_documents,
    read_term_file,
    write_documents,
)
from .synthetic import BUNDLED_CORPUS_PATH
from .trends import (
    build_trends,
    export,
    join_case_counts,
    load_case_counts,
    top_n_topics,
    write_case_join,
    write_topics_csv,
)

log = logging.getLogger("topic_trends")

RECORDS = "records.jsonl"
INGEST_REPORT = "ingest_report.txt"
VOCAB = "vocab.tsv"
DOCS = "docs.jsonl"
DOCS_GEO = "docs_geo.jsonl"
PREP_REPORT = "prep_report.txt"
MODEL = "model.npz"
LOGLIK = "loglik.tsv"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _require(path: Path) -> Path:
    if not path.is_file():
        raise DataError(f"missing stage input: {path}")
    return path


def _config_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("pipeline configuration (flags override --config)")
    g.add_argument("--config", help="key=value config file (default: $TOPIC_TRENDS_CONFIG)")
    g.add_argument("--window", help="study window START:END, e.g. 2020-03-23:2020-06-23")
    g.add_argument("--sample-per-week", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--k", type=int, help="number of topics")
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--iterations", type=int)
    g.add_argument("--burn-in", type=int)
    g.add_argument("--min-df", type=int)
    g.add_argument("--max-df-ratio", type=float)
    g.add_argument("--stoplist")
    g.add_argument("--domain-terms")
    g.add_argument("--gazetteer")
    g.add_argument("--heldout-fraction", type=float)
    g.add_argument("--top-terms", type=int)
    g.add_argument("--all-languages", action="store_true", help="keep non-English records")
    g.add_argument("--workers", type=int, default=1)
    return p


def _pipeline_config(args) -> PipelineConfig:
    overrides = {
        name: getattr(args, name, None)
        for name in (
            "window", "sample_per_week", "seed", "k", "alpha", "beta", "iterations", "burn_in",
            "min_df", "max_df_ratio", "stoplist", "domain_terms", "gazetteer", "heldout_fraction",
            "top_terms",
        )
    }
    if getattr(args, "all_languages", False):
        overrides["english_only"] = False
    return resolve(args.config, overrides)


def _text_pipeline(cfg: PipelineConfig) -> TextPipeline:
    return TextPipeline(
        read_term_file(cfg.stoplist or DEFAULT_STOPLIST_PATH),
        read_term_file(cfg.domain_terms or DEFAULT_DOMAIN_TERMS_PATH),
    )


def stage_ingest(cfg: PipelineConfig, input_path, workdir: Path, fmt: str = "jsonl", report_path=None) -> IngestReport:
    if not Path(input_path).is_file():
        raise DataError(f"missing input file: {input_path}")
    records, report = ingest(input_path, cfg.window, cfg.sample_per_week, cfg.seed, fmt, cfg.english_only)
    workdir.mkdir(parents=True, exist_ok=True)
    write_records(workdir / RECORDS, records)
    text = report.render()
    (workdir / INGEST_REPORT).write_text(text, encoding="utf-8")
    if report_path:
        Path(report_path).write_text(text, encoding="utf-8")
    else:
        sys.stderr.write(text)
    return report


def stage_prep(cfg: PipelineConfig, workdir: Path, workers: int = 1) -> Counter:
    records = read_sampled(_require(workdir / RECORDS))
    pipeline = _text_pipeline(cfg)
    stems = pipeline.map([r.text for r in records], workers)
    vocab = build_vocabulary(stems, cfg.min_df, cfg.max_df_ratio)
    stats: Counter = Counter()
    docs = []
    for r, s in zip(records, stems):
        doc = document_from_stems(r.id, week_index(r.created_at, cfg.window), s, vocab, stats)
        if doc is not None:
            docs.append(doc)
    vocab.write_tsv(workdir / VOCAB)
    write_documents(workdir / DOCS, docs, vocab.digest())
    lines = [
        f"records\t{len(records)}",
        f"documents\t{len(docs)}",
        f"empty_documents\t{stats['empty_documents']}",
        f"oov_tokens\t{stats['oov_tokens']}",
        f"vocabulary_size\t{len(vocab)}",
    ]
    (workdir / PREP_REPORT).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return stats


def stage_geotag(cfg: PipelineConfig, workdir: Path) -> Counter:
    records = {r.id: r for r in read_sampled(_require(workdir / RECORDS))}
    docs, vocab_hash = read_documents(_require(workdir / DOCS))
    gaz = load_gazetteer(cfg.gazetteer or DEFAULT_GAZETTEER_PATH)
    tagged, tally = [], Counter()
    for d in docs:
        if d.source_id not in records:
            raise DataError(f"document {d.source_id} has no source record in {RECORDS}")
        matches = match_locations(records[d.source_id].text, gaz)
        tally.update(matches)
        tally["untagged" if not matches else "tagged"] += 1
        tagged.append(assign_countries(d, matches))
    write_documents(workdir / DOCS_GEO, tagged, vocab_hash)
    return tally


def stage_train(cfg: PipelineConfig, workdir: Path, chains: int = 1, workers: int = 1):
    docs, vocab_hash = read_documents(_require(workdir / DOCS))
    vocab = Vocabulary.read_tsv(_require(workdir / VOCAB))
    if vocab.digest() != vocab_hash:
        raise DataError(f"{DOCS} was not built from {VOCAB}")
    kwargs = dict(n_terms=len(vocab), terms=vocab.terms, vocab_hash=vocab_hash)
    if chains == 1:
        model = train(docs, cfg.lda(), **kwargs)
        save_model(model, workdir / MODEL)
        write_loglik_tsv(model, workdir / LOGLIK)
        return [model]
    models = train_chains(docs, cfg.lda(), chains, workers, **kwargs)
    with open(workdir / "chains.tsv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("chain\tseed\tfinal_joint_log_likelihood\ttraining_perplexity\n")
        for c, m in enumerate(models):
            save_model(m, workdir / f"model_chain{c}.npz")
            write_loglik_tsv(m, workdir / f"loglik_chain{c}.tsv")
            ppl = perplexity(m, docs, theta=m.theta)
            fh.write(f"{c}\t{m.config.seed}\t{m.loglik[-1]!r}\t{ppl:.6f}\n")
    return models


def stage_trends(cfg, workdir: Path, out_dir: Path, model_path=None, formats=("csv",), cases=None, region="WORLD"):
    docs, vocab_hash = read_documents(_require(workdir / DOCS_GEO))
    model = load_model(_require(Path(model_path) if model_path else workdir / MODEL))
    table = build_trends(docs, model, cfg.window.week_count, vocab_hash)
    out_dir.mkdir(parents=True, exist_ok=True)
    export(table, out_dir, formats)
    write_topics_csv(model, out_dir / "topics.csv", cfg.top_terms)
    with open(out_dir / "top_topics.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("country,rank,topic_id\n")
        for c in TARGET_COUNTRIES:
            for rank, t in enumerate(top_n_topics(table, c, 4), 1):
                fh.write(f"{c},{rank},{t}\n")
    if cases:
        series = load_case_counts(_require(Path(cases)), cfg.window, region)
        country = None if region.upper() == "WORLD" else region.upper()
        write_case_join(join_case_counts(table, series, country), out_dir / f"cases_join_{region.upper()}.csv")
    return table


def write_config_echo(cfg: PipelineConfig, out_dir: Path) -> None:
    lines = cfg.echo()
    lines.append(f"stoplist_sha256={file_digest(cfg.stoplist or DEFAULT_STOPLIST_PATH)}")
    lines.append(f"domain_terms_sha256={file_digest(cfg.domain_terms or DEFAULT_DOMAIN_TERMS_PATH)}")
    lines.append(f"gazetteer_sha256={file_digest(cfg.gazetteer or DEFAULT_GAZETTEER_PATH)}")
    if (out_dir / VOCAB).is_file():
        lines.append(f"vocab_sha256={Vocabulary.read_tsv(out_dir / VOCAB).digest()}")
    (out_dir / "config.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _cmd_ingest(args):
    cfg = _pipeline_config(args)
    stage_ingest(cfg, args.input, Path(args.workdir), args.format, args.report)


def _cmd_prep(args):
    cfg = _pipeline_config(args)
    stats = stage_prep(cfg, Path(args.workdir), args.workers)
    log.info("prep: %d empty documents, %d out-of-vocabulary tokens", stats["empty_documents"], stats["oov_tokens"])


def _cmd_geotag(args):
    tally = stage_geotag(_pipeline_config(args), Path(args.workdir))
    log.info("geotag: %s", dict(sorted(tally.items())))


def _cmd_train(args):
    if args.chains < 1:
        raise ConfigError("--chains must be >= 1")
    stage_train(_pipeline_config(args), Path(args.workdir), args.chains, args.workers)


def _parse_ks(spec: str) -> list[int]:
    try:
        if ":" in spec:
            lo, hi = (int(x) for x in spec.split(":"))
            ks = list(range(lo, hi + 1))
        else:
            ks = [int(x) for x in spec.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad --ks {spec!r}; use LO:HI or a comma list") from None
    if not ks or min(ks) < 1:
        raise ConfigError(f"bad --ks {spec!r}")
    return ks


def _cmd_sweep_k(args):
    cfg = _pipeline_config(args)
    ks = _parse_ks(args.ks)
    workdir = Path(args.workdir)
    docs, _ = read_documents(_require(workdir / DOCS))
    vocab = Vocabulary.read_tsv(_require(workdir / VOCAB))
    rows = sweep_k(docs, ks, cfg.lda(), cfg.heldout_fraction, n_terms=len(vocab))
    out = Path(args.out) if args.out else workdir / "sweep_k.tsv"
    write_sweep_tsv(rows, out)
    sys.stdout.write(out.read_text(encoding="utf-8"))


def _formats(spec: str) -> list[str]:
    fmts = [f.strip() for f in spec.split(",") if f.strip()]
    bad = set(fmts) - {"csv", "gnuplot_dat", "svg_lines"}
    if bad:
        raise ConfigError(f"unknown format(s): {', '.join(sorted(bad))}")
    return fmts


def _cmd_trends(args):
    cfg = _pipeline_config(args)
    fmts = _formats(args.formats)
    workdir = Path(args.workdir)
    stage_trends(cfg, workdir, Path(args.out_dir or workdir), args.model, fmts, args.cases, args.region)


def _cmd_report(args):
    cfg = _pipeline_config(args)
    out = Path(args.out_dir)
    fmts = _formats(args.formats)
    stage_ingest(cfg, args.input, out, args.format, out / INGEST_REPORT)
    stage_prep(cfg, out, args.workers)
    stage_geotag(cfg, out)
    [model] = stage_train(cfg, out)
    stage_trends(cfg, out, out, None, fmts, args.cases, args.region)
    with open(out / "model_dump.tsv", "w", encoding="utf-8", newline="\n") as fh:
        dump_model(model, fh)
    write_config_echo(cfg, out)
    log.info("report bundle written to %s", out)


def _cmd_compile_gazetteer(args):
    countries = [c.strip().upper() for c in args.countries.split(",") if c.strip()]
    entries = compile_gazetteer(args.input, countries, args.min_population, args.admin1, args.extras)
    counts = Counter(e.country for e in entries)
    header = [
        "Compiled by topic-trends compile-gazetteer",
        f"countries={','.join(countries)} min_population={args.min_population}",
        f"entries={len(entries)} " + " ".join(f"{c}={counts[c]}" for c in countries),
    ]
    write_gazetteer(args.out, entries, header)
    log.info("wrote %d entries to %s", len(entries), args.out)


def _cmd_model_dump(args):
    model = load_model(_require(Path(args.model)))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            dump_model(model, fh, args.theta)
    else:
        dump_model(model, sys.stdout, args.theta)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="topic-trends", description="Weekly topic and country trends from a short-text corpus.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _config_parent()

    def workdir(p):
        p.add_argument("--workdir", default=".", help="stage working directory (default: .)")

    p = sub.add_parser("ingest", parents=[common], help="filter, de-duplicate and sample raw records")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--report", help="also write the ingest report here (default: stderr)")
    workdir(p)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("prep", parents=[common], help="tokenize, stem and build the vocabulary")
    workdir(p)
    p.set_defaults(func=_cmd_prep)

    p = sub.add_parser("geotag", parents=[common], help="tag documents with countries")
    workdir(p)
    p.set_defaults(func=_cmd_geotag)

    p = sub.add_parser("train", parents=[common], help="fit LDA by collapsed Gibbs sampling")
    p.add_argument("--chains", type=int, default=1, help="independent chains (seeds seed, seed+1, ...)")
    workdir(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("sweep-k", parents=[common], help="held-out perplexity over a range of K")
    p.add_argument("--ks", default="5:20", help="LO:HI inclusive or comma list (default 5:20)")
    p.add_argument("--out", help="TSV path (default: WORKDIR/sweep_k.tsv)")
    workdir(p)
    p.set_defaults(func=_cmd_sweep_k)

    def trend_opts(p):
        p.add_argument("--formats", default="csv,gnuplot_dat,svg_lines")
        p.add_argument("--cases", help="cases.csv with date,region,confirmed")
        p.add_argument("--region", default="WORLD", help="case-series region to join (default WORLD)")

    p = sub.add_parser("trends", parents=[common], help="aggregate dominant topics per week and country")
    p.add_argument("--model", help="model file (default: WORKDIR/model.npz)")
    p.add_argument("--out-dir", help="default: WORKDIR")
    trend_opts(p)
    workdir(p)
    p.set_defaults(func=_cmd_trends)

    p = sub.add_parser("report", parents=[common], help="run every stage and write the output bundle")
    p.add_argument("--input", default=str(BUNDLED_CORPUS_PATH), help="raw records (default: bundled synthetic corpus)")
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--out-dir", default="report", help="bundle directory (default: ./report)")
    trend_opts(p)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("compile-gazetteer", help="build a gazetteer TSV from a GeoNames dump")
    p.add_argument("--input", required=True, help="GeoNames cities-format file")
    p.add_argument("--countries", default=",".join(TARGET_COUNTRIES))
    p.add_argument("--min-population", default="100000", help="N, or N,CC=M for per-country thresholds")
    p.add_argument("--admin1", help="admin1CodesASCII-format file of first-level divisions")
    p.add_argument("--extras", help="hand-curated gazetteer TSV merged in first")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_compile_gazetteer)

    p = sub.add_parser("model", help="inspect a trained model")
    msub = p.add_subparsers(dest="model_command", required=True, parser_class=_Parser)
    d = msub.add_parser("dump", help="write the model as TSV")
    d.add_argument("--model", required=True)
    d.add_argument("--out")
    d.add_argument("--theta", action="store_true", help="include the document-topic matrix")
    d.set_defaults(func=_cmd_model_dump)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"topic-trends: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"topic-trends: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
