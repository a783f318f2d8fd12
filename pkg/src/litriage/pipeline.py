"""Stage implementations behind the CLI.

Each stage reads and writes persisted artifacts under the configured
output directory (stable names), so runs can be resumed and audited:

    corpus.jsonl                      fetched + filtered records
    decisions_<group>_<mode>.jsonl    one decision per record
    thresholds_<group>.json           tuned per-label thresholds
    eval_<group>_<mode>.json          evaluation reports
    timings.csv / metrics.csv / trend CSVs / charts / report.md
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import replace
from pathlib import Path
from typing import Callable, Sequence

import yaml

from .config import RunConfig
from .corpus import ArticleRecord, InclusionCriteria, apply_inclusion, load_corpus, save_corpus
from .decisions import (
    APPEND_SEPARATOR,
    APPENDED,
    FLAG_EMPTY,
    FLAG_TIED,
    FLAG_TITLE_FALLBACK,
    FUSED,
    TITLE,
    Decision,
    ThresholdConfig,
    build_input,
    decide_multiclass,
    decide_multilabel,
    decisions_to_csv,
    fuse_scores,
    hierarchical_decide,
    hierarchical_requests,
    load_decisions,
    load_thresholds,
    save_decisions,
    save_thresholds,
    sweep_thresholds,
)
from .errors import DataError
from .metrics import (
    EvalReport,
    evaluate_multiclass,
    evaluate_multilabel,
    load_report,
    save_report,
)
from .pubmed import FixtureTransport, HttpTransport, Transport, fetch_records, search_articles
from .report import (
    METRICS_CSV,
    TIMINGS_CSV,
    read_timings_csv,
    render_report,
    slugify,
    write_category_trends_csv,
    write_metrics_csv,
    write_time_trends_csv,
    write_timings_csv,
)
from .scoring import (
    LabelScores,
    MockScorer,
    RemoteScorer,
    ScoreRequest,
    ScorerBackend,
    score_batch,
    truncate_text,
)
from .taxonomy import (
    MULTICLASS,
    MULTILABEL,
    RESOLVED,
    TIE,
    CategoryGroup,
    GoldLabel,
    load_annotations,
    load_taxonomy,
    resolve_gold,
    split_labeled_corpus,
)
from .trends import TrendSeries, category_counts, record_timing, time_series

log = logging.getLogger(__name__)

Echo = Callable[[str], None]

CORPUS_FILE = "corpus.jsonl"
ABLATION_CSV = "ablation.csv"
ABLATION_MD = "ablation.md"


def decisions_filename(group: str, input_mode: str) -> str:
    return f"decisions_{slugify(group)}_{input_mode}.jsonl"


def thresholds_filename(group: str) -> str:
    return f"thresholds_{slugify(group)}.json"


def eval_filename(group: str, input_mode: str) -> str:
    return f"eval_{slugify(group)}_{input_mode}.json"


def make_backend(spec: str) -> ScorerBackend:
    if spec == "mock":
        return MockScorer()
    return RemoteScorer(spec)


def make_transport(config: RunConfig) -> Transport:
    if config.fixtures:
        return FixtureTransport(config.fixtures)
    return HttpTransport()


def do_fetch(config: RunConfig, echo: Echo = print) -> Path:
    """Search, fetch, filter, and persist the corpus."""
    criteria = InclusionCriteria(
        query=config.query,
        max_articles=config.max_articles,
        year_range=config.year_range,
        require_abstract=config.require_abstract,
    )
    transport = make_transport(config)
    pmids = search_articles(config.query, config.max_articles, config.year_range, transport)
    echo(f"search: {len(pmids)} ids")
    records = fetch_records(pmids, transport) if pmids else []
    echo(f"fetched: {len(records)} records")
    kept = apply_inclusion(records, criteria)
    echo(f"after inclusion criteria: {len(kept)} records")
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / CORPUS_FILE
    save_corpus(kept, path)
    echo(f"wrote {path}")
    return path


def _flat_scores(
    records: Sequence[ArticleRecord],
    group: CategoryGroup,
    input_mode: str,
    backend: ScorerBackend,
    *,
    parallelism: int,
    char_budget: int,
    template: str,
) -> tuple[list[LabelScores], list[str], list[list[str]]]:
    """Score every record against the group's primary phrases.

    Returns (scores, effective input modes, per-record flags). Appended
    and fused inputs fall back to the title when the abstract is empty.
    """
    phrases = group.primary_phrases()
    multi = group.mode == MULTILABEL

    def request(text: str, keep: int = 0) -> ScoreRequest:
        return ScoreRequest(
            text=truncate_text(text, char_budget, keep),
            label_phrases=phrases,
            multi_label=multi,
            template=template,
        )

    batch: list[ScoreRequest] = []
    plan: list[tuple[str, list[str], int]] = []
    for record in records:
        mode, flags = input_mode, []
        if mode in (APPENDED, FUSED) and not record.abstract.strip():
            log.warning("pmid %s: empty abstract; falling back to title input", record.pmid)
            mode, flags = TITLE, [FLAG_TITLE_FALLBACK]
        if mode == FUSED:
            abstract_text, title_text = build_input(record, FUSED)
            batch.append(request(abstract_text))
            batch.append(request(title_text))
            plan.append((mode, flags, 2))
        else:
            keep = len(record.title) + len(APPEND_SEPARATOR) if mode == APPENDED else 0
            batch.append(request(build_input(record, mode), keep))
            plan.append((mode, flags, 1))

    results = score_batch(backend, batch, parallelism)
    scores: list[LabelScores] = []
    cursor = iter(results)
    for mode, flags, width in plan:
        if width == 2:
            scores.append(fuse_scores(next(cursor), next(cursor)))
        else:
            scores.append(next(cursor))
    return scores, [mode for mode, _, _ in plan], [flags for _, flags, _ in plan]


def _hierarchical_scores(
    records: Sequence[ArticleRecord],
    group: CategoryGroup,
    input_mode: str,
    backend: ScorerBackend,
    *,
    parallelism: int,
    char_budget: int,
    template: str,
) -> tuple[list[dict[str, LabelScores]], list[str], list[list[str]]]:
    """One binary (phrase vs negation) score pair per label per record."""
    batch: list[ScoreRequest] = []
    plan: list[tuple[str, list[str]]] = []
    for record in records:
        mode, flags = input_mode, []
        if mode in (APPENDED, FUSED) and not record.abstract.strip():
            log.warning("pmid %s: empty abstract; falling back to title input", record.pmid)
            mode, flags = TITLE, [FLAG_TITLE_FALLBACK]
        if mode == FUSED:
            raise ValueError("hierarchical classification does not support fused inputs")
        keep = len(record.title) + len(APPEND_SEPARATOR) if mode == APPENDED else 0
        text = truncate_text(build_input(record, mode), char_budget, keep)
        for _, request in hierarchical_requests(text, group, template):
            batch.append(request)
        plan.append((mode, flags))
    results = score_batch(backend, batch, parallelism)
    per_record: list[dict[str, LabelScores]] = []
    cursor = iter(results)
    for _ in records:
        per_record.append({label: next(cursor) for label in group.labels})
    return per_record, [mode for mode, _ in plan], [flags for _, flags in plan]


def classify_group(
    records: Sequence[ArticleRecord],
    group: CategoryGroup,
    input_mode: str,
    backend: ScorerBackend,
    thresholds: ThresholdConfig,
    *,
    parallelism: int = 1,
    char_budget: int = 4000,
    template: str = "This example is about {}.",
    hierarchical: bool = False,
) -> list[Decision]:
    """One decision per record for one group and input mode."""
    options = dict(
        parallelism=parallelism,
        char_budget=char_budget,
        template=group.template or template,
    )
    decisions: list[Decision] = []
    if hierarchical and group.mode == MULTILABEL:
        binary_maps, modes, flag_lists = _hierarchical_scores(
            records, group, input_mode, backend, **options
        )
        for record, binary, mode, flags in zip(records, binary_maps, modes, flag_lists):
            labels, empty = hierarchical_decide(binary, group.labels, thresholds)
            if empty:
                flags = flags + [FLAG_EMPTY]
            positives = tuple(binary[label].scores[0] for label in group.labels)
            decisions.append(
                Decision(record.pmid, group.name, group.mode, mode, labels, positives, tuple(flags))
            )
        return decisions

    scores, modes, flag_lists = _flat_scores(records, group, input_mode, backend, **options)
    for record, row, mode, flags in zip(records, scores, modes, flag_lists):
        if group.mode == MULTICLASS:
            index, tied = decide_multiclass(row.scores)
            labels = (group.labels[index],)
            if tied:
                flags = flags + [FLAG_TIED]
        else:
            chosen, empty = decide_multilabel(row.scores, thresholds.vector(group.labels))
            labels = tuple(group.labels[i] for i in sorted(chosen))
            if empty:
                flags = flags + [FLAG_EMPTY]
        decisions.append(
            Decision(record.pmid, group.name, group.mode, mode, labels, row.scores, tuple(flags))
        )
    return decisions


def _group_thresholds(config: RunConfig, out: Path, group: CategoryGroup) -> ThresholdConfig:
    tuned = out / thresholds_filename(group.name)
    if group.mode == MULTILABEL and tuned.exists():
        log.info("%s: using tuned thresholds from %s", group.name, tuned)
        return load_thresholds(tuned)
    return ThresholdConfig(default=config.threshold)


def do_classify(config: RunConfig, echo: Echo = print) -> list[Path]:
    """Classify the persisted corpus for every group and input mode."""
    out = Path(config.out_dir)
    corpus_path = out / CORPUS_FILE
    if not corpus_path.exists():
        raise DataError(f"corpus not found: {corpus_path}; run fetch first")
    records = load_corpus(corpus_path)
    groups = load_taxonomy(config.taxonomy)
    backend = make_backend(config.backend)
    timings = []
    written = []
    for group in groups:
        thresholds = _group_thresholds(config, out, group)
        for mode in config.input_modes:
            start = time.monotonic()
            decisions = classify_group(
                records,
                group,
                mode,
                backend,
                thresholds,
                parallelism=config.parallelism,
                char_budget=config.char_budget,
                template=config.template,
                hierarchical=config.hierarchical,
            )
            elapsed = time.monotonic() - start
            timings.append(record_timing(f"classify {group.name} [{mode}]", elapsed, len(decisions)))
            path = out / decisions_filename(group.name, mode)
            save_decisions(decisions, path)
            decisions_to_csv(decisions, group.labels, path.with_suffix(".csv"))
            written.append(path)
            echo(f"{group.name} [{mode}]: {len(decisions)} decisions -> {path.name}")
    write_timings_csv(timings, out / TIMINGS_CSV)
    return written


def do_tune(config: RunConfig, echo: Echo = print) -> list[Path]:
    """Pick per-label thresholds for multilabel groups on a tuning split."""
    out = Path(config.out_dir)
    records = load_corpus(out / CORPUS_FILE)
    by_pmid = {record.pmid: record for record in records}
    groups = load_taxonomy(config.taxonomy)
    annotations = load_annotations(config.annotations, groups)
    backend = make_backend(config.backend)
    written = []
    for group in groups:
        if group.mode != MULTILABEL:
            echo(f"{group.name}: multiclass needs no threshold; skipped")
            continue
        gold = resolve_gold(annotations, group)
        usable = [
            g for g in gold.values() if g.status == RESOLVED and g.pmid in by_pmid
        ]
        skipped = len(gold) - len(usable)
        tuning, held_out = split_labeled_corpus(
            usable, config.tuning_fraction, config.seed, MULTILABEL
        )
        if not tuning:
            raise DataError(f"{group.name}: no usable tuning records")
        echo(
            f"{group.name}: tuning on {len(tuning)} records "
            f"({len(held_out)} held out, {skipped} unusable)"
        )
        tuning_records = [by_pmid[g.pmid] for g in tuning]
        mode = config.input_modes[0]
        options = dict(
            parallelism=config.parallelism,
            char_budget=config.char_budget,
            template=group.template or config.template,
        )
        if config.hierarchical:
            binary_maps, _, _ = _hierarchical_scores(
                tuning_records, group, mode, backend, **options
            )
            score_rows = [
                [binary[label].scores[0] for label in group.labels] for binary in binary_maps
            ]
        else:
            scores, _, _ = _flat_scores(tuning_records, group, mode, backend, **options)
            score_rows = [list(row.scores) for row in scores]
        gold_sets = [[group.index_of(label) for label in g.labels] for g in tuning]
        thresholds = sweep_thresholds(
            score_rows, gold_sets, group.labels, config.sweep_grid, config.objective
        )
        path = out / thresholds_filename(group.name)
        save_thresholds(thresholds, path)
        written.append(path)
        chosen = ", ".join(f"{label}={thresholds.for_label(label)}" for label in group.labels)
        echo(f"{group.name}: thresholds {chosen} -> {path.name}")
    return written


def do_evaluate(config: RunConfig, echo: Echo = print) -> list[EvalReport]:
    """Score persisted decisions against majority-vote gold labels."""
    out = Path(config.out_dir)
    groups = load_taxonomy(config.taxonomy)
    annotations = load_annotations(config.annotations, groups)
    reports = []
    for group in groups:
        gold_map = resolve_gold(annotations, group)
        for mode in config.input_modes:
            path = out / decisions_filename(group.name, mode)
            if not path.exists():
                raise DataError(f"decisions not found: {path}; run classify first")
            decisions = load_decisions(path)
            kept: list[tuple[Decision, GoldLabel]] = []
            no_gold = tie_gold = 0
            for decision in decisions:
                gold = gold_map.get(decision.pmid)
                if gold is None:
                    no_gold += 1
                elif gold.status == TIE:
                    tie_gold += 1
                else:
                    kept.append((decision, gold))
            echo(
                f"{group.name} [{mode}]: {len(kept)} evaluated, "
                f"{no_gold} without gold, {tie_gold} tie-status excluded"
            )
            if not kept:
                raise DataError(f"{group.name} [{mode}]: no records with usable gold")
            score_rows = [decision.scores for decision, _ in kept]
            if group.mode == MULTICLASS:
                gold_idx = [group.index_of(gold.labels[0]) for _, gold in kept]
                pred_idx = [group.index_of(decision.labels[0]) for decision, _ in kept]
                report = evaluate_multiclass(gold_idx, pred_idx, group.labels, score_rows)
            else:
                gold_sets = [
                    [group.index_of(label) for label in gold.labels] for _, gold in kept
                ]
                pred_sets = [
                    [group.index_of(label) for label in decision.labels] for decision, _ in kept
                ]
                report = evaluate_multilabel(gold_sets, pred_sets, group.labels, score_rows)
            report = replace(report, group=group.name, input_mode=mode)
            save_report(report, out / eval_filename(group.name, mode))
            reports.append(report)
            ac = f"{report.accuracy:.4f}" if report.accuracy is not None else "-"
            auc = f"{report.auc:.4f}" if report.auc is not None else "-"
            echo(
                f"  Ac={ac} F1={report.f1:.4f} AUC={auc} "
                f"Pv={report.precision:.4f} Re={report.recall:.4f}"
            )
    write_metrics_csv(reports, out / METRICS_CSV)
    return reports


def _report_metric(report: EvalReport, name: str) -> float | None:
    return {
        "ac": report.accuracy,
        "f1": report.f1,
        "auc": report.auc,
        "pv": report.precision,
        "re": report.recall,
    }[name]


ABLATION_METRICS = ("ac", "f1", "auc", "pv", "re")


def load_phrasing_variants(path: str | Path) -> tuple[str, list[tuple[str, dict[str, tuple[str, ...]]]]]:
    """Read a phrasing-variants file: a group name plus named phrasing sets."""
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise DataError(f"{path}: not valid YAML: {exc}") from exc
    if not isinstance(doc, dict) or "group" not in doc or not isinstance(doc.get("variants"), list):
        raise DataError(f"{path}: expected a mapping with 'group' and a 'variants' list")
    variants = []
    for raw in doc["variants"]:
        if not isinstance(raw, dict) or "name" not in raw or not isinstance(raw.get("phrasings"), dict):
            raise DataError(f"{path}: each variant needs a name and a phrasings map")
        phrasings = {
            label: tuple([phrases] if isinstance(phrases, str) else phrases)
            for label, phrases in raw["phrasings"].items()
        }
        variants.append((str(raw["name"]), phrasings))
    return str(doc["group"]), variants


def do_ablate(config: RunConfig, variants_path: str | Path, echo: Echo = print) -> list[dict]:
    """Evaluate phrasing variants side by side, Table-style.

    One row per (variant, input mode); the best value per metric is marked
    in the ``best_for`` column and bolded in the markdown table.
    """
    out = Path(config.out_dir)
    records = load_corpus(out / CORPUS_FILE)
    groups = load_taxonomy(config.taxonomy)
    annotations = load_annotations(config.annotations, groups)
    group_name, variants = load_phrasing_variants(variants_path)
    if len(variants) < 2:
        raise ValueError("need at least 2 phrasing variants to compare")
    base = next((g for g in groups if g.name == group_name), None)
    if base is None:
        raise DataError(f"variants file names unknown group {group_name!r}")
    backend = make_backend(config.backend)
    gold_map = resolve_gold(annotations, base)
    usable = {
        pmid: gold for pmid, gold in gold_map.items() if gold.status == RESOLVED
    }
    eval_records = [record for record in records if record.pmid in usable]
    if not eval_records:
        raise DataError(f"{group_name}: no records with usable gold")
    thresholds = _group_thresholds(config, out, base)

    rows: list[dict] = []
    for variant_name, phrasings in variants:
        if set(phrasings) != set(base.labels):
            raise DataError(
                f"variant {variant_name!r} must phrase exactly the labels of {group_name!r}"
            )
        group = replace(base, phrasings=phrasings)
        for mode in config.input_modes:
            decisions = classify_group(
                eval_records,
                group,
                mode,
                backend,
                thresholds,
                parallelism=config.parallelism,
                char_budget=config.char_budget,
                template=config.template,
                hierarchical=config.hierarchical,
            )
            score_rows = [decision.scores for decision in decisions]
            if group.mode == MULTICLASS:
                gold_idx = [group.index_of(usable[r.pmid].labels[0]) for r in eval_records]
                pred_idx = [group.index_of(d.labels[0]) for d in decisions]
                report = evaluate_multiclass(gold_idx, pred_idx, group.labels, score_rows)
            else:
                gold_sets = [
                    [group.index_of(label) for label in usable[r.pmid].labels]
                    for r in eval_records
                ]
                pred_sets = [
                    [group.index_of(label) for label in d.labels] for d in decisions
                ]
                report = evaluate_multilabel(gold_sets, pred_sets, group.labels, score_rows)
            row = {"variant": variant_name, "input_mode": mode}
            row.update({name: _report_metric(report, name) for name in ABLATION_METRICS})
            rows.append(row)

    for name in ABLATION_METRICS:
        values = [row[name] for row in rows if row[name] is not None]
        if not values:
            continue
        best = max(values)
        for row in rows:
            if row[name] == best:
                row.setdefault("best_for", []).append(name)

    _write_ablation(rows, out)
    for line in _ablation_markdown(rows):
        echo(line)
    return rows


def _format_metric(value: float | None) -> str:
    return f"{value:.4f}" if value is not None else "-"


def _ablation_markdown(rows: Sequence[dict]) -> list[str]:
    lines = [
        "| variant | input mode | Ac | F1 | AUC | Pv | Re |",
        "| --- | --- | --- | --- | --- | --- | --- |",
    ]
    for row in rows:
        cells = []
        for name in ABLATION_METRICS:
            cell = _format_metric(row[name])
            if name in row.get("best_for", []):
                cell = f"**{cell}**"
            cells.append(cell)
        lines.append(f"| {row['variant']} | {row['input_mode']} | " + " | ".join(cells) + " |")
    return lines


def _write_ablation(rows: Sequence[dict], out: Path) -> None:
    with open(out / ABLATION_CSV, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant", "input_mode", *ABLATION_METRICS, "best_for"])
        for row in rows:
            writer.writerow(
                [row["variant"], row["input_mode"]]
                + [_format_metric(row[name]) for name in ABLATION_METRICS]
                + ["|".join(row.get("best_for", []))]
            )
    (out / ABLATION_MD).write_text("\n".join(_ablation_markdown(rows)) + "\n", encoding="utf-8")


def build_trend_series(config: RunConfig) -> list[TrendSeries]:
    """Category and time series for every group, from persisted decisions."""
    out = Path(config.out_dir)
    records = load_corpus(out / CORPUS_FILE)
    if not records:
        raise DataError("corpus is empty; nothing to aggregate")
    groups = load_taxonomy(config.taxonomy)
    years = {record.pmid: record.year for record in records}
    year_range = config.year_range or (min(years.values()), max(years.values()))
    mode = config.input_modes[0]
    series: list[TrendSeries] = []
    for group in groups:
        path = out / decisions_filename(group.name, mode)
        if not path.exists():
            raise DataError(f"decisions not found: {path}; run classify first")
        decisions = load_decisions(path)
        series.append(category_counts(decisions, group))
        series.append(time_series(decisions, years, group, year_range))
    return series


def do_trends(config: RunConfig, echo: Echo = print) -> list[TrendSeries]:
    """Aggregate decisions into trend series and persist the CSVs."""
    out = Path(config.out_dir)
    series = build_trend_series(config)
    write_category_trends_csv(series, out / "category_trends.csv")
    write_time_trends_csv(series, out / "time_trends.csv")
    for s in series:
        if s.axis == "category":
            echo(f"{s.group}: {s.total()} assignments over {len(s.categories)} categories")
        else:
            echo(
                f"{s.group}: {s.total()} in {s.years[0]}-{s.years[-1]}"
                + (f" ({s.excluded_records} outside range)" if s.excluded_records else "")
            )
    return series


def _run_meta(config: RunConfig) -> dict[str, object]:
    return {
        "query": config.query or "(none)",
        "max_articles": config.max_articles,
        "year_range": list(config.year_range) if config.year_range else "(all)",
        "require_abstract": config.require_abstract,
        "input_modes": ", ".join(config.input_modes),
        "backend": config.backend,
        "threshold": config.threshold,
        "seed": config.seed,
    }


def do_report(config: RunConfig, echo: Echo = print) -> Path:
    """Render the report bundle from persisted artifacts."""
    out = Path(config.out_dir)
    groups = load_taxonomy(config.taxonomy)
    reports = []
    for group in groups:
        for mode in config.input_modes:
            path = out / eval_filename(group.name, mode)
            if path.exists():
                reports.append(load_report(path))
    series = build_trend_series(config)
    timings = read_timings_csv(out / TIMINGS_CSV) if (out / TIMINGS_CSV).exists() else []
    path = render_report(_run_meta(config), reports, series, timings, out)
    echo(f"wrote {path}")
    return path


def do_run_all(config: RunConfig, echo: Echo = print) -> Path:
    """fetch -> (tune) -> classify -> (evaluate) -> trends -> report."""
    do_fetch(config, echo)
    groups = load_taxonomy(config.taxonomy) if config.taxonomy else []
    has_multilabel = any(group.mode == MULTILABEL for group in groups)
    if config.annotations and has_multilabel:
        do_tune(config, echo)
    do_classify(config, echo)
    if config.annotations:
        do_evaluate(config, echo)
    do_trends(config, echo)
    return do_report(config, echo)
