"""Command-line pipeline: ingest, extract, featurize, train, evaluate,
explain, agreement, export-distill, serve.

Stages communicate only through workspace files, so each one can be
re-run, inspected, or replaced by hand. With ``--backend mock`` the whole
pipeline runs offline with no credentials and is deterministic under the
configured seeds. Exit codes: 0 success, 1 domain error, 2 usage/IO error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import extraction, featurize, metrics, ordinal
from .errors import AnscoreError, DataFormatError, EmptyDatasetError
from .explain import OverrideRecord, explain, explanation_to_dict, render_text
from .featurize import FeatureLabel
from .ioutil import write_json
from .workspace import Workspace

USAGE_ERRORS = (DataFormatError, EmptyDatasetError, FileNotFoundError, NotADirectoryError)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anscore", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def ws_arg(p):
        p.add_argument("--workspace", required=True, help="workspace directory")
        return p

    p = ws_arg(sub.add_parser("ingest", help="load TSV/JSON corpora into the workspace"))
    p.add_argument("--items", help="item config JSON (id -> score range, parts, prompt)")
    p.add_argument("--train-tsv", help="TSV whose rows are split into train/valid")
    p.add_argument("--test-tsv", help="TSV ingested as the test split")
    p.add_argument("--json", dest="json_corpus", action="append", default=[],
                   help="canonical JSON corpus file (repeatable)")
    p.add_argument("--item", action="append", default=[], help="restrict to these item ids")
    p.add_argument("--ratio", type=float, help="train fraction (default from config: 0.8)")
    p.add_argument("--seed", type=int, help="split seed (default from config: 13)")

    p = ws_arg(sub.add_parser("extract", help="derive analytic components for an item"))
    p.add_argument("--item", required=True)
    p.add_argument("--backend", choices=["mock", "http"])
    p.add_argument("--cap", type=int, help="override the per-part component cap")
    p.add_argument("--sample-size", type=int, default=extraction.DEFAULT_SAMPLE_SIZE)
    p.add_argument("--char-budget", type=int, default=extraction.DEFAULT_CHAR_BUDGET)

    p = ws_arg(sub.add_parser("featurize", help="label every (response, component) pair"))
    p.add_argument("--item", required=True)
    p.add_argument("--backend", choices=["mock", "http"])
    p.add_argument("--temperature", type=float)
    p.add_argument("--splits", help="comma-separated splits (default: all)")
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--allow-partial", action="store_true")
    p.add_argument("--no-raw", action="store_true", help="drop raw chain-of-thought from the draws store")

    p = ws_arg(sub.add_parser("train", help="fit the ordinal scoring model"))
    p.add_argument("--item", required=True)
    p.add_argument("--lambda-grid", help="comma-separated regularization grid")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iter", type=int)

    p = ws_arg(sub.add_parser("evaluate", help="score a split and report agreement"))
    p.add_argument("--item", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--replicates", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)

    p = ws_arg(sub.add_parser("explain", help="render the explanation for one response"))
    p.add_argument("--response", required=True, help="response id")
    p.add_argument("--item", help="item id (otherwise found by scanning corpora)")
    p.add_argument("--override", action="append", default=[], metavar="CID=LABEL",
                   help="what-if single-label edit, e.g. C3=2 (repeatable, not persisted)")
    p.add_argument("--json", action="store_true", help="emit the explanation payload as JSON")

    p = sub.add_parser("agreement", help="inter-rater analysis of a ratings table")
    p.add_argument("ratings", help="wide CSV: unit,<rater>,<rater>,... (blank = missing)")
    p.add_argument("--distance", choices=["nominal", "ordinal", "interval"], default="interval")
    p.add_argument("--model-rater", help="rater column compared against the majority of the others")
    p.add_argument("--min-label", type=int, default=0)
    p.add_argument("--max-label", type=int, default=2)
    p.add_argument("--weights", help="CSV unit,weight for the weighted bootstrap")
    p.add_argument("--replicates", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", dest="json_out", help="write the full report to this path")

    p = ws_arg(sub.add_parser("export-distill", help="export supervised labeling pairs"))
    p.add_argument("-n", type=int, required=True, help="number of (response, component) pairs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--items", help="comma-separated item ids (default: all with draws)")
    p.add_argument("--out", help="output JSONL (default exports/distill.jsonl)")

    p = ws_arg(sub.add_parser("serve", help="run the inspection HTTP service"))
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")

    return parser


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_ingest(args) -> int:
    ws = Workspace(args.workspace)
    config = ws.load_config()
    if args.items:
        for item_id, item in ds.load_item_config(args.items).items():
            config.items[item_id] = item
    if args.ratio is not None:
        config.split_ratio = args.ratio
    if args.seed is not None:
        config.split_seed = args.seed
    if not config.items and not args.json_corpus:
        raise DataFormatError("no item config: pass --items or ingest JSON corpora")

    wanted = set(args.item) if args.item else None
    ingested: list[str] = []

    for path in args.json_corpus:
        corpus = ds.load_corpus(path)
        if wanted and corpus.item.id not in wanted:
            continue
        config.items[corpus.item.id] = corpus.item
        ds.save_corpus(corpus, ws.corpus_path(corpus.item.id))
        ingested.append(corpus.item.id)

    tsv_items = [
        item_id
        for item_id in sorted(config.items)
        if (wanted is None or item_id in wanted) and item_id not in ingested
    ]
    if args.train_tsv or args.test_tsv:
        if not tsv_items:
            raise DataFormatError("TSV given but no matching items in the config")
        for item_id in tsv_items:
            item = config.items[item_id]
            parts: list[ds.Dataset] = []
            if args.train_tsv:
                try:
                    pool = ds.load_asap_tsv(args.train_tsv, item, split="train")
                except EmptyDatasetError:
                    if wanted is not None:
                        raise
                    continue
                train, valid = ds.split_train_valid(pool, config.split_ratio, config.split_seed)
                parts += [train, valid]
            if args.test_tsv:
                try:
                    parts.append(ds.load_asap_tsv(args.test_tsv, item, split="test"))
                except EmptyDatasetError:
                    if not parts:
                        raise
            corpus = ds.merge_datasets(parts)
            ds.save_corpus(corpus, ws.corpus_path(item_id))
            ingested.append(item_id)
            counts = {s: len(corpus.subset(s)) for s in ds.SPLITS if corpus.subset(s)}
            print(f"ingested {item_id}: {len(corpus.responses)} responses {counts}")

    ws.save_config(config)
    if not ingested:
        raise EmptyDatasetError("nothing ingested")
    return 0


def cmd_extract(args) -> int:
    ws = Workspace(args.workspace)
    config = ws.load_config()
    corpus = ws.load_dataset(args.item)
    item = corpus.item
    if args.cap:
        item = ds.Item(
            id=item.id,
            prompt_text=item.prompt_text,
            parts=tuple(ds.PartSpec(p.name, args.cap) for p in item.parts),
            score_min=item.score_min,
            score_max=item.score_max,
        )
    gateway = ws.build_gateway(config.gateway, args.backend)
    texts = [r.text for r in corpus.responses]
    components = extraction.extract_components(
        item,
        texts,
        gateway,
        model_name=config.gateway.extractor_model,
        sample_size=args.sample_size,
        char_budget=args.char_budget,
    )
    extraction.save_component_set(
        components,
        ws.components_path(args.item),
        backend=gateway.backend.name,
        model_name=config.gateway.extractor_model,
    )
    print(f"extracted {len(components)} components for {args.item} "
          f"(backend calls: {gateway.stats.backend_calls}, cache hits: {gateway.stats.cache_hits})")
    for c in components.components:
        print(f"  {c.id} [{c.part}] {c.text}")
    return 0


def cmd_featurize(args) -> int:
    ws = Workspace(args.workspace)
    config = ws.load_config()
    corpus = ws.load_dataset(args.item)
    components = ws.load_components(args.item)
    gateway = ws.build_gateway(config.gateway, args.backend)
    temperature = args.temperature if args.temperature is not None else config.gateway.temperature
    splits = args.splits.split(",") if args.splits else None
    matrix, draws = featurize.featurize_corpus(
        corpus,
        components,
        gateway,
        model_name=config.gateway.featurizer_model,
        temperature=temperature,
        splits=splits,
        workers=args.workers,
        allow_partial=args.allow_partial,
    )
    featurize.save_feature_matrix(matrix, ws.features_path(args.item))
    keep_raw = config.gateway.keep_raw_draws and not args.no_raw
    featurize.save_draws(draws, ws.draws_path(args.item), keep_raw=keep_raw)
    used = [0] * 8
    by_pair: dict[tuple[str, str], int] = {}
    for d in draws:
        by_pair[(d.response_id, d.component_id)] = by_pair.get((d.response_id, d.component_id), 0) + 1
    for count in by_pair.values():
        used[min(count, 7)] += 1
    print(
        f"featurized {len(matrix.rows)} responses x {matrix.k} components for {args.item} "
        f"(backend calls: {gateway.stats.backend_calls}, cache hits: {gateway.stats.cache_hits})"
    )
    print(f"draws-used histogram [3..7]: {used[3:]}")
    return 0


def cmd_train(args) -> int:
    ws = Workspace(args.workspace)
    config = ws.load_config()
    corpus = ws.load_dataset(args.item)
    components = ws.load_components(args.item)
    matrix = ws.load_matrix(args.item, components)
    train_cfg = config.train
    if args.lambda_grid:
        train_cfg.lambda_grid = tuple(float(x) for x in args.lambda_grid.split(","))
    if args.seed is not None:
        train_cfg.seed = args.seed
    if args.max_iter is not None:
        train_cfg.max_iterations = args.max_iter

    def scores(split: str) -> dict[str, int]:
        return {
            r.id: r.gold_score
            for r in corpus.subset(split)
            if r.gold_score is not None and r.id in matrix.rows
        }

    model = ordinal.train(
        matrix,
        scores("train"),
        matrix,
        scores("valid"),
        score_min=corpus.item.score_min,
        score_max=corpus.item.score_max,
        config=train_cfg,
    )
    ordinal.save_model(model, ws.model_path(args.item))
    print(f"trained model for {args.item}: k={model.k}, K={model.num_categories}, "
          f"lambda={model.lam}, converged={model.training_meta.get('converged')}")
    for lam, score in sorted(model.training_meta.get("validation_qwk_by_lambda", {}).items(),
                             key=lambda kv: float(kv[0])):
        print(f"  lambda={lam}: validation QWK {score:.4f}")
    return 0


def cmd_evaluate(args) -> int:
    ws = Workspace(args.workspace)
    corpus = ws.load_dataset(args.item)
    components = ws.load_components(args.item)
    matrix = ws.load_matrix(args.item, components)
    model = ws.load_model(args.item)
    rows = [
        r for r in corpus.subset(args.split) if r.gold_score is not None and r.id in matrix.rows
    ]
    if not rows:
        raise EmptyDatasetError(f"no scored responses in split {args.split!r}")
    ids = [r.id for r in rows]
    gold = np.array([r.gold_score for r in rows])
    preds = ordinal.batch_predict(model, matrix.labels_array(ids))
    lo_s, hi_s = corpus.item.score_min, corpus.item.score_max

    point_qwk = metrics.qwk(preds.tolist(), gold.tolist(), lo_s, hi_s)
    ci = metrics.bootstrap_ci(
        lambda idx: metrics.qwk(preds[idx].tolist(), gold[idx].tolist(), lo_s, hi_s),
        len(rows),
        replicates=args.replicates,
        seed=args.seed,
    )
    per_label_f1 = {
        str(label): metrics.classwise_f1(preds.tolist(), gold.tolist(), label)
        for label in range(lo_s, hi_s + 1)
    }
    report = {
        "item_id": args.item,
        "split": args.split,
        "n_test": len(rows),
        "qwk": point_qwk,
        "qwk_ci": ci.to_dict(),
        "per_label_f1": per_label_f1,
        "alpha": None,
    }
    write_json(ws.report_path(args.item), report)
    print(f"item {args.item} split {args.split}: n={len(rows)}")
    print(f"  QWK {point_qwk:.4f}  (95% CI [{ci.lo:.4f}, {ci.hi:.4f}], {ci.replicates} replicates)")
    for label, f1 in per_label_f1.items():
        print(f"  F1[score={label}] {f1:.4f}")
    return 0


def _find_item_for_response(ws: Workspace, response_id: str) -> str:
    for item_id in ws.item_ids_with_corpus():
        if any(r.id == response_id for r in ws.load_dataset(item_id).responses):
            return item_id
    raise EmptyDatasetError(f"response {response_id!r} not found in any corpus")


def cmd_explain(args) -> int:
    ws = Workspace(args.workspace)
    item_id = args.item or _find_item_for_response(ws, args.response)
    components = ws.load_components(item_id)
    matrix = ws.load_matrix(item_id, components)
    model = ws.load_model(item_id)
    if args.response not in matrix.rows:
        raise EmptyDatasetError(f"response {args.response!r} has no feature row")
    base = matrix.rows[args.response]

    # persisted overrides first, then command-line what-ifs on top
    from .explain import apply_overrides

    effective = apply_overrides(base, ws.override_log(item_id).for_response(args.response))
    whatifs = []
    for spec_str in args.override:
        cid, _, value = spec_str.partition("=")
        if not value or not value.strip().lstrip("-").isdigit():
            raise ValueError(f"--override expects CID=LABEL, got {spec_str!r}")
        new_label = FeatureLabel(int(value))
        current = effective.label_of(cid)
        if int(current) == int(new_label):
            continue
        whatifs.append(
            OverrideRecord(
                response_id=args.response,
                component_id=cid,
                old_label=current,
                new_label=new_label,
                author="cli-whatif",
            )
        )
    result = explain(model, components, apply_overrides(effective, whatifs))
    if args.json:
        import json as _json

        print(_json.dumps(explanation_to_dict(result), indent=2, sort_keys=True))
    else:
        sys.stdout.write(render_text(result))
    return 0


def _read_ratings_csv(path: str) -> tuple[metrics.RatingsTable, list]:
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty ratings file")
        if len(header) < 3:
            raise DataFormatError(f"{path}: need a unit column plus at least two raters")
        raters = [h.strip() for h in header[1:]]
        units: list = []
        values: dict = {}
        for row in reader:
            if not row:
                continue
            unit = row[0].strip()
            units.append(unit)
            for rater, cell in zip(raters, row[1:]):
                cell = cell.strip()
                if cell != "":
                    try:
                        values[(unit, rater)] = int(cell)
                    except ValueError:
                        raise DataFormatError(f"{path}: non-integer rating {cell!r} for unit {unit!r}")
    return metrics.RatingsTable(units=units, raters=raters, values=values), units


def cmd_agreement(args) -> int:
    table, units = _read_ratings_csv(args.ratings)
    weights = None
    if args.weights:
        weight_map = {}
        with open(args.weights, newline="", encoding="utf-8") as f:
            for row in csv.reader(f):
                if len(row) >= 2 and row[0].strip() != "unit":
                    weight_map[row[0].strip()] = float(row[1])
        weights = [weight_map.get(u, 1.0) for u in units]

    def alpha_on(idx) -> float:
        sub = metrics.RatingsTable(
            units=[f"{i}:{units[j]}" for i, j in enumerate(idx)],
            raters=table.raters,
            values={
                (f"{i}:{units[j]}", r): table.values[(units[j], r)]
                for i, j in enumerate(idx)
                for r in table.raters
                if (units[j], r) in table.values
            },
            domain=table.ordered_domain(),
        )
        return metrics.krippendorff_alpha(sub, args.distance)

    report: dict = {
        "n_units": len(units),
        "raters": table.raters,
        "distance": args.distance,
        "alpha": metrics.bootstrap_ci(
            lambda idx: alpha_on(idx), len(units),
            weights=weights, replicates=args.replicates, seed=args.seed,
        ).to_dict(),
    }
    print(f"{len(units)} units, {len(table.raters)} raters, {args.distance} distance")
    a = report["alpha"]
    print(f"  Krippendorff alpha {a['point']:.4f}  (95% CI [{a['lo']:.4f}, {a['hi']:.4f}])")

    if args.model_rater:
        if args.model_rater not in table.raters:
            raise DataFormatError(f"unknown rater {args.model_rater!r}")
        humans = [r for r in table.raters if r != args.model_rater]
        usable = [
            u for u in units
            if (u, args.model_rater) in table.values
            and any((u, h) in table.values for h in humans)
        ]
        human_labels = [[table.values[(u, h)] for h in humans if (u, h) in table.values] for u in usable]
        majority = metrics.majority_vote(human_labels, seed=args.seed)
        model_vec = [table.values[(u, args.model_rater)] for u in usable]
        usable_weights = None
        if weights is not None:
            w_by_unit = dict(zip(units, weights))
            usable_weights = [w_by_unit[u] for u in usable]
        mv = np.array(majority)
        pv = np.array(model_vec)

        qwk_ci = metrics.bootstrap_ci(
            lambda idx: metrics.qwk(pv[idx].tolist(), mv[idx].tolist(), args.min_label, args.max_label),
            len(usable), weights=usable_weights, replicates=args.replicates, seed=args.seed,
        )
        report["model_rater"] = args.model_rater
        report["qwk_vs_majority"] = qwk_ci.to_dict()
        print(f"  {args.model_rater} vs majority({len(humans)} raters), n={len(usable)}:")
        print(f"    QWK {qwk_ci.point:.4f}  (95% CI [{qwk_ci.lo:.4f}, {qwk_ci.hi:.4f}])")
        report["per_label_f1"] = {}
        report["label_distribution"] = {}
        import warnings as _warnings

        for label in range(args.min_label, args.max_label + 1):
            with _warnings.catch_warnings():
                # resamples may lack a label entirely; the degenerate-F1
                # warning is expected there and would fire per replicate
                _warnings.filterwarnings("ignore", message="classwise_f1")
                f1_ci = metrics.bootstrap_ci(
                    lambda idx, lab=label: metrics.classwise_f1(pv[idx].tolist(), mv[idx].tolist(), lab),
                    len(usable), weights=usable_weights, replicates=args.replicates, seed=args.seed,
                )
            dist_ci = metrics.bootstrap_ci(
                lambda idx, lab=label: float(np.mean(mv[idx] == lab)),
                len(usable), weights=usable_weights, replicates=args.replicates, seed=args.seed,
            )
            report["per_label_f1"][str(label)] = f1_ci.to_dict()
            report["label_distribution"][str(label)] = dist_ci.to_dict()
            print(f"    F1[label={label}] {f1_ci.point:.4f} (95% CI [{f1_ci.lo:.4f}, {f1_ci.hi:.4f}]); "
                  f"majority share {dist_ci.point:.3f} (95% CI [{dist_ci.lo:.3f}, {dist_ci.hi:.3f}])")

    if args.json_out:
        write_json(args.json_out, report)
    return 0


def cmd_export_distill(args) -> int:
    ws = Workspace(args.workspace)
    item_ids = args.items.split(",") if args.items else [
        item_id for item_id in ws.item_ids_with_corpus() if ws.draws_path(item_id).exists()
    ]
    if not item_ids:
        raise EmptyDatasetError("no items with persisted draws")
    matrices, draws_by_item = [], {}
    for item_id in item_ids:
        components = ws.load_components(item_id)
        matrices.append(ws.load_matrix(item_id, components))
        draws_by_item[item_id] = featurize.load_draws(ws.draws_path(item_id))
    out = Path(args.out) if args.out else ws.dir("exports") / "distill.jsonl"
    count = featurize.export_distillation_pairs(matrices, draws_by_item, args.n, args.seed, out)
    print(f"exported {count} aligned records for {args.n} pairs to {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.workspace)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "extract": cmd_extract,
    "featurize": cmd_featurize,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "explain": cmd_explain,
    "agreement": cmd_agreement,
    "export-distill": cmd_export_distill,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AnscoreError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
