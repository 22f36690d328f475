"""Command-line interface.

Subcommands cover the whole workflow: validate a dataset, inspect the
intermediate artifacts (field corpus, co-authorship graph), run a method
over the gold pairs, sweep thresholds and windows, score decision files,
generate synthetic datasets, and build comparison reports.

Exit codes: 0 success, 1 usage error, 2 data error, 3 endpoint error.
Option precedence is flags over config file over built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import bibcoupling as bc
from . import evaluation as ev
from . import labelspread as ls
from . import llmjudge as lj
from . import orchestrator as orch
from . import synthkit as sk
from .ingest import IntegrityError, SchemaError, load_dataset, load_profiles
from .taxonomy import Granularity, InvalidRFCode, load_taxonomy, parse_rf

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_ENDPOINT = 3

TOKEN_ENV_VAR = "AUTHORLINK_API_TOKEN"

DEFAULTS = {
    "threshold": 0.15,
    "window": "2016:2023",
    "alpha": 0.2,
    "granularity": "sa",
    "sample_size": 10,
    "metadata_mode": lj.MetadataMode.KEYWORDS_TITLES,
    "jobs": 1,
    "max_retries": 3,
}

_GRANULARITY = {"sa": Granularity.SA, "rfg": Granularity.RFG,
                "rf": Granularity.RF, "ad": Granularity.AD}


class UsageError(Exception):
    """Bad flags or flag combinations; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    """Argparse that reports usage problems via UsageError instead of exiting."""

    def error(self, message):
        raise UsageError(message)


def _dataset_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--registry", required=True, help="registry CSV path")
    parser.add_argument("--profiles", required=True, help="author profiles JSONL path")
    parser.add_argument("--seeds", required=True, help="seed alignments CSV path")
    parser.add_argument("--gold", required=True, help="labeled candidate pairs CSV path")
    parser.add_argument("--gold-map", default=None,
                        help="column renames for the gold CSV, e.g. record_id=ID,auid=AUID")


def _parse_gold_map(spec: str | None) -> dict[str, str] | None:
    if not spec:
        return None
    mapping = {}
    for item in spec.split(","):
        if "=" not in item:
            raise UsageError(f"bad --gold-map entry {item!r}, expected canonical=actual")
        canonical, actual = item.split("=", 1)
        mapping[canonical.strip()] = actual.strip()
    return mapping


def _load(args) -> "Dataset":
    return load_dataset(args.registry, args.profiles, args.seeds, args.gold,
                        gold_column_map=_parse_gold_map(args.gold_map))


def _merge_config(args: argparse.Namespace, keys: tuple[str, ...]) -> None:
    """Fill unset flags from --config JSON, then from DEFAULTS."""
    config = {}
    config_path = getattr(args, "config", None)
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            config = json.load(fh)
        if not isinstance(config, dict):
            raise UsageError(f"config file {config_path} must hold a JSON object")
        unknown = set(config) - set(keys)
        if unknown:
            raise UsageError(f"config file has unknown keys: {sorted(unknown)}")
    for key in keys:
        if getattr(args, key, None) is None:
            if key in config:
                setattr(args, key, config[key])
            elif key in DEFAULTS:
                setattr(args, key, DEFAULTS[key])


def _prompt_config(args, include_bc: bool = False, include_ls: bool = False) -> lj.PromptConfig:
    mode = args.metadata_mode
    if mode not in lj.MetadataMode.ALL:
        raise UsageError(f"unknown metadata mode {mode!r}")
    return lj.PromptConfig(metadata_mode=mode,
                           sample_size=None if int(args.sample_size) <= 0 else int(args.sample_size),
                           rng_seed=int(getattr(args, "prompt_seed", 0) or 0),
                           include_bc=include_bc, include_ls=include_ls)


def _client(args, dataset) -> lj.ChatClient:
    if getattr(args, "mock", None):
        return lj.MockClient.from_fixture(args.mock)
    if getattr(args, "mock_from_gold", False):
        return lj.MockClient.from_gold(dataset.gold)
    if getattr(args, "endpoint", None):
        return lj.HttpChatClient(lj.EndpointConfig(
            base_url=args.endpoint, model_name=args.model or "default",
            api_token=os.environ.get(TOKEN_ENV_VAR),
            max_concurrent=max(1, int(args.jobs))))
    raise UsageError("this method needs --mock FIXTURE, --mock-from-gold, or --endpoint URL")


def _method_config(args) -> orch.MethodConfig:
    window = bc.TimeWindow.parse(str(args.window))
    threshold = float(args.threshold)
    name = args.method
    if name == "bc":
        return orch.BcOnly(threshold=threshold, window=window)
    if name == "ls":
        params = ls.SpreadParams(alpha=float(args.alpha))
        return orch.LsOnly(granularity=_GRANULARITY[args.granularity], params=params)
    if name == "llm":
        return orch.LlmOnly(prompt=_prompt_config(args))
    if name == "llm_enriched":
        return orch.LlmEnriched(
            prompt=_prompt_config(args, include_bc=not args.no_bc_hint,
                                  include_ls=args.ls_hint),
            window=window)
    if name == "lead":
        return orch.Lead(threshold=threshold, window=window,
                         prompt=_prompt_config(args, include_bc=not args.no_bc_hint,
                                               include_ls=not args.no_ls_hint))
    raise UsageError(f"unknown method {name!r}")


def cmd_validate(args) -> int:
    dataset = _load(args)
    n_pubs = sum(len(p.publications) for p in dataset.profiles.values())
    print(f"records: {len(dataset.records)}")
    print(f"profiles: {len(dataset.profiles)} ({n_pubs} publications)")
    print(f"seeds: {len(dataset.seeds)}")
    print(f"gold pairs: {len(dataset.gold)} "
          f"({sum(1 for p in dataset.gold if p.gold)} positive)")
    print("ok")
    return EXIT_OK


def cmd_corpus(args) -> int:
    _merge_config(args, ("window",))
    dataset = _load(args)
    rf = parse_rf(args.rf)
    window = bc.TimeWindow.parse(str(args.window))
    seed_auids = [s.auid for s in dataset.seeds if s.rf == rf]
    profiles = [dataset.profiles[a] for a in dict.fromkeys(seed_auids)]
    corpus = bc.fetch_or_build_corpus(profiles, rf, window, cache_dir=args.cache_dir,
                                      exclude_auid=args.exclude)
    print(f"field: {rf}")
    print(f"window: {window}")
    print(f"seed authors: {corpus.n_seed_authors}")
    print(f"papers: {corpus.n_papers}")
    print(f"distinct references: {len(corpus.references)}")
    if corpus.is_empty:
        print("warning: corpus is empty")
    if args.out:
        bc.save_corpus(corpus, args.out)
        print(f"saved: {args.out}")
    return EXIT_OK


def cmd_graph(args) -> int:
    profiles = load_profiles(args.profiles)
    graph = ls.build_graph(profiles, binary=args.binary)
    n_edges = graph.W.nnz // 2
    print(f"nodes: {graph.n_nodes}")
    print(f"edges: {n_edges}")
    if args.out:
        ls.write_edge_list(graph, args.out)
        print(f"saved: {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    _merge_config(args, ("threshold", "window", "alpha", "granularity",
                         "sample_size", "metadata_mode", "jobs", "max_retries",
                         "endpoint", "model", "mock", "cache_dir"))
    dataset = _load(args)
    config = _method_config(args)
    client = None
    if args.method in ("llm", "llm_enriched", "lead"):
        client = _client(args, dataset)
    result = orch.run(dataset, config, client=client, jobs=int(args.jobs),
                      cache_dir=args.cache_dir, max_retries=int(args.max_retries))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    orch.write_decisions(result, out / "decisions.jsonl")
    manifest = orch.build_manifest(
        config, result,
        endpoint=args.endpoint or ("mock" if (args.mock or args.mock_from_gold) else "none"),
        mock_fixture=args.mock,
        dataset_paths={"registry": str(args.registry), "profiles": str(args.profiles),
                       "seeds": str(args.seeds), "gold": str(args.gold)},
        jobs=int(args.jobs))
    orch.write_manifest(manifest, out / "manifest.json")
    print(f"decisions: {out / 'decisions.jsonl'} ({len(result.decisions)} rows)")
    print(f"manifest: {out / 'manifest.json'}")
    print(f"llm calls: {result.llm_calls}")
    print(f"elapsed: {result.elapsed_seconds:.3f}s")
    return EXIT_OK


def cmd_sweep(args) -> int:
    _merge_config(args, ("jobs", "max_retries", "mock", "cache_dir"))
    dataset = _load(args)
    thresholds = [float(t) for t in str(args.thresholds).split(",") if t]
    windows = [bc.TimeWindow.parse(w) for w in str(args.windows).split(",") if w]
    if not thresholds or not windows:
        raise UsageError("--thresholds and --windows must be non-empty")
    client = None
    if args.method == "lead":
        client = _client(args, dataset)
    cells = []
    for window in windows:
        for threshold in thresholds:
            if args.method == "bc":
                config: orch.MethodConfig = orch.BcOnly(threshold=threshold, window=window)
            else:
                config = orch.Lead(threshold=threshold, window=window)
            result = orch.run(dataset, config, client=client, jobs=int(args.jobs),
                              cache_dir=args.cache_dir, max_retries=int(args.max_retries))
            report = ev.metrics(ev.confusion(result.decisions, dataset.gold))
            cells.append(ev.SweepCell(threshold=threshold, window=window, report=report))
    text = ev.format_sweep(cells)
    print(text, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        ev.write_text(text, out / "sweep.txt")
        ev.write_text(ev.sweep_csv(cells), out / "sweep.csv")
        print(f"saved: {out / 'sweep.txt'}, {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .ingest import load_gold
    gold = load_gold(args.gold, column_map=_parse_gold_map(args.gold_map))
    decisions = ev.read_decisions(args.decisions)
    matrix = ev.confusion(decisions, gold)
    report = ev.metrics(matrix)
    elapsed = None
    manifest_path = Path(args.decisions).parent / "manifest.json"
    if manifest_path.exists():
        with open(manifest_path, encoding="utf-8") as fh:
            elapsed = json.load(fh).get("elapsed_seconds")
    rows = [ev.MethodRow(args.name, report, elapsed)]
    text = ev.format_table(rows)
    print(text, end="")
    print(f"matrix: tp={matrix.tp} fp={matrix.fp} fn={matrix.fn} tn={matrix.tn} "
          f"abstain={matrix.abstain_count}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        ev.write_text(text, out / "metrics.txt")
        ev.write_text(ev.table_csv(rows), out / "metrics.csv")
        print(f"saved: {out / 'metrics.txt'}, {out / 'metrics.csv'}")
    return EXIT_OK


def cmd_synth(args) -> int:
    params = sk.SynthParams(
        rng_seed=int(args.seed), n_fields=int(args.fields),
        seeds_per_field=int(args.seeds_per_field),
        candidates_per_field=int(args.candidates_per_field),
        homonym_rate=float(args.homonym_rate),
        papers_per_author=int(args.papers_per_author),
        refs_per_paper=int(args.refs_per_paper),
        field_pool_size=int(args.pool_size),
        cross_field_ref_noise=float(args.noise),
        coauthor_degree=int(args.coauthor_degree))
    manifest = sk.generate(params, args.out)
    print(f"wrote {manifest['n_registry']} registry rows, {manifest['n_profiles']} profiles, "
          f"{manifest['n_seeds']} seeds, {manifest['n_gold']} gold pairs "
          f"({manifest['n_homonym']} homonyms) to {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    from .ingest import load_gold
    gold = load_gold(args.gold, column_map=_parse_gold_map(args.gold_map))
    rows = []
    for item in args.runs:
        if "=" not in item:
            raise UsageError(f"bad --runs entry {item!r}, expected name=decisions.jsonl")
        name, path = item.split("=", 1)
        decisions = ev.read_decisions(path)
        report = ev.metrics(ev.confusion(decisions, gold))
        elapsed = None
        manifest_path = Path(path).parent / "manifest.json"
        if manifest_path.exists():
            with open(manifest_path, encoding="utf-8") as fh:
                elapsed = json.load(fh).get("elapsed_seconds")
        rows.append(ev.MethodRow(name, report, elapsed))
    text = ev.format_table(rows)
    print(text, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        ev.write_text(text, out / "comparison.txt")
        ev.write_text(ev.table_csv(rows), out / "comparison.csv")
        print(f"saved: {out / 'comparison.txt'}, {out / 'comparison.csv'}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="authorlink",
                     description="Link university registry records to bibliographic author profiles.")
    parser.add_argument("--verbose", action="store_true", help="log at debug level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="load and cross-check a dataset")
    _dataset_flags(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("corpus", help="build the reference corpus for one field")
    _dataset_flags(p)
    p.add_argument("--rf", required=True, help="field code, e.g. 09/E3")
    p.add_argument("--window", default=None, help="publication window, e.g. 2016:2023")
    p.add_argument("--exclude", default=None, help="auid to leave out of the seed set")
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--out", default=None, help="file to save the corpus to")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("graph", help="build the co-authorship graph")
    p.add_argument("--profiles", required=True)
    p.add_argument("--binary", action="store_true", help="unit edge weights")
    p.add_argument("--out", default=None, help="edge list file to write")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("run", help="judge the gold pairs with one method")
    _dataset_flags(p)
    p.add_argument("--method", required=True,
                   choices=["bc", "ls", "llm", "llm_enriched", "lead"])
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threshold", default=None, type=float)
    p.add_argument("--window", default=None)
    p.add_argument("--alpha", default=None, type=float)
    p.add_argument("--granularity", default=None, choices=sorted(_GRANULARITY))
    p.add_argument("--sample-size", dest="sample_size", default=None, type=int,
                   help="papers per prompt; 0 or negative means all")
    p.add_argument("--metadata-mode", dest="metadata_mode", default=None,
                   choices=list(lj.MetadataMode.ALL))
    p.add_argument("--no-bc-hint", action="store_true",
                   help="leave the citation-overlap sentence out of enriched prompts")
    p.add_argument("--no-ls-hint", action="store_true",
                   help="leave the co-authorship classification out of escalation prompts")
    p.add_argument("--ls-hint", action="store_true",
                   help="add the co-authorship classification to enriched prompts")
    p.add_argument("--endpoint", default=None, help="chat completion endpoint URL")
    p.add_argument("--model", default=None, help="model name for the endpoint")
    p.add_argument("--mock", default=None, help="JSONL fixture of canned responses")
    p.add_argument("--mock-from-gold", action="store_true",
                   help="answer model calls from the gold labels (testing only)")
    p.add_argument("--jobs", default=None, type=int)
    p.add_argument("--max-retries", dest="max_retries", default=None, type=int)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--config", default=None, help="JSON file of defaults for these flags")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="score a threshold/window grid")
    _dataset_flags(p)
    p.add_argument("--method", default="bc", choices=["bc", "lead"])
    p.add_argument("--thresholds", required=True, help="comma-separated, e.g. 0.10,0.15")
    p.add_argument("--windows", required=True, help="comma-separated, e.g. 2016:2023,2020:2023")
    p.add_argument("--mock", default=None)
    p.add_argument("--mock-from-gold", action="store_true")
    p.add_argument("--endpoint", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--jobs", default=None, type=int)
    p.add_argument("--max-retries", dest="max_retries", default=None, type=int)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval", help="score a decisions file against gold labels")
    p.add_argument("--decisions", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--gold-map", default=None)
    p.add_argument("--name", default="run", help="method name shown in the table")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", default=0, type=int)
    p.add_argument("--fields", default=4, type=int)
    p.add_argument("--seeds-per-field", dest="seeds_per_field", default=3, type=int)
    p.add_argument("--candidates-per-field", dest="candidates_per_field", default=6, type=int)
    p.add_argument("--homonym-rate", dest="homonym_rate", default=0.3, type=float)
    p.add_argument("--papers-per-author", dest="papers_per_author", default=5, type=int)
    p.add_argument("--refs-per-paper", dest="refs_per_paper", default=12, type=int)
    p.add_argument("--pool-size", dest="pool_size", default=400, type=int)
    p.add_argument("--noise", default=0.0, type=float)
    p.add_argument("--coauthor-degree", dest="coauthor_degree", default=2, type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="compare several decision files in one table")
    p.add_argument("--runs", required=True, nargs="+",
                   help="name=decisions.jsonl entries")
    p.add_argument("--gold", required=True)
    p.add_argument("--gold-map", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except lj.EndpointError as exc:
        print(f"endpoint error: {exc}", file=sys.stderr)
        return EXIT_ENDPOINT
    except FileNotFoundError as exc:
        print(f"data error: file not found: {exc.filename or exc}", file=sys.stderr)
        return EXIT_DATA
    except (SchemaError, IntegrityError, ev.EvalError, sk.ParamError, InvalidRFCode,
            orch.PrerequisiteError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
