"""Command-line interface.

Subcommands: parse, train, abduce, generate, cluster, evaluate, sweep.
Results go to stdout or --out; log lines go to stderr. Exit codes: 0 on
success, 1 on usage/config errors, 2 on data errors (unreadable files, parse
failures, unknown sids, ...).

A flat key=value config file can preload any flag (--config FILE); flags
given on the command line override the file.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .abduction import (
    DEFAULT_SID_BASE,
    SeedObservation,
    Strategy,
    abduce_antecedents,
    build_candidate_graph,
    enumerate_rules,
    materialize_snort_rules,
)
from .bayes import SmoothedModel, fit, predict_distribution
from .clustering import DistanceParams, LINKAGES, agglomerate, build_distance_matrix
from .encoding import (
    ExclusionList,
    build_vocabulary,
    encode_corpus,
)
from .errors import RuleforgeError
from .evaluation import SplitSpec, loco_evaluate, threshold_sweep
from .parser import IDENTITY_KEYS, ParsedRule, parse_ruleset, serialize_rule

LOG = logging.getLogger("ruleforge")

SMOOTHING_CHOICES = ("corpus", "conventional")
STRATEGY_CHOICES = ("threshold", "topk", "mle")


class UsageError(Exception):
    """Bad flags or config; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); we reserve 2 for data errors
        raise UsageError(message)


_BOOL_WORDS = {
    "true": True,
    "false": False,
    "yes": True,
    "no": False,
    "on": True,
    "off": False,
    "1": True,
    "0": False,
}

# dest -> coercer for config-file values
_CONFIG_TYPES = {
    "rules": str,
    "model": str,
    "out": str,
    "vocab_out": str,
    "config": str,
    "alpha": float,
    "smoothing": str,
    "skip_unk_evidence": bool,
    "with_prior": bool,
    "exclude": str,
    "keep_constant": bool,
    "seed_sid": int,
    "target": str,
    "strategy": str,
    "topk": int,
    "threshold": float,
    "thresholds": str,
    "limit": int,
    "strict_limit": bool,
    "allow_insertion": bool,
    "sid_base": int,
    "category": str,
    "w1": float,
    "w2": float,
    "linkage": str,
    "cut_count": int,
    "cut_height": float,
    "cluster_train_only": bool,
    "with_clusters": bool,
    "folds": int,
    "train_fraction": float,
    "seed": int,
    "jobs": int,
    "lint": bool,
}


def _coerce_config(key: str, raw: str):
    kind = _CONFIG_TYPES[key]
    if kind is bool:
        word = raw.strip().lower()
        if word not in _BOOL_WORDS:
            raise UsageError(f"config field {key!r}: expected a boolean, got {raw!r}")
        return _BOOL_WORDS[word]
    try:
        return kind(raw.strip())
    except ValueError:
        raise UsageError(
            f"config field {key!r}: expected {kind.__name__}, got {raw!r}"
        ) from None


def load_config(path: str) -> dict:
    """Read a flat key = value config file; '#' starts a comment."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    values: dict = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{line_no}: expected key = value, got {raw!r}")
        key = key.strip().replace("-", "_")
        if key not in _CONFIG_TYPES:
            raise UsageError(f"{path}:{line_no}: unknown config field {key!r}")
        values[key] = _coerce_config(key, value)
    return values


def _extract_config_path(argv: list[str]) -> str | None:
    for i, token in enumerate(argv):
        if token == "--config":
            if i + 1 >= len(argv):
                raise UsageError("--config requires a file path")
            return argv[i + 1]
        if token.startswith("--config="):
            return token.split("=", 1)[1]
    return None


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="flat key=value config file; flags override it")
    sub.add_argument(
        "--seed", type=int, default=0, help="master seed for all randomness (default 0)"
    )
    sub.add_argument(
        "--jobs",
        type=int,
        default=os.cpu_count() or 1,
        help="maximum parallelism; execution is deterministic regardless "
        "(current implementation runs serially)",
    )
    sub.add_argument("--out", help="write results to this file instead of stdout")


def _add_model_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument(
        "--alpha", type=float, default=1.0, help="smoothing constant (default 1.0)"
    )
    sub.add_argument(
        "--smoothing",
        choices=SMOOTHING_CHOICES,
        default="corpus",
        help="denominator mass: 'corpus' uses the training-set size, "
        "'conventional' the target vocabulary size (default corpus)",
    )
    sub.add_argument(
        "--skip-unk-evidence",
        action="store_true",
        help="ignore UNK-valued evidence attributes when scoring",
    )
    sub.add_argument(
        "--with-prior",
        action="store_true",
        help="multiply scores by the smoothed marginal of the target value",
    )


def _add_strategy_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument(
        "--strategy",
        choices=STRATEGY_CHOICES,
        default="threshold",
        help="candidate selection strategy (default threshold)",
    )
    sub.add_argument(
        "--threshold",
        type=float,
        default=0.01,
        help="probability cutoff for the threshold strategy (default 0.01)",
    )
    sub.add_argument(
        "--topk", type=int, default=3, help="k for the topk strategy (default 3)"
    )
    sub.add_argument(
        "--allow-insertion",
        action="store_true",
        help="also offer candidates for attributes the seed does not carry",
    )


def _add_cluster_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument(
        "--w1", type=float, default=1.0, help="weight of the key-set distance (default 1.0)"
    )
    sub.add_argument(
        "--w2",
        type=float,
        default=1.0,
        help="weight of the per-attribute edit distance (default 1.0)",
    )
    sub.add_argument(
        "--linkage", choices=LINKAGES, default="average", help="linkage (default average)"
    )
    sub.add_argument(
        "--cut-count",
        type=int,
        default=None,
        help="cut the dendrogram to this many clusters (default ceil(sqrt(n)))",
    )
    sub.add_argument(
        "--cut-height", type=float, default=None, help="cut the dendrogram at this height"
    )


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(
        prog="ruleforge",
        description="Parse snort rules, learn antecedent correlations, and "
        "synthesize, cluster, and evaluate rules.",
    )
    parser.add_argument("--version", action="version", version=f"ruleforge {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)
    subs: dict[str, argparse.ArgumentParser] = {}

    sub = commands.add_parser("parse", help="parse a rules file and report problems")
    sub.add_argument("--rules", required=True, help="snort rules file")
    sub.add_argument(
        "--lint",
        action="store_true",
        help="report per-line diagnostics and a summary instead of re-serializing",
    )
    _add_common(sub)
    sub.set_defaults(handler=_cmd_parse)
    subs["parse"] = sub

    sub = commands.add_parser("train", help="fit the pairwise-conditional model")
    sub.add_argument("--rules", required=True, help="training rules file")
    sub.add_argument("--out", required=True, help="model file to write")
    sub.add_argument("--vocab-out", help="also dump the vocabulary as JSON")
    sub.add_argument(
        "--exclude",
        default="",
        help="comma-separated attribute keys to exclude from the vocabulary",
    )
    sub.add_argument(
        "--keep-constant",
        action="store_true",
        help="keep attributes whose value is constant across the corpus",
    )
    _add_model_flags(sub)
    sub.add_argument("--config", help="flat key=value config file; flags override it")
    sub.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    sub.add_argument(
        "--jobs",
        type=int,
        default=os.cpu_count() or 1,
        help="maximum parallelism; execution is deterministic regardless",
    )
    sub.set_defaults(handler=_cmd_train)
    subs["train"] = sub

    sub = commands.add_parser("abduce", help="rank candidate values for a seed rule")
    sub.add_argument("--model", required=True, help="model file from train")
    sub.add_argument("--rules", required=True, help="rules file holding the seed")
    sub.add_argument("--seed-sid", type=int, required=True, help="sid of the seed rule")
    sub.add_argument("--target", help="only this attribute (default: all attributes)")
    _add_strategy_flags(sub)
    _add_common(sub)
    sub.set_defaults(handler=_cmd_abduce)
    subs["abduce"] = sub

    sub = commands.add_parser("generate", help="enumerate and emit new rules from a seed")
    sub.add_argument("--model", required=True, help="model file from train")
    sub.add_argument("--rules", required=True, help="rules file holding the seed")
    sub.add_argument("--seed-sid", type=int, required=True, help="sid of the seed rule")
    sub.add_argument(
        "--category", default="GENERATED", help="msg category tag (default GENERATED)"
    )
    sub.add_argument(
        "--sid-base",
        type=int,
        default=DEFAULT_SID_BASE,
        help=f"first sid to allocate (default {DEFAULT_SID_BASE})",
    )
    sub.add_argument(
        "--limit",
        type=int,
        default=10_000,
        help="maximum rules to enumerate (default 10000)",
    )
    sub.add_argument(
        "--strict-limit",
        action="store_true",
        help="fail instead of truncating when the limit is exceeded",
    )
    _add_strategy_flags(sub)
    _add_common(sub)
    sub.set_defaults(handler=_cmd_generate)
    subs["generate"] = sub

    sub = commands.add_parser("cluster", help="cluster rules by weighted distance")
    sub.add_argument("--rules", required=True, help="rules file to cluster")
    _add_cluster_flags(sub)
    _add_common(sub)
    sub.set_defaults(handler=_cmd_cluster)
    subs["cluster"] = sub

    sub = commands.add_parser("evaluate", help="cross-validated per-attribute accuracy")
    sub.add_argument("--rules", required=True, help="rules file to evaluate on")
    sub.add_argument("--folds", type=int, default=10, help="fold count (default 10)")
    sub.add_argument(
        "--train-fraction",
        type=float,
        default=0.9,
        help="training fraction recorded in the split spec (default 0.9)",
    )
    sub.add_argument(
        "--exclude",
        default="",
        help="comma-separated attribute keys to exclude from the vocabulary",
    )
    sub.add_argument(
        "--with-clusters",
        action="store_true",
        help="also score the model with the cluster_id feature attached",
    )
    sub.add_argument(
        "--cluster-train-only",
        action="store_true",
        help="cluster training rules only; place held-out rules by nearest distance",
    )
    _add_model_flags(sub)
    _add_cluster_flags(sub)
    _add_common(sub)
    sub.set_defaults(handler=_cmd_evaluate)
    subs["evaluate"] = sub

    sub = commands.add_parser("sweep", help="generated-rule counts across thresholds")
    sub.add_argument("--model", required=True, help="model file from train")
    sub.add_argument("--rules", required=True, help="rules file holding the seed")
    sub.add_argument("--seed-sid", type=int, required=True, help="sid of the seed rule")
    sub.add_argument(
        "--thresholds",
        default="0.001,0.01,0.05,0.1",
        help="comma-separated ascending thresholds (default 0.001,0.01,0.05,0.1)",
    )
    sub.add_argument(
        "--limit",
        type=int,
        default=10_000,
        help="maximum rules to enumerate per threshold (default 10000)",
    )
    sub.add_argument(
        "--allow-insertion",
        action="store_true",
        help="also offer candidates for attributes the seed does not carry",
    )
    _add_common(sub)
    sub.set_defaults(handler=_cmd_sweep)
    subs["sweep"] = sub

    return parser, subs


def _write_output(args, text: str) -> None:
    out = getattr(args, "out", None)
    if out:
        Path(out).write_text(text, encoding="utf-8")
        LOG.info("command=%s wrote=%s bytes=%d", args.command, out, len(text))
    else:
        sys.stdout.write(text)


def _read_rules(path: str) -> tuple[list[ParsedRule], list]:
    text = Path(path).read_text(encoding="utf-8")
    rules, errors = parse_ruleset(text)
    for err in errors:
        LOG.warning("%s:%d: %s", path, err.line, err.message)
    return rules, errors


def _exclusions(args) -> ExclusionList:
    extra = {
        key.strip().lower()
        for key in getattr(args, "exclude", "").split(",")
        if key.strip()
    }
    return ExclusionList(
        excluded_keys=frozenset(IDENTITY_KEYS | extra),
        drop_constant=not getattr(args, "keep_constant", False),
    )


def _seed_rule(rules: list[ParsedRule], sid: int, path: str) -> ParsedRule:
    for rule in rules:
        if rule.sid == sid:
            return rule
    raise RuleforgeError(f"{path}: no rule with sid {sid}")


def _strategy(args) -> Strategy:
    if args.strategy == "threshold":
        return Strategy.threshold(args.threshold)
    if args.strategy == "topk":
        return Strategy.topk(args.topk)
    return Strategy.mle()


def _cmd_parse(args) -> int:
    rules, errors = _read_rules(args.rules)
    if args.lint:
        lines = [f"{args.rules}:{e.line}: {e.message}" for e in errors]
        lines.append(f"parsed {len(rules)} rules, {len(errors)} errors")
        _write_output(args, "\n".join(lines) + "\n")
        return 0
    for err in errors:
        sys.stderr.write(f"{args.rules}:{err.line}: {err.message}\n")
    body = "".join(serialize_rule(rule) + "\n" for rule in rules)
    _write_output(args, body)
    return 2 if errors else 0


def _cmd_train(args) -> int:
    rules, _ = _read_rules(args.rules)
    vocab = build_vocabulary(rules, _exclusions(args))
    encoded = encode_corpus(rules, vocab)
    model = fit(
        encoded,
        vocab,
        args.alpha,
        smoothing=args.smoothing,
        skip_unk_evidence=args.skip_unk_evidence,
        with_prior=args.with_prior,
    )
    model.save(args.out)
    if args.vocab_out:
        Path(args.vocab_out).write_text(vocab.to_json(), encoding="utf-8")
    LOG.info(
        "command=train rules=%d attributes=%d alpha=%s model=%s",
        len(rules),
        len(vocab.attributes),
        args.alpha,
        args.out,
    )
    return 0


def _cmd_abduce(args) -> int:
    model = SmoothedModel.load(args.model)
    rules, _ = _read_rules(args.rules)
    seed = SeedObservation.from_rule(
        _seed_rule(rules, args.seed_sid, args.rules), model.vocab
    )
    candidates = abduce_antecedents(
        model, seed, _strategy(args), allow_insertion=args.allow_insertion
    )
    targets = [args.target] if args.target else list(model.vocab.attributes)
    lines: list[str] = []
    for attribute in targets:
        distribution = predict_distribution(model, seed.encoded, attribute)
        wanted = set(candidates.get(attribute, ()))
        for value, probability in distribution.ranked():
            if value in wanted:
                lines.append(f"{attribute}\t{value}\t{probability:.6f}")
    _write_output(args, "".join(line + "\n" for line in lines))
    return 0


def _cmd_generate(args) -> int:
    model = SmoothedModel.load(args.model)
    rules, _ = _read_rules(args.rules)
    seed = SeedObservation.from_rule(
        _seed_rule(rules, args.seed_sid, args.rules), model.vocab
    )
    candidates = abduce_antecedents(
        model, seed, _strategy(args), allow_insertion=args.allow_insertion
    )
    graph = build_candidate_graph(seed, candidates, model.vocab)
    result = enumerate_rules(graph, seed, limit=args.limit, strict=args.strict_limit)
    text = materialize_snort_rules(result.rules, args.category, sid_base=args.sid_base)
    _write_output(args, text)
    LOG.info(
        "command=generate seed_sid=%d combinations=%d generated=%d truncated=%s",
        args.seed_sid,
        graph.total_combinations(),
        len(result),
        result.truncated,
    )
    return 0


def _cmd_cluster(args) -> int:
    rules, _ = _read_rules(args.rules)
    params = DistanceParams(w1=args.w1, w2=args.w2)
    matrix = build_distance_matrix(rules, params)
    assignment = agglomerate(
        matrix, args.linkage, cut_height=args.cut_height, cut_count=args.cut_count
    )
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["sid", "cluster_id"])
    for index, rule in enumerate(rules):
        writer.writerow([rule.sid if rule.sid is not None else index, assignment.labels[index]])
    _write_output(args, buffer.getvalue())
    LOG.info(
        "command=cluster rules=%d clusters=%d linkage=%s",
        len(rules),
        len(set(assignment.labels.values())),
        args.linkage,
    )
    return 0


def _cmd_evaluate(args) -> int:
    rules, _ = _read_rules(args.rules)
    spec = SplitSpec(
        train_fraction=args.train_fraction, folds=args.folds, rng_seed=args.seed
    )
    extra = {key.strip().lower() for key in args.exclude.split(",") if key.strip()}
    report = loco_evaluate(
        rules,
        spec,
        alpha=args.alpha,
        exclude=ExclusionList(
            excluded_keys=frozenset(IDENTITY_KEYS | extra), drop_constant=False
        ),
        smoothing=args.smoothing,
        skip_unk_evidence=args.skip_unk_evidence,
        with_prior=args.with_prior,
        with_clusters=args.with_clusters,
        cluster_train_only=args.cluster_train_only,
        distance_params=DistanceParams(w1=args.w1, w2=args.w2),
        linkage=args.linkage,
        cut_count=args.cut_count,
        cut_height=args.cut_height,
    )
    _write_output(args, report.to_csv())
    LOG.info(
        "command=evaluate rules=%d folds=%d attributes=%d",
        len(rules),
        spec.folds,
        len(report.attributes),
    )
    return 0


def _cmd_sweep(args) -> int:
    model = SmoothedModel.load(args.model)
    rules, _ = _read_rules(args.rules)
    seed = SeedObservation.from_rule(
        _seed_rule(rules, args.seed_sid, args.rules), model.vocab
    )
    try:
        thresholds = [float(part) for part in args.thresholds.split(",") if part.strip()]
    except ValueError:
        raise UsageError(f"--thresholds must be comma-separated floats, got {args.thresholds!r}")
    try:
        result = threshold_sweep(
            model, seed, thresholds, limit=args.limit, allow_insertion=args.allow_insertion
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _write_output(args, result.to_csv())
    return 0


def run(argv=None) -> int:
    """Entry point; returns the process exit code instead of raising."""
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    if not logging.getLogger().handlers:
        logging.basicConfig(
            stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s %(message)s"
        )
    try:
        config_path = _extract_config_path(argv)
        config = load_config(config_path) if config_path else {}
        parser, subs = build_parser()
        for sub in subs.values():
            dests = {action.dest for action in sub._actions}
            sub.set_defaults(**{k: v for k, v in config.items() if k in dests})
        args = parser.parse_args(argv)
        return args.handler(args)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return 1
    except SystemExit as exc:  # --help / --version
        return 0 if exc.code in (0, None) else int(exc.code)
    except RuleforgeError as exc:
        LOG.error("%s", exc)
        return 2
    except OSError as exc:
        LOG.error("%s", exc)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
