"""Command-line frontend wiring the pipeline stages together.

Subcommands: stats, balance, train, augment, evaluate, sweep. Flags override
values from an optional flat `key = value` config file, which override built-in
defaults; every run echoes the fully resolved configuration (parseable back in
the same format). Exit codes: 0 success, 2 unreadable/invalid input files,
3 component failure, 64 usage errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass

from . import balance, evaluate, graph, sgnn
from .augment import EPRConfig
from .augment import augment as run_augment

EXIT_OK = 0
EXIT_IO = 2
EXIT_COMPONENT = 3
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _ratio(text: str) -> float:
    """Float flag that also accepts a/b fractions (e.g. 1/9)."""
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def _float_list(text: str) -> tuple:
    return tuple(_ratio(f) for f in text.split(",") if f.strip())


# key -> (type, default) per subcommand; this is the whole resolvable surface
_COMMON = {
    "seed": (int, 0),
    "output": (str, ""),
    "quiet": (bool, False),
}

_KEYS = {
    "stats": {
        "dataset": (str, ""),
        "format": (str, "signed"),
        **_COMMON,
    },
    "balance": {
        "dataset": (str, ""),
        "format": (str, "signed"),
        "eta": (int, 4),
        "mu": (_ratio, 0.7),
        **_COMMON,
    },
    "train": {
        "dataset": (str, ""),
        "format": (str, "signed"),
        "epochs": (int, 100),
        "learning_rate": (_ratio, 0.01),
        "lambda": (_ratio, 5.0),
        "weight_decay": (_ratio, 1e-4),
        "dim": (int, 64),
        "feature_dim": (int, 64),
        "layers": (int, 2),
        **_COMMON,
    },
    "augment": {
        "dataset": (str, ""),
        "format": (str, "signed"),
        "embeddings": (str, ""),
        "mu": (_ratio, 0.7),
        "theta": (_ratio, 1.0 / 9.0),
        "delta": (_ratio, 0.6),
        "eta": (int, 4),
        "log": (str, ""),
        **_COMMON,
    },
    "evaluate": {
        "dataset": (str, ""),
        "format": (str, "signed"),
        "augmentation": (str, "none"),
        "runs": (int, 5),
        "mu": (_ratio, 0.7),
        "theta": (_ratio, 1.0 / 9.0),
        "delta": (_ratio, 0.6),
        "eta": (int, 4),
        "test_fraction": (_ratio, 0.2),
        "epochs": (int, 100),
        "learning_rate": (_ratio, 0.01),
        "lambda": (_ratio, 5.0),
        "weight_decay": (_ratio, 1e-4),
        "dim": (int, 64),
        "feature_dim": (int, 64),
        "layers": (int, 2),
        **_COMMON,
    },
    "sweep": {
        "dataset": (str, ""),
        "format": (str, "signed"),
        "augmentation": (str, "sigaug"),
        "runs": (int, 5),
        "mu_grid": (_float_list, (0.7,)),
        "theta_grid": (_float_list, (1.0 / 9.0,)),
        "delta_grid": (_float_list, (0.6,)),
        "max_cells": (int, 200),
        "eta": (int, 4),
        "test_fraction": (_ratio, 0.2),
        "epochs": (int, 100),
        "learning_rate": (_ratio, 0.01),
        "lambda": (_ratio, 5.0),
        "weight_decay": (_ratio, 1e-4),
        "dim": (int, 64),
        "feature_dim": (int, 64),
        "layers": (int, 2),
        **_COMMON,
    },
}


@dataclass(frozen=True)
class CliConfig:
    """One subcommand invocation, fully resolved."""

    subcommand: str
    values: tuple  # sorted (key, value) pairs

    def get(self, key):
        return dict(self.values)[key]


def _coerce(subcommand: str, key: str, raw):
    typ, _default = _KEYS[subcommand][key]
    if typ is bool:
        if isinstance(raw, bool):
            return raw
        return str(raw).strip().lower() in ("1", "true", "yes", "on")
    if isinstance(raw, str):
        return typ(raw)
    if typ is _float_list and not isinstance(raw, tuple):
        return tuple(raw)
    return raw


def parse_config_text(text: str, subcommand: str) -> dict:
    """Parse flat `key = value` lines, coercing by the subcommand's key table."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected `key = value`, got {line!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in _KEYS[subcommand]:
            raise ValueError(f"config line {lineno}: unknown key {key!r} for {subcommand}")
        values[key] = _coerce(subcommand, key, val.strip())
    return values


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(repr(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_config(cfg: CliConfig) -> str:
    return "\n".join(f"{k} = {_format_value(v)}" for k, v in cfg.values)


def resolve_config(subcommand: str, file_values: dict, flag_values: dict) -> CliConfig:
    """defaults < config file < explicit flags."""
    resolved = {k: d for k, (_t, d) in _KEYS[subcommand].items()}
    resolved.update(file_values)
    resolved.update({k: v for k, v in flag_values.items() if v is not None})
    return CliConfig(subcommand=subcommand, values=tuple(sorted(resolved.items())))


def _add_flags(sub, subcommand):
    for key, (typ, _default) in _KEYS[subcommand].items():
        flag = "--" + key.replace("_", "-")
        if typ is bool:
            sub.add_argument(flag, dest=key, action="store_const", const=True, default=None)
        else:
            sub.add_argument(flag, dest=key, type=typ if typ is not str else str, default=None)
    sub.add_argument("--config", dest="config", type=str, default=None)


def build_parser() -> _Parser:
    parser = _Parser(prog="sigaug", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="subcommand", required=True)
    for name in _KEYS:
        _add_flags(subs.add_parser(name, prog=f"sigaug {name}"), name)
    return parser


def _emit(text: str, output: str):
    if output:
        with open(output, "w") as fh:
            fh.write(text)
            if not text.endswith("\n"):
                fh.write("\n")
    else:
        print(text)


def _load_graph(cfg: CliConfig):
    path = cfg.get("dataset")
    if not path:
        raise FileNotFoundError("no --dataset given")
    with open(path, "rb") as fh:
        records = graph.load_edge_list(fh, cfg.get("format"))
    return records, graph.build_graph(records)


def _stats_lines(prefix: str, stats: dict) -> list:
    return [f"{prefix}{k}={stats[k]!r}" if isinstance(stats[k], float) else f"{prefix}{k}={stats[k]}"
            for k in ("n", "pos_edges", "neg_edges", "neg_ratio")]


def cmd_stats(cfg: CliConfig) -> int:
    records, g = _load_graph(cfg)
    lines = _stats_lines("", graph.record_stats(records))
    lines += _stats_lines("built_", graph.graph_stats(g))
    _emit("\n".join(lines), cfg.get("output"))
    return EXIT_OK


def cmd_balance(cfg: CliConfig) -> int:
    _records, g = _load_graph(cfg)
    scores = balance.compute_utilities(g, eta=cfg.get("eta"), mu=cfg.get("mu"))
    lines = []
    for (u, v), util in sorted(scores.scores.items()):
        util_text = "undef" if util is None else repr(util)
        lines.append(f"{u} {v} {g.sign(u, v)} {util_text}")
    lines.append(f"mu={cfg.get('mu')!r}")
    lines.append(f"eta={cfg.get('eta')}")
    lines.append(f"kept={scores.kept}")
    lines.append(f"discarded={scores.discarded}")
    lines.append(f"undefined={scores.undefined}")
    _emit("\n".join(lines), cfg.get("output"))
    return EXIT_OK


def _train_config(cfg: CliConfig) -> sgnn.TrainConfig:
    return sgnn.TrainConfig(
        epochs=cfg.get("epochs"),
        learning_rate=cfg.get("learning_rate"),
        lam=cfg.get("lambda"),
        weight_decay=cfg.get("weight_decay"),
        seed=cfg.get("seed"),
        embed_dim=cfg.get("dim"),
        feature_dim=cfg.get("feature_dim"),
        layers=cfg.get("layers"),
    )


def cmd_train(cfg: CliConfig) -> int:
    _records, g = _load_graph(cfg)
    result = sgnn.train(g, _train_config(cfg))
    output = cfg.get("output") or "model"
    sgnn.save_embeddings(result.embeddings, output + ".emb")
    sgnn.save_params(result.params, output + ".params")
    if not cfg.get("quiet"):
        print(f"final_loss={result.loss_trace[-1]!r}", file=sys.stderr)
        print(f"wrote {output}.emb and {output}.params", file=sys.stderr)
    return EXIT_OK


def cmd_augment(cfg: CliConfig) -> int:
    _records, g = _load_graph(cfg)
    emb_path = cfg.get("embeddings")
    if not emb_path:
        raise FileNotFoundError("no --embeddings given")
    pair = sgnn.load_embeddings(emb_path)
    epr = EPRConfig(theta_target=cfg.get("theta"), delta_target=cfg.get("delta"),
                    mu=cfg.get("mu"), eta=cfg.get("eta"))
    result = run_augment(g, pair, epr)
    edge_lines = [f"{u} {v} {s}" for u, v, s in result.graph.edges()]
    _emit("\n".join(edge_lines), cfg.get("output"))
    log_path = cfg.get("log") or ((cfg.get("output") or "augment") + ".log")
    with open(log_path, "w") as fh:
        fh.write("\n".join(result.log.to_lines()) + "\n")
    if not cfg.get("quiet"):
        print(f"thresholds_unmet={result.thresholds_unmet}", file=sys.stderr)
        print(f"perturbations={result.log.total_kept} log={log_path}", file=sys.stderr)
    return EXIT_OK


def _experiment_config(cfg: CliConfig) -> evaluate.ExperimentConfig:
    values = dict(cfg.values)
    return evaluate.ExperimentConfig(
        dataset=cfg.get("dataset"),
        input_format=cfg.get("format"),
        augmentation=cfg.get("augmentation"),
        mu=values.get("mu", 0.7),
        theta=values.get("theta", 1.0 / 9.0),
        delta=values.get("delta", 0.6),
        eta=cfg.get("eta"),
        runs=cfg.get("runs"),
        base_seed=cfg.get("seed"),
        test_fraction=cfg.get("test_fraction"),
        train=_train_config(cfg),
    )


def cmd_evaluate(cfg: CliConfig) -> int:
    report = evaluate.run_experiment(_experiment_config(cfg))
    _emit("\n".join(report.to_machine_lines()), cfg.get("output"))
    if not cfg.get("quiet"):
        print(report.to_table(), file=sys.stderr)
    return EXIT_OK


def cmd_sweep(cfg: CliConfig) -> int:
    exp = _experiment_config(cfg)
    grid = {"mu": list(cfg.get("mu_grid")), "theta": list(cfg.get("theta_grid")),
            "delta": list(cfg.get("delta_grid"))}
    rows = evaluate.sweep(exp, grid, max_cells=cfg.get("max_cells"))
    lines = ["mu,theta,delta,mean_auc,std"]
    lines += [f"{mu!r},{th!r},{de!r},{mean!r},{std!r}" for mu, th, de, mean, std in rows]
    _emit("\n".join(lines), cfg.get("output"))
    return EXIT_OK


_DISPATCH = {
    "stats": cmd_stats,
    "balance": cmd_balance,
    "train": cmd_train,
    "augment": cmd_augment,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    sub = args.subcommand
    file_values = {}
    if args.config:
        try:
            with open(args.config) as fh:
                file_values = parse_config_text(fh.read(), sub)
        except (OSError, ValueError) as exc:
            print(f"sigaug: config error: {exc}", file=sys.stderr)
            return EXIT_IO
    flag_values = {k: getattr(args, k) for k in _KEYS[sub]}
    cfg = resolve_config(sub, file_values, flag_values)
    if not cfg.get("quiet"):
        print(f"# sigaug {sub} resolved configuration", file=sys.stderr)
        print(format_config(cfg), file=sys.stderr)
    try:
        return _DISPATCH[sub](cfg)
    except (FileNotFoundError, IsADirectoryError, PermissionError, graph.ParseError) as exc:
        print(f"sigaug: input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:
        print(f"sigaug: {sub} failed: {exc}", file=sys.stderr)
        return EXIT_COMPONENT


if __name__ == "__main__":
    sys.exit(main())
