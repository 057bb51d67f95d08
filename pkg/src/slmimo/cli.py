"""Command-line front end.

One JSON config drives every subcommand; command-line flags override the
corresponding config fields.  All artifacts land inside --out and carry a
comment header with the tool version, config hash, seed, and runtime.

Exit codes: 0 success, 2 bad config, 3 numerical failure, 4 budget exceeded.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__, awep, eigenstats, matrices, sim, structure
from .design import (DesignBudgetError, DesignConditionError,
                     baseline_codebooks, build_base, design_codebooks)
from .detectors import DetectionCapError
from .eigenstats import CancellationError, ExpansionSizeError
from .structure import DifferenceSetTooLargeError, InvalidLayeringError

EXIT_BAD_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_BUDGET = 4

_BUDGET_ERRORS = (DifferenceSetTooLargeError, DesignBudgetError,
                  DetectionCapError, ExpansionSizeError)
_NUMERICAL_ERRORS = (CancellationError, FloatingPointError)


class ConfigError(ValueError):
    pass


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc


def _config_hash(cfg: dict) -> str:
    # threads never changes results, so it never changes the hash either
    cfg = {k: v for k, v in cfg.items() if k != "threads"}
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"missing config field: {key}")
    return cfg[key]


def _out_path(args, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _header(cfg: dict, t0: float) -> dict:
    # Runtime is reported on stderr, never inside artifacts: repeated runs
    # with the same config and seed must produce bitwise-identical files.
    print(f"runtime_s: {time.time() - t0:.3f}", file=sys.stderr)
    return {"config_hash": _config_hash(cfg), "seed": cfg.get("seed", 0)}


def _load_matrix(spec) -> structure.SLMatrix:
    """``spec`` is either a built-in matrix name or a file path."""
    if spec is None:
        raise ConfigError("missing config field: matrix")
    if isinstance(spec, str) and spec.lower() in matrices.BY_NAME:
        return structure.analyze_matrix(matrices.get(spec))
    if isinstance(spec, str) and os.path.exists(spec):
        return structure.load_sl_matrix(spec)
    raise ConfigError(f"unknown matrix {spec!r}")


def _load_system(cfg: dict):
    """Resolve (sl, books) from a system config dict."""
    sl = _load_matrix(cfg.get("matrix"))
    if "codebooks" in cfg:
        try:
            books = structure.load_codebooks(cfg["codebooks"])
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load codebooks: {exc}") from exc
        return sl, books
    base = build_base(cfg.get("base", "qam"), int(_require(cfg, "m")),
                      permute=bool(cfg.get("permute", False)))
    rv = bool(cfg.get("real_valued", False))
    if cfg.get("codebook_mode", "design") == "baseline":
        return sl, baseline_codebooks(sl, base, real_valued=rv)
    res = design_codebooks(sl, base, real_valued=rv,
                           grid_res=int(cfg.get("grid_res", 0) or 41),
                           n_t=cfg.get("n_t"), n_r=cfg.get("n_r"))
    return sl, res.books


def _merge_flags(cfg: dict, args) -> dict:
    cfg = dict(cfg)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.threads is not None:
        cfg["threads"] = args.threads
    if getattr(args, "snr_list", None):
        cfg["snr_db"] = [float(x) for x in args.snr_list.split(",")]
    if getattr(args, "detector", None):
        cfg["detector"] = args.detector
    if getattr(args, "mp_iters", None) is not None:
        cfg["mp_iters"] = args.mp_iters
    return cfg


def _sim_config(cfg: dict) -> sim.SimConfig:
    try:
        return sim.SimConfig(
            n_t=int(_require(cfg, "n_t")), n_r=int(_require(cfg, "n_r")),
            snr_db=tuple(float(x) for x in _require(cfg, "snr_db")),
            detector=cfg.get("detector", "mp"),
            mp_iters=int(cfg.get("mp_iters", 5)),
            min_errors=int(cfg.get("min_errors", 200)),
            max_words=int(cfg.get("max_words", 10 ** 7)),
            seed=int(cfg.get("seed", 0)),
            batch_size=int(cfg.get("batch_size", 2000)),
            threads=int(cfg.get("threads", 1)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def cmd_expand(cfg: dict, args) -> int:
    t0 = time.time()
    n_t = int(args.nt if args.nt is not None else _require(cfg, "n_t"))
    n_r = int(args.nr if args.nr is not None else _require(cfg, "n_r"))
    exp = eigenstats.expand_ordered_pdf(n_t, n_r)
    path = _out_path(args, f"expansion_{n_t}x{n_r}.csv")
    with open(path, "w") as fh:
        fh.write(f"# version: {__version__}\n")
        for key, val in sorted(_header(cfg, t0).items()):
            fh.write(f"# {key}: {val}\n")
        cols = ",".join(f"beta_{m + 1}" for m in range(exp.n))
        fh.write(f"alpha,{cols}\n")
        for alpha, beta in zip(exp.alphas, exp.betas):
            fh.write(f"{alpha}," + ",".join(str(b) for b in beta) + "\n")
        fh.write(f"# P: {exp.count}\n")
        fh.write(f"# C: {exp.normalizer}\n")
    print(path)
    return 0


def cmd_design(cfg: dict, args) -> int:
    t0 = time.time()
    sl = _load_matrix(cfg.get("matrix"))
    base = build_base(cfg.get("base", "qam"), int(_require(cfg, "m")),
                      permute=bool(cfg.get("permute", False)))
    res = design_codebooks(
        sl, base, real_valued=bool(cfg.get("real_valued", False)),
        grid_res=int(cfg.get("grid_res", 0) or 41),
        design_snr_db=float(cfg.get("design_snr_db", 30.0)),
        n_t=cfg.get("n_t"), n_r=cfg.get("n_r"))
    book_path = _out_path(args, "codebooks.json")
    structure.save_codebooks(res.books, book_path)
    trace_path = _out_path(args, "design_trace.txt")
    with open(trace_path, "w") as fh:
        fh.write(f"# version: {__version__}\n")
        for key, val in sorted(_header(cfg, t0).items()):
            fh.write(f"# {key}: {val}\n")
        for line in res.trace_lines():
            fh.write(line + "\n")
    print(book_path)
    print(trace_path)
    return 0


def cmd_analyze(cfg: dict, args) -> int:
    t0 = time.time()
    sl, books = _load_system(cfg)
    n_t = int(cfg.get("n_t", sl.n))
    n_r = int(cfg.get("n_r", sl.n))
    snr_db = np.asarray(_require(cfg, "snr_db"), dtype=float)
    exp = eigenstats.expand_ordered_pdf(n_t, n_r)
    diffs = structure.difference_set(books, sl)
    report = awep.analyze_system(diffs, exp, snr_db,
                                 books.bits_per_word(),
                                 sl.num_layers * books.e_s,
                                 n_t, n_r, sl.big_n)
    report.meta.update(_header(cfg, t0))
    path = _out_path(args, "awep.csv")
    report.to_csv(path)
    print(path)
    return 0


def cmd_simulate(cfg: dict, args) -> int:
    t0 = time.time()
    sl, books = _load_system(cfg)
    scfg = _sim_config(cfg)
    points, report = sim.run_curve(scfg, sl, books)
    report.meta.update(_header(cfg, t0))
    path = _out_path(args, "simulate.csv")
    report.to_csv(path)
    print(path)
    return 0


def cmd_converge(cfg: dict, args) -> int:
    t0 = time.time()
    sl, books = _load_system(cfg)
    scfg = _sim_config(cfg)
    iter_list = [int(x) for x in cfg.get("iter_list", [1, 2, 3, 5, 10])]
    snr_db = float(cfg.get("converge_snr_db", scfg.snr_db[0]))
    words = int(cfg.get("converge_words", 10 ** 5))
    table = sim.convergence_study(scfg, snr_db, iter_list, words,
                                  sl=sl, books=books)
    path = _out_path(args, "converge.csv")
    with open(path, "w") as fh:
        fh.write(f"# version: {__version__}\n")
        fh.write(f"# snr_db: {snr_db}\n")
        for key, val in sorted(_header(cfg, t0).items()):
            fh.write(f"# {key}: {val}\n")
        fh.write("detector,words,errors,wer\n")
        for label in [f"mp_{it}" for it in iter_list] + ["ml"]:
            n, e, wer = table[label]
            fh.write(f"{label},{n},{e},{wer:.12g}\n")
    print(path)
    return 0


def cmd_compare(cfg: dict, args) -> int:
    t0 = time.time()
    systems = _require(cfg, "systems")
    if not isinstance(systems, list) or len(systems) < 2:
        raise ConfigError("compare needs a 'systems' list of >= 2 entries")
    mode = cfg.get("compare_mode", "analytic")
    curves = []
    for entry in systems:
        scfg_dict = {**cfg, **entry}
        scfg_dict.pop("systems", None)
        label = entry.get("label", entry.get("matrix", "system"))
        sl, books = _load_system(scfg_dict)
        n_t = int(scfg_dict.get("n_t", sl.n))
        n_r = int(scfg_dict.get("n_r", sl.n))
        snr_db = np.asarray(_require(scfg_dict, "snr_db"), dtype=float)
        if mode == "mc":
            points, report = sim.run_curve(_sim_config(scfg_dict), sl, books)
            values = np.array([p.awep_hat for p in points])
        else:
            exp = eigenstats.expand_ordered_pdf(n_t, n_r)
            diffs = structure.difference_set(books, sl)
            report = awep.analyze_system(diffs, exp, snr_db,
                                         books.bits_per_word(),
                                         sl.num_layers * books.e_s,
                                         n_t, n_r, sl.big_n)
            values = report.upper_bound
        report.meta.update(_header(cfg, t0), label=label)
        report.to_csv(_out_path(args, f"curve_{label}.csv"))
        curves.append((label, snr_db, values))
    targets = tuple(float(t) for t in cfg.get("targets", (1e-2, 1e-3, 1e-4)))
    rows = sim.compare_systems(curves, targets)
    path = _out_path(args, "comparison.csv")
    with open(path, "w") as fh:
        fh.write(f"# version: {__version__}\n")
        fh.write(f"# reference: {curves[0][0]}\n")
        fh.write(f"# mode: {mode}\n")
        for key, val in sorted(_header(cfg, t0).items()):
            fh.write(f"# {key}: {val}\n")
        fh.write("label,target,snr_ref_db,snr_db,gap_db,reached\n")
        for label, target, s_ref, s_cur, gap, reached in rows:
            fmt = lambda v: "" if v is None else f"{v:.6g}"
            fh.write(f"{label},{target:.6g},{fmt(s_ref)},{fmt(s_cur)},"
                     f"{fmt(gap)},{int(reached)}\n")
    print(path)
    return 0


_COMMANDS = {"expand": cmd_expand, "design": cmd_design,
             "analyze": cmd_analyze, "simulate": cmd_simulate,
             "compare": cmd_compare, "converge": cmd_converge}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slmimo",
        description="Sparse layered MIMO: design, analysis, simulation.")
    parser.add_argument("--version", action="version",
                        version=f"slmimo {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config path")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        if name == "expand":
            p.add_argument("--nt", type=int, default=None)
            p.add_argument("--nr", type=int, default=None)
        if name in ("simulate", "converge", "compare", "analyze"):
            p.add_argument("--snr-list", default=None,
                           help='comma-separated SNRs in dB, e.g. "10,15,20"')
        if name in ("simulate", "converge", "compare"):
            p.add_argument("--detector", choices=("ml", "mp", "exact"),
                           default=None)
            p.add_argument("--mp-iters", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _merge_flags(_load_config(args.config), args)
        return _COMMANDS[args.subcommand](cfg, args)
    except (ConfigError, InvalidLayeringError, DesignConditionError) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except _NUMERICAL_ERRORS as exc:
        print(f"error: numerical: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except _BUDGET_ERRORS as exc:
        print(f"error: budget: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (KeyError, TypeError, ValueError) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG


if __name__ == "__main__":
    sys.exit(main())
