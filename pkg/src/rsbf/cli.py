"""``rsbf`` command line: plan, gen, run, predict, compare."""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from dataclasses import dataclass
from typing import Sequence, TextIO

import numpy as np

from . import __version__, harness, hashing, theory
from .baselines import ClassicBloom, SbfBank, balanced_decrements
from .core import DEFAULT_P_STAR, PLAN_MODES, FilterBank, FilterPlan, plan

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3

ALGORITHMS = ("rsbf", "bloom", "sbf")
SEED_ENV = "RSBF_SEED"


class ValidationError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV, "0")
    try:
        return int(raw, 0)
    except ValueError:
        raise ValidationError(f"{SEED_ENV}={raw!r} is not an integer") from None


@dataclass(frozen=True)
class RunConfig:
    algorithm: str
    memory_bits: int
    fpr_threshold: float
    p_star: float = DEFAULT_P_STAR
    seed: int = 0
    window_size: int = 1000
    plan_mode: str = "balanced"
    num_filters: int | None = None
    input_path: str | None = None
    input_mode: str = "binary"
    length: int | None = None
    distinct: float | None = None
    universe: int | None = None
    sbf_cell_bits: int = 3
    sbf_decrements: int | None = None
    bloom_hashes: int | None = None

    def validate(self) -> FilterPlan:
        if self.algorithm not in ALGORITHMS:
            raise ValidationError(f"unknown algorithm {self.algorithm!r}")
        if self.window_size < 1:
            raise ValidationError("window size must be >= 1")
        if self.input_path is None:
            if self.length is None or self.length < 1:
                raise ValidationError("give --input or a positive --length")
            if (self.distinct is None) == (self.universe is None):
                raise ValidationError("give exactly one of --distinct and --universe")
            if self.distinct is not None and not 0.0 < self.distinct <= 1.0:
                raise ValidationError("--distinct must be in (0, 1]")
            if self.universe is not None and self.universe < 1:
                raise ValidationError("--universe must be >= 1")
        if not 1 <= self.sbf_cell_bits <= 8:
            raise ValidationError("--sbf-cell-bits must be in [1, 8]")
        if self.sbf_decrements is not None and self.sbf_decrements < 0:
            raise ValidationError("--sbf-decrements must be >= 0")
        if self.bloom_hashes is not None and self.bloom_hashes < 1:
            raise ValidationError("--bloom-hashes must be >= 1")
        try:
            return plan(
                self.memory_bits, self.fpr_threshold, self.p_star,
                mode=self.plan_mode, num_filters=self.num_filters,
            )
        except ValueError as exc:
            raise ValidationError(str(exc)) from None

    def universe_size(self) -> int | None:
        if self.universe is not None:
            return self.universe
        return harness.solve_universe(self.length, self.distinct)

    def load_stream(self) -> np.ndarray | list[bytes]:
        if self.input_path is not None:
            return harness.ingest(self.input_path, self.input_mode)
        return harness.generate(harness.StreamSpec(self.length, self.universe_size(), self.seed))

    def header(self, p: FilterPlan) -> list[tuple[str, object]]:
        items: list[tuple[str, object]] = [
            ("tool", f"rsbf {__version__}"),
            ("hash_family", hashing.HASH_FAMILY),
            ("algorithm", self.algorithm),
            ("memory_bits", self.memory_bits),
            ("fpr_threshold", self.fpr_threshold),
            ("p_star", self.p_star),
            ("seed", self.seed),
            ("window_size", self.window_size),
            ("plan_mode", self.plan_mode),
            ("num_filters", p.num_filters),
            ("filter_bits", p.filter_bits),
        ]
        if self.input_path is not None:
            items += [("input", self.input_path), ("input_mode", self.input_mode)]
        else:
            u = self.universe_size()
            items += [
                ("length", self.length),
                ("distinct", self.distinct if self.distinct is not None else ""),
                ("universe", "without-replacement" if u is None else u),
            ]
        if self.algorithm == "sbf":
            items += [
                ("sbf_cell_bits", self.sbf_cell_bits),
                ("sbf_cells", self.memory_bits // self.sbf_cell_bits),
                ("sbf_hashes", p.num_filters),
                ("sbf_decrements", self.sbf_decrements if self.sbf_decrements is not None
                 else balanced_decrements(p.num_filters, self.sbf_cell_bits)),
            ]
        if self.algorithm == "bloom":
            items.append(("bloom_hashes", self.bloom_hashes or p.num_filters))
        return items

    def build_filter(self, p: FilterPlan):
        if self.algorithm == "rsbf":
            return FilterBank.from_plan(p, self.seed)
        if self.algorithm == "bloom":
            return ClassicBloom(self.memory_bits, self.bloom_hashes or p.num_filters, self.seed)
        return SbfBank.with_memory(
            self.memory_bits, p.num_filters, self.sbf_cell_bits,
            decrements=self.sbf_decrements, seed=self.seed,
        )


def execute(cfg: RunConfig, cache: dict | None = None) -> tuple[list[tuple[str, object]], list[harness.MetricsWindow]]:
    """Run one configuration.  ``cache`` shares stream, labels and digests
    between configurations that read the same input with the same seed."""
    p = cfg.validate()
    filt = cfg.build_filter(p)
    key = (cfg.input_path, cfg.input_mode, cfg.length, cfg.distinct, cfg.universe, cfg.seed)
    if cache is not None and key in cache:
        stream, labels, digests = cache[key]
    else:
        stream = cfg.load_stream()
        labels = harness.duplicate_labels(stream)
        digests = hashing.digest_stream(stream, filt.hash_seed)
        if cache is not None:
            cache[key] = (stream, labels, digests)
    windows = harness.evaluate(filt, stream, cfg.window_size, labels=labels, digests=digests)
    return cfg.header(p), windows


def write_report(out: TextIO, header: list[tuple[str, object]], windows: Sequence[harness.MetricsWindow]) -> None:
    for key, value in header:
        out.write(f"# {key}={value}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(harness.MetricsWindow.FIELDS)
    for row in windows:
        w.writerow(row.row())


def render_report(header, windows) -> str:
    buf = io.StringIO()
    write_report(buf, header, windows)
    return buf.getvalue()


# --------------------------------------------------------------------------
# sub-commands


def cmd_plan(args: argparse.Namespace) -> int:
    try:
        p = plan(args.memory_bits, args.fpr, args.p_star, mode=args.mode, num_filters=args.k)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    print(f"memory_bits   {p.memory_bits}")
    print(f"fpr_threshold {p.fpr_threshold}")
    print(f"p_star        {p.p_star}")
    print(f"k_raw         {p.k_raw:.6f}")
    print(f"k             {p.num_filters}")
    print(f"s             {p.filter_bits}")
    for label, k in (("low-fnr", p.low_fnr_k), ("low-fpr", p.low_fpr_k)):
        s = p.memory_bits // k if p.memory_bits >= 2 * k else 0
        print(f"{label:<13} k={k} s={s}")
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    if (args.distinct is None) == (args.universe is None):
        raise ValidationError("give exactly one of --distinct and --universe")
    try:
        if args.distinct is not None:
            universe = harness.solve_universe(args.length, args.distinct)
        else:
            universe = args.universe
        spec = harness.StreamSpec(args.length, universe, args.seed)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    records = harness.generate(spec)
    if universe is None:
        expected = 1.0
    else:
        expected = harness.expected_distinct_fraction(args.length, universe)
    with open(args.out, "wb") as fh:
        fh.write(harness.to_bytes(records))
    with open(args.out + ".meta", "w") as fh:
        fh.write(f"length={args.length}\n")
        fh.write(f"universe={'without-replacement' if universe is None else universe}\n")
        fh.write(f"seed={args.seed}\n")
        fh.write(f"expected_distinct_fraction={expected!r}\n")
        fh.write(f"encoding={spec.encoding}\n")
    print(f"wrote {len(records)} records to {args.out}")
    return EXIT_OK


def _config(args: argparse.Namespace, algorithm: str, memory_bits: int, seed: int) -> RunConfig:
    return RunConfig(
        algorithm=algorithm,
        memory_bits=memory_bits,
        fpr_threshold=args.fpr,
        p_star=args.p_star,
        seed=seed,
        window_size=args.window,
        plan_mode=args.mode,
        num_filters=args.k,
        input_path=args.input,
        input_mode=args.input_mode,
        length=args.length,
        distinct=args.distinct,
        universe=args.universe,
        sbf_cell_bits=args.sbf_cell_bits,
        sbf_decrements=args.sbf_decrements,
        bloom_hashes=args.bloom_hashes,
    )


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _config(args, args.algo, args.memory_bits, args.seed)
    header, windows = execute(cfg)
    if args.report in (None, "-"):
        write_report(sys.stdout, header, windows)
    else:
        with open(args.report, "w", newline="") as fh:
            write_report(fh, header, windows)
        s = windows[-1]
        print(
            f"summary end_index={s.end_index} cum_fnr={s.cum_fnr:.6f} cum_fpr={s.cum_fpr:.6f} "
            f"ones_total={s.ones_total}"
        )
    return EXIT_OK


def predict_table(m: int, s: int, k: int, universe: int, p_insert: float | None = None) -> list[tuple[str, float, bool]]:
    """Rows ``(name, value, valid)`` of every closed-form predictor."""
    if p_insert is None:
        p_insert = min(1.0, s / m)
    rows: list[tuple[str, float, bool]] = []
    fpr = theory.rsbf_fpr_bound(m, s, k, universe)
    fnr = theory.rsbf_fnr_bound(m, s, k, universe)
    asym = theory.rsbf_fnr_asymptote(k, universe)
    rows.append(("fpr_bound", fpr.value, fpr.valid))
    rows.append(("fnr_bound", fnr.value, fnr.valid))
    rows.append(("fnr_asymptote", asym.value, asym.valid))
    exact, approx = theory.initial_fpr_components(s, k)
    rows.append(("warmup_fpr_exact", exact, True))
    rows.append(("warmup_fpr_approx", approx, True))
    lam = theory.ones_fixed_point(s)
    eps, nxt = theory.expected_ones_step(s / 2, s, p_insert)
    rows.append(("p_insert", p_insert, True))
    rows.append(("ones_fixed_point", lam, True))
    rows.append(("drift_eps_half_full", eps, True))
    rows.append(("expected_next_half_full", nxt, True))
    rows.append(("ones_variance_half_full", theory.ones_variance(0.5, p_insert), True))
    return rows


def cmd_predict(args: argparse.Namespace) -> int:
    try:
        rows = predict_table(args.m, args.s, args.k, args.universe, args.p_insert)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    print(f"m={args.m} s={args.s} k={args.k} U={args.universe}")
    print(f"{'quantity':<26}{'value':>16}  valid")
    for name, value, valid in rows:
        print(f"{name:<26}{value:>16.6g}  {'yes' if valid else 'no'}")
    return EXIT_OK


COMPARE_FIELDS = ("algorithm", "memory_bits", "seeds", "cum_fnr", "cum_fpr", "ones_total")


def compare_rows(args: argparse.Namespace) -> list[list[str]]:
    """One row per (memory, algorithm), averaged over seeds."""
    seeds = args.seeds if args.seeds else [args.seed]
    results: dict[tuple[int, str], list[harness.MetricsWindow]] = {}
    for seed in seeds:
        cache: dict = {}
        for memory_bits in args.memory_bits:
            for algo in args.algos:
                _, windows = execute(_config(args, algo, memory_bits, seed), cache)
                results.setdefault((memory_bits, algo), []).append(windows[-1])
    rows: list[list[str]] = []
    for memory_bits in args.memory_bits:
        for algo in args.algos:
            summ = results[(memory_bits, algo)]
            rows.append([
                algo,
                str(memory_bits),
                " ".join(str(x) for x in seeds),
                repr(float(np.mean([s.cum_fnr for s in summ]))),
                repr(float(np.mean([s.cum_fpr for s in summ]))),
                repr(float(np.mean([s.ones_total for s in summ]))),
            ])
    return rows


def cmd_compare(args: argparse.Namespace) -> int:
    rows = compare_rows(args)
    out = sys.stdout if args.report in (None, "-") else open(args.report, "w", newline="")
    try:
        out.write(f"# tool=rsbf {__version__}\n# hash_family={hashing.HASH_FAMILY}\n")
        out.write(f"# fpr_threshold={args.fpr}\n# p_star={args.p_star}\n# plan_mode={args.mode}\n")
        if args.input:
            out.write(f"# input={args.input}\n# input_mode={args.input_mode}\n")
        else:
            universe = args.universe
            if universe is None and args.distinct is not None:
                universe = harness.solve_universe(args.length, args.distinct)
            out.write(f"# length={args.length}\n# distinct={args.distinct}\n")
            out.write(f"# universe={'without-replacement' if universe is None else universe}\n")
        out.write(f"# sbf_cell_bits={args.sbf_cell_bits}\n# sbf_decrements={args.sbf_decrements}\n")
        w = csv.writer(out, lineterminator="\n")
        w.writerow(COMPARE_FIELDS)
        w.writerows(rows)
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _probability(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None


def _add_filter_options(p: argparse.ArgumentParser, seed: int) -> None:
    p.add_argument("--fpr", type=_probability, default=0.1, help="target FPR used to plan k (default 0.1)")
    p.add_argument("--p-star", type=_probability, default=DEFAULT_P_STAR)
    p.add_argument("--mode", choices=PLAN_MODES, default="balanced")
    p.add_argument("--k", type=int, default=None, help="force the number of filters")
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--window", type=int, default=1000)
    p.add_argument("--input", default=None, help="stream file; otherwise a stream is generated")
    p.add_argument("--input-mode", choices=("binary", "lines"), default="binary")
    p.add_argument("--length", type=int, default=None)
    p.add_argument("--distinct", type=_probability, default=None)
    p.add_argument("--universe", type=int, default=None)
    p.add_argument("--sbf-cell-bits", type=int, default=3)
    p.add_argument("--sbf-decrements", type=int, default=None)
    p.add_argument("--bloom-hashes", type=int, default=None)
    p.add_argument("--report", default=None, help="CSV output path (default stdout)")


def build_parser(seed: int = 0) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rsbf", description="Reservoir-sampling Bloom filter toolkit")
    parser.add_argument("--version", action="version", version=f"rsbf {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="derive k and s from a memory budget")
    p.add_argument("--memory-bits", type=int, required=True)
    p.add_argument("--fpr", type=_probability, required=True)
    p.add_argument("--p-star", type=_probability, default=DEFAULT_P_STAR)
    p.add_argument("--mode", choices=PLAN_MODES, default="balanced")
    p.add_argument("--k", type=int, default=None)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("gen", help="write a synthetic 8-byte-record stream")
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--distinct", type=_probability, default=None)
    p.add_argument("--universe", type=int, default=None)
    p.add_argument("--seed", type=int, default=seed)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="evaluate one filter on one stream")
    p.add_argument("--algo", choices=ALGORITHMS, default="rsbf")
    p.add_argument("--memory-bits", type=int, required=True)
    _add_filter_options(p, seed)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("predict", help="print closed-form FPR/FNR/stability predictions")
    p.add_argument("--m", type=int, required=True, help="stream length")
    p.add_argument("--s", type=int, required=True, help="bits per filter")
    p.add_argument("--k", type=int, required=True, help="number of filters")
    p.add_argument("--universe", type=int, required=True)
    p.add_argument("--p-insert", type=_probability, default=None, help="default s/m")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("compare", help="sweep algorithms x memory sizes")
    p.add_argument("--memory-bits", type=int, nargs="+", required=True)
    p.add_argument("--algos", nargs="+", choices=ALGORITHMS, default=list(ALGORITHMS))
    p.add_argument("--seeds", type=int, nargs="+", default=None)
    _add_filter_options(p, seed)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser(_default_seed()).parse_args(argv)
        return args.func(args)
    except ValidationError as exc:
        print(f"rsbf: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, harness.StreamFormatError) as exc:
        print(f"rsbf: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # malformed input files surface here
        print(f"rsbf: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
