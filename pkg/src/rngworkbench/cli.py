"""rng-workbench command line."""

from __future__ import annotations

import argparse
import json
import logging
import math
import re
import sys
from pathlib import Path

from . import __version__
from . import extractors as ex
from . import mermin, minentropy, pipeline, report, sources
from .bitio import BitString, StreamFormat, read_bits, write_bits
from .stattests import load_config

log = logging.getLogger("rngworkbench")

_POW2 = re.compile(r"^\s*2\s*\^\s*\(?\s*(-?\d+(?:\.\d+)?)\s*\)?\s*$")


class UsageError(Exception):
    """Bad or inconsistent command-line arguments; exits with status 2."""


def probability(text: str) -> float:
    """Parse ``2^-64``, ``exp(-90)`` or a plain float in (0, 1)."""
    m = _POW2.match(text)
    if m:
        value = 2.0 ** float(m.group(1))
    elif text.strip().startswith("exp(") and text.strip().endswith(")"):
        value = math.exp(float(text.strip()[4:-1]))
    else:
        try:
            value = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a probability: {text!r}") from None
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"probability {text!r} outside (0, 1)")
    return value


def rate(text: str) -> float:
    value = float(text)
    if not 0 <= value <= 1:
        raise argparse.ArgumentTypeError(f"rate {text!r} outside [0, 1]")
    return value


def guess_format(path: str | Path, explicit: str | None) -> StreamFormat:
    if explicit:
        return StreamFormat.parse(explicit)
    suffix = Path(path).suffix.lower()
    return {".txt": StreamFormat.ASCII01, ".hex": StreamFormat.HEX}.get(suffix, StreamFormat.RAW)


def _read(path: str, fmt: str | None, max_bits: int | None = None) -> BitString:
    return read_bits(path, guess_format(path, fmt), max_bits)


def _write(s: BitString, path: str, fmt: str | None) -> None:
    write_bits(s, path, guess_format(path, fmt))


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def _manifest_path(out: str) -> Path:
    return Path(f"{out}.manifest.json")


# -- subcommands ----------------------------------------------------------------

def cmd_gen(args) -> int:
    if args.kind == "lfsr":
        bits = sources.lfsr_generate(sources.LfsrState.from_hex(args.seed), args.bits)
    elif args.kind == "iid":
        bits = sources.biased_iid_generate(args.p0, args.bits, args.rng_seed)
    else:
        bits = sources.uniform_bits(args.bits, args.rng_seed)
    _write(bits, args.out, args.format)
    log.info("wrote %d bits to %s", len(bits), args.out)
    return 0


def cmd_beacon(args) -> int:
    client = sources.BeaconClient(endpoint=args.endpoint, fixture=args.fixture)
    bits, pulses = client.seed_bits(args.bits)
    _write(bits, args.out, args.format)
    Path(f"{args.out}.pulses.json").write_text(json.dumps({"pulses": pulses, "bits": len(bits)}))
    log.info("wrote %d beacon bits from pulses %s", len(bits), pulses)
    return 0


def cmd_test(args) -> int:
    config = load_config(args.config)
    failed = False
    reports = {}
    for path in args.input:
        s = _read(path, args.format, args.max_bits)
        rep = report.run_profile(s, args.profile, config, sample_id=path, workers=args.workers)
        reports[path] = rep
        failed |= rep.failed > 0
        if not args.quiet:
            print(f"== {path} ({len(s)} bits, profile {args.profile})")
            print(rep.to_table())
    if len(reports) > 1 and not args.quiet:
        print(report.suite_table(reports))
    if args.json:
        doc = [r.to_dict() for r in reports.values()]
        Path(args.json).write_text(json.dumps(doc[0] if len(doc) == 1 else doc, indent=2) + "\n")
    return 1 if failed else 0


def cmd_estimate(args) -> int:
    folder = Path(args.samples)
    files = sorted(p for p in folder.iterdir()
                   if p.is_file() and not p.name.startswith(".") and not p.name.endswith(".json"))
    if len(files) < 2:
        raise UsageError(f"need at least two sample files in {folder}")
    samples = {p.name: _read(str(p), args.format) for p in files}
    result = minentropy.assess_samples(samples, args.symbol_bits, args.z)
    if result.clipped:
        log.warning("alpha clipped from %.4f to %.4f", result.unclipped_alpha, result.alpha)
    _emit(result.to_json(), args.out)
    return 0


def _alpha_from(args_value: float | None, assessment: str | None) -> float:
    if args_value is not None:
        return args_value
    if assessment:
        return minentropy.EntropyAssessment.from_dict(json.loads(Path(assessment).read_text())).alpha
    raise UsageError("give --alpha1/--alpha-rng or --assessment")


def cmd_extract(args) -> int:
    s = _read(args.input, args.format)
    if args.kind == "vn":
        out, manifest = pipeline.run_level1(s)
        doc = manifest.to_dict()
    else:
        if not args.seed:
            raise UsageError("circulant extraction needs --seed")
        seed = _read(args.seed, args.seed_format)
        alpha1 = _alpha_from(args.alpha1, args.assessment)
        p = ex.SEED_BITS if args.seed_bits is None else args.seed_bits
        if len(seed) < p:
            raise UsageError(f"seed has {len(seed)} bits, need {p}")
        n = p - 1
        blocks = len(s) // n
        if blocks == 0:
            raise UsageError(f"input shorter than one {n}-bit block")
        if args.kind == "seeded":
            job = ex.ExtractorJob.plan("seeded", n, alpha1 * n, eps_round=args.eps_round)
        else:
            if args.alpha2 is None:
                raise UsageError("two-source extraction needs --alpha2")
            job = ex.ExtractorJob.plan("two-source", n, alpha1 * n, args.alpha2 * p, args.eps_round)
        if job.m_out == 0:
            raise UsageError("entropy claims leave no extractable output (m = 0)")
        budget = ex.eps_budget(args.eps_est, blocks, args.eps_round)
        if not budget.satisfied:
            raise UsageError(f"error budget exceeded: eps_total={budget.eps_total:.3e} > 2^-32")
        xs = s.bits[: blocks * n].reshape(blocks, n)
        out = BitString.from_bits(ex.circulant_many(xs, seed[:p], job.m_out).ravel())
        doc = {"job": job.to_dict(), "rounds": blocks, "produced_bits": len(out),
               "discarded_input_bits": len(s) - blocks * n, "budget": budget.to_dict(),
               "input": args.input, "seed": args.seed}
    _write(out, args.out, args.out_format)
    _manifest_path(args.out).write_text(json.dumps(doc, indent=2) + "\n")
    print(f"{len(out)} bits -> {args.out}")
    return 0


def _second_source(spec: str | None, args) -> tuple[BitString | None, dict]:
    if spec is None:
        raise UsageError("this level needs --second")
    if spec == "self":
        return None, {"source": "self"}
    if spec == "beacon":
        client = sources.BeaconClient(endpoint=args.endpoint, fixture=args.beacon_fixture)
        bits, pulses = client.seed_bits(ex.SEED_BITS)
        return bits, {"source": "beacon", "pulses": pulses,
                      "fixture": str(args.beacon_fixture) if args.beacon_fixture else None}
    if spec.startswith("file:"):
        path = spec[5:]
        return _read(path, None), {"source": "file", "path": path}
    raise UsageError(f"unrecognised --second {spec!r}")


def cmd_pipeline(args) -> int:
    s = _read(args.input, args.format)
    level = args.level
    if level == 1:
        out, manifest = pipeline.run_level1(s, args.bits)
    elif level == 2:
        second, prov = _second_source(args.second, args)
        if second is None:
            raise UsageError("level 2 needs an external seed (beacon or file:<path>)")
        alpha = _alpha_from(args.alpha_rng, args.assessment)
        out, manifest = pipeline.run_level2(s, second, alpha, args.eps_round, args.eps_est,
                                            args.bits, seed_provenance=prov)
    elif level == 3:
        second, prov = _second_source(args.second, args)
        alpha = _alpha_from(args.alpha_rng, args.assessment)
        out, manifest = pipeline.run_level3(s, second, alpha, args.margin, args.eps_round,
                                            args.eps_est, args.bits, second_provenance=prov)
    else:
        if not args.second or not args.second.startswith("mermin:"):
            raise UsageError("level 4 needs --second mermin:<records.csv>")
        records = mermin.read_records(args.second[len("mermin:"):])
        alpha = _alpha_from(args.alpha_rng, args.assessment)
        try:
            out, manifest = pipeline.run_level4(s, records, alpha, args.mermin_eps, args.eps_round,
                                                args.eps_est, args.bits)
        except pipeline.PipelineRefused as exc:
            print(f"refused: {exc}", file=sys.stderr)
            return 2
    manifest.params["input"] = args.input
    _write(out, args.out, args.out_format)
    manifest.write(_manifest_path(args.out))
    budget = manifest.budget.eps_total if manifest.budget else 0.0
    print(f"level {level}: {len(out)} bits -> {args.out} (eps_total {budget:.3e})")
    return 0


def cmd_mermin(args) -> int:
    if args.action == "simulate":
        records = mermin.simulate_records(args.visibility, args.rounds, args.seed)
        mermin.write_records(records, args.out)
        print(f"{records.n} rounds -> {args.out}")
        return 0
    records = mermin.read_records(args.records)
    result = mermin.analyze(records, args.eps, args.hoeffding)
    _emit(result.to_json(), args.out)
    return 0


def cmd_report(args) -> int:
    config = load_config(args.config)
    reports = {}
    for item in args.inputs:
        label, sep, path = item.partition("=")
        if not sep:
            raise UsageError(f"expected LEVEL=PATH, got {item!r}")
        reports[int(label)] = report.run_profile(_read(path, args.format), args.profile, config,
                                                 sample_id=path, workers=args.workers)
    comparison = report.compare_levels(reports, args.rng)
    print(comparison.to_table())
    for row in comparison.rows:
        state = "ok" if row.success else "FAIL"
        print(f"level {row.level}: failed {row.failed} (weak {row.weak}), budget {row.budget:.3f} -> {state}")
    if args.csv:
        Path(args.csv).write_text(comparison.plot_csv())
    if args.json:
        Path(args.json).write_text(comparison.to_json() + "\n")
    return 1 if any(r.failed for r in comparison.rows) else 0


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rng-workbench", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    fmt_choices = [f.value for f in StreamFormat]

    def io_format(p, name="--format"):
        p.add_argument(name, choices=fmt_choices, default=None,
                       help="bit stream format (default: by extension, .txt ascii01, .hex hex, else raw)")

    p = sub.add_parser("gen", help="generate reference streams")
    p.add_argument("kind", choices=["lfsr", "iid", "uniform"])
    p.add_argument("--seed", default="00000000", help="LFSR seed as 8 hex digits")
    p.add_argument("--p0", type=float, default=0.5, help="probability of a 0 bit (iid)")
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--bits", type=int, required=True)
    p.add_argument("--out", required=True)
    io_format(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("beacon", help="fetch seed bits from the randomness beacon")
    p.add_argument("--bits", type=int, default=ex.SEED_BITS)
    p.add_argument("--fixture", help="replay pulses from a recorded JSON file")
    p.add_argument("--endpoint", default=sources.BEACON_ENDPOINT)
    p.add_argument("--out", required=True)
    io_format(p)
    p.set_defaults(func=cmd_beacon)

    p = sub.add_parser("test", help="run a battery profile")
    p.add_argument("--input", nargs="+", required=True)
    p.add_argument("--profile", choices=report.PROFILE_NAMES, default="recommended")
    p.add_argument("--config", help="battery config JSON (default: bundled)")
    p.add_argument("--max-bits", type=int)
    p.add_argument("--json", help="write the report as JSON")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--quiet", action="store_true")
    io_format(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("estimate", help="min-entropy lower bound from sample files")
    p.add_argument("--samples", required=True, help="directory of sample files")
    p.add_argument("--symbol-bits", type=int, default=8)
    p.add_argument("--z", type=float, default=minentropy.SIGMA_MULTIPLIER, help="sigma multiplier")
    p.add_argument("--out")
    io_format(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("extract", help="run one extractor over a file")
    p.add_argument("kind", choices=["vn", "seeded", "two-source"])
    p.add_argument("--input", required=True)
    p.add_argument("--seed", help="seed or second-source file")
    p.add_argument("--seed-bits", type=int, help="prime seed length (default 10007)")
    p.add_argument("--alpha1", type=rate)
    p.add_argument("--alpha2", type=rate)
    p.add_argument("--assessment", help="EntropyAssessment JSON supplying alpha1")
    p.add_argument("--eps-round", type=probability, default=ex.DEFAULT_EPS_ROUND)
    p.add_argument("--eps-est", type=probability, default=minentropy.EPS_EST_7SIGMA)
    p.add_argument("--out", required=True)
    io_format(p)
    io_format(p, "--seed-format")
    io_format(p, "--out-format")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("pipeline", help="run a post-processing level")
    p.add_argument("--level", type=int, choices=[1, 2, 3, 4], required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--second", help="beacon | file:<path> | self | mermin:<records.csv>")
    p.add_argument("--alpha-rng", type=rate)
    p.add_argument("--assessment", help="EntropyAssessment JSON supplying alpha-rng")
    p.add_argument("--bits", type=int, help="stop after this many output bits")
    p.add_argument("--eps-round", type=probability, default=ex.DEFAULT_EPS_ROUND)
    p.add_argument("--eps-est", type=probability, default=minentropy.EPS_EST_7SIGMA)
    p.add_argument("--margin", type=float, default=ex.DEFAULT_MARGIN)
    p.add_argument("--mermin-eps", type=probability, default=2.0 ** -39,
                   help="confidence parameter for the Mermin adjustment")
    p.add_argument("--beacon-fixture")
    p.add_argument("--endpoint", default=sources.BEACON_ENDPOINT)
    p.add_argument("--out", required=True)
    io_format(p)
    io_format(p, "--out-format")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("mermin", help="analyse or simulate Mermin records")
    msub = p.add_subparsers(dest="action", required=True)
    a = msub.add_parser("analyze")
    a.add_argument("--records", required=True)
    a.add_argument("--eps", type=probability, required=True)
    a.add_argument("--hoeffding", choices=["standard", "printed"], default="standard")
    a.add_argument("--out")
    a.set_defaults(func=cmd_mermin)
    s = msub.add_parser("simulate")
    s.add_argument("--visibility", type=float, required=True)
    s.add_argument("--rounds", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_mermin)

    p = sub.add_parser("report", help="compare battery results across levels")
    p.add_argument("--inputs", nargs="+", required=True, metavar="LEVEL=PATH")
    p.add_argument("--rng", default="")
    p.add_argument("--profile", choices=report.PROFILE_NAMES, default="all")
    p.add_argument("--config")
    p.add_argument("--csv", help="plot data, y = log2(f + 1)")
    p.add_argument("--json")
    p.add_argument("--workers", type=int, default=1)
    io_format(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
