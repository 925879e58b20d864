"""Post-processing levels.

1. Von Neumann on the raw stream.
2. Circulant seeded extraction with one 10007-bit seed reused over 10006-bit blocks.
3. Circulant two-source extraction against a weak second source produces the
   seed, then level-2 style seeded rounds over the remaining blocks.
4. As level 3, with the second source replaced by Mermin-certified outcome
   bits at a length matched to the retained record bits.

Every run returns the output and a manifest that accounts for every round,
the composed error and where the seed bits came from.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import extractors as ex
from .bitio import BitString
from .extractors import EpsilonBudget, ExtractorJob, ExtractorKind
from .mermin import MerminRecordSet, analyze, retained_bits
from .minentropy import EPS_EST_7SIGMA

log = logging.getLogger(__name__)

# largest prime whose linear convolution (2p - 1 terms) fits the 2^23 transform
MAX_TRANSFORM_PRIME = ex.largest_prime_at_most(((1 << 23) + 1) // 2)
_BATCH = 256


class PipelineError(RuntimeError):
    pass


class PipelineRefused(PipelineError):
    """The entropy claims are too weak for the requested level."""


@dataclass
class PipelineManifest:
    level: int
    input_bits: int
    params: dict
    jobs: list[tuple[ExtractorJob, int]] = field(default_factory=list)
    budget: EpsilonBudget | None = None
    produced_bits: int = 0
    seed_provenance: dict = field(default_factory=dict)
    consumed_bits: int = 0
    discarded_bits: int = 0
    notes: list[str] = field(default_factory=list)
    output_sha256: str = ""

    def recount(self) -> int:
        return sum(job.m_out * count for job, count in self.jobs)

    def to_dict(self) -> dict:
        budget = self.budget.to_dict() if self.budget else None
        return {
            "level": self.level,
            "params": self.params,
            "input_bits": self.input_bits,
            "consumed_bits": self.consumed_bits,
            "discarded_bits": self.discarded_bits,
            "produced_bits": self.produced_bits,
            "jobs": [{"rounds": count, **job.to_dict()} for job, count in self.jobs],
            "budget": budget,
            "seed_provenance": self.seed_provenance,
            "notes": self.notes,
            "output_sha256": self.output_sha256,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def write(self, path: str | os.PathLike) -> Path:
        path = Path(path)
        path.write_text(self.to_json())
        return path


def _finish(manifest: PipelineManifest, out: BitString) -> tuple[BitString, PipelineManifest]:
    manifest.produced_bits = len(out)
    manifest.output_sha256 = hashlib.sha256(out.to_bytes() + len(out).to_bytes(8, "big")).hexdigest()
    if manifest.level > 1 and manifest.recount() != len(out):
        raise AssertionError("manifest rounds do not account for the output")
    if manifest.budget is not None and not manifest.budget.satisfied:
        raise PipelineError(f"error budget exceeded: eps_total={manifest.budget.eps_total:.3e}")
    return out, manifest


def _check_rate(name: str, alpha: float) -> None:
    if not 0 < alpha <= 1 or math.isnan(alpha):
        raise PipelineError(f"{name}={alpha} must lie in (0, 1]")


# -- level 1 --------------------------------------------------------------------

def run_level1(source: BitString, max_bits: int | None = None) -> tuple[BitString, PipelineManifest]:
    if len(source) == 0:
        raise PipelineError("empty input")
    out = ex.von_neumann(source)
    truncated = max_bits is not None and len(out) > max_bits
    if truncated:
        out = out[:max_bits]
    manifest = PipelineManifest(1, len(source), {"extractor": "von-neumann"},
                                consumed_bits=len(source) // 2 * 2,
                                discarded_bits=len(source) % 2)
    manifest.notes.append("eps = 0 holds only for independent, identically biased bit pairs")
    if len(out) == 0:
        msg = "no discordant pairs: output is empty"
        log.warning(msg)
        manifest.notes.append(msg)
    if truncated:
        manifest.notes.append(f"output truncated to {max_bits} bits")
    manifest.jobs.append((ExtractorJob(ExtractorKind.VON_NEUMANN, len(source), 0, 0.0, 0.0, 0.0, len(out)), 1))
    return _finish(manifest, out)


# -- seeded rounds shared by levels 2-4 -----------------------------------------

def _seeded_rounds(source: BitString, start: int, seed: BitString, alpha_rng: float,
                   eps_round: float, max_bits: int | None,
                   manifest: PipelineManifest) -> list[np.ndarray]:
    n = len(seed) - 1
    job = ExtractorJob.plan(ExtractorKind.SEEDED, n, alpha_rng * n, eps_round=eps_round)
    if job.m_out == 0:
        raise PipelineError(f"alpha_rng={alpha_rng} leaves no output per {n}-bit block at eps={eps_round}")
    available = (len(source) - start) // n
    rounds = available if max_bits is None else min(available, -(-max_bits // job.m_out))
    if rounds == 0:
        raise PipelineError(f"input too short for one {n}-bit block after {start} consumed bits")
    if max_bits is not None and rounds * job.m_out < max_bits:
        manifest.notes.append(f"input supports only {rounds * job.m_out} of {max_bits} requested bits")
    bits = source.bits
    chunks = []
    for lo in range(0, rounds, _BATCH):
        hi = min(rounds, lo + _BATCH)
        xs = bits[start + lo * n: start + hi * n].reshape(hi - lo, n)
        chunks.append(ex.circulant_many(xs, seed, job.m_out).ravel())
    out_bits = rounds * job.m_out
    last = job.m_out
    if max_bits is not None and out_bits > max_bits:
        last = job.m_out - (out_bits - max_bits)
        chunks[-1] = chunks[-1][: len(chunks[-1]) - (out_bits - max_bits)]
    full = rounds if last == job.m_out else rounds - 1
    if full:
        manifest.jobs.append((job, full))
    if last != job.m_out:
        manifest.jobs.append((ExtractorJob(job.kind, n, n + 1, job.k1, job.k2, eps_round, last), 1))
        manifest.notes.append(f"final round truncated to {last} of {job.m_out} bits")
    manifest.consumed_bits = start + rounds * n
    manifest.discarded_bits = len(source) - manifest.consumed_bits
    return chunks


def _budget(manifest: PipelineManifest, eps_est: float, extra: tuple = ()) -> EpsilonBudget:
    groups = tuple((count, job.eps_round) for job, count in manifest.jobs)
    return EpsilonBudget(eps_est, groups, extra=extra)


def _preflight(eps_est: float, eps_round: float, rounds_hint: int, extra: tuple = ()) -> None:
    bound = EpsilonBudget(eps_est, ((rounds_hint, eps_round),), extra=extra)
    if not bound.satisfied:
        raise PipelineError(f"error budget would be exceeded: eps_total={bound.eps_total:.3e} > 2^-32")


# -- level 2 --------------------------------------------------------------------

def run_level2(source: BitString, seed: BitString, alpha_rng: float,
               eps_round: float = ex.DEFAULT_EPS_ROUND, eps_est: float = EPS_EST_7SIGMA,
               max_bits: int | None = None, seed_provenance: dict | None = None,
               seed_bits: int = ex.SEED_BITS) -> tuple[BitString, PipelineManifest]:
    _check_rate("alpha_rng", alpha_rng)
    if len(seed) < seed_bits:
        raise PipelineError(f"seed has {len(seed)} bits, need {seed_bits}")
    if not ex.is_prime(seed_bits):
        raise PipelineError(f"seed length {seed_bits} is not prime")
    seed = seed[:seed_bits]
    manifest = PipelineManifest(2, len(source), {"alpha_rng": alpha_rng, "eps_round": eps_round,
                                                 "eps_est": eps_est, "block_bits": seed_bits - 1,
                                                 "requested_bits": max_bits})
    manifest.seed_provenance = dict(seed_provenance or {"source": "caller"}, bits=seed_bits)
    _preflight(eps_est, eps_round, len(source) // (seed_bits - 1))
    chunks = _seeded_rounds(source, 0, seed, alpha_rng, eps_round, max_bits, manifest)
    if manifest.discarded_bits:
        manifest.notes.append(f"{manifest.discarded_bits} unused input bits discarded")
    manifest.budget = _budget(manifest, eps_est)
    return _finish(manifest, BitString.from_bits(np.concatenate(chunks)))


# -- level 3 --------------------------------------------------------------------

def _two_source_seed(source: BitString, second: BitString, n: int, k1: float, k2: float,
                     eps_round: float, need: int, manifest: PipelineManifest) -> tuple[BitString, int]:
    """Chain two-source rounds over successive n-bit blocks until ``need`` seed bits exist."""
    job = ExtractorJob.plan(ExtractorKind.TWO_SOURCE, n, k1, k2, eps_round)
    if job.m_out == 0:
        raise PipelineRefused(
            f"two-source round yields no output: k1 + k2 = {k1 + k2:.1f} does not exceed "
            f"{n + 1} + 2 log2(1/eps)")
    rounds = -(-need // job.m_out)
    if rounds * n > len(source):
        raise PipelineError(f"two-source seeding needs {rounds} blocks of {n} bits; input has {len(source)}")
    xs = source.bits[: rounds * n].reshape(rounds, n)
    seed_chunks = [ex.circulant_many(xs[lo:lo + _BATCH], second, job.m_out).ravel()
                   for lo in range(0, rounds, _BATCH)]
    seed = BitString.from_bits(np.concatenate(seed_chunks)[:need])
    manifest.seed_provenance.update({"two_source_rounds": rounds, "two_source_m": job.m_out,
                                     "two_source_job": job.to_dict(),
                                     "discarded_seed_bits": rounds * job.m_out - need})
    return seed, rounds


def run_level3(source: BitString, second: BitString | None, alpha_rng: float,
               margin: float = ex.DEFAULT_MARGIN, eps_round: float = ex.DEFAULT_EPS_ROUND,
               eps_est: float = EPS_EST_7SIGMA, max_bits: int | None = None,
               second_provenance: dict | None = None,
               seed_bits: int = ex.SEED_BITS) -> tuple[BitString, PipelineManifest]:
    """``second=None`` selects self mode: the first ``seed_bits`` input bits act as Y."""
    _check_rate("alpha_rng", alpha_rng)
    alpha_second = 1 + margin - alpha_rng
    if not 0 < alpha_second < 1:
        raise PipelineError(f"alpha_second = {1 + margin} - {alpha_rng} = {alpha_second:.3f} is outside (0, 1)")
    n = seed_bits - 1
    provenance = dict(second_provenance or {"source": "caller"})
    offset = 0
    if second is None:
        second = source[:seed_bits]
        offset = seed_bits
        provenance = {"source": "self", "note": "first input bits, assumed independent of the rest"}
    if len(second) < seed_bits:
        raise PipelineError(f"second source has {len(second)} bits, need {seed_bits}")
    second = second[:seed_bits]
    rest = source[offset:]
    manifest = PipelineManifest(3, len(source), {"alpha_rng": alpha_rng, "alpha_second": alpha_second,
                                                 "margin": margin, "eps_round": eps_round,
                                                 "eps_est": eps_est, "block_bits": n,
                                                 "requested_bits": max_bits})
    manifest.seed_provenance = {"second_source": provenance}
    _preflight(eps_est, eps_round, len(source) // n)
    seed, ts_rounds = _two_source_seed(rest, second, n, alpha_rng * n, alpha_second * seed_bits,
                                       eps_round, seed_bits, manifest)
    manifest.seed_provenance["derived_seed_bits"] = seed_bits
    consumed = ts_rounds * n
    tmp = PipelineManifest(3, len(rest), {})
    chunks = _seeded_rounds(rest, consumed, seed, alpha_rng, eps_round, max_bits, tmp)
    manifest.notes.extend(tmp.notes)
    manifest.jobs = tmp.jobs
    manifest.consumed_bits = offset + tmp.consumed_bits
    manifest.discarded_bits = tmp.discarded_bits
    # two-source rounds feed the seed, not the output: they cost eps but add no output bits
    manifest.budget = EpsilonBudget(eps_est, ((ts_rounds, eps_round),
                                              *((c, j.eps_round) for j, c in tmp.jobs)))
    return _finish(manifest, BitString.from_bits(np.concatenate(chunks)))


# -- level 4 --------------------------------------------------------------------

def run_level4(source: BitString, records: MerminRecordSet, alpha_rng: float,
               eps_est_mermin: float, eps_round: float = ex.DEFAULT_EPS_ROUND,
               eps_est: float = EPS_EST_7SIGMA, max_bits: int | None = None,
               alpha_q: float | None = None,
               seed_bits: int = ex.SEED_BITS) -> tuple[BitString, PipelineManifest]:
    """``alpha_q`` overrides the rate certified from ``records`` (for what-if runs)."""
    _check_rate("alpha_rng", alpha_rng)
    assessment = analyze(records, eps_est_mermin)
    alpha_q = assessment.alpha_Q if alpha_q is None else alpha_q
    if alpha_rng + alpha_q <= 1:
        raise PipelineRefused(
            f"alpha_rng = {alpha_rng} with certified alpha_Q = {alpha_q:.3f}: two-source extraction "
            f"needs alpha_rng > {1 - alpha_q:.3f}; the source min-entropy is too low")
    weak = retained_bits(records)
    p = ex.largest_prime_at_most(min(len(weak), len(source) + 1, MAX_TRANSFORM_PRIME))
    n = p - 1
    manifest = PipelineManifest(4, len(source), {"alpha_rng": alpha_rng, "alpha_Q": alpha_q,
                                                 "eps_round": eps_round, "eps_est": eps_est,
                                                 "eps_est_mermin": eps_est_mermin,
                                                 "two_source_prime": p, "block_bits": seed_bits - 1,
                                                 "requested_bits": max_bits})
    manifest.seed_provenance = {"second_source": {"source": "mermin", "rounds": records.n,
                                                  "retained_bits": len(weak), "used_bits": p,
                                                  "assessment": assessment.to_dict()}}
    extra = (("mermin_estimation", eps_est_mermin),)
    _preflight(eps_est, eps_round, len(source) // (seed_bits - 1) + 1, extra)
    seed, ts_rounds = _two_source_seed(source, weak[:p], n, alpha_rng * n, alpha_q * p,
                                       eps_round, seed_bits, manifest)
    consumed = ts_rounds * n
    tmp = PipelineManifest(4, len(source), {})
    chunks = _seeded_rounds(source, consumed, seed, alpha_rng, eps_round, max_bits, tmp)
    manifest.notes.extend(tmp.notes)
    manifest.jobs = tmp.jobs
    manifest.consumed_bits = tmp.consumed_bits
    manifest.discarded_bits = tmp.discarded_bits
    manifest.budget = EpsilonBudget(eps_est, ((ts_rounds, eps_round),
                                              *((c, j.eps_round) for j, c in tmp.jobs)), extra=extra)
    return _finish(manifest, BitString.from_bits(np.concatenate(chunks)))
