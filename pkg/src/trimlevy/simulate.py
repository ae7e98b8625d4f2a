"""Ordered jump-series simulation of trimmed subordinators.

Jumps on [0, t] are generated in decreasing order as
``tail_inverse(Gamma_l / t)`` where ``Gamma_l`` are partial sums of iid
standard exponentials.  The series is truncated at index ``L`` once the
standard deviation of the omitted small jumps is below ``rel_tol`` times the
accumulated trimmed sum; the omitted part is replaced by its mean
(``compensated``) or by a Gaussian draw with matching mean and variance
(``gaussian-residual``).
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .models import LevyTailModel
from .moments import model_c_alpha, moment_values
from .norming import norming_sequences
from .schemes import ConfigError, Scheme, check_compatible

MODES = ("compensated", "gaussian-residual")
DEFAULT_REL_TOL = 1e-4
DEFAULT_MAX_POINTS = 10_000_000
CHECKPOINTS_PER_CHUNK = 32


class TruncationError(RuntimeError):
    """The point budget ran out before the truncation tolerance was met."""

    def __init__(self, message, partial=None, achieved_tol=float("inf")):
        super().__init__(message)
        self.partial = partial
        self.achieved_tol = achieved_tol


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream keyed by ``(master_seed, stream_id)``."""

    master_seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.Philox(seq))


def gamma_sequence(rng, count: int, start: float = 0.0) -> np.ndarray:
    """Arrival times ``Gamma_1 < ... < Gamma_count`` of a unit-rate Poisson process."""
    if count < 1:
        raise ValueError("count must be >= 1")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    out = np.cumsum(gen.standard_exponential(count))
    if start:
        out += start
    return out


@dataclass
class JumpSeries:
    """A truncated ordered jump series ``jumps[l-1] = tail_inverse(Gamma_l / t)``."""

    model: LevyTailModel
    t: float
    gamma_points: np.ndarray
    jumps: np.ndarray

    @property
    def truncation_index(self) -> int:
        return len(self.jumps)

    @property
    def cutoff(self) -> float:
        return float(self.jumps[-1])

    def tail_moments(self) -> tuple:
        """Mean and standard deviation of the omitted jumps below the cutoff."""
        d = self.cutoff
        if d <= 0.0:
            return 0.0, 0.0
        mean = self.t * float(moment_values(self.model, 1.0, d))
        var = self.t * float(moment_values(self.model, 2.0, d))
        return mean, math.sqrt(max(var, 0.0))

    def delta(self, r: int) -> float:
        return math.inf if r == 0 else float(self.jumps[r - 1])

    def kept_sum(self, r: int) -> float:
        # ascending order keeps the pairwise sum accurate for decaying terms
        return float(np.sum(self.jumps[r:][::-1]))

    def trimmed_sum(self, r: int) -> float:
        """Compensated trimmed sum: jumps ``r+1..L`` plus the mean of the rest."""
        return self.kept_sum(r) + self.tail_moments()[0]


@dataclass(frozen=True)
class TrimmedSample:
    r: int
    t: float
    delta_r: float
    trimmed_x: float
    mode: str
    truncation_index: int
    tail_mean: float
    tail_sd: float


def simulate_series(model: LevyTailModel, r: int, t: float, rng, rel_tol: float = DEFAULT_REL_TOL,
                    max_points: int = DEFAULT_MAX_POINTS) -> JumpSeries:
    """Generate the ordered series until the truncation tolerance holds for trimming level r."""
    if r < 0:
        raise ValueError("r must be >= 0")
    if not 0 < rel_tol < 1:
        raise ValueError("rel_tol must lie in (0, 1)")
    if not t > 0:
        raise ValueError("t must be > 0")
    gen = rng.generator() if isinstance(rng, RngStream) else rng

    size = max(2 * r, 1024)
    g_chunks = [gamma_sequence(gen, size)]
    j_chunks = [np.asarray(model.tail_inverse(g_chunks[0] / t), dtype=float)]
    total = size
    offset = 0             # global index of the first jump in the newest chunk
    running = 0.0          # sum of kept jumps before the newest chunk
    best_ratio = math.inf

    while True:
        fresh = j_chunks[-1][max(r - offset, 0):]
        base = max(r, offset)
        if fresh.size:
            csum = running + np.cumsum(fresh)
            step = max(1, fresh.size // CHECKPOINTS_PER_CHUNK)
            idx = np.arange(step - 1, fresh.size, step)
            if idx[-1] != fresh.size - 1:
                idx = np.append(idx, fresh.size - 1)
            cut = fresh[idx]
            tail_var = t * np.where(cut > 0, moment_values(model, 2.0, np.maximum(cut, 1e-300)), 0.0)
            kept = csum[idx]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(kept > 0, np.sqrt(np.maximum(tail_var, 0.0)) / kept, np.inf)
            ok = np.flatnonzero(ratio <= rel_tol)
            best_ratio = min(best_ratio, float(np.min(ratio)))
            if ok.size:
                L = base + int(idx[ok[0]]) + 1
                return JumpSeries(model, t, np.concatenate(g_chunks)[:L], np.concatenate(j_chunks)[:L])
            running = float(csum[-1])
        if total >= max_points:
            raise TruncationError(
                f"tolerance {rel_tol:g} not reached within {max_points} points "
                f"(best {best_ratio:.3g})",
                partial=JumpSeries(model, t, np.concatenate(g_chunks), np.concatenate(j_chunks)),
                achieved_tol=best_ratio,
            )
        extra = min(max(total // 2, 1024), max_points - total)
        new_g = gamma_sequence(gen, extra, start=float(g_chunks[-1][-1]))
        g_chunks.append(new_g)
        j_chunks.append(np.asarray(model.tail_inverse(new_g / t), dtype=float))
        offset = total
        total += extra


def sample_trimmed(model: LevyTailModel, r: int, t: float, rng, rel_tol: float = DEFAULT_REL_TOL,
                   mode: str = "gaussian-residual", max_points: int = DEFAULT_MAX_POINTS) -> TrimmedSample:
    """One realization of the r-th largest jump and the trimmed sum on [0, t]."""
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    series = simulate_series(model, r, t, gen, rel_tol=rel_tol, max_points=max_points)
    tail_mean, tail_sd = series.tail_moments()
    kept = series.kept_sum(r)
    if mode == "compensated":
        residual = tail_mean
    else:
        residual = max(0.0, tail_mean + tail_sd * float(gen.standard_normal()))
    return TrimmedSample(
        r=r, t=t, delta_r=series.delta(r), trimmed_x=kept + residual, mode=mode,
        truncation_index=series.truncation_index, tail_mean=tail_mean, tail_sd=tail_sd,
    )


@dataclass
class TrimmedBatch:
    """Independent replicates; replicate ``i`` uses ``RngStream(seed, i)``."""

    r: int
    t: float
    seed: int
    mode: str
    rel_tol: float
    delta_r: np.ndarray
    trimmed_x: np.ndarray
    truncation_index: np.ndarray
    tail_mean: np.ndarray
    tail_sd: np.ndarray

    @property
    def n(self) -> int:
        return len(self.delta_r)


def simulate_batch(model: LevyTailModel, r: int, t: float, n: int, seed: int,
                   rel_tol: float = DEFAULT_REL_TOL, mode: str = "gaussian-residual",
                   max_points: int = DEFAULT_MAX_POINTS, threads: int = 1) -> TrimmedBatch:
    if n < 1:
        raise ValueError("n must be >= 1")

    def one(i):
        return sample_trimmed(model, r, t, RngStream(seed, i), rel_tol=rel_tol,
                              mode=mode, max_points=max_points)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            samples = list(pool.map(one, range(n)))
    else:
        samples = [one(i) for i in range(n)]
    return TrimmedBatch(
        r=r, t=t, seed=seed, mode=mode, rel_tol=rel_tol,
        delta_r=np.array([s.delta_r for s in samples]),
        trimmed_x=np.array([s.trimmed_x for s in samples]),
        truncation_index=np.array([s.truncation_index for s in samples], dtype=np.int64),
        tail_mean=np.array([s.tail_mean for s in samples]),
        tail_sd=np.array([s.tail_sd for s in samples]),
    )


def normalize(batch: TrimmedBatch, model: LevyTailModel, scheme, c_alpha=None) -> np.ndarray:
    """Map raw replicates to the ``n x 2`` pair normalized according to ``scheme``."""
    scheme = Scheme.parse(scheme)
    if scheme in (Scheme.RV_DET_CENTER, Scheme.SLOW_DET_CENTER) and c_alpha is None:
        c_alpha = model_c_alpha(model)
    check_compatible(scheme, model.gamma, c_alpha=c_alpha, t=batch.t)
    r = batch.r
    if r < 2:
        raise ConfigError("normalized schemes need r >= 2")
    ns = norming_sequences(model, r / batch.t)
    delta, x = batch.delta_r, batch.trimmed_x
    out = np.empty((batch.n, 2))

    if scheme is Scheme.DELTA_ONLY:
        out[:, 0] = np.nan
        out[:, 1] = (delta - ns.b_r) / ns.a_r
        return out

    b = ns.b_r
    if scheme in (Scheme.NEG_DET_SCALE, Scheme.NEG_DET_CENTER):
        out[:, 1] = delta / b
    else:
        out[:, 1] = (delta - b) / ns.a_r

    if scheme in (Scheme.COND_CLT, Scheme.JOINT_RANDOM):
        out[:, 0] = (x - moment_values(model, 1.0, delta)) / np.sqrt(moment_values(model, 2.0, delta))
    elif scheme in (Scheme.NEG_DET_SCALE, Scheme.G0_DET_SCALE):
        out[:, 0] = (x - moment_values(model, 1.0, delta)) / math.sqrt(float(moment_values(model, 2.0, b)))
    elif scheme is Scheme.RV_DET_CENTER:
        out[:, 0] = (x - float(moment_values(model, 1.0, b))) / math.sqrt(float(moment_values(model, 2.0, b)))
    else:  # NEG_DET_CENTER, SLOW_DET_CENTER
        out[:, 0] = (x - float(moment_values(model, 1.0, b))) / (b * math.sqrt(r))
    return out


def sample_normalized(model: LevyTailModel, r: int, t: float, n: int, scheme, seed: int,
                      rel_tol: float = DEFAULT_REL_TOL, mode: str = "gaussian-residual",
                      threads: int = 1) -> np.ndarray:
    scheme = Scheme.parse(scheme)
    c_alpha = None
    if scheme in (Scheme.RV_DET_CENTER, Scheme.SLOW_DET_CENTER):
        c_alpha = model_c_alpha(model)
    check_compatible(scheme, model.gamma, c_alpha=c_alpha, t=t)
    batch = simulate_batch(model, r, t, n, seed, rel_tol=rel_tol, mode=mode, threads=threads)
    return normalize(batch, model, scheme, c_alpha=c_alpha)


CSV_COLUMNS = ("replicate", "col1", "col2", "delta_r", "trimmed_x", "truncation_index", "tail_sd")


def samples_to_csv(batch: TrimmedBatch, pairs: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for i in range(batch.n):
        writer.writerow([i, repr(float(pairs[i, 0])), repr(float(pairs[i, 1])),
                         repr(float(batch.delta_r[i])), repr(float(batch.trimmed_x[i])),
                         int(batch.truncation_index[i]), repr(float(batch.tail_sd[i]))])
    return buf.getvalue()
