"""Monte Carlo campaigns and distributional reports for X, Y, Z samples.

Reproducibility contract: every replicate owns a Philox stream keyed by
(master_seed, kind, n, replicate_id), results are reduced in
replicate_id order, and summary statistics are computed from exact
integer power sums.  Two runs with the same campaign spec are therefore
bit-identical regardless of worker-thread count.

Normality verdicts are trend-based (the limit theorem carries no rate):
skewness and excess kurtosis must shrink along the n-grid and the
Kolmogorov-Smirnov distance at the largest n must clear a threshold
whose default (0.05) sits far above the self-calibration noise floor of
a true normal sample at the same replicate count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtr

from .errors import BudgetExceeded, DomainError, InsufficientData
from .exact import binomial_weights_float, z_raw_moments, zeta_moments
from .graphs import make_stream, sample_gnp
from .numerics import ModelParams
from .search import DEFAULT_BUDGET, CostSample, run_exhaustive_mis, sample_Y, sample_Z

__all__ = [
    "KIND_IDS",
    "SimulationSummary",
    "run_campaign",
    "summarize",
    "ks_to_normal",
    "calibrate_ks",
    "normality_report",
    "z_limit_report",
    "x_vs_y_variance",
]

KIND_IDS = {"X": 1, "Y": 2, "Z": 3}


@dataclass
class SimulationSummary:
    """Per-(kind, n) campaign statistics."""

    kind: str
    n: int
    p: str
    replicates: int
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    ks_distance: float
    mean_stderr: float
    master_seed: int
    budget_exhausted: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def _replicate_stream(master_seed: int, kind: str, n: int, replicate: int):
    return make_stream(master_seed, KIND_IDS[kind], n, replicate)


def _draw_one(kind, n, params, master_seed, replicate, budget, pmf_rows):
    stream = _replicate_stream(master_seed, kind, n, replicate)
    if kind == "X":
        g = sample_gnp(n, params, stream, seed=master_seed)
        alpha, cost = run_exhaustive_mis(g, budget=budget)
        return CostSample("X", n, cost, alpha=alpha, replicate_id=replicate, seed=master_seed)
    if kind == "Y":
        cost = sample_Y(n, params, stream, budget=budget, pmf_rows=pmf_rows)
        return CostSample("Y", n, cost, replicate_id=replicate, seed=master_seed)
    if kind == "Z":
        cost = sample_Z(n, stream, budget=budget)
        return CostSample("Z", n, cost, replicate_id=replicate, seed=master_seed)
    raise DomainError(f"unknown sample kind {kind!r}")


def run_campaign(
    kind: str,
    n_grid: Sequence[int],
    params: ModelParams,
    replicates: int,
    master_seed: int,
    budget: int = DEFAULT_BUDGET,
    threads: int = 1,
    keep_samples: bool = False,
):
    """R samples per grid point; returns (summaries, samples_by_n).

    samples_by_n maps n to the replicate-ordered list of CostSample
    (empty when keep_samples is False).  Replicates that trip the
    budget guard are dropped from the statistics and counted in the
    summary's budget_exhausted field.
    """
    if replicates < 1:
        raise DomainError("replicates must be >= 1")
    summaries = []
    samples_by_n = {}
    for n in n_grid:
        pmf_rows = {}
        if kind == "Y" and n >= 2:
            for k in range(2, n + 1):
                row = binomial_weights_float(k, params)
                row /= row.sum()
                pmf_rows[k] = row

        def one(rep, _n=n, _rows=pmf_rows):
            try:
                return _draw_one(kind, _n, params, master_seed, rep, budget, _rows)
            except BudgetExceeded:
                return None

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(one, range(replicates)))
        else:
            results = [one(rep) for rep in range(replicates)]
        kept = [s for s in results if s is not None]
        exhausted = replicates - len(kept)
        if not kept:
            raise BudgetExceeded(
                f"every replicate of kind {kind} at n={n} exceeded the budget",
                partial=summaries,
            )
        summary = summarize(kind, n, params, kept, master_seed)
        summary.budget_exhausted = exhausted
        summaries.append(summary)
        samples_by_n[n] = kept if keep_samples else []
    return summaries, samples_by_n


def _central_sums(values):
    """Exact integer power sums -> float central moments m1..m4."""
    r = len(values)
    s1 = sum(values)
    s2 = sum(v * v for v in values)
    s3 = sum(v ** 3 for v in values)
    s4 = sum(v ** 4 for v in values)
    mean = s1 / r
    # E(v-mean)^k expanded in raw sums, evaluated exactly then floated
    m2 = s2 / r - mean ** 2
    m3 = s3 / r - 3 * mean * (s2 / r) + 2 * mean ** 3
    m4 = s4 / r - 4 * mean * (s3 / r) + 6 * mean ** 2 * (s2 / r) - 3 * mean ** 4
    return float(mean), float(m2), float(m3), float(m4)


def ks_to_normal(values) -> float:
    """Sup distance of the sample-standardized empirical CDF to Phi.

    Composite form (mean and sd estimated from the sample), matching
    the calibration run so thresholds stay comparable.
    """
    x = np.asarray(values, dtype=np.float64)
    r = len(x)
    sd = x.std(ddof=1)
    if sd == 0:
        return 1.0
    z = np.sort((x - x.mean()) / sd)
    cdf = ndtr(z)
    i = np.arange(1, r + 1)
    return float(max(np.max(i / r - cdf), np.max(cdf - (i - 1) / r)))


def summarize(kind, n, params, samples, master_seed) -> SimulationSummary:
    values = [s.cost for s in sorted(samples, key=lambda s: s.replicate_id)]
    r = len(values)
    mean, m2, m3, m4 = _central_sums(values)
    variance = m2 * r / (r - 1) if r > 1 else 0.0
    if m2 > 0:
        skew = m3 / m2 ** 1.5
        kurt = m4 / m2 ** 2 - 3.0
        ks = ks_to_normal(values)
    else:
        skew = 0.0
        kurt = 0.0
        ks = 1.0 if r > 1 else 0.0
    return SimulationSummary(
        kind=kind,
        n=n,
        p=params.label(),
        replicates=r,
        mean=mean,
        variance=variance,
        skewness=skew,
        excess_kurtosis=kurt,
        ks_distance=ks,
        mean_stderr=math.sqrt(variance / r) if r > 0 else 0.0,
        master_seed=master_seed,
    )


def calibrate_ks(replicates: int, batches: int = 200, master_seed: int = 0):
    """KS distances of ``batches`` true-normal samples of the given size.

    Returns the sorted distances; their 99th percentile is the noise
    floor a normality threshold must clear.
    """
    out = []
    for b in range(batches):
        stream = make_stream(master_seed, 99, replicates, b)
        out.append(ks_to_normal(stream.standard_normal(replicates)))
    out.sort()
    return out


def _percentile(sorted_values, q):
    idx = min(len(sorted_values) - 1, max(0, int(math.ceil(q * len(sorted_values))) - 1))
    return sorted_values[idx]


def normality_report(
    summaries: Sequence[SimulationSummary],
    exact_moment_ratios: Optional[dict] = None,
    ks_threshold: float = 0.05,
    calibration: Optional[Sequence[float]] = None,
    slack: int = 1,
) -> dict:
    """Trend verdict for the asymptotic normality of Y_n.

    summaries must cover >= 3 increasing n.  exact_moment_ratios may
    carry {'m3': [...], 'm4': [...]} rows of M_{n,3}/sigma^3 and
    M_{n,4}/sigma^4 from the exact engine, asserted to move to 0 and 3.
    """
    if len(summaries) < 3:
        raise InsufficientData("normality trend needs >= 3 grid points")
    summaries = sorted(summaries, key=lambda s: s.n)
    from .asymptotics import shrinks_in_magnitude, trend_toward_one

    skews = [s.skewness for s in summaries]
    kurts = [s.excess_kurtosis for s in summaries]
    ks_last = summaries[-1].ks_distance
    report = {
        "n_grid": [s.n for s in summaries],
        "skewness": skews,
        "excess_kurtosis": kurts,
        "skewness_stderr": math.sqrt(6.0 / summaries[-1].replicates),
        "kurtosis_stderr": math.sqrt(24.0 / summaries[-1].replicates),
        "ks_last": ks_last,
        "ks_threshold": ks_threshold,
        "skew_shrinks": shrinks_in_magnitude(skews, slack),
        "kurt_shrinks": shrinks_in_magnitude(kurts, slack),
        "ks_ok": ks_last < ks_threshold,
    }
    if calibration is not None:
        q99 = _percentile(sorted(calibration), 0.99)
        report["ks_calibration_q99"] = q99
        report["threshold_clears_noise_floor"] = ks_threshold > q99
    if exact_moment_ratios is not None:
        m3 = exact_moment_ratios.get("m3", [])
        m4 = exact_moment_ratios.get("m4", [])
        report["exact_m3_over_sigma3"] = [float(v) for v in m3]
        report["exact_m4_over_sigma4"] = [float(v) for v in m4]
        report["exact_m3_to_zero"] = shrinks_in_magnitude(m3, slack)
        report["exact_m4_to_three"] = trend_toward_one(
            [float(v) / 3.0 for v in m4], slack
        )
    report["verdict"] = bool(
        report["skew_shrinks"]
        and report["kurt_shrinks"]
        and report["ks_ok"]
        and report.get("exact_m3_to_zero", True)
        and report.get("exact_m4_to_three", True)
    )
    return report


def z_limit_report(
    summaries_with_samples,
    nu_values,
    stderr_band: float = 4.0,
) -> dict:
    """Non-normality verdict for Z_n / nu_n with limit-moment targets.

    summaries_with_samples: list of (SimulationSummary, samples).
    nu_values: {n: exact nu_n}.  The first four sample moments of
    Z_n/nu_n are compared to zeta_1..zeta_4 within ``stderr_band``
    sample standard errors; the zeta-implied skewness and excess
    kurtosis witness the non-normal limit.  Finite-n exact targets
    E[(Z_n/nu_n)^m] from the raw-moment recurrence are attached for
    context since the limit moments converge only like n^{-1/2}.
    """
    if len(summaries_with_samples) < 2:
        raise InsufficientData("z-limit report needs >= 2 grid points")
    zeta = zeta_moments(4)
    z2, z3, z4 = (float(zeta[m]) for m in (2, 3, 4))
    skew_limit = (z3 - 3 * z2 + 2) / (z2 - 1) ** 1.5
    kurt_limit = (z4 - 4 * z3 + 6 * z2 - 3) / (z2 - 1) ** 2 - 3
    rows = []
    max_n = max(s.n for s, _ in summaries_with_samples)
    exact_raw = z_raw_moments(max_n, 4)
    for summary, samples in sorted(summaries_with_samples, key=lambda t: t[0].n):
        n = summary.n
        nu = float(nu_values[n])
        w = np.array([s.cost for s in samples], dtype=np.float64) / nu
        r = len(w)
        row = {"n": n, "replicates": r, "nu": nu}
        ok = True
        for m in range(1, 5):
            wm = w ** m
            est = float(wm.mean())
            se = float(wm.std(ddof=1) / math.sqrt(r))
            target = float(zeta[m])
            exact_target = float(exact_raw[n][m] / exact_raw[n][1] ** m)
            within = abs(est - target) <= stderr_band * se
            row[f"moment{m}"] = est
            row[f"moment{m}_stderr"] = se
            row[f"zeta{m}"] = target
            row[f"moment{m}_exact_finite_n"] = exact_target
            row[f"moment{m}_within_band"] = within
            ok = ok and within
        row["all_moments_within_band"] = ok
        rows.append(row)
    sample_skew = [s.skewness for s, _ in summaries_with_samples]
    report = {
        "rows": rows,
        "zeta_skewness": skew_limit,
        "zeta_excess_kurtosis": kurt_limit,
        "nonnormal_witness": abs(skew_limit) > 0.5,
        "sample_skewness": sample_skew,
        "sample_skew_bounded_away_from_zero": all(
            s > skew_limit / 2 for s in sample_skew
        ),
        "moments_within_band": all(r["all_moments_within_band"] for r in rows),
    }
    report["verdict"] = bool(
        report["nonnormal_witness"]
        and report["sample_skew_bounded_away_from_zero"]
        and report["moments_within_band"]
    )
    return report


def x_vs_y_variance(
    x_summaries_with_samples,
    y_summaries_with_samples,
    bootstrap: int = 500,
    master_seed: int = 0,
) -> dict:
    """Variance-ratio table V(X_n)/V(Y_n) with bootstrap CIs.

    Purely observational: the dependent-model variance has no known
    law, so nothing is asserted beyond positivity; a concavity fit is
    recorded for the qualitative record.
    """
    xs = {s.n: (s, v) for s, v in x_summaries_with_samples}
    ys = {s.n: (s, v) for s, v in y_summaries_with_samples}
    common = sorted(set(xs) & set(ys))
    if not common:
        raise InsufficientData("no common n between X and Y campaigns")
    rows = []
    for n in common:
        sx, vx = xs[n]
        sy, vy = ys[n]
        ratio = sx.variance / sy.variance if sy.variance > 0 else math.inf
        lo = hi = ratio
        if bootstrap > 0 and sy.variance > 0:
            ax = np.array([s.cost for s in vx], dtype=np.float64)
            ay = np.array([s.cost for s in vy], dtype=np.float64)
            stream = make_stream(master_seed, 77, n, 0)
            boots = []
            for _ in range(bootstrap):
                bx = stream.choice(ax, size=len(ax), replace=True)
                by = stream.choice(ay, size=len(ay), replace=True)
                vyb = by.var(ddof=1)
                if vyb > 0:
                    boots.append(bx.var(ddof=1) / vyb)
            if boots:
                boots.sort()
                lo = boots[max(0, int(0.025 * len(boots)) - 1)]
                hi = boots[min(len(boots) - 1, int(math.ceil(0.975 * len(boots))) - 1)]
        rows.append({"n": n, "ratio": ratio, "ci_low": lo, "ci_high": hi})
    report = {"rows": rows}
    if len(rows) >= 3:
        # concavity of ratio vs n: sign of the quadratic fit coefficient
        ns = np.array([r["n"] for r in rows], dtype=np.float64)
        rs = np.array([r["ratio"] for r in rows], dtype=np.float64)
        coeffs = np.polyfit(ns, rs, 2)
        report["quadratic_coefficient"] = float(coeffs[0])
        report["concave_in_n"] = bool(coeffs[0] < 0)
    return report
