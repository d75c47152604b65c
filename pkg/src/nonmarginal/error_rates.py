"""Posterior and frequentist error rates, and decay-rate regression.

Data-conditional rates come in two flavors: the plain posterior false
discovery / non-discovery rates built from marginal alternative probabilities,
and their modified versions built from the joint group-correctness
probabilities.  Replicate-averaged (frequentist) rates condition on the
relevant denominator being positive; empty conditioning events are reported as
undefined (None), never imputed as zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import InvalidSpec
from .hypotheses import DecisionConfig, TruthAssignment

RATE_FIELDS = ("pfdr", "pfnr", "pbfdr", "pbfnr", "mpbfdr", "mpbfnr")


@dataclass(frozen=True)
class PosteriorErrorReport:
    """Data-conditional rates for one decision configuration.

    ``fdr_xn``/``fnr_xn`` use marginal alternative probabilities; the modified
    ``mfdr_xn``/``mfnr_xn`` replace them with joint group-correctness
    probabilities.  Denominators are guarded by max(., 1).
    """

    fdr_xn: float
    fnr_xn: float
    mfdr_xn: float
    mfnr_xn: float
    rejection_count: int
    acceptance_count: int


@dataclass(frozen=True)
class FrequentistErrorReport:
    """Replicate-averaged rates with conditioning counts and Monte Carlo errors.

    A rate is None when its conditioning event never occurred; standard errors
    are sample-sd / sqrt(count) and None whenever fewer than two replicates
    condition.
    """

    pfdr: float | None
    pfnr: float | None
    pbfdr: float | None
    pbfnr: float | None
    mpbfdr: float | None
    mpbfnr: float | None
    standard_errors: dict
    n_replicates: int
    n_conditioning_fdr: int
    n_conditioning_fnr: int


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of log(metric) against the sample size.

    ``slope`` is the fitted decay exponent per observation; theory predicts it
    stays below -(exponent_reference - eps) eventually, so ``bound_slack =
    slope + exponent_reference`` is reported instead of testing a sharp
    inequality.  Only strictly positive metric values enter the fit; if fewer
    than two remain the fit is flagged degenerate with slope -inf (all zero)
    or nan (a single usable point).
    """

    metric: str
    ns: tuple
    values: tuple
    normalized_log: tuple
    slope: float
    intercept: float
    r_squared: float
    exponent_reference: float
    bound_slack: float
    degenerate: bool
    n_used: int


def posterior_rates(
    marginals: np.ndarray,
    joint_probs: np.ndarray,
    config: DecisionConfig,
) -> PosteriorErrorReport:
    """Posterior error rates of a decision configuration.

    Truth plays no role here: every ingredient is a posterior probability
    evaluated at the chosen configuration.
    """
    v = np.asarray(marginals, dtype=float)
    w = np.asarray(joint_probs, dtype=float)
    d = config.bits.astype(float)
    if v.size != d.size or w.size != d.size:
        raise InvalidSpec("rate inputs disagree on the hypothesis count")
    rejections = d.sum()
    acceptances = d.size - rejections
    denom_r = max(rejections, 1.0)
    denom_a = max(acceptances, 1.0)
    return PosteriorErrorReport(
        fdr_xn=float(np.dot(d, 1.0 - v) / denom_r),
        fnr_xn=float(np.dot(1.0 - d, v) / denom_a),
        mfdr_xn=float(np.dot(d, 1.0 - w) / denom_r),
        mfnr_xn=float(np.dot(1.0 - d, w) / denom_a),
        rejection_count=int(rejections),
        acceptance_count=int(acceptances),
    )


def false_discovery_proportion(config: DecisionConfig, truth: TruthAssignment) -> float | None:
    """Share of rejections that hit true nulls; None without any rejection."""
    d = config.bits
    rejections = int(d.sum())
    if rejections == 0:
        return None
    return float((d & ~truth.alt_true).sum()) / rejections


def false_nondiscovery_proportion(config: DecisionConfig, truth: TruthAssignment) -> float | None:
    """Share of acceptances that miss true alternatives; None without any acceptance."""
    a = ~config.bits
    acceptances = int(a.sum())
    if acceptances == 0:
        return None
    return float((a & truth.alt_true).sum()) / acceptances


def _conditional_mean(values: list[float]) -> tuple[float | None, float | None, int]:
    count = len(values)
    if count == 0:
        return None, None, 0
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(count)) if count > 1 else None
    return mean, se, count


def frequentist_rates(
    replicates: Sequence[tuple[DecisionConfig, TruthAssignment, PosteriorErrorReport]],
) -> FrequentistErrorReport:
    """Average per-replicate rates over their positive-denominator events."""
    if len(replicates) == 0:
        raise InvalidSpec("need at least one replicate")
    fdp, fnp = [], []
    fdr_x, fnr_x, mfdr_x, mfnr_x = [], [], [], []
    for config, truth, report in replicates:
        if len(config) != len(truth):
            raise InvalidSpec("decision and truth vectors disagree on length")
        p = false_discovery_proportion(config, truth)
        if p is not None:
            fdp.append(p)
            fdr_x.append(report.fdr_xn)
            mfdr_x.append(report.mfdr_xn)
        q = false_nondiscovery_proportion(config, truth)
        if q is not None:
            fnp.append(q)
            fnr_x.append(report.fnr_xn)
            mfnr_x.append(report.mfnr_xn)

    pfdr, se_pfdr, n_fdr = _conditional_mean(fdp)
    pfnr, se_pfnr, n_fnr = _conditional_mean(fnp)
    pbfdr, se_pbfdr, _ = _conditional_mean(fdr_x)
    pbfnr, se_pbfnr, _ = _conditional_mean(fnr_x)
    mpbfdr, se_mpbfdr, _ = _conditional_mean(mfdr_x)
    mpbfnr, se_mpbfnr, _ = _conditional_mean(mfnr_x)
    return FrequentistErrorReport(
        pfdr=pfdr,
        pfnr=pfnr,
        pbfdr=pbfdr,
        pbfnr=pbfnr,
        mpbfdr=mpbfdr,
        mpbfnr=mpbfnr,
        standard_errors={
            "pfdr": se_pfdr,
            "pfnr": se_pfnr,
            "pbfdr": se_pbfdr,
            "pbfnr": se_pbfnr,
            "mpbfdr": se_mpbfdr,
            "mpbfnr": se_mpbfnr,
        },
        n_replicates=len(replicates),
        n_conditioning_fdr=n_fdr,
        n_conditioning_fnr=n_fnr,
    )


def rate_fit(
    metric: str,
    values: Sequence[float],
    ns: Sequence[int],
    exponent_reference: float,
) -> RateFit:
    """Regress log(metric) on n over the strictly positive entries."""
    ns = tuple(int(n) for n in ns)
    if len(ns) < 3:
        raise InvalidSpec("need at least three sample sizes")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise InvalidSpec("sample sizes must be strictly increasing")
    if len(values) != len(ns):
        raise InvalidSpec("values and sample sizes disagree on length")
    vals = tuple(float(v) if v is not None else 0.0 for v in values)
    normalized = tuple(
        math.log(v) / n if v > 0 else math.nan for v, n in zip(vals, ns)
    )
    usable = [(n, v) for n, v in zip(ns, vals) if v > 0 and math.isfinite(v)]
    if len(usable) < 2:
        slope = -math.inf if not usable else math.nan
        return RateFit(
            metric=metric,
            ns=ns,
            values=vals,
            normalized_log=normalized,
            slope=slope,
            intercept=math.nan,
            r_squared=math.nan,
            exponent_reference=exponent_reference,
            bound_slack=math.nan,
            degenerate=True,
            n_used=len(usable),
        )
    xs = np.array([n for n, _ in usable], dtype=float)
    ys = np.log([v for _, v in usable])
    slope, intercept = np.polyfit(xs, ys, 1)
    residuals = ys - (slope * xs + intercept)
    total = float(((ys - ys.mean()) ** 2).sum())
    r_squared = 1.0 if total == 0.0 else 1.0 - float((residuals**2).sum()) / total
    return RateFit(
        metric=metric,
        ns=ns,
        values=vals,
        normalized_log=normalized,
        slope=float(slope),
        intercept=float(intercept),
        r_squared=r_squared,
        exponent_reference=exponent_reference,
        bound_slack=float(slope) + exponent_reference,
        degenerate=False,
        n_used=len(usable),
    )
