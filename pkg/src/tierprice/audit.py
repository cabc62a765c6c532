"""Under-reporting detection and the monthly audit report.

A customer's "typical" usage is the median monthly request count among
customers reporting the same number of licenses. Groups with fewer than
``min_group`` members fall back to the population median requests per
license, scaled by the license count. Customers above ``multiplier`` times
their typical usage, and customers with requests but no licenses, are flagged.
"""

from __future__ import annotations

import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .ingestion import licenses_by_customer
from .months import MonthKey

ZERO_LICENSE = "zero_license_activity"
EXCEEDS = "exceeds_multiplier"
DEFAULT_MULTIPLIER = 6.0
MIN_GROUP = 5


@dataclass(frozen=True)
class AuditFinding:
    customer_guid: str
    month: MonthKey | None
    licenses: int
    requests: int
    baseline: float
    ratio: float  # math.inf when the baseline is zero
    reason: str

    def to_dict(self):
        return {
            "customer_guid": self.customer_guid,
            "month": None if self.month is None else str(self.month),
            "licenses": self.licenses,
            "requests": self.requests,
            "baseline": self.baseline,
            "ratio": None if math.isinf(self.ratio) else self.ratio,
            "reason": self.reason,
        }


class _Baselines:
    """Group medians computed once per population."""

    def __init__(self, population, min_group=MIN_GROUP):
        pop = [(int(l), int(r)) for l, r in population]
        if not pop:
            raise ValueError("empty population")
        groups = defaultdict(list)
        for l, r in pop:
            groups[l].append(r)
        self.group_median = {
            l: float(np.median(v)) for l, v in groups.items() if len(v) >= min_group
        }
        rates = [r / l for l, r in pop if l >= 1]
        self.rate = float(np.median(rates)) if rates else 0.0

    def __call__(self, license_count):
        if license_count <= 0:
            return 0.0
        if license_count in self.group_median:
            return self.group_median[license_count]
        return self.rate * license_count


def typical_usage(population, license_count: int, min_group: int = MIN_GROUP) -> float:
    """Expected monthly requests for a customer with ``license_count`` licenses.

    ``population`` is a sequence of ``(licenses, requests)`` pairs.
    """
    return _Baselines(population, min_group)(int(license_count))


def flag_under_reporters(rows, multiplier=DEFAULT_MULTIPLIER, month=None, min_group=MIN_GROUP):
    """Flag suspicious customers among ``(guid, licenses, requests)`` rows.

    Findings are ordered by descending ratio, ties by guid.
    """
    if not multiplier > 1:
        raise ValueError("multiplier must exceed 1")
    rows = [(g, int(l), int(r)) for g, l, r in rows]
    if not rows:
        return []
    baseline = _Baselines([(l, r) for _, l, r in rows], min_group)
    findings = []
    for guid, lic, req in rows:
        if req <= 0:
            continue
        base = baseline(lic)
        ratio = req / base if base > 0 else math.inf
        if lic == 0:
            findings.append(AuditFinding(guid, month, lic, req, base, ratio, ZERO_LICENSE))
        elif req > multiplier * base:
            findings.append(AuditFinding(guid, month, lic, req, base, ratio, EXCEEDS))
    findings.sort(key=lambda f: (-f.ratio, f.customer_guid))
    return findings


def customer_month_rows(licenses, usage, month: MonthKey):
    """``(guid, licenses, requests)`` for every customer licensed or active in ``month``."""
    lic = licenses_by_customer(licenses, month)
    req = defaultdict(int)
    for u in usage:
        if u.month == month:
            req[u.customer_guid] += u.request_count
    return [(g, lic.get(g, 0), req.get(g, 0)) for g in sorted(set(lic) | set(req))]


def _prior_findings(history_dir, month):
    path = Path(history_dir) / f"{month}.json"
    if not path.exists():
        return None
    with open(path, encoding="utf-8") as fh:
        return {f["customer_guid"] for f in json.load(fh).get("findings", [])}


def streak_lengths(guids, month: MonthKey, history_dir):
    """Consecutive months, this one included, each guid has been flagged."""
    out = {}
    for g in guids:
        n, m = 1, month - 1
        while history_dir is not None:
            prior = _prior_findings(history_dir, m)
            if prior is None or g not in prior:
                break
            n += 1
            m = m - 1
        out[g] = n
    return out


def monthly_audit_report(
    month: MonthKey,
    licenses,
    usage,
    table=None,
    history_dir=None,
    multiplier=DEFAULT_MULTIPLIER,
    customers=None,
):
    """Audit report for ``month`` as a JSON-ready dict.

    Keys: ``month``, ``multiplier``, ``findings``, ``tier_census``,
    ``license_census`` and ``streaks``. Streaks read prior reports from
    ``history_dir/YYYY-MM.json``.
    """
    if not any(u.month == month for u in usage):
        raise ValueError(f"no usage data for {month}")
    rows = customer_month_rows(licenses, usage, month)
    findings = flag_under_reporters(rows, multiplier, month)
    names = {c.guid: c.name for c in customers or ()}

    tier_census = []
    if table is not None:
        counts = Counter(table.assign(r).index for _, _, r in rows)
        tier_census = [{"tier": t.index, "customers": counts.get(t.index, 0)} for t in table.tiers]
    lic_counts = Counter(l for _, l, _ in rows)
    license_census = {str(k): lic_counts[k] for k in sorted(lic_counts)}
    streaks = streak_lengths([f.customer_guid for f in findings], month, history_dir)

    finding_dicts = []
    for f in findings:
        d = f.to_dict()
        if f.customer_guid in names:
            d["name"] = names[f.customer_guid]
        finding_dicts.append(d)
    return {
        "month": str(month),
        "multiplier": multiplier,
        "customers": len(rows),
        "findings": finding_dicts,
        "tier_census": tier_census,
        "license_census": license_census,
        "streaks": [{"customer_guid": g, "streak": streaks[g]} for g in sorted(streaks)],
    }


def render_text(report) -> str:
    lines = [f"Usage audit for {report['month']}", ""]
    lines.append(f"Customers reviewed: {report['customers']}")
    lines.append(f"Flag multiplier: {report['multiplier']:g}x typical usage")
    lines.append("")
    lines.append(f"Findings ({len(report['findings'])}):")
    if not report["findings"]:
        lines.append("  none")
    for f in report["findings"]:
        ratio = "inf" if f["ratio"] is None else f"{f['ratio']:.1f}"
        name = f" ({f['name']})" if "name" in f else ""
        lines.append(
            f"  {f['customer_guid']}{name}: {f['requests']} requests, {f['licenses']} licenses, "
            f"typical {f['baseline']:.1f}, ratio {ratio}, {f['reason']}"
        )
    lines.append("")
    lines.append("License census:")
    for k, v in report["license_census"].items():
        lines.append(f"  {k} licenses: {v}")
    if report["tier_census"]:
        lines.append("")
        lines.append("Tier census:")
        for t in report["tier_census"]:
            lines.append(f"  tier {t['tier']}: {t['customers']}")
    if report["streaks"]:
        lines.append("")
        lines.append("Repeat offenders (consecutive flagged months):")
        for s in report["streaks"]:
            lines.append(f"  {s['customer_guid']}: {s['streak']}")
    return "\n".join(lines) + "\n"


def write_report(report, audit_dir):
    """Write ``audit_dir/YYYY-MM.json`` and ``.txt``; returns both paths."""
    audit_dir = Path(audit_dir)
    audit_dir.mkdir(parents=True, exist_ok=True)
    jpath = audit_dir / f"{report['month']}.json"
    tpath = audit_dir / f"{report['month']}.txt"
    with open(jpath, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(tpath, "w", encoding="utf-8") as fh:
        fh.write(render_text(report))
    return jpath, tpath


class UnderReportingDetector(BaseEstimator):
    """Flag customer-months whose requests are far above typical for their licenses.

    ``X`` has two columns, licenses and monthly requests. ``fit`` learns the
    per-license-count baselines; ``predict`` returns 1 for flagged rows.
    """

    def __init__(self, multiplier=DEFAULT_MULTIPLIER, min_group=MIN_GROUP):
        self.multiplier = multiplier
        self.min_group = min_group

    def _check(self, X):
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 2:
            raise ValueError("X must have two columns: licenses, requests")
        if np.any(X < 0):
            raise ValueError("licenses and requests must be nonnegative")
        return X.astype(np.int64)

    def fit(self, X, y=None):
        if not self.multiplier > 1:
            raise ValueError("multiplier must exceed 1")
        X = self._check(X)
        self.baselines_ = _Baselines(map(tuple, X), self.min_group)
        self.n_features_in_ = 2
        return self

    def baseline(self, licenses):
        check_is_fitted(self, "baselines_")
        return self.baselines_(int(licenses))

    def decision_function(self, X):
        """Requests over typical usage; ``inf`` when typical usage is zero."""
        X = self._check(X)
        out = np.empty(X.shape[0])
        for i, (lic, req) in enumerate(X):
            base = self.baseline(lic)
            out[i] = req / base if base > 0 else (math.inf if req > 0 else 0.0)
        return out

    def predict(self, X):
        X = self._check(X)
        ratio = self.decision_function(X)
        zero = (X[:, 0] == 0) & (X[:, 1] > 0)
        return ((ratio > self.multiplier) | zero).astype(np.int64)
