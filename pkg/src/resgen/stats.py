"""Dataset statistics and the forward-response relative-error metric."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats as _st

from .core import LOG_RHO_MAX, VoxelGrid
from .errors import NumericError, ValidationError

SIGNIFICANCE = 0.01
RESISTIVITY_BINS = 40


@dataclass
class HistogramReport:
    variable: str
    edges: list
    counts: list
    total: int
    chi2: Optional[float] = None
    df: Optional[int] = None
    p_value: Optional[float] = None
    critical_value: Optional[float] = None
    reference: Optional[str] = None
    skewness: Optional[float] = None

    @property
    def uniform_ok(self) -> bool:
        """True when chi-square does not reject uniformity at the 1% level."""
        return self.chi2 is not None and self.chi2 < self.critical_value

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def format(self) -> str:
        lines = [f"{self.variable} (n={self.total})"]
        labels = _bin_labels(self.edges)
        width = max(len(s) for s in labels)
        for label, c in zip(labels, self.counts):
            frac = c / self.total if self.total else 0.0
            lines.append(f"  {label:>{width}}  {c:>10d}  {100 * frac:6.2f}%")
        if self.chi2 is not None:
            verdict = "uniform" if self.uniform_ok else "NOT uniform"
            lines.append(f"  chi2={self.chi2:.4f} df={self.df} p={self.p_value:.4g} "
                         f"crit({SIGNIFICANCE})={self.critical_value:.2f} -> {verdict}")
        if self.skewness is not None:
            lines.append(f"  skewness={self.skewness:.4f}")
        return "\n".join(lines)


def _bin_labels(edges):
    if all(float(e) - 0.5 == int(float(e) - 0.5) for e in edges):
        return [str(int(e + 0.5)) for e in edges[:-1]]
    return [f"[{a:.3f},{b:.3f})" for a, b in zip(edges[:-1], edges[1:])]


def chi_square_uniform(counts) -> tuple:
    """Pearson statistic against equal expected counts; returns ``(chi2, df)``."""
    obs = np.asarray(counts, dtype=np.float64)
    expected = obs.sum() / obs.size
    return float(((obs - expected) ** 2 / expected).sum()), obs.size - 1


def _uniform_report(variable, values, lo, hi) -> HistogramReport:
    values = list(values)
    if not values:
        raise ValidationError(f"no values for {variable}")
    bins = np.arange(lo, hi + 1)
    counts = np.zeros(bins.size, dtype=np.int64)
    for v in values:
        if not lo <= v <= hi:
            raise ValidationError(f"{variable} value {v} outside [{lo}, {hi}]")
        counts[v - lo] += 1
    chi2, df = chi_square_uniform(counts)
    return HistogramReport(
        variable=variable,
        edges=[float(b) - 0.5 for b in bins] + [hi + 0.5],
        counts=counts.tolist(),
        total=int(counts.sum()),
        chi2=chi2, df=df,
        p_value=float(_st.chi2.sf(chi2, df)),
        critical_value=float(_st.chi2.ppf(1.0 - SIGNIFICANCE, df)),
        reference="uniform",
    )


def _records(manifest):
    return manifest.records if hasattr(manifest, "records") else list(manifest)


def layer_count_histogram(manifest) -> HistogramReport:
    """Layer counts over layered models (halfspace models carry none)."""
    vals = [r.n_layers for r in _records(manifest) if r.n_layers is not None]
    return _uniform_report("n_layers", vals, 3, 7)


def anomaly_count_histogram(manifest) -> HistogramReport:
    """Anomaly counts over models that contain anomalies."""
    vals = [r.n_anomalies for r in _records(manifest) if r.category.has_anomalies]
    return _uniform_report("n_anomalies", vals, 1, 5)


def resistivity_histogram(grids, n_bins: int = RESISTIVITY_BINS) -> HistogramReport:
    """Voxel-weighted histogram of log10(resistivity) over ``[0, log10 2000]``.

    The chi-square against a flat reference and the skewness are reported
    for description only.
    """
    edges = np.linspace(0.0, LOG_RHO_MAX, n_bins + 1)
    counts = np.zeros(n_bins, dtype=np.int64)
    s1 = s2 = s3 = 0.0
    n = 0
    for g in grids:
        v = g.values if isinstance(g, VoxelGrid) else np.asarray(g)
        lv = np.log10(v.astype(np.float64).ravel())
        c, _ = np.histogram(lv, bins=edges)
        counts += c
        n += lv.size
        s1 += lv.sum()
        s2 += (lv * lv).sum()
        s3 += (lv ** 3).sum()
    if n == 0:
        raise ValidationError("no grids supplied")
    mean = s1 / n
    var = s2 / n - mean * mean
    m3 = s3 / n - 3 * mean * s2 / n + 2 * mean**3
    skew = m3 / var**1.5 if var > 0 else 0.0
    chi2, df = chi_square_uniform(counts)
    return HistogramReport(
        variable="log10_resistivity",
        edges=edges.tolist(),
        counts=counts.tolist(),
        total=int(n),
        chi2=chi2, df=df,
        p_value=float(_st.chi2.sf(chi2, df)),
        critical_value=float(_st.chi2.ppf(1.0 - SIGNIFICANCE, df)),
        reference="uniform (descriptive)",
        skewness=float(skew),
    )


def empirical_vertical_covariance(grids, max_lag: int, min_models: int = 1000) -> np.ndarray:
    """Lag-``h`` covariance of log10(rho) along z, pooled over columns and models.

    ``cov(h) = E[X_k X_{k+h}] - E[X_k] E[X_{k+h}]`` for ``h = 0..max_lag`` cells.
    """
    sxy = np.zeros(max_lag + 1)
    sx = np.zeros(max_lag + 1)
    sy = np.zeros(max_lag + 1)
    cnt = np.zeros(max_lag + 1)
    n_models = 0
    for g in grids:
        v = g.values if isinstance(g, VoxelGrid) else np.asarray(g)
        lv = np.log10(v.astype(np.float64)).reshape(-1, v.shape[-1])
        nz = lv.shape[1]
        if max_lag >= nz:
            raise ValidationError(f"max_lag {max_lag} needs more than {nz} cells in depth")
        for h in range(max_lag + 1):
            a = lv[:, : nz - h]
            b = lv[:, h:]
            sxy[h] += (a * b).sum()
            sx[h] += a.sum()
            sy[h] += b.sum()
            cnt[h] += a.size
        n_models += 1
    if n_models < min_models:
        raise ValidationError(f"need at least {min_models} grids, got {n_models}")
    return sxy / cnt - (sx / cnt) * (sy / cnt)


def relative_error(pred, ref, mode: str = "aggregate", eps: float = 1e-12) -> float:
    """Relative error in percent.

    ``aggregate``: ``100 sum|pred - ref| / sum|ref|``.
    ``elementwise``: ``100 mean(|pred - ref| / max(|ref|, eps))``.
    """
    p = np.asarray(pred, dtype=np.float64)
    r = np.asarray(ref, dtype=np.float64)
    if p.shape != r.shape:
        raise ValidationError(f"shape mismatch: {p.shape} vs {r.shape}")
    if r.size == 0 or not np.any(r):
        raise ValidationError("reference is empty or all zero")
    if mode not in ("aggregate", "elementwise"):
        raise ValidationError(f"unknown relative-error mode {mode!r}")
    diff = np.abs(p - r)
    with np.errstate(over="ignore", invalid="ignore"):
        if mode == "aggregate":
            out = 100.0 * diff.sum() / np.abs(r).sum()
        else:
            out = 100.0 * np.mean(diff / np.maximum(np.abs(r), eps))
    if not np.isfinite(out):
        raise NumericError("relative error is not finite (inputs non-finite or reference too small)")
    return float(out)


def summarize(reports) -> dict:
    return {r.variable: r.to_dict() for r in reports}

