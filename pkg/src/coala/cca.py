"""Canonical correlation similarity between embedding matrices and
acoustic-feature statistic matrices."""

import numpy as np
import scipy.linalg

ENERGY_KEEP = 0.99
RIDGE = 1e-6
STAT_NAMES = ("mean", "var", "skew")
DESCRIPTOR_FAMILIES = ("mfcc", "chroma", "centroid", "bandwidth")


def stat(matrix, which):
    """Per-dimension statistic over frames; matrix is [dims x frames].

    Skewness is m3/m2^(3/2) with central moments; zero-variance dims get 0.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if which == "mean":
        return matrix.mean(axis=1)
    if which == "var":
        return matrix.var(axis=1)
    if which == "skew":
        if matrix.shape[1] < 3:
            raise ValueError(f"skewness needs >= 3 frames, got {matrix.shape[1]}")
        centered = matrix - matrix.mean(axis=1, keepdims=True)
        m2 = (centered ** 2).mean(axis=1)
        m3 = (centered ** 3).mean(axis=1)
        return np.where(m2 > 0, m3 / np.where(m2 > 0, m2, 1.0) ** 1.5, 0.0)
    raise ValueError(f"unknown statistic {which!r}")


def _reduce(x, energy):
    """Center and keep the leading principal scores holding `energy` of
    the variance, rescaled to unit variance (CCA is invariant to the
    rescaling, and it keeps the ridge bias negligible)."""
    n = x.shape[0]
    xc = x - x.mean(axis=0)
    u, s, _ = np.linalg.svd(xc, full_matrices=False)
    if s.sum() == 0:
        return xc[:, :1] * 0.0
    frac = np.cumsum(s ** 2) / np.sum(s ** 2)
    k = int(np.searchsorted(frac, energy) + 1)
    return u[:, :k] * np.sqrt(n - 1)


def cca_similarity(x, y, energy=ENERGY_KEEP, ridge=RIDGE, top_k=None):
    """Mean canonical correlation between row-paired views x [n,p], y [n,q].

    Both sides are centered and spectrally pre-reduced to `energy`
    variance; covariances get a ridge before whitening.  Result in [0,1].
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"row counts differ: {x.shape[0]} vs {y.shape[0]}")
    n = x.shape[0]
    xr = _reduce(x, energy)
    yr = _reduce(y, energy)
    p, q = xr.shape[1], yr.shape[1]
    if n <= max(p, q):
        raise ValueError(
            f"need more samples than reduced dims (n={n}, dims={max(p, q)}); "
            "add samples or reduce harder")
    cxx = xr.T @ xr / (n - 1) + ridge * np.eye(p)
    cyy = yr.T @ yr / (n - 1) + ridge * np.eye(q)
    cxy = xr.T @ yr / (n - 1)
    ixx = scipy.linalg.fractional_matrix_power(cxx, -0.5).real
    iyy = scipy.linalg.fractional_matrix_power(cyy, -0.5).real
    corrs = np.clip(np.linalg.svd(ixx @ cxy @ iyy, compute_uv=False), 0.0, 1.0)
    k = min(p, q) if top_k is None else min(top_k, min(p, q))
    return float(corrs[:k].mean())


def descriptor_stat_matrix(descs, family, which):
    """Rows = clips, columns = per-dim `which` statistic of one family."""
    rows = [stat(getattr(d, family), which) for d in descs]
    return np.array(rows)


def report(embeddings, descs, energy=ENERGY_KEEP, ridge=RIDGE, top_k=None):
    """4 descriptor families x 3 statistics similarity grid.

    embeddings: dict clip_id -> embedding vector;
    descs: dict clip_id -> AcousticDescriptors for the same clip set.
    """
    missing = sorted(set(embeddings) ^ set(descs))
    if missing:
        raise ValueError(f"clip sets differ; unmatched ids: {missing[:10]}")
    ids = sorted(embeddings)
    emb = np.array([embeddings[i] for i in ids])
    grid = {}
    for family in DESCRIPTOR_FAMILIES:
        for which in STAT_NAMES:
            mat = descriptor_stat_matrix([descs[i] for i in ids], family, which)
            grid[(family, which)] = cca_similarity(emb, mat, energy, ridge, top_k)
    return grid


def render_report(grid):
    lines = [f"{'':<12}" + "".join(f"{s:>8}" for s in STAT_NAMES)]
    for family in DESCRIPTOR_FAMILIES:
        lines.append(f"{family:<12}"
                     + "".join(f"{grid[(family, s)]:>8.3f}" for s in STAT_NAMES))
    return "\n".join(lines)


def report_csv(grid):
    lines = ["descriptor,statistic,similarity"]
    for family in DESCRIPTOR_FAMILIES:
        for which in STAT_NAMES:
            lines.append(f"{family},{which},{grid[(family, which)]:.6f}")
    return "\n".join(lines) + "\n"
