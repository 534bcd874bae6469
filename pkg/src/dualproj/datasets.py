"""Built-in benchmark datasets and generic loaders.

Three kinds of inputs feed the benchmark and the service: small synthetic
point clouds with known structure, a raw-pixel digit subsample, and genomic
datasets (either the bundled synthetic one or a manifest on disk).
"""

import numpy as np
import pandas as pd

from .genomics import generate_synthetic_dataset, load_dataset
from .validation import check_matrix


def three_gaussians(n=300, d=10, sigma=0.5, separation=8.0, seed=0):
    """Three spherical clusters with equidistant centers.

    Centers form an equilateral triangle with side ``separation`` in the
    first two coordinates; remaining dimensions carry only noise. Returns
    ``(X, labels)`` with points grouped by cluster.
    """
    if n < 3 or d < 2:
        raise ValueError("need n >= 3 points and d >= 2 dimensions")
    rng = np.random.default_rng(seed)
    centers = np.zeros((3, d))
    centers[1, 0] = separation
    centers[2, 0] = separation / 2.0
    centers[2, 1] = separation * np.sqrt(3.0) / 2.0
    sizes = [n // 3 + (1 if r < n % 3 else 0) for r in range(3)]
    X = np.vstack([
        centers[c] + sigma * rng.standard_normal((sizes[c], d)) for c in range(3)
    ])
    labels = np.repeat(np.arange(3), sizes)
    return X, labels


def digit_subsample(per_class=100, seed=0):
    """Balanced subsample of the bundled handwritten digits as raw pixels.

    The 8x8 images are bilinearly upsampled to 28x28 so each point is a
    784-dim pixel vector. Returns ``(X, labels)``.
    """
    from scipy.ndimage import zoom
    from sklearn.datasets import load_digits

    digits = load_digits()
    rng = np.random.default_rng(seed)
    picks = []
    for cls in range(10):
        idx = np.flatnonzero(digits.target == cls)
        if len(idx) < per_class:
            raise ValueError(
                f"class {cls} has only {len(idx)} images, need {per_class}"
            )
        picks.append(np.sort(rng.choice(idx, size=per_class, replace=False)))
    sel = np.concatenate(picks)
    big = zoom(digits.images[sel], (1.0, 3.5, 3.5), order=1)
    X = big.reshape(len(sel), -1).astype(np.float64)
    return X, digits.target[sel].copy()


def load_feature_csv(path):
    """Read a precomputed feature matrix from CSV.

    Expects a header row; a non-numeric first column is treated as the row
    id. Returns ``(X, ids)``.
    """
    df = pd.read_csv(path)
    if df.shape[0] == 0 or df.shape[1] == 0:
        raise ValueError(f"{path} holds no data rows")
    first = df.columns[0]
    if df[first].dtype == object:
        ids = [str(v) for v in df[first]]
        body = df.drop(columns=[first])
    else:
        ids = [str(i) for i in range(len(df))]
        body = df
    X = check_matrix(body.to_numpy(dtype=np.float64), name=str(path))
    return X, ids


# Fixed recipe so every run and every machine sees the same bundled set. The
# twelve-parent panel gives the hybrids half-sib family structure, which is
# what makes a 2-D map of them worth reading.
BUNDLED_GENOMIC = dict(
    n_hybrids=600, n_genes=400, n_regulatory=30, effect_size=1.2, seed=7,
    n_parents=12,
)


def bundled_genomic():
    """The bundled synthetic genomic dataset (deterministic)."""
    return generate_synthetic_dataset(**BUNDLED_GENOMIC)


def resolve_dataset(name_or_path):
    """Map a benchmark dataset argument to ``(X, display_name)``.

    Built-in names: ``digits``, ``genomic``, ``gaussians``. Anything else is
    treated as a path: ``*.csv`` loads a feature matrix, ``*.json`` a genomic
    dataset manifest (genotype values become the features).
    """
    key = str(name_or_path).lower()
    if key == "digits":
        X, _ = digit_subsample()
        return X, "digits"
    if key == "genomic":
        ds = bundled_genomic()
        return ds.genotypes.values.astype(np.float64), "genomic"
    if key in ("gaussians", "3gauss"):
        X, _ = three_gaussians()
        return X, "gaussians"
    text = str(name_or_path)
    if text.endswith(".csv"):
        X, _ = load_feature_csv(text)
        return X, text
    if text.endswith(".json"):
        ds = load_dataset(text)
        return ds.genotypes.values.astype(np.float64), ds.name
    raise ValueError(
        f"unknown dataset {name_or_path!r}: expected digits, genomic, gaussians, "
        "a feature .csv, or a manifest .json"
    )
