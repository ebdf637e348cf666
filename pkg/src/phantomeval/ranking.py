"""Distributional comparison of feature ensembles.

The headline metric: fit a PCA on the training feature matrix, project both
ensembles, then compare the distribution of cosine distances between random
train/train pairs against random train/generated pairs with the two-sample
Kolmogorov-Smirnov statistic, bootstrapping the projected sets to get a
mean and spread. A Frechet distance between Gaussian fits of external
embeddings serves as the stage-1 quality gate, and k-NN density/coverage
quantify per-class fidelity and diversity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import FeatureMatrix, PUBLIC_FEATURE_NAMES


@dataclass(frozen=True)
class PCAModel:
    """Standardization vectors plus an orthonormal component basis."""

    mean: np.ndarray  # (D_eff,)
    scale: np.ndarray  # (D_eff,)
    components: np.ndarray  # (D_eff, k), orthonormal columns
    explained_variance: np.ndarray  # (k,), non-increasing
    medians: np.ndarray  # (D_eff,) imputation values from training
    kept_names: tuple[str, ...]
    dropped: dict[str, str] = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.components.shape[1]


def fit_pca(matrix: FeatureMatrix, k: int = 10, *, clamp_k: bool = False) -> PCAModel:
    """Standardized PCA of the training matrix via SVD.

    All-NaN and zero-variance columns are dropped (recorded with reasons);
    remaining NaNs are imputed with the training column median. Component
    signs follow the convention that the largest-magnitude loading of each
    component is positive.
    """
    x = np.asarray(matrix.values, dtype=np.float64)
    names = matrix.names
    n = x.shape[0]
    dropped: dict[str, str] = {}

    all_nan = np.isnan(x).all(axis=0)
    for i in np.flatnonzero(all_nan):
        dropped[names[i]] = "all-nan"
    keep = ~all_nan
    x = x[:, keep]
    kept_names = [names[i] for i in np.flatnonzero(keep)]

    medians = np.nanmedian(x, axis=0)
    nan_r, nan_c = np.nonzero(np.isnan(x))
    x = x.copy()
    x[nan_r, nan_c] = medians[nan_c]

    std = x.std(axis=0)
    zero_var = std == 0
    for i in np.flatnonzero(zero_var):
        dropped[kept_names[i]] = "zero-variance"
    x = x[:, ~zero_var]
    medians = medians[~zero_var]
    kept_names = [nm for nm, z in zip(kept_names, ~zero_var) if z]
    std = std[~zero_var]

    d_eff = x.shape[1]
    if clamp_k:
        k = min(k, d_eff)
    if d_eff < k:
        raise ValueError(f"only {d_eff} usable feature columns for k={k}")
    if n <= k:
        raise ValueError(f"need more than k={k} rows, got {n}")

    mean = x.mean(axis=0)
    z = (x - mean) / std
    _, s, vt = np.linalg.svd(z, full_matrices=False)
    components = vt[:k].T.copy()
    explained = (s[:k] ** 2) / (n - 1)
    # Deterministic sign: largest-magnitude loading per component is positive.
    for j in range(k):
        i = int(np.argmax(np.abs(components[:, j])))
        if components[i, j] < 0:
            components[:, j] = -components[:, j]
    return PCAModel(
        mean=mean,
        scale=std,
        components=components,
        explained_variance=explained,
        medians=medians,
        kept_names=tuple(kept_names),
        dropped=dropped,
    )


def project(model: PCAModel, matrix: FeatureMatrix) -> np.ndarray:
    """Project a feature matrix into the model's component space."""
    lookup = {n: i for i, n in enumerate(matrix.names)}
    try:
        cols = [lookup[n] for n in model.kept_names]
    except KeyError as exc:
        raise ValueError(f"matrix lacks feature {exc.args[0]!r} required by the PCA model") from None
    x = np.asarray(matrix.values, dtype=np.float64)[:, cols]
    nan_r, nan_c = np.nonzero(np.isnan(x))
    if nan_r.size:
        x = x.copy()
        x[nan_r, nan_c] = model.medians[nan_c]
    return ((x - model.mean) / model.scale) @ model.components


def cosine_pair_distribution(
    a: np.ndarray,
    b: np.ndarray,
    n_pairs: int = 10000,
    rng: np.random.Generator | int = 0,
    *,
    same_set: bool | None = None,
) -> tuple[np.ndarray, int]:
    """Sampled cosine distances between random cross-set pairs.

    When both arguments are the same set, pairs drawing the same row twice
    are rejected and redrawn, as are pairs touching a zero-norm vector; the
    redraw count is returned alongside the sample.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("empty projected set")
    if same_set is None:
        same_set = a is b
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    a_ok = na > 0
    b_ok = nb > 0
    if not a_ok.any() or not b_ok.any():
        raise ValueError("all vectors have zero norm")
    if same_set and (a.shape[0] < 2 or a_ok.sum() < 2):
        raise ValueError("need at least two distinct usable vectors for same-set pairs")

    out = np.empty(n_pairs)
    filled = 0
    redrawn = 0
    while filled < n_pairs:
        m = max(int((n_pairs - filled) * 1.25), 64)
        ia = rng.integers(0, a.shape[0], m)
        ib = rng.integers(0, b.shape[0], m)
        ok = a_ok[ia] & b_ok[ib]
        if same_set:
            ok &= ia != ib
        redrawn += int(m - ok.sum())
        ia = ia[ok][: n_pairs - filled]
        ib = ib[ok][: n_pairs - filled]
        dots = np.einsum("ij,ij->i", a[ia], b[ib])
        out[filled : filled + ia.size] = 1.0 - dots / (na[ia] * nb[ib])
        filled += ia.size
    return out, redrawn


def ks_statistic(u: np.ndarray, v: np.ndarray) -> float:
    """Exact sup-norm distance between two empirical CDFs."""
    u = np.sort(np.asarray(u, dtype=np.float64))
    v = np.sort(np.asarray(v, dtype=np.float64))
    if u.size == 0 or v.size == 0:
        raise ValueError("empty sample")
    z = np.concatenate([u, v])
    cu = np.searchsorted(u, z, side="right") / u.size
    cv = np.searchsorted(v, z, side="right") / v.size
    return float(np.abs(cu - cv).max())


@dataclass(frozen=True)
class RankingResult:
    ks_mean: float
    ks_std: float
    n_boot: int
    n_pairs: int
    k_used: int
    per_family: dict[str, "RankingResult"] | None = None


def _check_schema(train: FeatureMatrix, gen: FeatureMatrix) -> None:
    if train.names != gen.names:
        raise ValueError("train and generated feature matrices have different schemas")


def ranking_metric(
    train: FeatureMatrix,
    gen: FeatureMatrix,
    *,
    k: int = 10,
    n_pairs: int = 10000,
    n_boot: int = 1000,
    seed: int = 0,
) -> RankingResult:
    """Bootstrap mean/std of KS between baseline and cross pair distributions."""
    _check_schema(train, gen)
    model = fit_pca(train, k=k, clamp_k=True)
    r = project(model, train)
    g = project(model, gen)
    children = np.random.SeedSequence(entropy=(seed, 0xB007)).spawn(n_boot)
    stats = np.empty(n_boot)
    for i in range(n_boot):
        rng = np.random.default_rng(children[i])
        rb = r[rng.integers(0, r.shape[0], r.shape[0])]
        gb = g[rng.integers(0, g.shape[0], g.shape[0])]
        d_rr, _ = cosine_pair_distribution(rb, rb, n_pairs, rng, same_set=True)
        d_rg, _ = cosine_pair_distribution(rb, gb, n_pairs, rng, same_set=False)
        stats[i] = ks_statistic(d_rr, d_rg)
    return RankingResult(
        ks_mean=float(stats.mean()),
        ks_std=float(stats.std()),
        n_boot=n_boot,
        n_pairs=n_pairs,
        k_used=model.k,
    )


def per_family_metric(
    train: FeatureMatrix,
    gen: FeatureMatrix,
    family: str,
    *,
    k: int = 10,
    n_pairs: int = 10000,
    n_boot: int = 1000,
    seed: int = 0,
) -> RankingResult:
    """The ranking metric restricted to one feature family's columns."""
    _check_schema(train, gen)
    return ranking_metric(
        train.subset_family(family),
        gen.subset_family(family),
        k=k,
        n_pairs=n_pairs,
        n_boot=n_boot,
        seed=seed,
    )


def public_metric(
    train: FeatureMatrix,
    gen: FeatureMatrix,
    *,
    n_pairs: int = 10000,
    n_boot: int = 1000,
    seed: int = 0,
) -> RankingResult:
    """The same pipeline over the nine public features."""
    _check_schema(train, gen)
    return ranking_metric(
        train.subset_names(PUBLIC_FEATURE_NAMES),
        gen.subset_names(PUBLIC_FEATURE_NAMES),
        k=min(10, len(PUBLIC_FEATURE_NAMES)),
        n_pairs=n_pairs,
        n_boot=n_boot,
        seed=seed,
    )


@dataclass(frozen=True)
class GaussianFit:
    """Moment fit of an embedding cloud."""

    mean: np.ndarray  # (E,)
    cov: np.ndarray  # (E, E) symmetric PSD

    def __post_init__(self) -> None:
        if self.cov.shape != (self.mean.size, self.mean.size):
            raise ValueError("covariance shape does not match mean")
        if np.abs(self.cov - self.cov.T).max() > 1e-8:
            raise ValueError("covariance is not symmetric")


def fit_gaussian(values: np.ndarray) -> GaussianFit:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] < 2:
        raise ValueError("need a 2-D sample with at least two rows")
    mean = values.mean(axis=0)
    centered = values - mean
    cov = centered.T @ centered / (values.shape[0] - 1)
    cov = (cov + cov.T) / 2.0
    return GaussianFit(mean=mean, cov=cov)


def _psd_eigh(cov: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh((cov + cov.T) / 2.0)
    floor = -1e-6 * max(1.0, float(np.abs(w).max()))
    if w.min() < floor:
        raise ValueError(f"{what} covariance is not PSD beyond tolerance (min eigenvalue {w.min():g})")
    return np.clip(w, 0.0, None), v


def frechet_distance(a: GaussianFit, b: GaussianFit) -> float:
    """Frechet (Wasserstein-2) distance between two Gaussian fits."""
    if a.mean.shape != b.mean.shape:
        raise ValueError("Gaussian fits have different dimensions")
    wa, va = _psd_eigh(a.cov, "first")
    sqrt_a = (va * np.sqrt(wa)) @ va.T
    inner = sqrt_a @ b.cov @ sqrt_a
    w_inner, _ = _psd_eigh(inner, "product")
    tr_sqrt = float(np.sqrt(w_inner).sum())
    diff = a.mean - b.mean
    d = float(diff @ diff + wa.sum() + np.trace(b.cov) - 2.0 * tr_sqrt)
    if d < 0:
        if d < -1e-6:
            raise ValueError(f"Frechet distance came out negative beyond tolerance: {d:g}")
        d = 0.0
    return d


def density_coverage(
    real: np.ndarray,
    fake: np.ndarray,
    k_nn: int = 5,
    *,
    chunk: int = 512,
) -> tuple[float, float]:
    """k-NN density and coverage of `fake` with respect to `real`."""
    real = np.asarray(real, dtype=np.float64)
    fake = np.asarray(fake, dtype=np.float64)
    n_r = real.shape[0]
    n_f = fake.shape[0]
    if n_r <= k_nn or n_f <= k_nn:
        raise ValueError(f"need more than k_nn={k_nn} points in each set")

    radius = np.empty(n_r)
    for start in range(0, n_r, chunk):
        block = real[start : start + chunk]
        d = np.sqrt(((block[:, None, :] - real[None, :, :]) ** 2).sum(axis=2))
        # k-th nearest other point; the self-distance 0 occupies one slot.
        radius[start : start + chunk] = np.partition(d, k_nn, axis=1)[:, k_nn]

    inside_total = 0
    covered = np.zeros(n_r, bool)
    for start in range(0, n_f, chunk):
        block = fake[start : start + chunk]
        d = np.sqrt(((block[:, None, :] - real[None, :, :]) ** 2).sum(axis=2))
        hit = d <= radius[None, :]
        inside_total += int(hit.sum())
        covered |= hit.any(axis=0)
    density = inside_total / (k_nn * n_f)
    coverage = float(covered.mean())
    return density, coverage
