"""Truncated stick-breaking variational inference for a Dirichlet process
mixture of diagonal-covariance Gaussians.

Generative model, truncated at T components:

    v_k ~ Beta(1, alpha) for k < T, v_T = 1
    pi_k(v) = v_k * prod_{j<k} (1 - v_j)
    lambda_{k,d} ~ Gamma(a0, b0_d)                   (precision, rate b0)
    mu_{k,d} | lambda_{k,d} ~ Normal(m0_d, 1/(beta0 * lambda_{k,d}))
    x_n | z_n = k ~ Normal(mu_k, diag(lambda_k)^-1)

The variational posterior factorizes as q(v_k) = Beta(gamma1_k, gamma2_k),
q(mu_k, lambda_k) = prod_d NormalGamma(m_{k,d}, beta_k, a_k, b_{k,d}) and
q(z_n) = Categorical(phi_n). Coordinate ascent cycles responsibilities,
stick parameters, and component posteriors; every cycle is closed form and
the evidence lower bound never decreases.

Fixing v_T = 1 makes the truncated weights sum to exactly one, so the
model behaves like an infinite mixture whose tail past T is folded into
the final component.
"""

import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gammaln

from .errors import DataError, NumericalError
from .points import PointMatrix
from .special import digamma, log_sum_exp

__all__ = [
    "Priors",
    "DpgmmConfig",
    "DpgmmModel",
    "FitResult",
    "init",
    "update_responsibilities",
    "update_sticks",
    "update_components",
    "elbo",
    "fit",
    "expected_weights",
    "predict",
    "effective_components",
    "save_model",
    "load_model",
]

LOG_2PI = np.log(2.0 * np.pi)

# Numerical floors: keep rate parameters off zero so log/ division stay
# finite, and flush subnormal responsibilities that would only inject noise.
B_FLOOR = 1e-12
PHI_FLOOR = 1e-300


@dataclass(frozen=True)
class Priors:
    """Normal-Gamma prior hyperparameters, one independent factor per dimension.

    ``mean`` (m0) defaults to the data mean; ``mean_precision`` is beta0
    and ``precision_shape`` is a0. ``precision_rate`` (b0) accepts an
    explicit vector or scalar, the string ``"data-variance"`` for
    ``a0 * per-dimension data variance``, or ``None`` (default) for

        b0_d = a0 * var_d * dim / (4 * truncation)

    The default keeps the Gaussian separation signal in the first
    responsibility pass commensurate with the (dimension-free) stick-prior
    penalty at any dimension: a flat data-variance rate makes low-dim
    components so broad that every point falls onto the first stick and
    the mixture collapses before structure can form.
    """

    mean: np.ndarray | None = None
    mean_precision: float = 1.0
    precision_shape: float = 1.0
    precision_rate: object = None

    def resolve(self, values, truncation):
        """Fill data-dependent defaults from an (n, d) matrix."""
        if self.mean_precision <= 0 or self.precision_shape <= 0:
            raise DataError("prior mean_precision and precision_shape must be positive")
        dim = values.shape[1]
        if self.mean is None:
            m0 = values.mean(axis=0)
        else:
            m0 = np.asarray(self.mean, dtype=np.float64)
            if m0.shape != (dim,):
                raise DataError(f"prior mean has shape {m0.shape}, expected ({dim},)")
        rate = self.precision_rate
        if rate is None:
            variance = np.maximum(values.var(axis=0), B_FLOOR)
            b0 = self.precision_shape * variance * dim / (4.0 * truncation)
            b0 = np.maximum(b0, B_FLOOR)
        elif isinstance(rate, str):
            if rate != "data-variance":
                raise DataError(f"unknown precision_rate mode {rate!r}")
            b0 = self.precision_shape * np.maximum(values.var(axis=0), B_FLOOR)
        else:
            b0 = np.broadcast_to(
                np.asarray(rate, dtype=np.float64), (dim,)
            ).copy() if np.ndim(rate) == 0 else np.asarray(rate, dtype=np.float64)
            if b0.shape != (dim,):
                raise DataError(f"prior precision_rate has shape {b0.shape}, expected ({dim},)")
            if np.any(b0 <= 0):
                raise DataError("prior precision_rate entries must be positive")
        return replace(self, mean=m0, precision_rate=b0)


@dataclass(frozen=True)
class DpgmmConfig:
    """Fit configuration: concentration, truncation, stopping rule, seed."""

    alpha: float = 0.2
    truncation: int = 50
    tol: float = 1e-4
    max_iter: int = 500
    seed: int = 0
    priors: Priors = field(default_factory=Priors)

    def validate(self):
        if self.alpha <= 0:
            raise DataError(f"alpha must be positive, got {self.alpha}")
        if self.truncation < 1:
            raise DataError(f"truncation must be >= 1, got {self.truncation}")
        if self.tol <= 0:
            raise DataError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise DataError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass(frozen=True)
class DpgmmModel:
    """Variational parameters of the truncated mixture.

    Arrays are indexed by component: gamma1/gamma2 (T,) are the Beta stick
    posteriors, m (T, d) / beta (T,) / a (T,) / b (T, d) the Normal-Gamma
    component posteriors.
    """

    gamma1: np.ndarray
    gamma2: np.ndarray
    m: np.ndarray
    beta: np.ndarray
    a: np.ndarray
    b: np.ndarray
    alpha: float
    seed: int
    priors: Priors | None = None

    @property
    def truncation(self):
        return self.gamma1.shape[0]

    @property
    def dim(self):
        return self.m.shape[1]


@dataclass(frozen=True)
class FitResult:
    """Fitted model plus diagnostics of the coordinate-ascent run."""

    model: DpgmmModel
    elbo_trace: list
    converged: bool
    effective_components: int

    @property
    def iterations(self):
        return len(self.elbo_trace)


def _as_values(data):
    """Accept a PointMatrix or a bare (n, d) array; report scaling state."""
    if isinstance(data, PointMatrix):
        return data.values, data.scale is not None
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise DataError(f"expected an (n_points, dim) matrix, got rank {arr.ndim}")
    return arr, True


def init(pm, cfg):
    """Seed a model: T data rows as initial means, priors elsewhere.

    The seeded generator draws ``truncation`` distinct rows as initial
    component means (with replacement only when there are fewer points
    than components); all other parameters start at their priors, so the
    first responsibility update is driven purely by proximity to the
    sampled rows. Deterministic for a fixed seed.
    """
    cfg.validate()
    X, scaled = _as_values(pm)
    n, dim = X.shape
    if n < 1:
        raise DataError("cannot initialize from an empty point set")
    if not scaled:
        warnings.warn(
            "point matrix has no scaling record; consider scale_to_range(pm) "
            "so the data matches the default prior scale",
            stacklevel=2,
        )
    priors = cfg.priors.resolve(X, cfg.truncation)
    T = cfg.truncation
    rng = np.random.default_rng(cfg.seed)
    rows = rng.choice(n, size=T, replace=n < T)
    return DpgmmModel(
        gamma1=np.ones(T),
        gamma2=np.full(T, cfg.alpha, dtype=np.float64),
        m=X[rows].copy(),
        beta=np.full(T, priors.mean_precision, dtype=np.float64),
        a=np.full(T, priors.precision_shape, dtype=np.float64),
        b=np.tile(priors.precision_rate, (T, 1)),
        alpha=cfg.alpha,
        seed=cfg.seed,
        priors=priors,
    )


def _stick_log_expectations(model):
    """E[log v_k] and the prefix sums of E[log(1 - v_j)], terminal v_T = 1."""
    T = model.truncation
    e_log_v = np.zeros(T)
    prefix = np.zeros(T)
    if T > 1:
        g1 = model.gamma1[: T - 1]
        g2 = model.gamma2[: T - 1]
        psi_sum = digamma(g1 + g2)
        e_log_v[: T - 1] = digamma(g1) - psi_sum
        e_log_1mv = digamma(g2) - psi_sum
        prefix[1:] = np.cumsum(e_log_1mv)
    return e_log_v, prefix


def _gaussian_log_expectations(model, X):
    """(n, T) matrix of E[log Normal(x_n | mu_k, lambda_k)] under q."""
    a, b, beta, m = model.a, model.b, model.beta, model.m
    dim = X.shape[1]
    # Expand sum_d (a/b_d)(x_d - m_d)^2 so no (n, T, d) intermediate is built.
    w = a[:, None] / b
    quad = (X * X) @ w.T - 2.0 * (X @ (w * m).T) + np.sum(w * m * m, axis=1)
    const = 0.5 * (
        dim * digamma(a)
        - np.sum(np.log(b), axis=1)
        - dim * LOG_2PI
        - dim / beta
    )
    return const[None, :] - 0.5 * quad


def _score_matrix(model, X):
    e_log_v, prefix = _stick_log_expectations(model)
    return (e_log_v + prefix)[None, :] + _gaussian_log_expectations(model, X)


def update_responsibilities(model, pm, threads=1):
    """Row-normalized posterior assignment probabilities phi (n_points, T).

    Each score combines the expected log stick weight with the expected
    Gaussian log density; rows are normalized in the log domain. With
    ``threads > 1`` the rows are computed in parallel chunks; every row's
    value is independent of the chunking.
    """
    X, _ = _as_values(pm)
    if X.shape[1] != model.dim:
        raise DataError(f"point dim {X.shape[1]} does not match model dim {model.dim}")
    n = X.shape[0]
    if threads > 1 and n >= 2 * threads:
        from concurrent.futures import ThreadPoolExecutor

        phi = np.empty((n, model.truncation))
        bounds = np.linspace(0, n, threads + 1).astype(int)

        def run(lo, hi):
            phi[lo:hi] = _normalized_scores(model, X[lo:hi])

        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda se: run(*se), zip(bounds[:-1], bounds[1:])))
        return phi
    return _normalized_scores(model, X)


def _normalized_scores(model, X):
    s = _score_matrix(model, X)
    phi = np.exp(s - log_sum_exp(s, axis=1)[:, None])
    phi[phi < PHI_FLOOR] = 0.0
    return phi


def update_sticks(phi, alpha):
    """Beta posterior parameters of the sticks given responsibilities.

    With N_k the column masses: gamma1_k = 1 + N_k and gamma2_k = alpha +
    sum of masses beyond k, for every non-terminal component. The terminal
    component keeps (1, alpha) and acts as v_T = 1 in all expectations.
    """
    phi = np.asarray(phi, dtype=np.float64)
    counts = phi.sum(axis=0)
    T = counts.shape[0]
    gamma1 = np.ones(T)
    gamma2 = np.full(T, float(alpha))
    if T > 1:
        tail = np.concatenate([np.cumsum(counts[::-1])[::-1][1:], [0.0]])
        gamma1[: T - 1] = 1.0 + counts[: T - 1]
        gamma2[: T - 1] = alpha + tail[: T - 1]
    return gamma1, gamma2


def update_components(phi, pm, priors):
    """Normal-Gamma posterior parameters given responsibilities.

    Weighted counts, means, and scatters feed the standard conjugate
    updates; a component with zero mass keeps exactly its prior. Rate
    parameters are floored at 1e-12 to survive degenerate data.
    """
    X, _ = _as_values(pm)
    phi = np.asarray(phi, dtype=np.float64)
    m0 = priors.mean
    beta0 = priors.mean_precision
    a0 = priors.precision_shape
    b0 = priors.precision_rate

    counts = phi.sum(axis=0)
    sum_x = phi.T @ X
    occupied = counts > 0.0
    xbar = np.where(occupied[:, None], sum_x / np.where(occupied, counts, 1.0)[:, None], m0)
    # S_k = sum_n phi_nk (x_n - xbar_k)^2, expanded so zero-mass columns give exactly 0.
    scatter = phi.T @ (X * X) - counts[:, None] * xbar * xbar

    beta = beta0 + counts
    m = (beta0 * m0 + counts[:, None] * xbar) / beta[:, None]
    a = a0 + counts / 2.0
    shrink = (beta0 * counts / beta)[:, None]
    b = b0 + 0.5 * (scatter + shrink * (xbar - m0) ** 2)
    b = np.maximum(b, B_FLOOR)
    return m, beta, a, b


def _beta_kl(gamma1, gamma2, alpha):
    """KL(Beta(g1, g2) || Beta(1, alpha)), elementwise."""
    total = gamma1 + gamma2
    log_b_q = gammaln(gamma1) + gammaln(gamma2) - gammaln(total)
    log_b_p = gammaln(1.0) + gammaln(alpha) - gammaln(1.0 + alpha)
    return (
        log_b_p
        - log_b_q
        + (gamma1 - 1.0) * digamma(gamma1)
        + (gamma2 - alpha) * digamma(gamma2)
        + (1.0 - gamma1 + alpha - gamma2) * digamma(total)
    )


def _normal_gamma_kl(model):
    """KL(q(mu, lambda) || prior), summed over components and dimensions."""
    pr = model.priors
    if pr is None:
        raise DataError("model carries no prior record (loaded from JSON?); ELBO unavailable")
    m0, beta0, a0, b0 = pr.mean, pr.mean_precision, pr.precision_shape, pr.precision_rate
    a, b, beta, m = model.a, model.b, model.beta, model.m

    gamma_kl = (
        (a[:, None] - a0) * digamma(a)[:, None]
        - gammaln(a)[:, None]
        + gammaln(a0)
        + a0 * (np.log(b) - np.log(b0))
        + a[:, None] * (b0 - b) / b
    )
    normal_kl = (
        0.5 * np.log(beta / beta0)[:, None]
        + beta0 / (2.0 * beta)[:, None]
        - 0.5
        + 0.5 * beta0 * (a[:, None] / b) * (m - m0) ** 2
    )
    return float(np.sum(gamma_kl + normal_kl))


def elbo(model, phi, pm):
    """Evidence lower bound for the given assignment distribution.

    Expected complete-data log likelihood plus assignment entropy, minus
    the stick and Normal-Gamma KL penalties against their priors. The
    0 * log 0 limit is taken as 0. A non-finite result raises
    NumericalError since it signals a numerical failure, not a modeling
    outcome.
    """
    X, _ = _as_values(pm)
    phi = np.asarray(phi, dtype=np.float64)
    e_log_v, prefix = _stick_log_expectations(model)
    stick = e_log_v + prefix
    gauss = _gaussian_log_expectations(model, X)

    counts = phi.sum(axis=0)
    likelihood = float(np.sum(phi * gauss)) + float(counts @ stick)
    with np.errstate(divide="ignore", invalid="ignore"):
        entropy = -float(np.sum(np.where(phi > 0.0, phi * np.log(phi), 0.0)))

    T = model.truncation
    kl_sticks = 0.0
    if T > 1:
        kl_sticks = float(
            np.sum(_beta_kl(model.gamma1[: T - 1], model.gamma2[: T - 1], model.alpha))
        )
    value = likelihood + entropy - kl_sticks - _normal_gamma_kl(model)
    if not np.isfinite(value):
        raise NumericalError(f"non-finite ELBO ({value}); inference diverged")
    return value


def fit(pm, cfg=None, threads=1, callback=None):
    """Run coordinate ascent to convergence and relabel components by mass.

    Each iteration refreshes responsibilities, stick parameters, and
    component posteriors, then records the bound. The loop stops when the
    relative bound change drops below ``cfg.tol`` or after
    ``cfg.max_iter`` iterations. Afterwards the components are reordered
    by descending responsibility mass (stick parameters re-derived for the
    new order) so that label 0 is always the most populous cluster and
    rendered colors are stable across runs and images.

    Parameters
    ----------
    pm : PointMatrix or (n, d) array
        Points to cluster; scale_to_range first for the documented pipeline.
    cfg : DpgmmConfig, optional
        Defaults to DpgmmConfig() (alpha 0.2, truncation 50).
    threads : int
        Parallelism for the responsibility pass; 1 is bit-deterministic.
    callback : callable, optional
        ``callback(iteration, model, phi, elbo_value)`` after every
        recorded iteration; used by diagnostics and invariants tests.

    Returns
    -------
    FitResult
    """
    if cfg is None:
        cfg = DpgmmConfig()
    model = init(pm, cfg)
    X, _ = _as_values(pm)
    priors = model.priors

    trace = []
    converged = False
    for iteration in range(cfg.max_iter):
        phi = update_responsibilities(model, X, threads=threads)
        gamma1, gamma2 = update_sticks(phi, cfg.alpha)
        m, beta, a, b = update_components(phi, X, priors)
        model = replace(model, gamma1=gamma1, gamma2=gamma2, m=m, beta=beta, a=a, b=b)
        value = elbo(model, phi, X)
        trace.append(value)
        if callback is not None:
            callback(iteration, model, phi, value)
        if iteration > 0:
            prev = trace[-2]
            if abs(value - prev) / max(1.0, abs(prev)) < cfg.tol:
                converged = True
                break

    model = _relabel_by_mass(model, X, cfg.alpha, priors, threads)
    return FitResult(
        model=model,
        elbo_trace=trace,
        converged=converged,
        effective_components=effective_components(model),
    )


def _relabel_by_mass(model, X, alpha, priors, threads=1):
    """Reorder components by descending mass of a fresh responsibility pass.

    The permuted responsibilities are pushed through the two conjugate
    updates, which permutes the component posteriors bit-exactly and
    re-derives stick parameters consistent with the new order, leaving a
    coherent coordinate-ascent state.
    """
    phi = update_responsibilities(model, X, threads=threads)
    order = np.argsort(-phi.sum(axis=0), kind="stable")
    phi = phi[:, order]
    gamma1, gamma2 = update_sticks(phi, alpha)
    m, beta, a, b = update_components(phi, X, priors)
    return replace(model, gamma1=gamma1, gamma2=gamma2, m=m, beta=beta, a=a, b=b)


def expected_weights(model):
    """Expected mixture weights under the stick posterior; sums to exactly 1.

    E[v_k] = gamma1/(gamma1 + gamma2) feeds the stick-breaking product for
    non-terminal components; the terminal weight is the remainder.
    """
    T = model.truncation
    if T == 1:
        return np.ones(1)
    ev = model.gamma1[: T - 1] / (model.gamma1[: T - 1] + model.gamma2[: T - 1])
    weights = np.empty(T)
    weights[: T - 1] = ev
    weights[1 : T - 1] *= np.cumprod(1.0 - ev)[:-1]
    weights[T - 1] = max(0.0, 1.0 - float(weights[: T - 1].sum()))
    return weights


def predict(model, pm):
    """Hard cluster id per point: argmax responsibility, lowest id on ties.

    Fitted models are already ordered by descending mass, so id 0 names
    the most populous cluster.
    """
    phi = update_responsibilities(model, pm)
    return np.argmax(phi, axis=1)


def effective_components(model, weights_threshold=0.01):
    """Number of components whose expected weight exceeds the threshold."""
    return int(np.sum(expected_weights(model) > weights_threshold))


def save_model(result, path):
    """Serialize a FitResult (or bare model) as the documented JSON schema.

    Numbers are written as shortest round-trip decimals of the 64-bit
    values, so load_model restores the model bit-exactly.
    """
    model = result.model if isinstance(result, FitResult) else result
    trace = list(result.elbo_trace) if isinstance(result, FitResult) else []
    converged = result.converged if isinstance(result, FitResult) else False
    doc = {
        "alpha": model.alpha,
        "truncation": model.truncation,
        "dim": model.dim,
        "seed": model.seed,
        "gamma1": model.gamma1.tolist(),
        "gamma2": model.gamma2.tolist(),
        "beta": model.beta.tolist(),
        "a": model.a.tolist(),
        "m": model.m.tolist(),
        "b": model.b.tolist(),
        "elbo_trace": trace,
        "converged": bool(converged),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path):
    """Load a model JSON written by save_model."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        model = DpgmmModel(
            gamma1=np.asarray(doc["gamma1"], dtype=np.float64),
            gamma2=np.asarray(doc["gamma2"], dtype=np.float64),
            m=np.asarray(doc["m"], dtype=np.float64),
            beta=np.asarray(doc["beta"], dtype=np.float64),
            a=np.asarray(doc["a"], dtype=np.float64),
            b=np.asarray(doc["b"], dtype=np.float64),
            alpha=float(doc["alpha"]),
            seed=int(doc["seed"]),
        )
    except KeyError as exc:
        raise DataError(f"{path}: model JSON missing field {exc}") from exc
    if model.truncation != int(doc["truncation"]) or model.dim != int(doc["dim"]):
        raise DataError(f"{path}: model JSON shape fields disagree with arrays")
    return FitResult(
        model=model,
        elbo_trace=[float(v) for v in doc.get("elbo_trace", [])],
        converged=bool(doc.get("converged", False)),
        effective_components=effective_components(model),
    )
