"""Gaussian and Gibbs measures for the exponential interaction.

The Gaussian base measure is the law of the random Fourier series with
independent complex coefficients a_n of variance <n>^(-alpha).  The Gibbs
measure reweights it by exp(-gamma * V_beta(u)) with the exponential
potential V_beta(u) = int exp(beta |u|^2) dx, which is evaluated by
oversampled grid quadrature.  Because the density against the Gaussian is
explicit, exact independent sampling (importance or rejection) suffices; no
MCMC is involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import (
    SpectralField,
    TorusGeometry,
    sigma,
    sobolev_norm_array,
    to_grid_array,
)


class NonIntegrableError(ValueError):
    """Raised where the exponential moment leaves L^1 (p*beta*sigma >= 1)."""


@dataclass(frozen=True)
class ModelParams:
    """Physical and truncation parameters of the model.

    alpha > d is required by every Gaussian sampling path; beta >= 0 and any
    real gamma are accepted so that the linear (beta = 0) and interaction-free
    (gamma = 0) controls remain expressible.
    """

    d: int
    alpha: float
    beta: float
    gamma: float
    n_cut: int
    geometry: TorusGeometry

    def __post_init__(self) -> None:
        if self.d != self.geometry.d:
            raise ValueError("params dimension disagrees with geometry")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.n_cut < 0 or self.n_cut > self.geometry.n_max:
            raise ValueError("n_cut must lie in [0, geometry.n_max]")

    def sigma_n(self) -> float:
        """Pointwise variance of the truncated Gaussian field."""
        return sigma(self.alpha, self.n_cut, self.d)


@dataclass(frozen=True)
class RngStream:
    """Deterministic, splittable randomness source.

    Identical (seed, stream_id) reproduce identical draws; distinct stream
    ids are statistically independent.  `generator(*path)` derives further
    independent child streams deterministically.
    """

    seed: int
    stream_id: int = 0

    def generator(self, *path: int) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence([self.seed, self.stream_id, *path])
        )

    def child(self, k: int) -> "RngStream":
        return RngStream(self.seed, (self.stream_id << 20) + k)


@dataclass
class EnsembleReport:
    """Weighted Monte-Carlo statistics per observable."""

    observables: dict  # name -> (estimate, stderr, ess)
    ensemble_size: int
    max_weight_fraction: float

    def estimate(self, name: str) -> float:
        return self.observables[name][0]

    def stderr(self, name: str) -> float:
        return self.observables[name][1]


def weighted_mean_stderr(values: np.ndarray, weights: np.ndarray | None):
    """Self-normalized importance estimate with linearized standard error.

    Returns (estimate, stderr, effective sample size).  With uniform weights
    this reduces to the plain mean and its standard error.
    """
    values = np.asarray(values, dtype=float)
    m = values.size
    if weights is None:
        est = float(values.mean())
        se = float(values.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
        return est, se, float(m)
    w = np.asarray(weights, dtype=float)
    wsum = w.sum()
    est = float(np.sum(w * values) / wsum)
    resid = values - est
    se = float(np.sqrt(np.sum((w * resid) ** 2)) / wsum)
    ess = float(wsum**2 / np.sum(w**2))
    return est, se, ess


def make_report(observables: dict, weights: np.ndarray | None) -> EnsembleReport:
    out = {}
    m = 0
    for name, vals in observables.items():
        out[name] = weighted_mean_stderr(vals, weights)
        m = len(vals)
    if weights is None:
        maxfrac = 1.0 / m if m else 0.0
    else:
        maxfrac = float(np.max(weights) / np.sum(weights))
    return EnsembleReport(out, m, maxfrac)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def sample_gaussian_coeffs(
    params: ModelParams, gen: np.random.Generator, size: int | None = None
) -> np.ndarray:
    """Coefficient draws a_n = g_n <n>^(-alpha/2) on |n| <= n_cut (batched)."""
    if params.alpha <= params.d:
        raise ValueError("Gaussian sampling requires alpha > d")
    geo = params.geometry
    shape = geo.box_shape if size is None else (size, *geo.box_shape)
    g = (gen.standard_normal(shape) + 1j * gen.standard_normal(shape)) / math.sqrt(2.0)
    amp = geo.bracket(-params.alpha / 2.0) * geo.euclid_mask(params.n_cut)
    return g * amp


def sample_gaussian(params: ModelParams, rng: RngStream) -> SpectralField:
    """One draw from the truncated Gaussian measure."""
    return SpectralField(params.geometry, sample_gaussian_coeffs(params, rng.generator()))


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------


def mass(u: SpectralField) -> float:
    """J(u) = (1/2) int |u|^2 dx = (1/2) sum |a_n|^2."""
    return 0.5 * float(np.sum(np.abs(u.coeffs) ** 2))


def mass_array(geometry: TorusGeometry, coeffs: np.ndarray) -> np.ndarray:
    axes = tuple(range(-geometry.d, 0))
    return 0.5 * np.sum(np.abs(coeffs) ** 2, axis=axes)


def potential_array(
    geometry: TorusGeometry,
    coeffs: np.ndarray,
    beta: float,
    clip: float | None = None,
) -> np.ndarray:
    """V_beta by grid quadrature of exp(beta |u|^2), optionally min(V, clip)."""
    values = to_grid_array(geometry, coeffs)
    axes = tuple(range(-geometry.d, 0))
    v = geometry.quad_weight() * np.sum(
        np.exp(beta * np.abs(values) ** 2), axis=axes
    )
    if clip is not None:
        v = np.minimum(v, clip)
    return v


def potential(u: SpectralField, beta: float, clip: float | None = None) -> float:
    return float(potential_array(u.geometry, u.coeffs, beta, clip))


def kinetic_energy(u: SpectralField, alpha: float, symbol: str = "bracket") -> float:
    """(1/2) sum w_n |a_n|^2 with w_n = <n>^alpha or |n|^alpha."""
    geo = u.geometry
    if symbol == "bracket":
        w = geo.bracket(alpha)
    elif symbol == "pure":
        w = geo.mode_abs2() ** (alpha / 2.0)
    else:
        raise ValueError(f"unknown dispersion symbol {symbol!r}")
    return 0.5 * float(np.sum(w * np.abs(u.coeffs) ** 2))


def hamiltonian(u: SpectralField, params: ModelParams, symbol: str = "bracket") -> float:
    """H(u) = (1/2) ||<grad>^{alpha/2} u||^2 + gamma V_beta(u)."""
    return kinetic_energy(u, params.alpha, symbol) + params.gamma * potential(
        u, params.beta
    )


def gibbs_weight(u: SpectralField, params: ModelParams) -> float:
    """Density factor exp(-gamma V_beta(Pi_N u)) against the Gaussian measure."""
    from .spectral import project

    v = potential(project(u, params.n_cut), params.beta)
    return math.exp(-params.gamma * v)


def gibbs_weight_array(params: ModelParams, coeffs: np.ndarray, beta: float | None = None) -> np.ndarray:
    geo = params.geometry
    mask = geo.euclid_mask(params.n_cut)
    b = params.beta if beta is None else beta
    v = potential_array(geo, coeffs * mask, b)
    return np.exp(-params.gamma * v)


# ---------------------------------------------------------------------------
# Gibbs ensembles
# ---------------------------------------------------------------------------


@dataclass
class GibbsEnsemble:
    """Sample set targeting the truncated Gibbs measure.

    Importance mode returns all proposals with weights; rejection mode
    returns the accepted subset (weights None).  The partition function
    estimate uses the weight mean in importance mode and the acceptance
    indicator in rejection mode, so the two routes stay independent.
    """

    params: ModelParams
    mode: str
    coeffs: np.ndarray  # (m, *box)
    weights: np.ndarray | None
    z_estimate: float
    z_stderr: float
    n_proposed: int

    @property
    def size(self) -> int:
        return self.coeffs.shape[0]


def gibbs_ensemble(
    params: ModelParams, m: int, rng: RngStream, mode: str = "importance"
) -> GibbsEnsemble:
    gen = rng.generator()
    vol = params.geometry.volume
    if mode == "importance":
        coeffs = sample_gaussian_coeffs(params, gen, m)
        v = potential_array(
            params.geometry, coeffs * params.geometry.euclid_mask(params.n_cut), params.beta
        )
        w = np.exp(-params.gamma * v)
        z, z_se, _ = weighted_mean_stderr(w, None)
        return GibbsEnsemble(params, mode, coeffs, w, z, z_se, m)
    if mode == "rejection":
        if params.gamma < 0:
            raise ValueError("rejection sampling requires gamma >= 0 (bounded density)")
        # accept with prob exp(-gamma (V - Vol)) <= 1; the analytic supremum
        # exp(-gamma Vol) of the density normalizes the proposal.
        accepted = []
        n_prop = 0
        n_acc_target = m
        indicators = []
        batch = max(m, 256)
        while sum(a.shape[0] for a in accepted) < n_acc_target and n_prop < 10**7:
            coeffs = sample_gaussian_coeffs(params, gen, batch)
            v = potential_array(
                params.geometry,
                coeffs * params.geometry.euclid_mask(params.n_cut),
                params.beta,
            )
            p_acc = np.exp(-params.gamma * (v - vol))
            u = gen.uniform(size=batch)
            keep = u < p_acc
            indicators.append(keep)
            accepted.append(coeffs[keep])
            n_prop += batch
        coeffs = np.concatenate(accepted, axis=0)[:m]
        ind = np.concatenate(indicators).astype(float)
        rate, rate_se, _ = weighted_mean_stderr(ind, None)
        z = rate * math.exp(-params.gamma * vol)
        z_se = rate_se * math.exp(-params.gamma * vol)
        if coeffs.shape[0] < m:
            raise RuntimeError("rejection sampler exhausted proposal budget")
        return GibbsEnsemble(params, mode, coeffs, None, z, z_se, n_prop)
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# closed-form moment oracle and tail fitting
# ---------------------------------------------------------------------------


def exp_moment_oracle(params: ModelParams, p: float) -> float:
    """E[exp(p beta |Pi_N u(x)|^2)] = (1 - p beta sigma)^(-1), the rank-one
    Gaussian integral for the circularly symmetric complex field.

    Raises NonIntegrableError at or beyond the pole p*beta*sigma >= 1.
    """
    s = params.sigma_n()
    c = p * params.beta * s
    if c >= 1.0:
        raise NonIntegrableError(
            f"p*beta*sigma = {c:.6g} >= 1: exponential moment is infinite"
        )
    return 1.0 / (1.0 - c)


@dataclass
class TailFit:
    """Least-squares fit of log P(||u|| > R) against R^2."""

    slope: float
    intercept: float
    thresholds: np.ndarray
    log_freq: np.ndarray
    degenerate: bool


def tail_fit(
    params: ModelParams,
    s: float,
    r: float,
    r_grid: np.ndarray,
    m: int,
    rng: RngStream,
    band: tuple[int, int] | None = None,
    scale: float = 1.0,
) -> TailFit:
    """Empirical Gaussian tail: fit log P(||Pi_{<=N2} Pi_{>N1} u||_{W^{s,r}} > R)
    as an affine function of -R^2; the slope must come out negative.

    Requires alpha - 2s > d so the weighted variance converges.  `band`
    selects the spectral increment (N1, N2]; by default all modes <= n_cut.
    `scale` multiplies the samples (used to check Gaussian rescaling).
    """
    if params.alpha - 2.0 * s <= params.d:
        raise ValueError("need alpha - 2s > d for a convergent tail variance")
    geo = params.geometry
    gen = rng.generator()
    coeffs = scale * sample_gaussian_coeffs(params, gen, m)
    if band is not None:
        n1, n2 = band
        inc = geo.euclid_mask(n2) & ~geo.euclid_mask(n1)
        coeffs = coeffs * inc
    w = geo.bracket(s)
    if math.isinf(r):
        values = to_grid_array(geo, coeffs * w)
        axes = tuple(range(-geo.d, 0))
        norms = np.max(np.abs(values), axis=axes)
    elif r == 2.0:
        norms = sobolev_norm_array(geo, coeffs, s)
    else:
        values = to_grid_array(geo, coeffs * w)
        axes = tuple(range(-geo.d, 0))
        norms = (
            geo.quad_weight() * np.sum(np.abs(values) ** r, axis=axes)
        ) ** (1.0 / r)
    r_grid = np.asarray(r_grid, dtype=float)
    freq = np.array([(norms > rr).mean() for rr in r_grid])
    ok = freq > 0
    if np.max(norms) == 0.0 or ok.sum() < 2:
        return TailFit(math.nan, math.nan, r_grid, np.log(freq, where=freq > 0, out=np.full_like(freq, -np.inf)), True)
    x = r_grid[ok] ** 2
    y = np.log(freq[ok])
    slope, intercept = np.polyfit(x, y, 1)
    return TailFit(float(slope), float(intercept), r_grid, y, False)


# ---------------------------------------------------------------------------
# ensemble export (CSV / JSON schema of the external interface)
# ---------------------------------------------------------------------------


def ensemble_rows(
    ensemble: GibbsEnsemble, extra: dict | None = None, s_norm: float = 0.5
) -> tuple[list[str], list[list]]:
    """Rows `sample_id, weight, mass, potential, hamiltonian, hs_norm, ...`."""
    geo = ensemble.params.geometry
    p = ensemble.params
    coeffs = ensemble.coeffs
    masked = coeffs * geo.euclid_mask(p.n_cut)
    j = mass_array(geo, coeffs)
    v = potential_array(geo, masked, p.beta)
    kin_w = geo.bracket(p.alpha)
    axes = tuple(range(-geo.d, 0))
    kin = 0.5 * np.sum(kin_w * np.abs(coeffs) ** 2, axis=axes)
    h = kin + p.gamma * v
    hs = sobolev_norm_array(geo, coeffs, s_norm)
    w = ensemble.weights if ensemble.weights is not None else np.ones(len(j))
    header = ["sample_id", "weight", "mass", "potential", "hamiltonian", "hs_norm"]
    columns = [j, v, h, hs]
    if extra:
        for name, vals in extra.items():
            header.append(name)
            columns.append(np.asarray(vals))
    rows = []
    for i in range(len(j)):
        rows.append([i, w[i]] + [col[i] for col in columns])
    return header, rows
