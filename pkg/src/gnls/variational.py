"""Focusing non-normalizability experiments (d = 1).

The partition function of the focusing Gibbs measure is probed two ways:

* directly, by Monte-Carlo over the Gaussian measure of the clipped weight
  exp(-gamma min(V_beta, L)) under a mass cutoff, scanned over the clip L;
* variationally, by evaluating the drifted objective
  gamma min(V_beta(Y(1) + Theta_N), L) 1{||Y(1)+Theta_N|| <= K} + drift cost
  with Theta_N = -Z_N(1) + eta f_N, where Z_N is the per-mode OU smoothing of
  the Brownian lift of the Gaussian field and f_N is a real bump supported on
  the frequency annulus (N, 2N] with unit-order L^2 mass and an N^(1/2) peak.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measures import (
    ModelParams,
    RngStream,
    potential_array,
    sample_gaussian_coeffs,
    weighted_mean_stderr,
)
from .spectral import (
    SpectralField,
    TorusGeometry,
    TWO_PI,
    sobolev_norm,
    to_grid_array,
)


# ---------------------------------------------------------------------------
# bump fields
# ---------------------------------------------------------------------------


@dataclass
class BumpField:
    """Real bump f_N(x) = N^(-1/2) pi^(-1) sum_{N<n<=2N} cos(n(x-x0))."""

    field: SpectralField
    n_scale: int
    center: float


def bump_coeffs(geometry: TorusGeometry, n_scale: int, x0: float) -> np.ndarray:
    """Orthonormal-basis coefficients of the bump: a_m = (2 pi N)^(-1/2) e^{-i m x0}
    on N < |m| <= 2N, zero elsewhere."""
    if geometry.d != 1:
        raise ValueError("bump fields are d=1 only")
    if n_scale < 1:
        raise ValueError("bump scale must be >= 1")
    if geometry.n_max < 2 * n_scale:
        raise ValueError("geometry must retain modes up to 2N")
    m = geometry.modes
    ann = (np.abs(m) > n_scale) & (np.abs(m) <= 2 * n_scale)
    amp = 1.0 / math.sqrt(TWO_PI * n_scale)
    return np.where(ann, amp * np.exp(-1j * m * x0), 0.0)


def build_bump(n_scale: int, x0: float, geometry: TorusGeometry) -> BumpField:
    coeffs = bump_coeffs(geometry, n_scale, x0)
    return BumpField(SpectralField(geometry, coeffs), n_scale, x0)


@dataclass
class BumpScan:
    n_values: np.ndarray
    l2_sq: np.ndarray
    sup_norm: np.ndarray
    sobolev: dict  # s -> array of H^s norms
    sup_exponent: float
    sobolev_ratio: dict  # s -> array ||f_N||_{H^s} / N^s
    near_peak_min: np.ndarray  # min f_N / sqrt(N) within |x-x0| <= 0.1/N


def bump_norm_scan(
    n_ladder: list,
    s_list: list,
    x0: float = 0.0,
    oversampling: float = 8.0,
) -> BumpScan:
    """Measure ||f_N||_{L^2}^2, ||f_N||_inf, ||f_N||_{H^s} over a ladder of N
    and fit the sup-norm growth exponent; also record the lower bound of
    f_N / sqrt(N) near the center (the concentration estimate)."""
    n_ladder = sorted(int(n) for n in n_ladder)
    l2_sq, sup, near = [], [], []
    sob = {s: [] for s in s_list}
    for n in n_ladder:
        geo = TorusGeometry(d=1, n_max=2 * n, oversampling=oversampling)
        bump = build_bump(n, x0, geo)
        l2_sq.append(float(np.sum(np.abs(bump.field.coeffs) ** 2)))
        values = to_grid_array(geo, bump.field.coeffs)
        sup.append(float(np.max(np.abs(values.real))))
        for s in s_list:
            sob[s].append(sobolev_norm(bump.field, s))
        x = geo.x
        dist = np.abs((x - x0 + math.pi) % TWO_PI - math.pi)
        nearby = dist <= 0.1 / n
        if not np.any(nearby):
            nearby = dist <= np.min(dist) + 1e-12
        near.append(float(np.min(values.real[nearby]) / math.sqrt(n)))
    n_arr = np.asarray(n_ladder, dtype=float)
    sup_arr = np.asarray(sup)
    exponent = float(np.polyfit(np.log(n_arr), np.log(sup_arr), 1)[0])
    ratios = {s: np.asarray(sob[s]) / n_arr**s for s in s_list}
    return BumpScan(
        n_arr,
        np.asarray(l2_sq),
        sup_arr,
        {s: np.asarray(v) for s, v in sob.items()},
        exponent,
        ratios,
        np.asarray(near),
    )


# ---------------------------------------------------------------------------
# OU drift paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VariationalConfig:
    """Drift experiment parameters: mass cutoff K, potential clip L, bump
    amplitude eta, SDE step dt_sde (None: stability rule), ensemble size m."""

    params: ModelParams
    k_mass: float
    l_clip: float
    eta: float
    m: int
    dt_sde: float | None = None
    x0: float = 0.0

    def __post_init__(self) -> None:
        if min(self.k_mass, self.l_clip, self.eta) <= 0:
            raise ValueError("K, L and eta must be positive")


def ou_rates(params: ModelParams) -> np.ndarray:
    """Per-mode relaxation rates a_n = <n>^(-alpha/2) N^(alpha/2)."""
    geo = params.geometry
    return geo.bracket(-params.alpha / 2.0) * params.n_cut ** (params.alpha / 2.0)


def stability_dt(params: ModelParams, safety: float = 10.0, cap: float = 1e-3) -> float:
    """Euler-Maruyama step tied to the fastest OU rate: min_n (10 a_n)^(-1),
    capped at 1e-3."""
    a_max = float(np.max(ou_rates(params)))
    return min(cap, 1.0 / (safety * a_max))


@dataclass
class DriftPath:
    """One realization of the coupled per-mode paths (B_n, Z_{N,n}) on [0,1]."""

    params: ModelParams
    times: np.ndarray
    b_path: np.ndarray  # (steps+1, n_active) complex
    z_path: np.ndarray
    active_modes: np.ndarray


def _ou_stepper(
    params: ModelParams,
    gen: np.random.Generator,
    m: int,
    dt: float,
    scheme: str,
    keep_paths: bool = False,
    track_cost: bool = False,
    chunk: int = 2000,
):
    """Co-simulate (B_n, Z_{N,n}) on the active modes |n| <= N; the Brownian
    endpoints of the spectator modes above the cutoff are drawn in one shot
    (their law at t = 1 is the same and nothing couples to them in time).

    scheme 'euler' is Euler-Maruyama on dZ = a (c B - Z) dt; scheme 'exact'
    uses the exact joint Gaussian update of (B, X) with X = cB - Z, which is
    an OU process driven by c dB.  Returns (b_final, z_final, cost, steps,
    dt, active, paths_b, paths_z) with full-box final arrays.
    """
    if scheme not in ("euler", "exact"):
        raise ValueError(f"unknown scheme {scheme!r}")
    geo = params.geometry
    modes = geo.modes
    n_modes = modes.size
    active = np.abs(modes) <= params.n_cut
    n_act = int(active.sum())
    c_act = geo.bracket(-params.alpha / 2.0)[active]
    a_act = c_act * params.n_cut ** (params.alpha / 2.0)
    steps = int(round(1.0 / dt))
    dt = 1.0 / steps
    w_act = geo.bracket(params.alpha)[active]
    noise_scale = math.sqrt(dt / 2.0)
    if scheme == "euler":
        k_decay = 1.0 - dt * a_act
        k_drive = dt * a_act * c_act
    else:
        var_i = (1.0 - np.exp(-2.0 * a_act * dt)) / (2.0 * a_act)
        cov = (1.0 - np.exp(-a_act * dt)) / a_act
        slope = cov / dt
        resid = np.sqrt(np.maximum(var_i - cov**2 / dt, 0.0))
        decay = np.exp(-a_act * dt)

    b_final = np.zeros((m, n_modes), dtype=np.complex128)
    z_final = np.zeros((m, n_modes), dtype=np.complex128)
    cost_acc = np.zeros(m)
    paths_b = paths_z = None

    want_z_steps = track_cost or keep_paths
    for lo in range(0, m, chunk):
        hi = min(lo + chunk, m)
        mm = hi - lo
        b = np.zeros((mm, n_act), dtype=np.complex128)
        z = np.zeros((mm, n_act), dtype=np.complex128)
        if scheme == "exact":
            x = np.zeros((mm, n_act), dtype=np.complex128)
        if keep_paths and lo == 0:
            paths_b = [b[0].copy()]
            paths_z = [z[0].copy()]
        for _ in range(steps):
            noise = noise_scale * (
                gen.standard_normal((mm, n_act))
                + 1j * gen.standard_normal((mm, n_act))
            )
            if scheme == "euler":
                z_new = k_decay * z + k_drive * b
                b += noise
            else:
                xi = (
                    gen.standard_normal((mm, n_act))
                    + 1j * gen.standard_normal((mm, n_act))
                ) / math.sqrt(2.0)
                x *= decay
                x += c_act * (slope * noise + resid * xi)
                b += noise
                z_new = c_act * b - x if want_z_steps else None
            if want_z_steps:
                if track_cost:
                    dz = (z_new - z) / dt
                    cost_acc[lo:hi] += dt * np.sum(w_act * np.abs(dz) ** 2, axis=1)
                z = z_new
                if keep_paths and lo == 0:
                    paths_b.append(b[0].copy())
                    paths_z.append(z[0].copy())
            elif scheme == "euler":
                z = z_new
        if scheme == "exact" and not want_z_steps:
            z = c_act * b - x
        b_final[lo:hi, active] = b
        z_final[lo:hi, active] = z
    # spectator modes: only B(1) ~ CN(0, 1) is ever used downstream
    n_tail = n_modes - n_act
    if n_tail:
        b_final[:, ~active] = (
            gen.standard_normal((m, n_tail)) + 1j * gen.standard_normal((m, n_tail))
        ) / math.sqrt(2.0)
    return b_final, z_final, cost_acc, steps, dt, active, paths_b, paths_z


def simulate_drift(
    config: VariationalConfig, rng: RngStream, scheme: str = "euler"
) -> DriftPath:
    """One realization of the coupled Brownian / OU mode paths on [0, 1]."""
    params = config.params
    dt = config.dt_sde if config.dt_sde is not None else stability_dt(params)
    gen = rng.generator()
    _, _, _, steps, dt, active, pb, pz = _ou_stepper(
        params, gen, 1, dt, scheme, keep_paths=True
    )
    times = np.linspace(0.0, 1.0, steps + 1)
    return DriftPath(
        params, times, np.stack(pb), np.stack(pz), params.geometry.modes[active]
    )


def drift_cost(path: DriftPath, config: VariationalConfig) -> float:
    """(1/2) int_0^1 ||<grad>^{alpha/2} (-dZ/dt + eta f_N)||_{L^2}^2 dt.

    The bump lives on the annulus (N, 2N], disjoint from the drift modes, so
    the cross term vanishes and the bump contributes its constant
    (eta^2 / 2) ||f_N||_{H^{alpha/2}}^2.
    """
    params = config.params
    geo = params.geometry
    w = geo.bracket(params.alpha)
    active = np.abs(geo.modes) <= params.n_cut
    w_active = w[active]
    dt = float(path.times[1] - path.times[0])
    dz = np.diff(path.z_path, axis=0) / dt
    cost_z = 0.5 * dt * float(np.sum(w_active * np.abs(dz) ** 2))
    f = bump_coeffs(geo, params.n_cut, config.x0)
    cost_f = 0.5 * config.eta**2 * float(np.sum(w * np.abs(f) ** 2))
    return cost_z + cost_f


def ou_gap_oracle(params: ModelParams) -> float:
    """Ito-isometry closed form for E|Y(1,x) - Z_N(1,x)|^2 (x-independent):
    (2pi)^(-1) [ sum_{|n|<=N} <n>^(-alpha) (1-e^{-2 a_n}) / (2 a_n)
               + sum_{N<|n|<=n_max} <n>^(-alpha) ]."""
    geo = params.geometry
    if geo.d != 1:
        raise ValueError("d=1 only")
    modes = geo.modes
    var = geo.bracket(-params.alpha)
    active = np.abs(modes) <= params.n_cut
    a = geo.bracket(-params.alpha / 2.0) * params.n_cut ** (params.alpha / 2.0)
    inner = np.sum(var[active] * (1.0 - np.exp(-2.0 * a[active])) / (2.0 * a[active]))
    outer = np.sum(var[~active])
    return float(inner + outer) / TWO_PI


def simulate_ou_gap(
    params: ModelParams,
    m: int,
    rng: RngStream,
    dt: float | None = None,
    scheme: str = "euler",
) -> np.ndarray:
    """Per-sample spatial mean of |Y(1,x) - Z_N(1,x)|^2, i.e. the Parseval
    sum (2pi)^(-1) sum_n |<n>^(-alpha/2) B_n(1) - Z_{N,n}(1)|^2 over the
    retained box; its expectation is `ou_gap_oracle`."""
    params_dt = dt if dt is not None else stability_dt(params)
    gen = rng.generator()
    b, z, _, _, _, _, _, _ = _ou_stepper(params, gen, m, params_dt, scheme)
    c = params.geometry.bracket(-params.alpha / 2.0)
    gap = c * b - z
    return np.sum(np.abs(gap) ** 2, axis=1) / TWO_PI


# ---------------------------------------------------------------------------
# drifted objective and divergence scan
# ---------------------------------------------------------------------------


@dataclass
class ObjectiveReport:
    estimate: float
    stderr: float
    indicator_freq: float
    mean_cost: float
    mean_clipped_potential: float


def objective_estimate(config: VariationalConfig, rng: RngStream) -> ObjectiveReport:
    """Monte-Carlo mean of
    gamma min(V_beta(Y(1)+Theta), L) 1{||Y(1)+Theta||_{L2} <= K} + drift cost,
    with Theta = -Z_N(1) + eta f_N; min and indicator are applied per sample
    before averaging."""
    params = config.params
    geo = params.geometry
    dt = config.dt_sde if config.dt_sde is not None else stability_dt(params)
    gen = rng.generator()
    b, z, cost_z, _, _, _, _, _ = _ou_stepper(
        params, gen, config.m, dt, "euler", track_cost=True
    )
    c = geo.bracket(-params.alpha / 2.0)
    y1 = c * b
    f = bump_coeffs(geo, params.n_cut, config.x0)
    shifted = y1 - z + config.eta * f
    v = potential_array(geo, shifted, params.beta, clip=config.l_clip)
    norms = np.sqrt(np.sum(np.abs(shifted) ** 2, axis=1))
    indicator = norms <= config.k_mass
    w_alpha = geo.bracket(params.alpha)
    cost_f = 0.5 * config.eta**2 * float(np.sum(w_alpha * np.abs(f) ** 2))
    cost = 0.5 * cost_z + cost_f
    values = params.gamma * v * indicator + cost
    est, se, _ = weighted_mean_stderr(values, None)
    return ObjectiveReport(
        est,
        se,
        float(indicator.mean()),
        float(cost.mean()),
        float((v * indicator).mean()),
    )


@dataclass
class DivergenceScan:
    l_values: np.ndarray
    estimates: np.ndarray
    stderrs: np.ndarray
    trend_pvalue: float
    step_increases: np.ndarray  # paired mean increments between consecutive L
    saturated: bool  # last two ladder points within one combined SE


def divergence_scan(
    params: ModelParams,
    gamma_sign: float,
    k_mass: float | None,
    l_ladder: list,
    m: int,
    rng: RngStream,
    n_boot: int = 2000,
) -> DivergenceScan:
    """Direct Monte-Carlo of E_mu[ exp(-gamma min(V_beta, L)) 1{||u|| <= K} ]
    over a ladder of clips L, reusing one sample set for all L (paired).

    The trend p-value is a paired bootstrap of the total increment between the
    first and last ladder point (one-sided: P[increment <= 0]).  k_mass=None
    drops the mass cutoff.
    """
    gamma = math.copysign(abs(params.gamma) if params.gamma != 0 else 1.0, gamma_sign)
    geo = params.geometry
    gen = rng.generator()
    coeffs = sample_gaussian_coeffs(params, gen, m)
    v = potential_array(geo, coeffs * geo.euclid_mask(params.n_cut), params.beta)
    if k_mass is None:
        ind = np.ones(m, dtype=bool)
    else:
        ind = np.sqrt(np.sum(np.abs(coeffs) ** 2, axis=tuple(range(-geo.d, 0)))) <= k_mass
    l_values = np.asarray(sorted(l_ladder), dtype=float)
    contrib = np.empty((l_values.size, m))
    for i, l in enumerate(l_values):
        contrib[i] = np.exp(-gamma * np.minimum(v, l)) * ind
    est = contrib.mean(axis=1)
    se = contrib.std(axis=1, ddof=1) / math.sqrt(m)
    diffs = contrib[-1] - contrib[0]
    boot_gen = rng.generator(1)
    idx = boot_gen.integers(0, m, size=(n_boot, m))
    boot_means = diffs[idx].mean(axis=1)
    pvalue = float((np.sum(boot_means <= 0.0) + 1.0) / (n_boot + 1.0))
    steps = contrib[1:].mean(axis=1) - contrib[:-1].mean(axis=1)
    comb_se = math.sqrt(se[-1] ** 2 + se[-2] ** 2)
    saturated = bool(abs(est[-1] - est[-2]) <= comb_se)
    return DivergenceScan(l_values, est, se, pvalue, steps, saturated)
