"""Fitting the model to yearly stock, landings and price series.

The ecosystem is fitted first and on its own: yearly surplus production
``x[t+1] - x[t] + H[t]`` against a Ricker curve.  The economic parameters are
then fitted by weighted least squares of predicted landings and prices,
each year's prediction conditioned on that year's observed stock and TAC.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.stats import qmc

from .dynamics import find_steady_state
from .errors import AdaptImpactError, ValidationError
from .model import (DEFAULT_QUOTA_TONNES, ModelParams, Reference,
                    market_equilibrium, price_to_eur_per_kg,
                    quota_in_model_units)

CALIBRATED = ("epsilon", "chi1", "chi2", "phi", "eta", "alpha", "beta1", "beta2", "sigma")
LOWER = {name: 1.000001e-6 for name in CALIBRATED}
# fixed costs of 1e-8 sit well below the generic floor; keep a positive one
LOWER["phi"] = 1e-12
LOWER["sigma"] = 1.000001
UPPER = {name: math.inf for name in CALIBRATED}
UPPER["epsilon"] = 1.0 - 1e-6
PENALTY = 1e3


@dataclass
class TimeSeriesDataset:
    """Yearly series per species, in tonnes and EUR/kg.

    Arrays have shape ``(2, T)``; missing prices and TACs are NaN.
    """

    years: np.ndarray
    ssb: np.ndarray
    landings: np.ndarray
    price: np.ndarray
    tac: np.ndarray
    income: np.ndarray | None = None
    scaled: bool = False

    def __post_init__(self):
        self.years = np.asarray(self.years, dtype=int)
        for name in ("ssb", "landings", "price", "tac"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (2, len(self.years)):
                raise ValidationError(f"{name} must have shape (2, {len(self.years)})")
            setattr(self, name, arr)
        if np.any(np.diff(self.years) <= 0):
            raise ValidationError("years must be strictly increasing")
        for name in ("ssb", "landings", "price", "tac"):
            arr = getattr(self, name)
            if np.any(arr[np.isfinite(arr)] < 0):
                raise ValidationError(f"{name} has negative entries")

    def __len__(self):
        return len(self.years)

    def price_start(self, i):
        ok = np.flatnonzero(np.isfinite(self.price[i]))
        return int(self.years[ok[0]]) if len(ok) else None

    def quota(self, t):
        return tuple(None if not np.isfinite(v) else float(v) for v in self.tac[:, t])

    def subset(self, idx):
        idx = np.asarray(idx)
        return TimeSeriesDataset(self.years[idx], self.ssb[:, idx], self.landings[:, idx],
                                 self.price[:, idx], self.tac[:, idx],
                                 None if self.income is None else np.asarray(self.income)[idx],
                                 self.scaled)


def scale_data(raw, kappa, wscale):
    """Dataset in model units: tonnes / kappa and prices relative to income."""
    if kappa <= 0 or wscale <= 0:
        raise ValidationError("scales must be positive")
    if raw.scaled:
        raise ValidationError("dataset is already scaled")
    conv = kappa * 1000.0 / wscale
    return TimeSeriesDataset(raw.years, raw.ssb / kappa, raw.landings / kappa,
                             raw.price * conv, raw.tac / kappa, raw.income, True)


def unscale_data(scaled, kappa, wscale):
    if not scaled.scaled:
        raise ValidationError("dataset is not scaled")
    conv = kappa * 1000.0 / wscale
    return TimeSeriesDataset(scaled.years, scaled.ssb * kappa, scaled.landings * kappa,
                             scaled.price / conv, scaled.tac * kappa, scaled.income, False)


# --------------------------------------------------------------------------
# ecosystem

@dataclass(frozen=True)
class RickerFit:
    a: float
    b: float
    n_used: int
    n_excluded: int
    rmse: float
    seed: tuple  # (a, b) of the log-linear fit


def surplus_production(ssb, landings):
    """Pairs ``(x_t, g_t)`` with ``g_t = x[t+1] - x[t] + H[t]``."""
    ssb = np.asarray(ssb, dtype=float)
    landings = np.asarray(landings, dtype=float)
    return ssb[:-1], ssb[1:] - ssb[:-1] + landings[:-1]


def fit_ricker(ssb, landings, min_points=10):
    """Ricker coefficients from one species' stock and landings series.

    A straight-line fit of ``log(g/x)`` against ``x`` seeds a nonlinear
    least-squares fit of ``g = a x exp(-b x)``.  Years with nonpositive
    ``g/x`` cannot enter the log fit and are counted in ``n_excluded``.
    """
    x, g = surplus_production(ssb, landings)
    ok = np.isfinite(x) & np.isfinite(g)
    x, g = x[ok], g[ok]
    pos = (x > 0) & (g > 0)
    if pos.sum() < min_points:
        raise ValidationError(f"need at least {min_points} usable years, got {int(pos.sum())}")
    slope, intercept = np.polyfit(x[pos], np.log(g[pos] / x[pos]), 1)
    seed = (math.exp(intercept), max(-slope, 0.0))
    scale = np.mean(np.abs(g)) or 1.0

    def resid(v):
        return (v[0] * x * np.exp(-v[1] * x) - g) / scale

    sol = least_squares(resid, seed, bounds=([1e-12, 0.0], [np.inf, np.inf]),
                        x_scale=[max(seed[0], 1e-12), max(seed[1], 1.0 / np.mean(x))],
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
    a, b = sol.x
    rmse = float(np.sqrt(np.mean((a * x * np.exp(-b * x) - g) ** 2)))
    return RickerFit(float(a), float(b), int(pos.sum()), int(len(x) - pos.sum()), rmse, seed)


def ricker_through_points(x1, g1, x2, g2):
    """Ricker ``(a, b)`` passing through two (stock, growth) points."""
    if min(x1, x2, g1, g2) <= 0 or x1 == x2:
        raise ValidationError("need two distinct points with positive stock and growth")
    b = (math.log(g1 / x1) - math.log(g2 / x2)) / (x2 - x1)
    a = g1 / x1 * math.exp(b * x1)
    return a, b


def reference_ricker(params=ModelParams(), reference=Reference(), quota_tonnes=DEFAULT_QUOTA_TONNES):
    """Ricker coefficients that make the reference stocks steady states.

    Plaice passes through the harvest the market delivers at both reference
    plaice stocks.  Sole gets the same ``b*x`` as plaice's upper state at its
    reference stock and passes through the harvest there.
    """
    quota = quota_in_model_units(quota_tonnes, params)
    xu = np.asarray(reference.upper) / params.kappa
    xl = np.asarray(reference.lower) / params.kappa
    qu = market_equilibrium(xu, params, quota).q
    ql = market_equilibrium(xl, params, quota).q
    a1, b1 = ricker_through_points(xu[0], qu[0], xl[0], ql[0])
    b2 = b1 * xu[0] / xu[1]
    a2 = qu[1] * math.exp(b2 * xu[1]) / xu[1]
    return (a1, a2), (b1, b2)


# --------------------------------------------------------------------------
# economic fit

def predict(params, scaled):
    """Predicted landings and prices, year by year, in model units.

    Prices are the market equilibrium prices that year.  Years where the
    model has no equilibrium give NaN.
    """
    T = len(scaled)
    H = np.full((2, T), np.nan)
    P = np.full((2, T), np.nan)
    for t in range(T):
        x = scaled.ssb[:, t]
        if not np.all(x > 0):
            continue
        try:
            m = market_equilibrium(x, params, scaled.quota(t))
        except (AdaptImpactError, ArithmeticError, ValueError):
            continue
        H[:, t] = m.q
        P[:, t] = m.p
    return H, P


def default_weights(scaled):
    """One over the mean of each observed landings and price series."""
    wh = np.array([1.0 / np.nanmean(scaled.landings[i]) for i in range(2)])
    wp = np.array([1.0 / np.nanmean(scaled.price[i]) if np.any(np.isfinite(scaled.price[i]))
                   else 0.0 for i in range(2)])
    return wh, wp


def _residuals(params, scaled, weights):
    wh, wp = weights
    H, P = predict(params, scaled)
    parts = []
    for i in range(2):
        obs = np.isfinite(scaled.landings[i])
        parts.append(math.sqrt(wh[i]) * (H[i, obs] - scaled.landings[i, obs]))
        obs = np.isfinite(scaled.price[i])
        if wp[i] > 0:
            parts.append(math.sqrt(wp[i]) * (P[i, obs] - scaled.price[i, obs]))
    r = np.concatenate(parts)
    bad = ~np.isfinite(r)
    if bad.any():
        r[bad] = PENALTY
    return r, int(bad.sum())


def economic_objective(params, scaled, weights=None):
    """Weighted sum of squared landings and price errors.

    Weights default to one over the mean of each observed series so both
    kinds of error count on a relative scale.  A year with no model
    equilibrium adds a large penalty rather than failing.
    """
    weights = default_weights(scaled) if weights is None else weights
    r, _ = _residuals(params, scaled, weights)
    return float(np.dot(r, r))


def theil_u(predicted, actual):
    """Theil inequality coefficient: rmse over the sum of the two rms values."""
    p = np.asarray(predicted, dtype=float)
    a = np.asarray(actual, dtype=float)
    if p.shape != a.shape or p.size == 0:
        raise ValidationError("series must be non-empty and of equal length")
    ok = np.isfinite(p) & np.isfinite(a)
    p, a = p[ok], a[ok]
    if p.size == 0:
        return math.nan
    den = math.sqrt(np.mean(p ** 2)) + math.sqrt(np.mean(a ** 2))
    if den == 0.0:
        return 0.0
    return math.sqrt(np.mean((p - a) ** 2)) / den


def fit_statistics(params, scaled):
    """Theil coefficients of one-step stock, landings and price predictions."""
    H, P = predict(params, scaled)
    out = {}
    for i, sp in enumerate(("plaice", "sole")):
        x = scaled.ssb[i]
        g = params.a[i] * x[:-1] * np.exp(-params.b[i] * x[:-1])
        x_hat = x[:-1] + g - scaled.landings[i, :-1]
        out[f"stock_{sp}"] = theil_u(x_hat, x[1:])
        out[f"harvest_{sp}"] = theil_u(H[i], scaled.landings[i])
        out[f"price_{sp}"] = theil_u(P[i], scaled.price[i])
    return out


# --------------------------------------------------------------------------
# multistart

def _to_z(values):
    return np.array([math.log(values[n] - 1.0) if n == "sigma" else math.log(values[n])
                     for n in CALIBRATED])


def _from_z(z):
    return {n: (1.0 + math.exp(v)) if n == "sigma" else math.exp(v)
            for n, v in zip(CALIBRATED, z)}


def _z_bounds():
    lo = [math.log(LOWER[n] - 1.0) if n == "sigma" else math.log(LOWER[n]) for n in CALIBRATED]
    hi = [math.log(UPPER[n]) if math.isfinite(UPPER[n]) else np.inf for n in CALIBRATED]
    return np.array(lo), np.array(hi)


def default_ranges(params=ModelParams(), spread=1.5):
    """Search ranges of the multistart grid: ``value / spread`` to ``value * spread``.

    Epsilon and sigma are spread on scales that keep them inside their
    admissible intervals.
    """
    out = {}
    for n in CALIBRATED:
        v = params.get(n)
        if n == "epsilon":
            out[n] = (v / spread, min(v * spread, 0.95))
        elif n == "sigma":
            out[n] = (1.0 + (v - 1.0) / spread, 1.0 + (v - 1.0) * spread)
        else:
            out[n] = (v / spread, v * spread)
    return out


def initial_grid(ranges=None, size=519, seed=0):
    """Starting points: box centre, then corners, then Sobol filling.

    Centre and corners are taken in log scale.  The list is truncated (or
    padded) to ``size`` points.
    """
    ranges = default_ranges() if ranges is None else ranges
    lo = _to_z({n: ranges[n][0] for n in CALIBRATED})
    hi = _to_z({n: ranges[n][1] for n in CALIBRATED})
    pts = [0.5 * (lo + hi)]
    d = len(CALIBRATED)
    for k in range(2 ** d):
        if len(pts) >= size:
            break
        bits = np.array([(k >> j) & 1 for j in range(d)])
        pts.append(np.where(bits, hi, lo))
    if len(pts) < size:
        need = size - len(pts)
        sob = qmc.Sobol(d, scramble=True, seed=seed).random_base2(math.ceil(math.log2(need)))[:need]
        pts.extend(lo + s * (hi - lo) for s in sob)
    return [_from_z(z) for z in pts[:size]]


@dataclass
class Candidate:
    start: dict
    values: dict
    zeta: float
    nfev: int
    status: int
    feasible: bool | None = None
    index: int = -1


@dataclass
class CalibrationResult:
    params: ModelParams
    zeta: float
    theil: dict
    feasible: bool
    winner: int
    candidates: list = field(default_factory=list)
    message: str = ""


def _fit_one(base, scaled, weights, start, max_nfev):
    lo, hi = _z_bounds()
    z0 = np.clip(_to_z(start), lo + 1e-12, hi - 1e-12)

    def resid(z):
        try:
            p = base.replace(**_from_z(z))
        except AdaptImpactError:
            return np.full(n_res, PENALTY)
        return _residuals(p, scaled, weights)[0]

    n_res = len(_residuals(base, scaled, weights)[0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        sol = least_squares(resid, z0, bounds=(lo, hi), method="trf", x_scale=1.0,
                            diff_step=1e-7, xtol=1e-12, ftol=1e-12, gtol=1e-12,
                            max_nfev=max_nfev)
    return _from_z(sol.x), float(np.dot(sol.fun, sol.fun)), int(sol.nfev), int(sol.status)


def steady_state_feasible(params, quota):
    return find_steady_state(params, quota).interior


def calibrate(dataset, grid=None, base=ModelParams(), weights=None, max_nfev=10_000,
              workers=None, feasibility_quota="last"):
    """Multistart weighted least squares of the economic parameters.

    Parameters
    ----------
    dataset : TimeSeriesDataset
        Raw (tonnes, EUR/kg) or already scaled series.
    grid : list of dict, optional
        Starting points; defaults to :func:`initial_grid`.
    base : ModelParams
        Supplies the fixed parameters (Ricker, nu, omega, scales).
    feasibility_quota : "last" or tuple
        Quota under which the winner must have an interior steady state;
        "last" takes the final year's TACs.

    Returns
    -------
    CalibrationResult
        The lowest-objective feasible candidate; if none is feasible, the
        lowest-objective one flagged ``feasible=False``.
    """
    scaled = dataset if dataset.scaled else scale_data(dataset, base.kappa, base.wscale)
    grid = initial_grid() if grid is None else list(grid)
    if not grid:
        raise ValidationError("initial grid is empty")
    weights = default_weights(scaled) if weights is None else weights
    job = lambda s: _fit_one(base, scaled, weights, s, max_nfev)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fits = list(pool.map(job, grid))
    else:
        fits = [job(s) for s in grid]
    cands = [Candidate(start=s, values=v, zeta=z, nfev=nf, status=st, index=i)
             for i, (s, (v, z, nf, st)) in enumerate(zip(grid, fits))]
    order = sorted(cands, key=lambda c: (c.zeta, tuple(c.values[n] for n in CALIBRATED)))
    quota = scaled.quota(len(scaled) - 1) if feasibility_quota == "last" else feasibility_quota
    winner = None
    for c in order:
        c.feasible = steady_state_feasible(base.replace(**c.values), quota)
        if c.feasible:
            winner = c
            break
    feasible = winner is not None
    if winner is None:
        winner = order[0]
    params = base.replace(**winner.values)
    return CalibrationResult(params=params, zeta=winner.zeta, theil=fit_statistics(params, scaled),
                             feasible=feasible, winner=winner.index, candidates=cands,
                             message="" if feasible else "no candidate has an interior steady state")


# --------------------------------------------------------------------------
# synthetic data

def simulate_dataset(params, years, x0_tonnes=None, tac_tonnes=DEFAULT_QUOTA_TONNES,
                     price_from=None):
    """Noise-free yearly series generated by the model.

    Stocks follow ``x[t+1] = x[t] + g(x[t]) - H[t]`` with ``H`` the market
    harvest under the given TACs; prices are the market equilibrium prices.
    Prices before ``price_from`` are missing.
    """
    years = np.asarray(years, dtype=int)
    T = len(years)
    x = np.asarray(x0_tonnes if x0_tonnes is not None
                   else np.array([0.8, 1.1]) * Reference().upper, dtype=float) / params.kappa
    quota = quota_in_model_units(tac_tonnes, params)
    ssb = np.empty((2, T))
    land = np.empty((2, T))
    price = np.empty((2, T))
    for t in range(T):
        ssb[:, t] = x
        m = market_equilibrium(x, params, quota)
        land[:, t] = m.q
        price[:, t] = m.p
        g = params.a * x * np.exp(-np.asarray(params.b) * x)
        x = np.maximum(x + g - m.q, 1e-9)
    tac = np.array([[np.nan if q is None else q * params.kappa] * T for q in quota])
    price_eur = price_to_eur_per_kg(price, params)
    if price_from is not None:
        price_eur[:, years < price_from] = np.nan
    return TimeSeriesDataset(years, ssb * params.kappa, land * params.kappa, price_eur, tac)


def add_noise(dataset, noise, seed):
    """Multiplicative log-normal noise of log-sd ``noise`` on every observed value."""
    rng = np.random.default_rng(seed)
    out = []
    for arr in (dataset.ssb, dataset.landings, dataset.price):
        eps = rng.normal(0.0, noise, size=arr.shape) if noise > 0 else np.zeros(arr.shape)
        out.append(arr * np.exp(eps))
    return TimeSeriesDataset(dataset.years, out[0], out[1], out[2], dataset.tac.copy(),
                             dataset.income, dataset.scaled)

