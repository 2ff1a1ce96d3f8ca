"""Stock dynamics, steady states and bifurcation scans.

Stocks follow ``dx/dt = g(x) - H(x)`` where ``H`` is the harvest the
per-period market equilibrium delivers (fleets adjust to zero profit every
period).  Steady states are roots of that right-hand side; the routines here
find them, classify them and track them as one driver moves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AdaptImpactError, ConvergenceError, ValidationError
from .model import (DEFAULT_QUOTA_TONNES, MarketState, ModelParams, Reference,
                    growth, market_equilibrium, quota_in_model_units,
                    tonnes_to_model)

X_MIN = 1e-9  # stocks below this (model units) count as collapsed
RESIDUAL_TOL = 1e-8


def default_quota(params):
    return quota_in_model_units(DEFAULT_QUOTA_TONNES, params)


def _resolve_quota(quota, params):
    if quota == "default":
        return default_quota(params)
    if quota is None:
        return (None, None)
    return tuple(quota)


def equilibrium_harvest(x, params, quota=(None, None)):
    """Harvest delivered by the market at stocks ``x``; zero after a collapse."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= X_MIN):
        return np.zeros(2)
    return market_equilibrium(x, params, quota).q


def rate(x, params, quota=(None, None), harvest=None):
    h = harvest(x) if harvest is not None else equilibrium_harvest(x, params, quota)
    return growth(np.maximum(x, 0.0), params) - h


# --------------------------------------------------------------------------
# integration

@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray  # shape (len(t), 2)
    events: list = field(default_factory=list)

    @property
    def final(self):
        return self.x[-1]


def integrate(x0, params, horizon, step, quota="default", harvest=None):
    """Fixed-step classical Runge-Kutta integration of the stock dynamics.

    Parameters
    ----------
    x0 : array_like
        Initial stocks in model units.
    horizon, step : float
        Length of the run and the step, in years.
    quota : tuple or "default"
        Per-species caps in model units, ``None`` for no cap.
    harvest : callable, optional
        ``harvest(x) -> H`` replacing the market equilibrium harvest.

    Negative stocks after a step are clipped to zero and logged in
    ``Trajectory.events``.
    """
    if step <= 0:
        raise ValidationError("step must be positive")
    if horizon < 0:
        raise ValidationError("horizon must be nonnegative")
    quota = _resolve_quota(quota, params)
    nsteps = int(math.ceil(horizon / step - 1e-12))
    x = np.asarray(x0, dtype=float).copy()
    xs = [x.copy()]
    ts = [0.0]
    events = []
    t = 0.0
    for _ in range(nsteps):
        h = min(step, horizon - t)
        f = lambda z: rate(z, params, quota, harvest)
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
        if np.any(x < 0):
            events.append({"t": t, "event": "clipped", "species": [int(i) for i in np.where(x < 0)[0]]})
            x = np.maximum(x, 0.0)
        xs.append(x.copy())
        ts.append(t)
    return Trajectory(np.array(ts), np.array(xs), events)


# --------------------------------------------------------------------------
# steady states

@dataclass(frozen=True)
class SteadyState:
    """Result of a steady-state search.

    ``interior`` is False when no steady state with positive stocks exists;
    that is a finding, not an error, and ``x``/``market`` are then None.
    """

    x: np.ndarray | None
    market: MarketState | None
    interior: bool
    stable: bool | None = None
    residual: float = math.nan
    eigenvalues: np.ndarray | None = None
    message: str = ""

    @property
    def tonnes(self):
        return None if self.x is None else self.x * self._kappa

    _kappa: float = ModelParams.kappa

    @property
    def q(self):
        return self.market.q

    @property
    def p(self):
        return self.market.p

    @property
    def n(self):
        return self.market.n

    @property
    def e(self):
        return self.market.e

    @property
    def quota_binding(self):
        return self.market.quota_binding

    @property
    def corner(self):
        return self.market.corner


NO_INTERIOR = SteadyState(None, None, False, message="no interior steady state")


def _newton(x0, params, quota, harvest, maxiter=60):
    """Damped Newton on log stocks.  Returns x or raises ConvergenceError."""
    u = np.log(np.asarray(x0, dtype=float))

    def F(v):
        x = np.exp(v)
        return rate(x, params, quota, harvest) / x

    fu = F(u)
    norm = np.max(np.abs(fu))
    for _ in range(maxiter):
        if norm < 1e-13:
            break
        J = np.empty((2, 2))
        for j in range(2):
            d = 1e-7 * max(1.0, abs(u[j]))
            up, dn = u.copy(), u.copy()
            up[j] += d
            dn[j] -= d
            J[:, j] = (F(up) - F(dn)) / (2 * d)
        try:
            step = np.linalg.solve(J, -fu)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("singular Jacobian", best=np.exp(u)) from exc
        if not np.all(np.isfinite(step)):
            raise ConvergenceError("non-finite Newton step", best=np.exp(u))
        step = np.clip(step, -1.0, 1.0)
        lam = 1.0
        while True:
            cand = u + lam * step
            try:
                fc = F(cand)
                nc = np.max(np.abs(fc)) if np.all(np.isfinite(fc)) else math.inf
            except AdaptImpactError:
                nc = math.inf
            if nc < norm * (1 - 1e-4 * lam) or lam < 1e-6:
                break
            lam *= 0.5
        if not math.isfinite(nc):
            raise ConvergenceError("Newton left the model domain", best=np.exp(u))
        if lam < 1e-6 and nc >= norm:
            raise ConvergenceError("Newton stalled", best=np.exp(u))
        u, fu, norm = cand, fc, nc
        if np.any(u < math.log(X_MIN)) or np.any(u > 20):
            raise ConvergenceError("Newton left the positive orthant", best=np.exp(u))
    else:
        raise ConvergenceError("Newton did not converge", best=np.exp(u))
    return np.exp(u)


def _jacobian(x, params, quota, harvest):
    J = np.empty((2, 2))
    for j in range(2):
        d = 1e-6 * x[j]
        up, dn = x.copy(), x.copy()
        up[j] += d
        dn[j] -= d
        J[:, j] = (rate(up, params, quota, harvest) - rate(dn, params, quota, harvest)) / (2 * d)
    return J


def _classify(x, params, quota, harvest):
    # residual relative to the gross flows, so that the vanishing Ricker
    # tail far out (growth and harvest both ~0) does not pass as a root
    g = growth(x, params)
    h = harvest(x) if harvest is not None else equilibrium_harvest(x, params, quota)
    res = (g - h) / np.maximum(np.maximum(np.abs(g), np.abs(h)), 1e-300)
    J = _jacobian(x, params, quota, harvest)
    eig = np.linalg.eigvals(J)
    market = None if harvest is not None else market_equilibrium(x, params, quota)
    return SteadyState(x=x, market=market, interior=True,
                       stable=bool(np.all(eig.real < 0)),
                       residual=float(np.max(np.abs(res))), eigenvalues=eig,
                       _kappa=params.kappa)


def _seeds(params):
    ref = Reference()
    yield tonnes_to_model(ref.upper, params)
    yield tonnes_to_model(ref.lower, params)
    for s1 in np.geomspace(0.02, 8.0, 14):
        for s2 in (0.1, 0.16, 0.3, 0.6):
            yield np.array([s1, s2])


def steady_states(params, quota="default", harvest=None, seeds=None):
    """All distinct interior steady states reachable from the seed set."""
    quota = _resolve_quota(quota, params)
    found = []
    for s in (seeds if seeds is not None else _seeds(params)):
        try:
            x = _newton(s, params, quota, harvest)
        except (ConvergenceError, AdaptImpactError, FloatingPointError):
            continue
        if any(np.allclose(x, f, rtol=1e-7) for f in found):
            continue
        found.append(x)
    out = [_classify(x, params, quota, harvest) for x in found]
    out = [s for s in out if s.residual <= RESIDUAL_TOL]
    return sorted(out, key=lambda s: (-s.x[0], -s.x[1]))


def _pick(roots, branch):
    """Root with the extreme plaice stock; ties go to the largest sole stock."""
    x1 = np.array([r.x[0] for r in roots])
    target = x1.max() if branch == "upper" else x1.min()
    tied = [r for r, v in zip(roots, x1) if abs(v - target) <= 1e-6 * target]
    return max(tied, key=lambda r: r.x[1])


def find_steady_state(params, quota="default", x0=None, branch="upper", harvest=None):
    """Interior steady state of the fishery.

    Parameters
    ----------
    params : ModelParams
    quota : tuple or "default"
        Per-species caps in model units; "default" is the reference sole TAC.
    x0 : array_like, optional
        Warm start.  When given, the root Newton reaches from it is returned
        if it exists, which keeps continuation on one branch.
    branch : {"upper", "lower"}
        Which root to return when several exist and no warm start is given:
        the one with the largest or smallest plaice stock (then the
        largest sole stock).
    harvest : callable, optional
        Replace the market harvest, e.g. ``lambda x: np.zeros(2)``.

    Returns
    -------
    SteadyState
        With ``interior=False`` if no positive root exists.
    """
    if branch not in ("upper", "lower"):
        raise ValidationError("branch must be 'upper' or 'lower'")
    q = _resolve_quota(quota, params)
    if x0 is not None:
        try:
            x = _newton(np.asarray(x0, dtype=float), params, q, harvest)
            st = _classify(x, params, q, harvest)
            if st.residual <= RESIDUAL_TOL:
                return st
        except (ConvergenceError, AdaptImpactError):
            pass
    roots = steady_states(params, q, harvest)
    if not roots:
        return NO_INTERIOR
    return _pick(roots, branch)


# --------------------------------------------------------------------------
# bifurcations

@dataclass(frozen=True)
class BifurcationResult:
    driver: str
    found: bool
    last_interior: float | None
    first_without: float | None
    side: str
    branch: list = field(default_factory=list)  # (value, SteadyState)
    message: str = ""

    @property
    def critical(self):
        if not self.found:
            return None
        return 0.5 * (self.last_interior + self.first_without)

    @property
    def bracket(self):
        return (self.last_interior, self.first_without)


def bifurcation_scan(params, driver, bounds, steps=200, quota="default", refine=True,
                     branch="upper"):
    """Continue the steady state from ``bounds[0]`` towards ``bounds[1]``.

    Each solve warm-starts from the previous one.  When the interior steady
    state disappears, the bracket is reported (and narrowed by bisection if
    ``refine``).  Ordering the bounds from the baseline outwards selects the
    side scanned.
    """
    if steps < 1:
        raise ValidationError("steps must be positive")
    start, stop = float(bounds[0]), float(bounds[1])
    side = "lower" if stop < start else "upper"
    grid = np.linspace(start, stop, steps + 1)
    x_prev = None
    path = []
    for v in grid:
        p = params.replace(**{driver: v})
        st = find_steady_state(p, quota, x0=x_prev, branch=branch)
        if not st.interior:
            if not path:
                return BifurcationResult(driver, False, None, float(v), side, path,
                                         "no interior steady state at the start")
            lo, hi = path[-1][0], float(v)
            if refine:
                lo, hi, extra = _bisect(params, driver, lo, hi, path[-1][1].x, quota, branch)
                path.extend(extra)
            return BifurcationResult(driver, True, lo, hi, side, path,
                                     "interior steady state lost")
        path.append((float(v), st))
        x_prev = st.x
    return BifurcationResult(driver, False, path[-1][0], None, side, path,
                             "interior steady state along the whole range")


def _bisect(params, driver, good, bad, x_good, quota, branch, iters=30):
    extra = []
    for _ in range(iters):
        mid = 0.5 * (good + bad)
        st = find_steady_state(params.replace(**{driver: mid}), quota, x0=x_good, branch=branch)
        if st.interior:
            good, x_good = mid, st.x
            extra.append((mid, st))
        else:
            bad = mid
        if abs(bad - good) <= 1e-9 * max(1.0, abs(good)):
            break
    return good, bad, extra


def verify_bracket(result, params, quota="default"):
    """Re-solve both ends of a bracket cold; True when existence flips."""
    if not result.found:
        return False
    lo = find_steady_state(params.replace(**{result.driver: result.last_interior}), quota)
    hi = find_steady_state(params.replace(**{result.driver: result.first_without}), quota)
    return lo.interior and not hi.interior


# --------------------------------------------------------------------------
# relative table

TABLE_DRIVERS = {
    "omega": (0.96, 1.37),
    "epsilon": (0.495, 0.52),
    "chi1": (0.093, 0.607),
    "chi2": (0.230, 0.549),
}


@dataclass(frozen=True)
class TableRow:
    label: str
    driver: str | None
    value: float | None
    interior: bool
    stocks: np.ndarray | None = None
    quantities: np.ndarray | None = None
    prices: np.ndarray | None = None
    fleets: np.ndarray | None = None
    exited: tuple = (False, False)
    stable: bool | None = None


def _walk(params, driver, target, x_start, quota, steps):
    """Continue from the baseline to ``target``; None if the branch is lost."""
    base = params.get(driver)
    x = x_start
    st = None
    for v in np.linspace(base, target, steps + 1)[1:]:
        st = find_steady_state(params.replace(**{driver: v}), quota, x0=x)
        if not st.interior:
            return st
        x = st.x
    return st


def relative_steady_table(params=ModelParams(), drivers=None, quota="default",
                          steps=20, branch="upper"):
    """Steady states at driver bounds as ratios to the baseline steady state.

    Each bound is reached by continuation from the baseline.  If that branch
    disappears on the way, the remaining steady state at the bound (if any)
    is reported instead.
    """
    drivers = TABLE_DRIVERS if drivers is None else drivers
    base = find_steady_state(params, quota, branch=branch)
    if not base.interior:
        raise ConvergenceError("no baseline steady state")
    rows = [_row("Initial", None, None, base, base)]
    for name, (down, up) in drivers.items():
        for label, value in ((f"{name}_down", down), (f"{name}_up", up)):
            st = _walk(params, name, value, base.x, quota, steps)
            if st is None or not st.interior:
                st = find_steady_state(params.replace(**{name: value}), quota, branch=branch)
            rows.append(_row(label, name, value, st, base))
    return rows


def _row(label, driver, value, st, base):
    if not st.interior:
        return TableRow(label, driver, value, False)
    with np.errstate(divide="ignore", invalid="ignore"):
        return TableRow(label, driver, value, True,
                        stocks=st.x / base.x, quantities=st.q / base.q,
                        prices=st.p / base.p, fleets=st.n / base.n,
                        exited=st.market.exited, stable=st.stable)
