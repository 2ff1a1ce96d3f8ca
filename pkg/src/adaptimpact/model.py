"""Two-species, two-metier flatfish bio-economic model.

Species index ``i``: 0 = plaice, 1 = sole.  Metier index ``k``: 0 = the fleet
targeting plaice, 1 = the fleet targeting sole.  ``nu[i][k]`` is the catch
efficiency of metier ``k`` on species ``i``.

All quantities are in model units: stocks and harvests are tonnes divided by
``kappa``; prices and incomes are relative to ``wscale`` (income of the
economy), so that the wage is one at the reference point.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import (DomainError, InfeasibleDemand, ParameterInconsistency,
                     SingularMatrixError, ValidationError)

SPECIES = ("plaice", "sole")
METIERS = ("metier1", "metier2")

# Ricker coefficients are not among the calibrated economic parameters.  The
# plaice pair puts equilibria at both reference stock levels (586,709 t,
# stable; 148,589 t, unstable) under the default parameters and the 17,545 t
# sole quota.  Sole uses the same relative density dependence b*x as plaice
# at its 85,937 t reference stock, which makes that stock the stable root.
# See calibration.ricker_through_points and tests/test_fixture.py.
RICKER_A = (0.6783091151209253, 0.6147231517460019)
RICKER_B = (1.0022218280911197, 6.842367857122226)

DEFAULT_QUOTA_TONNES = (None, 17545.0)


@dataclass(frozen=True)
class ModelParams:
    """Full parameter set of the flatfish model (defaults: calibrated values).

    ``phi`` is a shared fixed cost; ``phi_by_metier`` overrides it per metier.
    """

    epsilon: float = 0.5
    chi: tuple = (0.308, 0.308)
    nu: tuple = ((1.0, 0.75), (0.0, 0.25))
    omega: float = 1.0
    phi: float = 1.0e-8
    alpha: float = 6.77e-5
    beta: tuple = (2.69, 4.14)
    eta: float = 1.10
    sigma: float = 2.01
    a: tuple = RICKER_A
    b: tuple = RICKER_B
    kappa: float = 533459.8
    wscale: float = 10052180.0e6
    phi_by_metier: tuple | None = None

    def __post_init__(self):
        for name in ("chi", "beta", "a", "b"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        object.__setattr__(self, "nu", tuple(tuple(float(v) for v in row) for row in self.nu))
        if self.phi_by_metier is not None:
            object.__setattr__(self, "phi_by_metier", tuple(float(v) for v in self.phi_by_metier))
        self.validate()

    def validate(self):
        problems = []
        if not 0.0 < self.epsilon < 1.0:
            problems.append("epsilon must lie in (0, 1)")
        if any(c <= 0 for c in self.chi):
            problems.append("chi must be positive")
        if any(v < 0 for row in self.nu for v in row):
            problems.append("nu entries must be nonnegative")
        if self.nu_det == 0.0:
            problems.append("nu must be non-singular")
        if self.sigma <= 1.0:
            problems.append("sigma must exceed 1")
        if self.eta <= 0.0:
            problems.append("eta must be positive")
        if self.alpha <= 0 or min(self.beta) <= 0:
            problems.append("alpha and beta must be positive")
        if self.omega <= 0 or min(self.phis) <= 0:
            problems.append("omega and phi must be positive")
        if min(self.a) <= 0 or min(self.b) < 0:
            problems.append("Ricker a must be positive and b nonnegative")
        if self.kappa <= 0 or self.wscale <= 0:
            problems.append("scales must be positive")
        values = [self.epsilon, self.omega, self.phi, self.alpha, self.eta, self.sigma,
                  self.kappa, self.wscale, *self.chi, *self.beta, *self.a, *self.b,
                  *(v for row in self.nu for v in row)]
        if not all(math.isfinite(v) for v in values):
            problems.append("all parameters must be finite")
        if problems:
            raise ValidationError("; ".join(problems))

    @property
    def nu_det(self):
        (n11, n12), (n21, n22) = self.nu
        return n11 * n22 - n12 * n21

    @property
    def phis(self):
        if self.phi_by_metier is not None:
            return self.phi_by_metier
        return (self.phi, self.phi)

    def get(self, name):
        """Value of a scalar parameter by its ascii name (``chi1``, ``nu21``...)."""
        kind, idx = _split_name(name)
        value = getattr(self, kind)
        if idx is None:
            return float(value)
        if kind == "nu":
            return value[idx[0]][idx[1]]
        if kind == "phi_by_metier":
            return self.phis[idx[0]]
        return value[idx[0]]

    def replace(self, **changes):
        """Copy with scalar parameters changed by ascii name."""
        fields = {}
        for name, v in changes.items():
            kind, idx = _split_name(name)
            if idx is None:
                fields[kind] = float(v)
                continue
            current = fields.get(kind, getattr(self, kind) if kind != "phi_by_metier" else self.phis)
            if kind == "nu":
                rows = [list(r) for r in current]
                rows[idx[0]][idx[1]] = float(v)
                fields[kind] = tuple(tuple(r) for r in rows)
            else:
                vals = list(current)
                vals[idx[0]] = float(v)
                fields[kind] = tuple(vals)
        return dataclasses.replace(self, **fields)

    def as_flat_dict(self):
        out = {"epsilon": self.epsilon, "chi1": self.chi[0], "chi2": self.chi[1]}
        for i in range(2):
            for k in range(2):
                out[f"nu{i + 1}{k + 1}"] = self.nu[i][k]
        out.update(omega=self.omega, phi=self.phi, alpha=self.alpha,
                   beta1=self.beta[0], beta2=self.beta[1], eta=self.eta, sigma=self.sigma,
                   a1=self.a[0], b1=self.b[0], a2=self.a[1], b2=self.b[1],
                   kappa=self.kappa, wscale=self.wscale)
        if self.phi_by_metier is not None:
            out["phi1"], out["phi2"] = self.phi_by_metier
        return out

    @classmethod
    def from_flat_dict(cls, values):
        base = cls()
        known = set(base.as_flat_dict()) | {"phi1", "phi2"}
        unknown = set(values) - known
        if unknown:
            raise ValidationError(f"unknown parameter names: {sorted(unknown)}")
        return base.replace(**values)


_VECTOR_NAMES = {"chi": "chi", "beta": "beta", "a": "a", "b": "b", "phi": "phi_by_metier"}


def _split_name(name):
    if name in ("epsilon", "omega", "phi", "alpha", "eta", "sigma", "kappa", "wscale"):
        return name, None
    if name.startswith("nu") and len(name) == 4 and name[2:].isdigit():
        i, k = int(name[2]) - 1, int(name[3]) - 1
        if i in (0, 1) and k in (0, 1):
            return "nu", (i, k)
    for prefix, attr in _VECTOR_NAMES.items():
        rest = name[len(prefix):]
        if name.startswith(prefix) and rest in ("1", "2"):
            return attr, (int(rest) - 1,)
    raise ValidationError(f"unknown parameter name {name!r}")


@dataclass(frozen=True)
class StockState:
    """Per-species biomass in model units."""

    x: tuple
    kappa: float = ModelParams.kappa

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        if any(v < 0 for v in self.x):
            raise DomainError(f"negative stock {self.x}")

    @classmethod
    def from_tonnes(cls, tonnes, kappa=ModelParams.kappa):
        return cls(tuple(t / kappa for t in tonnes), kappa)

    @property
    def tonnes(self):
        return np.array(self.x) * self.kappa

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.x, dtype=dtype)


@dataclass(frozen=True)
class MarketState:
    """Per-period economic equilibrium for given stocks."""

    p: np.ndarray
    q: np.ndarray
    y: float
    n: np.ndarray
    e: np.ndarray
    h: np.ndarray  # per-firm harvest, species x metier
    exited: tuple = (False, False)
    quota_binding: tuple = (False, False)
    omega: float = 1.0

    @property
    def corner(self):
        return any(self.exited)

    def budget_residual(self):
        return self.y + float(np.dot(self.p, self.q)) - self.omega

    def clearing_residual(self):
        return self.q - self.h @ self.n


# --------------------------------------------------------------------------
# unit conversion

def tonnes_to_model(t, params=ModelParams()):
    return np.asarray(t, dtype=float) / params.kappa


def model_to_tonnes(x, params=ModelParams()):
    return np.asarray(x, dtype=float) * params.kappa


def price_to_eur_per_kg(p, params=ModelParams()):
    # expenditure p*q is a share of income wscale; q*kappa tonnes = 1000*q*kappa kg
    return np.asarray(p, dtype=float) * params.wscale / (params.kappa * 1000.0)


def price_from_eur_per_kg(p, params=ModelParams()):
    return np.asarray(p, dtype=float) * params.kappa * 1000.0 / params.wscale


# --------------------------------------------------------------------------
# ecosystem

def ricker_growth(x, a, b):
    """Ricker surplus production ``a x exp(-b x)``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("stock must be nonnegative")
    out = a * x * np.exp(-np.asarray(b) * x)
    return float(out) if out.ndim == 0 else out


def growth(x, params):
    return np.array([ricker_growth(x[i], params.a[i], params.b[i]) for i in range(2)])


def stock_change(x, H, params):
    H = np.asarray(H, dtype=float)
    if np.any(H < 0):
        raise DomainError("harvest must be nonnegative")
    return growth(np.asarray(x, dtype=float), params) - H


# --------------------------------------------------------------------------
# harvesting

def harvest_per_firm(e, x, k, params):
    """Harvest of each species by one firm of metier ``k`` at effort ``e``."""
    if e < 0:
        raise DomainError("effort must be nonnegative")
    x = np.asarray(x, dtype=float)
    return np.array([params.nu[i][k] * e ** params.epsilon * x[i] ** params.chi[i]
                     for i in range(2)])


def revenue_basket(x, p, params):
    """Sum over species of nu_ik x_i^chi_i p_i, per metier."""
    X = [x[i] ** params.chi[i] for i in range(2)]
    return np.array([sum(params.nu[i][k] * X[i] * p[i] for i in range(2)) for k in range(2)])


def adaptive_effort(params, x, p):
    """Profit-maximising effort per metier at given stocks and prices.

    A metier with an empty revenue basket gets zero effort.
    """
    basket = revenue_basket(x, p, params)
    eps = params.epsilon
    out = np.zeros(2)
    for k in range(2):
        if basket[k] > 0:
            out[k] = (eps / params.omega * basket[k]) ** (1.0 / (1.0 - eps))
    return out


def zero_profit_effort(params):
    eps = params.epsilon
    return np.array([phi / params.omega * eps / (1.0 - eps) for phi in params.phis])


def profit(params, e, k, x, p):
    h = harvest_per_firm(e, x, k, params)
    return float(np.dot(h, p) - params.omega * e - params.phis[k])


def price_basket(params):
    """Revenue per unit of effective effort at which each metier breaks even."""
    eps = params.epsilon
    e_star = zero_profit_effort(params)
    return np.array([phi * (1.0 + eps / (1.0 - eps)) * e_star[k] ** (-eps)
                     for k, phi in enumerate(params.phis)])


def equilibrium_prices(params, x):
    """Prices at which both metiers earn zero profit at their optimal effort."""
    det = params.nu_det
    if det == 0.0:
        raise SingularMatrixError("metier efficiency matrix is singular")
    pb = price_basket(params)
    (n11, n12), (n21, n22) = params.nu
    X = [x[i] ** params.chi[i] for i in range(2)]
    p = np.array([(n22 * pb[0] - n21 * pb[1]) / (det * X[0]),
                  (n11 * pb[1] - n12 * pb[0]) / (det * X[1])])
    if np.any(p <= 0) or not np.all(np.isfinite(p)):
        raise ParameterInconsistency(f"zero-profit prices not positive: {p}")
    return p


# --------------------------------------------------------------------------
# household

def ces_quantity(q, params):
    s = params.sigma
    r = (s - 1.0) / s
    return sum((params.beta[i] * q[i]) ** r for i in range(2)) ** (1.0 / r)


def utility(q, y, params):
    """Quasi-linear utility of numeraire ``y`` and fish basket ``q``."""
    q = np.asarray(q, dtype=float)
    if np.any(q < 0):
        raise DomainError("quantities must be nonnegative")
    Q = ces_quantity(q, params)
    eta = params.eta
    if eta == 1.0:
        if Q == 0:
            raise DomainError("log utility undefined at Q = 0")
        return y + params.alpha * math.log(Q)
    if Q == 0 and eta < 1.0:
        raise DomainError("utility undefined at Q = 0 for eta < 1")
    return y + params.alpha * eta / (eta - 1.0) * Q ** ((eta - 1.0) / eta)


def willingness_to_pay(q, params):
    q = np.asarray(q, dtype=float)
    if np.any(q <= 0):
        raise DomainError("willingness to pay needs positive quantities")
    return np.array(_wtp(q[0], q[1], params))


def _wtp(q1, q2, params):
    s, eta = params.sigma, params.eta
    r = (s - 1.0) / s
    z1, z2 = params.beta[0] * q1, params.beta[1] * q2
    Q = (z1 ** r + z2 ** r) ** (1.0 / r)
    common = params.alpha * Q ** ((eta - s) / (eta * s))
    w1 = params.beta[0] * z1 ** (-1.0 / s) * common if z1 > 0 else math.inf
    w2 = params.beta[1] * z2 ** (-1.0 / s) * common if z2 > 0 else math.inf
    return w1, w2


def demanded_quantities(p, params):
    """Unconstrained household demand at prices ``p``."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0):
        raise DomainError("prices must be positive")
    s, eta = params.sigma, params.eta
    beta = np.asarray(params.beta)
    index = np.sum((p / beta) ** (1.0 - s)) ** (1.0 / (1.0 - s))
    return params.alpha ** eta * p ** (-s) * beta ** (s - 1.0) * index ** (s - eta)


def conditional_demand(q1, p1, params):
    """Sole quantity consistent with the plaice first-order condition.

    Given plaice consumption ``q1`` and plaice price ``p1``, returns the sole
    quantity that makes ``p1`` the household's marginal valuation of plaice.
    """
    s, eta, alpha = params.sigma, params.eta, params.alpha
    b1, b2 = params.beta
    z1 = b1 * q1
    inner = (p1 / (alpha * b1) * z1 ** (1.0 / s)) ** (eta * (s - 1.0) / (eta - s)) \
        - z1 ** ((s - 1.0) / s)
    if inner < 0:
        raise InfeasibleDemand(f"no nonnegative sole demand at q1={q1}, p1={p1}")
    return inner ** (s / (s - 1.0)) / b2


def _free_quantity(j, q_other, price, params):
    """Solve the first-order condition for good ``j`` with the other fixed."""
    s, eta = params.sigma, params.eta
    r = (s - 1.0) / s
    zo = params.beta[1 - j] * q_other

    def f(u):
        qj = math.exp(u)
        w = _wtp(qj, q_other, params) if j == 0 else _wtp(q_other, qj, params)
        return math.log(w[j]) - math.log(price)

    guess = demanded_quantities((price, price), params)[j]
    u0 = math.log(guess)
    f0 = f(u0)
    if f0 == 0.0:
        return guess
    # d f / d u lies between -max(1/s, 1/eta) and -min(1/s, 1/eta)
    steep, flat = max(1.0 / s, 1.0 / eta), min(1.0 / s, 1.0 / eta)
    if f0 > 0:
        lo, hi = u0 + f0 / steep * 0.999, u0 + f0 / flat * 1.001 + 1e-12
    else:
        lo, hi = u0 + f0 / flat * 1.001 - 1e-12, u0 + f0 / steep * 0.999
    if zo == 0:
        lo, hi = min(lo, hi) - 1.0, max(lo, hi) + 1.0
    del r
    return math.exp(brentq(f, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=200))


def household_demand(p, caps, params):
    """Household optimum at prices ``p`` with quantities capped at ``caps``.

    Caps model binding quotas or the quantities actually offered (free
    disposal).  Returns ``(q, binding)`` with ``binding[i]`` true when good
    ``i`` sits at its cap.
    """
    caps = [math.inf if c is None else float(c) for c in caps]
    d = demanded_quantities(p, params)
    if d[0] <= caps[0] and d[1] <= caps[1]:
        return d, (False, False)
    best, best_val, best_bind = None, -math.inf, (False, False)
    for bind in ((True, False), (False, True), (True, True)):
        if any(b and not math.isfinite(c) for b, c in zip(bind, caps)):
            continue
        q = [caps[0] if bind[0] else None, caps[1] if bind[1] else None]
        for j in range(2):
            if q[j] is None:
                q[j] = min(_free_quantity(j, q[1 - j], p[j], params), caps[j])
        q = np.array(q)
        val = utility(q, -float(np.dot(p, q)), params)
        if val > best_val:
            best, best_val, best_bind = q, val, bind
    binding = tuple(bool(best[i] >= caps[i]) for i in range(2))
    del best_bind
    return best, binding


# --------------------------------------------------------------------------
# fleets and market equilibrium

def _per_firm_matrix(params, x, e):
    X = [x[i] ** params.chi[i] for i in range(2)]
    return np.array([[params.nu[i][k] * e[k] ** params.epsilon * X[i] for k in range(2)]
                     for i in range(2)])


def _solve_fleets(q, h):
    det = h[0, 0] * h[1, 1] - h[0, 1] * h[1, 0]
    if det == 0.0:
        raise SingularMatrixError("harvest matrix is singular")
    return np.array([(h[1, 1] * q[0] - h[0, 1] * q[1]) / det,
                     (h[0, 0] * q[1] - h[1, 0] * q[0]) / det])


def fleet_sizes(q, x, params, e=None):
    """Number of firms per metier that clears the market for ``q``.

    Negative solutions are clipped at zero; use :func:`market_equilibrium`
    for the re-solved corner.
    """
    e = zero_profit_effort(params) if e is None else np.asarray(e, dtype=float)
    if params.nu_det == 0.0:
        raise SingularMatrixError("metier efficiency matrix is singular")
    n = _solve_fleets(np.asarray(q, dtype=float), _per_firm_matrix(params, x, e))
    return np.maximum(n, 0.0)


def market_equilibrium(x, params, quota=(None, None)):
    """Open-access equilibrium of prices, consumption and fleets at stocks ``x``.

    Effort is the zero-profit effort; prices make both metiers break even;
    the household consumes its (quota-capped) demand, and fleets clear the
    market.  If clearing needs a negative fleet, that metier exits and the
    remaining one supplies alone.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("market equilibrium needs positive stocks")
    e = zero_profit_effort(params)
    h = _per_firm_matrix(params, x, e)
    p = equilibrium_prices(params, x)
    q, binding = household_demand(p, quota, params)
    n = _solve_fleets(q, h)
    exited = (bool(n[0] < 0), bool(n[1] < 0))
    if exited[0] and exited[1]:
        raise ParameterInconsistency("both metiers would exit")
    if any(exited):
        active = 1 if exited[0] else 0
        p, q, n, binding = _single_metier(x, params, quota, h, active)
    y = params.omega - float(np.dot(p, q))
    return MarketState(p=p, q=q, y=y, n=n, e=e, h=h, exited=exited,
                       quota_binding=binding, omega=params.omega)


def _single_metier(x, params, quota, h, k):
    """Corner where only metier ``k`` operates."""
    pb = price_basket(params)[k]
    X = [x[i] ** params.chi[i] for i in range(2)]
    col = h[:, k]
    caught = [i for i in range(2) if col[i] > 0]

    # willingness to pay is homogeneous of degree -1/eta in quantities, so
    # revenue per unit effort scales as n**(-1/eta) and break-even is closed form
    w1 = _wtp(*col, params)
    rev1 = sum(params.nu[i][k] * X[i] * w1[i] for i in caught)
    n_free = (rev1 / pb) ** params.eta
    caps = [math.inf if c is None else float(c) for c in quota]
    n_cap = min((caps[i] / col[i] for i in caught), default=math.inf)
    n = np.zeros(2)
    if n_free <= n_cap:
        n[k] = n_free
        q = n_free * col
        w = _wtp(*q, params)
        p = np.array([w[i] if i in caught else math.nan for i in range(2)])
        return p, q, n, (False, False)
    n[k] = n_cap
    q = n_cap * col
    bound = min(caught, key=lambda i: caps[i] / col[i])
    w = _wtp(*q, params)
    p = np.array([w[i] if i in caught else math.nan for i in range(2)])
    rest = sum(params.nu[i][k] * X[i] * p[i] for i in caught if i != bound)
    p[bound] = (pb - rest) / (params.nu[bound][k] * X[bound])
    binding = tuple(i == bound for i in range(2))
    return p, q, n, binding


def quota_in_model_units(quota_tonnes, params=ModelParams()):
    return tuple(None if t is None else t / params.kappa for t in quota_tonnes)


@dataclass(frozen=True)
class Reference:
    """Reference stocks of the calibrated fishery, in tonnes."""

    upper: tuple = field(default=(586709.0, 85937.0))
    lower: tuple = field(default=(148589.0, 85937.0))
