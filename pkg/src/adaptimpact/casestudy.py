"""Impact analysis of the North Sea flatfish fishery.

Fishers adapt effort to four drivers (returns to effort ``epsilon``, stock
harvesting efficiencies ``chi1``/``chi2`` and the wage ``omega``).  Stocks,
prices and fleet sizes stay at their steady-state values while a driver
moves; the properties tracked are the profit of a firm in each metier, the
quantities landed, the households' willingness to pay for them and utility.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import framework as fw
from .dynamics import find_steady_state
from .errors import ConvergenceError, ValidationError
from .model import ModelParams, adaptive_effort, household_demand, utility, _wtp

DRIVERS = ("epsilon", "chi1", "chi2", "omega")
PROPERTIES = ("pi1", "pi2", "q1", "q2", "p1", "p2", "U")
BEHAVIOURS = ("e1", "e2")

EXPOSURE_BOX = {
    "epsilon": (0.48, 0.52),
    "chi1": (0.093, 0.607),
    "chi2": (0.230, 0.549),
    "omega": (0.65, 1.37),
}


@dataclass(frozen=True)
class CaseStudyConfig:
    """Settings of the impact analysis.

    ``branch`` selects the steady state the analysis starts from.  The
    default ``"lower"`` is the state with 148,589 t of plaice.
    """

    params: ModelParams = field(default_factory=ModelParams)
    bounds: dict = field(default_factory=lambda: dict(EXPOSURE_BOX))
    quota: object = "default"
    n: int = 101
    branch: str = "lower"
    household_adaptation: bool = True
    workers: int | None = None

    def __post_init__(self):
        if self.n < 3:
            raise ValidationError("grid needs at least 3 points")
        for d, (lo, hi) in self.bounds.items():
            if d not in DRIVERS:
                raise ValidationError(f"unknown driver {d!r}")
            base = self.params.get(d)
            if not lo <= base <= hi:
                raise ValidationError(f"baseline {d}={base} outside its bounds ({lo}, {hi})")


@dataclass(frozen=True)
class Baseline:
    x: np.ndarray
    p: np.ndarray
    n: np.ndarray
    q: np.ndarray


def baseline_state(config):
    st = find_steady_state(config.params, config.quota, branch=config.branch)
    if not st.interior:
        raise ConvergenceError("no interior baseline steady state")
    if st.market.corner:
        raise ValidationError("baseline steady state is a corner")
    return Baseline(x=st.x, p=st.p, n=st.n, q=st.q)


class FlatfishModel(fw.ImpactModel):
    """Flatfish fishery seen through the impact framework.

    Parameters
    ----------
    config : CaseStudyConfig
    household : bool
        When true the utility property lets households buy less than is
        offered (free disposal) instead of consuming everything landed.
    """

    schema = fw.PropertySchema(PROPERTIES, BEHAVIOURS)
    maximized = (0, 1)
    primary_property = 0

    def __init__(self, config=None, household=False, base=None):
        self.config = config or CaseStudyConfig()
        self.params = self.config.params
        self.base = base or baseline_state(self.config)
        self.household = household
        self.baseline = fw.DriverVector(DRIVERS, tuple(self.params.get(d) for d in DRIVERS), True)
        self.box = dict(self.config.bounds)
        e0 = self.tau_star(self.baseline)
        # generous bracket for numerical argmax over the whole box
        self.tau_bounds = (np.zeros(2), 200.0 * e0)

    def params_at(self, theta):
        return self.params.replace(**theta.as_dict())

    def harvest(self, theta, tau):
        """Per-firm harvest matrix (species x metier)."""
        eps = theta["epsilon"]
        X = (self.base.x[0] ** theta["chi1"], self.base.x[1] ** theta["chi2"])
        nu = self.params.nu
        return np.array([[nu[i][k] * tau[k] ** eps * X[i] for k in range(2)] for i in range(2)])

    def psi(self, theta, tau):
        omega = theta["omega"]
        p0 = self.base.p
        h = self.harvest(theta, tau)
        phis = self.params.phis
        pi = [h[0, k] * p0[0] + h[1, k] * p0[1] - omega * tau[k] - phis[k] for k in range(2)]
        q = h @ self.base.n
        w = _wtp(q[0], q[1], self.params) if np.all(q > 0) else (math.inf, math.inf)
        if self.household:
            q_c, _ = household_demand(p0, q, self.params)
        else:
            q_c = q
        U = utility(q_c, omega - float(np.dot(p0, q_c)), self.params)
        return np.array([pi[0], pi[1], q[0], q[1], w[0], w[1], U])

    def tau_star(self, theta):
        return adaptive_effort(self.params_at(theta), self.base.x, self.base.p)

    def budget(self, theta, tau):
        q = self.harvest(theta, tau) @ self.base.n
        return theta["omega"] - float(np.dot(self.base.p, q))


# --------------------------------------------------------------------------
# closed-form marginals of the adapted effort and profit

def revenue_basket(model, theta):
    X = (model.base.x[0] ** theta["chi1"], model.base.x[1] ** theta["chi2"])
    nu = model.params.nu
    return np.array([sum(nu[i][k] * X[i] * model.base.p[i] for i in range(2)) for k in range(2)])


def effort_d_omega(model, theta):
    e = model.tau_star(theta)
    return -e / ((1.0 - theta["epsilon"]) * theta["omega"])


def effort_d_epsilon(model, theta):
    eps, omega = theta["epsilon"], theta["omega"]
    e = model.tau_star(theta)
    B = revenue_basket(model, theta)
    return e * (1.0 / (eps * (1.0 - eps)) + np.log(eps * B / omega) / (1.0 - eps) ** 2)


def profit_d_omega(model, theta, adapted=True):
    """Slope of profit in the wage: minus the effort (envelope theorem when adapted)."""
    tau = model.tau_star(theta) if adapted else model.tau_star(model.baseline)
    return -np.asarray(tau)


# --------------------------------------------------------------------------
# analyses

@dataclass
class ImpactCurves:
    driver: str
    grid: np.ndarray
    records: list
    base_value: float = math.nan
    overlay: list | None = None  # household-adaptation variant
    budget_flags: list = field(default_factory=list)  # True where y < 0

    def series(self, kind, prop, overlay=False):
        j = PROPERTIES.index(prop)
        recs = self.overlay if overlay else self.records
        return np.array([getattr(r, kind)[j] for r in recs])

    @property
    def baseline_index(self):
        return int(np.flatnonzero(self.grid == self.base_value)[0])


def _models(config):
    base = FlatfishModel(config)
    hh = FlatfishModel(config, household=True, base=base.base)
    return base, hh


def analyze_driver(config, driver, marginals=True, models=None):
    """Sweep one driver across its exposure box."""
    if driver not in DRIVERS:
        raise ValidationError(f"unknown driver {driver!r}")
    model, hh = models or _models(config)
    bounds = config.bounds[driver]
    recs = fw.sweep(model, driver, bounds, config.n, workers=config.workers,
                    marginals=marginals)
    grid = np.array([r.theta[driver] for r in recs])
    flags = []
    tau0 = model.tau_star(model.baseline)
    for r in recs:
        flags.append(model.budget(r.theta, model.tau_star(r.theta)) < 0
                     or model.budget(r.theta, tau0) < 0)
    overlay = None
    if config.household_adaptation:
        overlay = household_adaptation_variant(config, driver, models=(model, hh))
    return ImpactCurves(driver, grid, recs, model.baseline[driver], overlay, flags)


def household_adaptation_variant(config, driver, models=None):
    """Records of the same sweep with households free to buy less than offered."""
    _, hh = models or _models(config)
    return fw.sweep(hh, driver, config.bounds[driver], config.n, workers=config.workers,
                    marginals=False)


def analyze_all(config, marginals=True):
    models = _models(config)
    return {d: analyze_driver(config, d, marginals, models) for d in config.bounds}


def marginal_summary(config, points=None, models=None):
    """Marginal measures per driver at the baseline (and optional extra points).

    Returns a list of dict rows with the marginal sensitivity ``s``,
    marginal adaptation ``aa``, marginal total impact ``ti`` for every
    property and the marginal adaptive effort ``ca`` of each metier.
    """
    model, _ = models or _models(config)
    theta0 = model.baseline
    thetas = [("baseline", theta0)]
    for label, mapping in (points or {}).items():
        t = theta0
        for k, v in mapping.items():
            t = t.with_value(k, v)
        thetas.append((label, t))
    rows = []
    for label, theta in thetas:
        s = fw.sensitivity_marginal(model, theta, theta0)
        aa, ba, ca = fw.adaptation_marginals(model, theta, theta0)
        for d, name in enumerate(DRIVERS):
            row = {"point": label, "driver": name}
            for j, prop in enumerate(PROPERTIES):
                row[f"s_{prop}"] = s[j, d]
                row[f"aa_{prop}"] = aa[j, d]
                row[f"ba_{prop}"] = ba[j, d]
                row[f"ti_{prop}"] = s[j, d] + aa[j, d]
            for m, b in enumerate(BEHAVIOURS):
                row[f"ca_{b}"] = ca[m, d]
            rows.append(row)
    return rows


def absolute_summary(config, curves=None):
    """Endpoint comparison of each driver's sweep.

    ``Adapt+`` is the upper end of the exposure box, ``Adapt-`` the lower.
    Every row carries S, aA and TI of quantities and utility, with the
    household-adaptation variant for utility, plus endpoint profits.
    """
    curves = curves or analyze_all(config, marginals=False)
    rows = []
    for d, c in curves.items():
        for tag, idx in (("Adapt-", 0), ("Adapt+", -1)):
            r = c.records[idx]
            row = {"driver": d, "end": tag, "value": c.grid[idx],
                   "exposure": c.grid[idx] - c.base_value}
            for prop in PROPERTIES:
                j = PROPERTIES.index(prop)
                row[f"S_{prop}"] = r.S[j]
                row[f"aA_{prop}"] = r.aA[j]
                row[f"TI_{prop}"] = r.TI[j]
            if c.overlay is not None:
                o = c.overlay[idx]
                j = PROPERTIES.index("U")
                row["S_U_hh"] = o.S[j]
                row["aA_U_hh"] = o.aA[j]
                row["TI_U_hh"] = o.TI[j]
            rows.append(row)
    return rows


def largest_impact_driver(rows, prop, relative_to=None):
    """Driver with the largest absolute total impact on ``prop`` at an endpoint."""
    best, best_val = None, -1.0
    for r in rows:
        v = abs(r[f"TI_{prop}"])
        if relative_to is not None:
            v /= abs(relative_to)
        if v > best_val:
            best, best_val = r["driver"], v
    return best
