"""Generic exposure / sensitivity / adaptation / total-impact engine.

A model supplies a property function ``psi(theta, tau)`` returning ``P``
system properties and an adaptation response ``tau(theta)`` with ``M``
behaviour variables.  Given a baseline driver vector ``theta0`` the engine
computes absolute and marginal decompositions of the impact of moving to
``theta``:

* sensitivity ``S = psi(theta, tau0) - psi(theta0, tau0)``
* adaptation ``aA = psi(theta, tau(theta)) - psi(theta, tau0)``
* behaviour change ``cA = tau(theta) - tau0``
* total impact ``TI = S + aA``
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (BoundaryWarning, ConsistencyError, ConvergenceError,
                     EvaluationError, OptimalityViolation, SchemaError,
                     ValidationError)

DECOMPOSITION_TOL = 1e-10
OPTIMALITY_SLACK = 1e-12
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class DriverVector:
    """Named driver values, in a fixed order."""

    names: tuple
    values: tuple
    baseline: bool = False

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        values = tuple(float(v) for v in self.values)
        if len(set(names)) != len(names):
            raise SchemaError("driver names must be unique")
        if len(names) != len(values):
            raise SchemaError("names and values differ in length")
        if not all(math.isfinite(v) for v in values):
            raise ValidationError(f"non-finite driver value in {dict(zip(names, values))}")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_mapping(cls, mapping, baseline=False):
        return cls(tuple(mapping), tuple(mapping.values()), baseline)

    def __getitem__(self, name):
        try:
            return self.values[self.names.index(name)]
        except ValueError:
            raise SchemaError(f"unknown driver {name!r}") from None

    def __len__(self):
        return len(self.names)

    def as_array(self):
        return np.array(self.values)

    def as_dict(self):
        return dict(zip(self.names, self.values))

    def with_value(self, name, value):
        i = self.index(name)
        vals = list(self.values)
        vals[i] = float(value)
        return DriverVector(self.names, tuple(vals), False)

    def with_array(self, arr):
        return DriverVector(self.names, tuple(np.asarray(arr, dtype=float)), False)

    def index(self, name):
        if name not in self.names:
            raise SchemaError(f"unknown driver {name!r}")
        return self.names.index(name)


@dataclass(frozen=True)
class PropertySchema:
    properties: tuple
    behaviours: tuple

    def __post_init__(self):
        for label, names in (("properties", self.properties), ("behaviours", self.behaviours)):
            if len(names) < 1:
                raise SchemaError(f"need at least one of {label}")
            if len(set(names)) != len(names):
                raise SchemaError(f"{label} names must be unique")

    @property
    def P(self):
        return len(self.properties)

    @property
    def M(self):
        return len(self.behaviours)


class ImpactModel:
    """Contract a model implements to be analysed by the engine.

    Subclasses set ``schema``, ``drivers`` (names), ``baseline``
    (a :class:`DriverVector`), ``tau_bounds`` (``(lower, upper)`` arrays) and
    ``box`` (driver name -> (lo, hi) exposure bounds), and implement
    :meth:`psi`.  :meth:`tau_star` defaults to numerical maximization of the
    property each behaviour controls (``maximized[m]`` indexes the
    properties); override it when a closed form exists.
    """

    schema: PropertySchema
    baseline: DriverVector
    tau_bounds: tuple
    box: dict = {}
    maximized: tuple = (0,)
    primary_property: int = 0

    def psi(self, theta, tau):
        raise NotImplementedError

    def tau_star(self, theta):
        return argmax_adaptation(self, theta)

    def box_of(self, name):
        return self.box.get(name, (-math.inf, math.inf))


def _psi(model, theta, tau):
    out = np.asarray(model.psi(theta, np.asarray(tau, dtype=float)), dtype=float)
    if not np.all(np.isfinite(out)):
        raise EvaluationError(f"property function not finite at {theta.as_dict()}", theta=theta)
    return out


def _tau(model, theta):
    tau = np.asarray(model.tau_star(theta), dtype=float)
    if not np.all(np.isfinite(tau)):
        raise EvaluationError(f"behaviour response not finite at {theta.as_dict()}", theta=theta)
    return tau


def _check_keys(theta, theta0):
    if tuple(theta.names) != tuple(theta0.names):
        raise SchemaError(f"driver sets differ: {theta.names} vs {theta0.names}")


# --------------------------------------------------------------------------
# absolute measures

def exposure(theta, theta0):
    _check_keys(theta, theta0)
    return theta.as_array() - theta0.as_array()


def sensitivity_abs(model, theta, theta0):
    _check_keys(theta, theta0)
    tau0 = _tau(model, theta0)
    return _psi(model, theta, tau0) - _psi(model, theta0, tau0)


def adaptation_abs(model, theta, theta0):
    """Property gain from re-optimizing behaviour after exposure."""
    _check_keys(theta, theta0)
    tau0 = _tau(model, theta0)
    tau = _tau(model, theta)
    aA = _psi(model, theta, tau) - _psi(model, theta, tau0)
    _check_optimality(model, aA, theta)
    return aA


def _check_optimality(model, aA, theta):
    for j in model.maximized:
        if aA[j] < -OPTIMALITY_SLACK:
            raise OptimalityViolation(
                f"adaptation on maximized property {model.schema.properties[j]!r} is "
                f"{aA[j]:.3e} at {theta.as_dict()}")


def adaptation_behaviour(model, theta, theta0):
    _check_keys(theta, theta0)
    return _tau(model, theta) - _tau(model, theta0)


# --------------------------------------------------------------------------
# numerical maximization

def _golden_max(f, lo, hi, rtol=1e-10, maxiter=200):
    """Golden-section maximization of a unimodal ``f`` on ``[lo, hi]``.

    Ties go to the smaller argument.  Returns ``(x, f(x), converged)``.
    """
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    converged = False
    floor = np.finfo(float).eps * (hi - lo)  # lets a bracket collapse onto zero
    for _ in range(maxiter):
        if abs(b - a) <= max(rtol * max(abs(a), abs(b)), floor):
            converged = True
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    cands = [(a, f(a)), (c, fc), (d, fd), (b, f(b))]
    best = max(v for _, v in cands)
    x = min(t for t, v in cands if v >= best)
    return x, best, converged


def argmax_adaptation(model, theta, rtol=1e-10, maxiter=200, sweeps=50):
    """Behaviour maximizing each behaviour's own property, derivative-free.

    Behaviour ``m`` maximizes property ``model.maximized[m]`` over
    ``model.tau_bounds``; for ``M > 1`` the coordinates are cycled until the
    point stops moving.

    Raises
    ------
    ConvergenceError
        With the best point found when the tolerance is not met.
    """
    lo, hi = (np.asarray(b, dtype=float) for b in model.tau_bounds)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValidationError("behaviour bounds must be finite")
    M = len(lo)
    tau = 0.5 * (lo + hi)
    targets = model.maximized if len(model.maximized) == M else (model.maximized[0],) * M
    ok = False
    for _ in range(sweeps if M > 1 else 1):
        prev = tau.copy()
        ok = True
        for m in range(M):
            def f(t, m=m):
                trial = tau.copy()
                trial[m] = t
                return float(_psi(model, theta, trial)[targets[m]])
            tau[m], _, conv = _golden_max(f, lo[m], hi[m], rtol, maxiter)
            ok = ok and conv
        if M == 1 or np.all(np.abs(tau - prev) <= np.maximum(rtol * np.abs(tau), 1e-12 * (hi - lo))):
            break
    else:
        ok = False
    if not ok:
        raise ConvergenceError("argmax did not reach tolerance", best=tau)
    return tau


# --------------------------------------------------------------------------
# marginals

def _steps(theta, model, rel):
    return np.array([rel * max(abs(v), 1.0) for v in theta.values])


def _stencil(model, theta, d, h):
    """Return offsets (lo, hi) for a difference in driver ``d``, and a flag."""
    name = theta.names[d]
    blo, bhi = model.box_of(name)
    v = theta.values[d]
    if v - h < blo and v + h > bhi:
        raise ValidationError(f"exposure box for {name} narrower than the difference step")
    if v - h < blo:
        return 0.0, 2 * h, True
    if v + h > bhi:
        return -2 * h, 0.0, True
    return -h, h, False


def _first_diff(fn, model, theta, rel=1e-6):
    """Jacobian of ``fn(theta)`` by central differences (one-sided at box edges)."""
    hs = _steps(theta, model, rel)
    cols = []
    flags = []
    for d in range(len(theta)):
        a, b, edge = _stencil(model, theta, d, hs[d])
        x = theta.as_array()
        if edge:
            warnings.warn(f"one-sided difference for {theta.names[d]} at the box edge",
                          BoundaryWarning, stacklevel=3)
            # second-order one-sided formula
            sgn = 1.0 if b > 0 else -1.0
            h = hs[d]
            pts = []
            for k in (0, 1, 2):
                xk = x.copy()
                xk[d] += sgn * k * h
                pts.append(np.asarray(fn(theta.with_array(xk)), dtype=float))
            cols.append(sgn * (-3 * pts[0] + 4 * pts[1] - pts[2]) / (2 * h))
        else:
            up, dn = x.copy(), x.copy()
            up[d] += b
            dn[d] += a
            cols.append((np.asarray(fn(theta.with_array(up))) - np.asarray(fn(theta.with_array(dn)))) / (b - a))
        flags.append(edge)
    return np.stack(cols, axis=-1), tuple(flags)


def _second_diff(fn, model, theta, rel=1e-4):
    hs = _steps(theta, model, rel)
    cols = []
    flags = []
    x = theta.as_array()
    f0 = np.asarray(fn(theta), dtype=float)
    for d in range(len(theta)):
        h = hs[d]
        a, b, edge = _stencil(model, theta, d, h)
        if edge:
            warnings.warn(f"one-sided second difference for {theta.names[d]} at the box edge",
                          BoundaryWarning, stacklevel=3)
            sgn = 1.0 if b > 0 else -1.0
            pts = []
            for k in (1, 2, 3):
                xk = x.copy()
                xk[d] += sgn * k * h
                pts.append(np.asarray(fn(theta.with_array(xk)), dtype=float))
            cols.append((2 * f0 - 5 * pts[0] + 4 * pts[1] - pts[2]) / h ** 2)
        else:
            up, dn = x.copy(), x.copy()
            up[d] += h
            dn[d] -= h
            cols.append((np.asarray(fn(theta.with_array(up))) - 2 * f0
                         + np.asarray(fn(theta.with_array(dn)))) / h ** 2)
        flags.append(edge)
    return np.stack(cols, axis=-1), tuple(flags)


def one_sided_drivers(model, theta):
    """Drivers whose second-difference stencil would leave the exposure box."""
    hs = _steps(theta, model, 1e-4)
    return tuple(theta.names[d] for d in range(len(theta))
                 if _stencil(model, theta, d, hs[d])[2])


def sensitivity_marginal(model, theta, theta0):
    """Jacobian of the property with behaviour frozen at its baseline value."""
    _check_keys(theta, theta0)
    tau0 = _tau(model, theta0)
    s, _ = _first_diff(lambda t: _psi(model, t, tau0), model, theta)
    return s


def adaptation_marginals(model, theta, theta0):
    """Return ``(aa, ba, ca)``.

    ``aa`` is the slope of adaptation, computed as the slope of the adapted
    property minus the frozen-behaviour slope; ``ba`` its second derivative;
    ``ca`` the slope of the optimal behaviour.
    """
    _check_keys(theta, theta0)
    tau0 = _tau(model, theta0)
    v, _ = _first_diff(lambda t: _psi(model, t, _tau(model, t)), model, theta)
    s, _ = _first_diff(lambda t: _psi(model, t, tau0), model, theta)
    aa = v - s
    ba, _ = _second_diff(lambda t: _psi(model, t, _tau(model, t)) - _psi(model, t, tau0),
                         model, theta)
    ca, _ = _first_diff(lambda t: _tau(model, t), model, theta)
    return aa, ba, ca


def total_impact(model, theta, theta0, marginal=True):
    """Return ``(TI, ti_marginal)``; ``ti_marginal`` is None if not requested."""
    _check_keys(theta, theta0)
    tau0 = _tau(model, theta0)
    tau = _tau(model, theta)
    base = _psi(model, theta0, tau0)
    frozen = _psi(model, theta, tau0)
    adapted = _psi(model, theta, tau)
    TI = adapted - base
    S = frozen - base
    aA = adapted - frozen
    _check_decomposition(TI, S, aA, theta)
    if not marginal:
        return TI, None
    s = sensitivity_marginal(model, theta, theta0)
    aa, _, _ = adaptation_marginals(model, theta, theta0)
    return TI, s + aa


def _check_decomposition(TI, S, aA, theta):
    gap = np.max(np.abs(TI - (S + aA)))
    if gap > DECOMPOSITION_TOL:
        raise ConsistencyError(f"TI differs from S + aA by {gap:.3e} at {theta.as_dict()}")


# --------------------------------------------------------------------------
# records and sweeps

@dataclass(frozen=True)
class ImpactRecord:
    theta: DriverVector
    S: np.ndarray
    aA: np.ndarray
    cA: np.ndarray
    TI: np.ndarray
    s: np.ndarray | None = None
    aa: np.ndarray | None = None
    ba: np.ndarray | None = None
    ca: np.ndarray | None = None
    one_sided: tuple = ()
    role: str = "neutral"  # stressor / benefactor / neutral, from the sign of S

    def value(self, kind, prop_index, driver_index=None):
        arr = getattr(self, kind)
        return arr[prop_index] if driver_index is None else arr[prop_index, driver_index]


def evaluate(model, theta, theta0, marginals=True):
    """Full :class:`ImpactRecord` for one driver vector."""
    _check_keys(theta, theta0)
    tau0 = _tau(model, theta0)
    tau = _tau(model, theta)
    base = _psi(model, theta0, tau0)
    frozen = _psi(model, theta, tau0)
    adapted = _psi(model, theta, tau)
    S = frozen - base
    aA = adapted - frozen
    TI = adapted - base
    _check_optimality(model, aA, theta)
    _check_decomposition(TI, S, aA, theta)
    sgn = S[model.primary_property]
    role = "stressor" if sgn < 0 else "benefactor" if sgn > 0 else "neutral"
    rec = dict(theta=theta, S=S, aA=aA, cA=tau - tau0, TI=TI, role=role)
    if marginals:
        edges = one_sided_drivers(model, theta)
        with warnings.catch_warnings():
            # recorded in the record's one_sided field instead
            warnings.simplefilter("ignore", BoundaryWarning)
            s = sensitivity_marginal(model, theta, theta0)
            aa, ba, ca = adaptation_marginals(model, theta, theta0)
        rec.update(s=s, aa=aa, ba=ba, ca=ca, one_sided=edges)
    return ImpactRecord(**rec)


def sweep_grid(lo, hi, n, base):
    """``n`` points on ``[lo, hi]`` containing ``base`` exactly.

    Evenly spaced when ``base`` falls on the uniform grid; otherwise each
    side of the baseline is spaced evenly, with points allotted in
    proportion to its length.
    """
    if n < 3:
        raise ValidationError("a sweep needs at least 3 points")
    if not lo <= base <= hi:
        raise ValidationError("baseline outside sweep bounds")
    grid = np.linspace(lo, hi, n)
    k = np.argmin(np.abs(grid - base))
    if abs(grid[k] - base) <= 1e-12 * max(1.0, abs(base)):
        grid[k] = base
        return grid
    left = int(round((n - 1) * (base - lo) / (hi - lo)))
    left = min(max(left, 1 if base > lo else 0), n - 2 if base < hi else n - 1)
    right = n - 1 - left
    parts = [np.linspace(lo, base, left + 1)] if left else [np.array([base])]
    if right:
        parts.append(np.linspace(base, hi, right + 1)[1:])
    return np.concatenate(parts)


def sweep(model, driver, bounds=None, n=101, allow_out_of_box=False, workers=None,
          marginals=True):
    """Impact records along one driver, others held at the baseline.

    Parameters
    ----------
    driver : str
    bounds : (float, float), optional
        Defaults to the model's exposure box for ``driver``.
    n : int
        Grid size (at least 3); the baseline is always a grid point.
    workers : int, optional
        Evaluate grid points on a thread pool; records keep grid order.
    """
    theta0 = model.baseline
    box = model.box_of(driver)
    lo, hi = (box if bounds is None else bounds)
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
        raise ValidationError(f"invalid sweep bounds {lo}, {hi}")
    if not allow_out_of_box and (lo < box[0] - 1e-12 or hi > box[1] + 1e-12):
        raise ValidationError(f"bounds {lo}, {hi} leave the exposure box {box} of {driver}")
    grid = sweep_grid(lo, hi, n, theta0[driver])
    thetas = [theta0 if v == theta0[driver] else theta0.with_value(driver, v) for v in grid]
    job = lambda t: evaluate(model, t, theta0, marginals)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(job, thetas))
    return [job(t) for t in thetas]
