"""Impact engine on small models with known answers."""
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptimpact import framework as fw
from adaptimpact.errors import (BoundaryWarning, ConsistencyError, ConvergenceError,
                                OptimalityViolation, SchemaError, ValidationError)


class Quadratic(fw.ImpactModel):
    """psi = (-(tau - a*theta)^2 + c*theta, tau), optimum tau = a*theta."""

    schema = fw.PropertySchema(("value", "tau"), ("tau",))

    def __init__(self, a=2.0, c=0.5, box=(-10.0, 10.0), theta0=1.0):
        self.a, self.c = a, c
        self.baseline = fw.DriverVector(("theta",), (theta0,), True)
        self.tau_bounds = (np.array([-50.0]), np.array([50.0]))
        self.box = {"theta": box}

    def psi(self, theta, tau):
        t = theta["theta"]
        return np.array([-(tau[0] - self.a * t) ** 2 + self.c * t, tau[0]])


class Linear(fw.ImpactModel):
    """Behaviour has no effect; psi = k * theta."""

    schema = fw.PropertySchema(("value",), ("tau",))

    def __init__(self, k):
        self.k = k
        self.baseline = fw.DriverVector(("theta",), (0.3,), True)
        self.tau_bounds = (np.array([0.0]), np.array([1.0]))
        self.box = {"theta": (-1.0, 1.0)}

    def psi(self, theta, tau):
        return np.array([self.k * theta["theta"]])


class TwoDriver(fw.ImpactModel):
    """Random smooth model with two drivers and two behaviours."""

    schema = fw.PropertySchema(("f", "g", "h"), ("u", "v"))
    maximized = (0, 1)

    def __init__(self, coef):
        self.c = np.asarray(coef)
        self.baseline = fw.DriverVector(("a", "b"), (0.2, -0.1), True)
        self.tau_bounds = (np.array([-5.0, -5.0]), np.array([5.0, 5.0]))
        self.box = {"a": (-1.0, 1.0), "b": (-1.0, 1.0)}

    def tau_star(self, theta):
        return np.array([self.c[0] * theta["a"], self.c[1] * theta["b"]])

    def psi(self, theta, tau):
        a, b = theta["a"], theta["b"]
        c = self.c
        f = -(tau[0] - c[0] * a) ** 2 + c[2] * a * b
        g = -(tau[1] - c[1] * b) ** 2 + np.sin(c[3] * a)
        h = tau[0] * tau[1] + np.exp(c[4] * b)
        return np.array([f, g, h])


# --- containers -------------------------------------------------------------

def test_driver_vector_rules():
    with pytest.raises(SchemaError):
        fw.DriverVector(("a", "a"), (1.0, 2.0))
    with pytest.raises(ValidationError):
        fw.DriverVector(("a",), (float("nan"),))
    v = fw.DriverVector.from_mapping({"a": 1.0, "b": 2.0})
    assert v.with_value("b", 3.0)["b"] == 3.0 and v["b"] == 2.0
    with pytest.raises(SchemaError):
        v["c"]


def test_property_schema_needs_entries():
    with pytest.raises(SchemaError):
        fw.PropertySchema((), ("tau",))


def test_mismatched_driver_sets():
    m = Quadratic()
    with pytest.raises(SchemaError):
        fw.exposure(fw.DriverVector(("x",), (1.0,)), m.baseline)


# --- argmax -----------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.floats(-5.0, 5.0))
def test_argmax_quadratic(theta):
    m = Quadratic()
    tau = fw.argmax_adaptation(m, m.baseline.with_value("theta", theta))
    assert tau[0] == pytest.approx(2.0 * theta, abs=1e-7)


def test_argmax_prefers_smallest_on_flat_property():
    m = Linear(1.0)
    tau = fw.argmax_adaptation(m, m.baseline)
    assert tau[0] == pytest.approx(0.0, abs=1e-8)


def test_argmax_reports_best_point_on_failure():
    m = Quadratic()
    with pytest.raises(ConvergenceError) as info:
        fw.argmax_adaptation(m, m.baseline, maxiter=3)
    assert info.value.best is not None


# --- absolute measures --------------------------------------------------------

def test_quadratic_closed_forms():
    m = Quadratic()
    theta = m.baseline.with_value("theta", 1.5)
    S = fw.sensitivity_abs(m, theta, m.baseline)
    aA = fw.adaptation_abs(m, theta, m.baseline)
    cA = fw.adaptation_behaviour(m, theta, m.baseline)
    # tau0 = 2, new optimum 3; a flat maximum pins tau only to ~sqrt(machine eps)
    assert S[0] == pytest.approx(-1.0 + 0.25, abs=1e-7)
    assert aA[0] == pytest.approx(1.0, abs=1e-7)
    assert cA[0] == pytest.approx(1.0, abs=1e-7)


def test_baseline_zeros():
    m = Quadratic()
    rec = fw.evaluate(m, m.baseline, m.baseline)
    for arr in (rec.S, rec.aA, rec.TI, rec.cA):
        assert np.all(arr == 0.0)
    np.testing.assert_allclose(rec.aa[0], 0.0, atol=1e-6)
    # the second property is the behaviour itself, so its adaptation slope is a;
    # argmax noise (~1e-9) over the 1e-6 difference step limits the accuracy
    assert rec.aa[1, 0] == pytest.approx(2.0, rel=1e-2)


def test_linear_model_slopes():
    m = Linear(-2.5)
    rec = fw.evaluate(m, m.baseline.with_value("theta", 0.7), m.baseline)
    assert rec.s[0, 0] == pytest.approx(-2.5, rel=1e-8)
    assert rec.aa[0, 0] == pytest.approx(0.0, abs=1e-8)
    assert rec.aA[0] == 0.0
    assert rec.role == "stressor"


def test_optimality_violation_detected():
    class Bad(Quadratic):
        def tau_star(self, theta):
            return np.array([-3.0 * theta["theta"]])
    m = Bad()
    with pytest.raises(OptimalityViolation):
        fw.adaptation_abs(m, m.baseline.with_value("theta", 2.0), m.baseline)


def test_decomposition_check_raises():
    TI = np.array([1.0, 2.0])
    with pytest.raises(ConsistencyError):
        fw._check_decomposition(TI, np.array([0.5, 1.0]), np.array([0.5, 1.0 + 1e-8]),
                                fw.DriverVector(("a",), (0.0,)))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-2.0, 2.0), min_size=5, max_size=5),
       st.floats(-0.9, 0.9), st.floats(-0.9, 0.9))
def test_random_model_decomposition(coef, a, b):
    m = TwoDriver(coef)
    theta = m.baseline.with_array([a, b])
    rec = fw.evaluate(m, theta, m.baseline, marginals=False)
    np.testing.assert_allclose(rec.TI, rec.S + rec.aA, atol=1e-10)


def test_random_model_marginals_against_analytic():
    m = TwoDriver([0.7, -1.2, 0.4, 1.5, 0.3])
    theta = m.baseline.with_array([0.5, 0.3])
    rec = fw.evaluate(m, theta, m.baseline)
    a, b = 0.5, 0.3
    c = m.c
    t0 = m.tau_star(m.baseline)
    # frozen f = -(t0 - c0 a)^2 + c2 a b
    ds_f = [2 * c[0] * (t0[0] - c[0] * a) + c[2] * b, c[2] * a]
    np.testing.assert_allclose(rec.s[0], ds_f, rtol=1e-6)
    # adapted f = c2 a b, so aa = adapted slope - frozen slope
    np.testing.assert_allclose(rec.aa[0], np.array([c[2] * b, c[2] * a]) - ds_f, rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(rec.ca, [[c[0], 0.0], [0.0, c[1]]], atol=1e-7)


# --- boundary handling ------------------------------------------------------

def test_one_sided_difference_at_box_edge():
    m = Quadratic(box=(-10.0, 1.0), theta0=0.0)
    theta = m.baseline.with_value("theta", 1.0)
    with pytest.warns(BoundaryWarning):
        s = fw.sensitivity_marginal(m, theta, m.baseline)
    # frozen tau0 = 0: psi0 = -4 theta^2 + 0.5 theta, slope at 1 is -7.5
    assert s[0, 0] == pytest.approx(-7.5, rel=1e-6)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        rec = fw.evaluate(m, theta, m.baseline)
    assert rec.one_sided == ("theta",)


# --- sweeps -------------------------------------------------------------------

def test_sweep_grid_contains_baseline():
    g = fw.sweep_grid(0.65, 1.37, 101, 1.0)
    assert len(g) == 101 and 1.0 in g
    assert g[0] == 0.65 and g[-1] == 1.37
    assert np.all(np.diff(g) > 0)
    g = fw.sweep_grid(0.0, 1.0, 11, 0.5)
    np.testing.assert_allclose(g, np.linspace(0, 1, 11))


def test_sweep_grid_baseline_on_edge():
    g = fw.sweep_grid(0.5, 1.0, 5, 0.5)
    assert g[0] == 0.5 and len(g) == 5


def test_sweep_rejects_bounds_outside_box():
    m = Quadratic(box=(-1.0, 1.0), theta0=0.0)
    with pytest.raises(ValidationError):
        fw.sweep(m, "theta", (-2.0, 1.0), n=5)
    recs = fw.sweep(m, "theta", (-2.0, 1.0), n=5, allow_out_of_box=True, marginals=False)
    assert len(recs) == 5


def test_parallel_sweep_matches_serial():
    m = Quadratic()
    a = fw.sweep(m, "theta", (-2.0, 3.0), n=11, marginals=False)
    b = fw.sweep(m, "theta", (-2.0, 3.0), n=11, marginals=False, workers=4)
    for r1, r2 in zip(a, b):
        assert r1.theta == r2.theta
        np.testing.assert_array_equal(r1.TI, r2.TI)
