import numpy as np
import pytest

from adaptimpact.casestudy import CaseStudyConfig, FlatfishModel
from adaptimpact.model import ModelParams, Reference, tonnes_to_model


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def x_upper(params):
    return tonnes_to_model(Reference().upper, params)


@pytest.fixture(scope="session")
def x_lower(params):
    return tonnes_to_model(Reference().lower, params)


@pytest.fixture(scope="session")
def flatfish():
    return FlatfishModel(CaseStudyConfig())


@pytest.fixture(scope="session")
def flatfish_household(flatfish):
    return FlatfishModel(flatfish.config, household=True, base=flatfish.base)


def random_thetas(model, n, seed, margin=0.0):
    """Driver vectors drawn uniformly inside the exposure box."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        vals = []
        for name in model.baseline.names:
            lo, hi = model.box[name]
            w = hi - lo
            vals.append(rng.uniform(lo + margin * w, hi - margin * w))
        out.append(model.baseline.with_array(vals))
    return out


# --- acceptance reporting -----------------------------------------------------

ACCEPTANCE = []


def pytest_addoption(parser):
    parser.addoption("--real-data", action="append", default=[],
                     help="long-format CSV of observed stocks, landings and prices")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[ok]
        terminalreporter.write_line(f"criterion {num:>2}: {status}  {detail}")


@pytest.fixture
def report():
    """``report(num, ok, detail)`` records one acceptance line for the summary."""
    def _add(num, ok, detail):
        ACCEPTANCE.append((num, ok, detail))
        print(f"criterion {num}: {'PASS' if ok else 'FAIL' if ok is False else 'SKIP'}  {detail}")
    return _add
