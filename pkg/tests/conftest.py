import numpy as np
import pytest

from clindiag.encoding import LabeledDataset
from clindiag.qp import QpProblem


def three_clusters(n_left=20, n_mid=20, n_right=8):
    """1-D: + near -2, - near 0, + near +2 (right cluster smaller)."""
    off = lambda n: np.linspace(-0.3, 0.3, n)
    x = np.concatenate([-2 + off(n_left), off(n_mid), 2 + off(n_right)])
    y = np.array([1] * n_left + [-1] * n_mid + [1] * n_right)
    return LabeledDataset(x[:, None], y)


def random_problem(rng, l, m, C):
    X = rng.normal(size=(l, m))
    y = rng.choice([-1, 1], size=l)
    if (y == y[0]).all():
        y[rng.integers(l)] *= -1
    return X, y, QpProblem.from_vectors(X, y, C)


def primal_dual_check(model, dataset):
    """(duality gap, worst free-SV margin residual) for a trained model.

    Works in the model's training coordinates and only uses w, b, the stored
    support multipliers and the data, not the solver internals.
    """
    X = dataset.vectors
    if model.scaling is not None:
        X = model.scaling.transform(X)
    y = dataset.labels
    alphas = np.zeros(len(y))
    alphas[model.support_indices] = model.support_alphas
    f = X @ model.weights + model.offset
    w2 = float(model.weights @ model.weights)
    primal = 0.5 * w2 + model.C * np.maximum(0.0, 1.0 - y * f).sum()
    dual = alphas.sum() - 0.5 * w2
    free = (alphas > 0) & (alphas < model.C)
    free_res = float(np.abs(y[free] * f[free] - 1).max()) if free.any() else 0.0
    return primal - dual, free_res


@pytest.fixture
def toy():
    return LabeledDataset([[0.0, 2.0], [0.0, -2.0]], [1, -1])


@pytest.fixture
def clusters3():
    return three_clusters()


# -- acceptance reporting --------------------------------------------------------

ACCEPTANCE_LINES = {}


@pytest.fixture
def criterion(request):
    """Record a PASS/FAIL line for an acceptance criterion test."""
    state = {}

    def declare(number, title):
        state["key"] = (number, title)

    yield declare
    if "key" in state:
        rep = getattr(request.node, "rep_call", None)
        ok = rep is not None and rep.passed
        ACCEPTANCE_LINES[state["key"]] = ok


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), ok in sorted(ACCEPTANCE_LINES.items()):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")
