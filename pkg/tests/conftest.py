import numpy as np
import pytest

from spkg.models import EmbeddingModel, ModelConfig

KINDS = ("distmult", "simple")


def random_model(kind, n_entities, n_relations, dim, rng, scale=1.0, **config):
    model = EmbeddingModel(ModelConfig(kind=kind, dim=dim, **config), n_entities, n_relations)
    for name in model.table_names:
        model.params[name] = rng.uniform(-scale, scale, size=model.params[name].shape)
    return model


def random_triples(rng, n, n_entities, n_relations):
    return np.column_stack([rng.integers(0, n_entities, n), rng.integers(0, n_relations, n),
                            rng.integers(0, n_entities, n)])


def finite_difference(fn, model, step=1e-5):
    """Central differences of scalar ``fn(model)`` w.r.t. every raw parameter."""
    out = {}
    for name, table in model.params.items():
        grad = np.zeros_like(table)
        for idx in np.ndindex(table.shape):
            old = table[idx]
            table[idx] = old + step
            up = fn(model)
            table[idx] = old - step
            down = fn(model)
            table[idx] = old
            grad[idx] = (up - down) / (2 * step)
        out[name] = grad
    return out


def max_relative_error(analytic, numeric, floor=1e-6):
    """Largest ``|a - n| / max(|a|, |n|, floor)`` over all parameters."""
    worst = 0.0
    for name in analytic:
        a, n = analytic[name], numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=KINDS)
def kind(request):
    return request.param


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """``record(criterion, ok, detail)``: log one line per criterion and assert it.

    ``ok=None`` logs the criterion as skipped.
    """

    def record(criterion, ok, detail=""):
        status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        line = f"[{status}] {criterion}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        if ok is None:
            pytest.skip(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
