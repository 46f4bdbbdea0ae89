import json
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(scope="session")
def frozen():
    return json.loads((Path(__file__).parent / "data" / "frozen_oracles.json").read_text())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_forms(rng, lam_range=(0.5, 2.0), need_ratio=True, max_index=None):
    """Random admissible (forms, rho, lam): positive definite first form,
    negative definite second form, generic curvatures, mesh-ratio condition."""
    from polyeq.errors import DegenerateError
    from polyeq.geometry import FundamentalForms
    from polyeq.indices import imaginary_indices_from_forms, mesh_ratio_condition

    while True:
        E, G = rng.uniform(0.5, 2.0, size=2)
        F = rng.uniform(-0.5, 0.5) * np.sqrt(E * G)
        L, N = -rng.uniform(0.3, 2.0, size=2)
        M = rng.uniform(-0.9, 0.9) * np.sqrt(L * N)
        rho = rng.uniform(0.3, 3.0)
        lam = rng.uniform(*lam_range)
        f = FundamentalForms(E, F, G, L, M, N, np.array([0.0, 0.0, 1.0]))
        if need_ratio and not mesh_ratio_condition(f, lam):
            continue
        try:
            idx = imaginary_indices_from_forms(f, rho)
        except DegenerateError:
            continue
        k = np.array(idx.as_tuple())
        if np.min(np.abs(np.array(sorted(_kappas(f))) * rho + 1)) < 0.05:
            continue
        if max_index is not None and k.max() > max_index:
            continue
        return f, rho, lam


def _kappas(f):
    from polyeq.geometry import principal_curvatures
    return principal_curvatures(f)


#: ``(number, passed, detail)`` lines recorded by the acceptance suite
ACCEPTANCE_RESULTS: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
