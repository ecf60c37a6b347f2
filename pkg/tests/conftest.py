import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from silo_dp.data import GeneratorConfig, NormalizationConfig, generate_synthetic_partners, normalize_dataset

settings.register_profile(
    "repo", deadline=None, derandomize=True, max_examples=100,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


def random_normalized(rng, m, d):
    """Rows drawn inside the unit ball, last column a constant bias."""
    X = rng.standard_normal((m, d))
    X /= np.maximum(1.0, np.linalg.norm(X, axis=1, keepdims=True) / rng.uniform(0.1, 1.0, (m, 1)))
    X[:, -1] = rng.uniform(0.05, 0.5)
    X /= np.maximum(1.0, np.linalg.norm(X, axis=1, keepdims=True))
    return X


@pytest.fixture(scope="session")
def small_partners():
    cfg = GeneratorConfig(n_partners=4, size_range=(400, 1500))
    pairs = generate_synthetic_partners(cfg, seed=11)
    norm = NormalizationConfig(t_norm=36.0)
    return [(normalize_dataset(r, norm), normalize_dataset(c, norm)) for r, c in pairs]


_acceptance_key = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one pass/fail line for the acceptance summary."""
    lines = request.config.stash.setdefault(_acceptance_key, [])

    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_acceptance_key, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
