import itertools

import numpy as np
import pytest

_acceptance_lines = []


def rel_err(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.linalg.norm(b)
    return np.linalg.norm(a - b) / denom if denom else np.linalg.norm(a - b)


def multi_indices(shape):
    """All multi-indices of `shape` with the first index varying fastest."""
    for idx in itertools.product(*(range(d) for d in reversed(shape))):
        yield tuple(reversed(idx))


def dense_tucker(core, factors):
    """Reconstruction by einsum; independent of the mode-product code path."""
    letters = "abcdefgh"
    n = core.ndim
    subs = letters[:n] + "," + ",".join(f"{chr(ord('p') + k)}{letters[k]}" for k in range(n))
    subs += "->" + "".join(chr(ord("p") + k) for k in range(n))
    return np.einsum(subs, core, *factors)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance_report():
    def report(name, ok, detail=""):
        status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
        line = f"{status}  {name}  {detail}"
        _acceptance_lines.append(line)
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
