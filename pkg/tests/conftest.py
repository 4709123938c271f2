import math

import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def scalar_lstm_cell(x, h_prev, c_prev, gates):
    """Plain-Python LSTM step; ``gates`` maps f/i/o/c to (W as nested lists, b)."""
    z_in = list(h_prev) + list(x)

    def affine(W, b):
        return [sum(W[r][j] * z_in[j] for j in range(len(z_in))) + b[r] for r in range(len(b))]

    sig = lambda v: 1.0 / (1.0 + math.exp(-v))
    f = [sig(v) for v in affine(*gates["f"])]
    i = [sig(v) for v in affine(*gates["i"])]
    o = [sig(v) for v in affine(*gates["o"])]
    cand = [math.tanh(v) for v in affine(*gates["c"])]
    c = [f[r] * c_prev[r] + i[r] * cand[r] for r in range(len(f))]
    h = [o[r] * math.tanh(c[r]) for r in range(len(f))]
    return h, c


def central_difference(f, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + step
        plus = f()
        x[idx] = orig - step
        minus = f()
        x[idx] = orig
        grad[idx] = (plus - minus) / (2 * step)
    return grad


def assert_grad_close(analytic, numeric, rtol=1e-4, atol=1e-7):
    diff = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    ok = (diff <= atol) | (diff <= rtol * scale)
    assert ok.all(), f"max diff {diff.max():.3e} at {np.unravel_index(diff.argmax(), diff.shape)}"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
