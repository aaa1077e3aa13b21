"""Shared fixtures plus a monitor that checks solver invariants on every call.

The monitor wraps the coupling solver, the Frank-Wolfe loop, the Frechet
mean and the IFS / NMF sketchers in every ``mtsketch`` module namespace
before the test modules are imported, so each call made by any test is
checked for:

* coupling marginals within 1e-8 and nonnegative entries;
* non-increasing objective histories within 1e-12 slack.

Any violation fails the test that triggered it.
"""

import sys
from collections import Counter

import numpy as np
import pytest

import mtsketch  # noqa: F401  (loads every submodule patched below)
import mtsketch.cli  # noqa: F401
import mtsketch.gw as gw
import mtsketch.pipeline  # noqa: F401
import mtsketch.sketcher as sketcher

MARGINAL_TOL = 1e-8
SLACK = 1e-12


class Monitor:
    def __init__(self):
        self.calls = Counter()
        self.violations = []

    def history(self, name, hist):
        self.calls[name] += 1
        for i in range(1, len(hist)):
            if hist[i] > hist[i - 1] + SLACK * max(1.0, abs(hist[i - 1])):
                self.violations.append(f"{name}: step {i} rose {hist[i - 1]!r} -> {hist[i]!r}")
                return

    def coupling(self, C, p1, p2):
        self.calls["coupling"] += 1
        rows = np.max(np.abs(C.sum(axis=1) - p1))
        cols = np.max(np.abs(C.sum(axis=0) - p2))
        if rows > MARGINAL_TOL or cols > MARGINAL_TOL or C.min() < -MARGINAL_TOL:
            self.violations.append(f"coupling marginals off by {rows:.3g}/{cols:.3g}, min entry {C.min():.3g}")


MONITOR = Monitor()


def _wrap_frank_wolfe(fn):
    def wrapped(W1, W2, a1, a2, *args, **kwargs):
        out = fn(W1, W2, a1, a2, *args, **kwargs)
        MONITOR.history("frank-wolfe", out[3])
        MONITOR.coupling(out[0], a1, a2)
        return out

    return wrapped


def _wrap_solve(fn):
    def wrapped(G1, G2, *args, **kwargs):
        res = fn(G1, G2, *args, **kwargs)
        MONITOR.coupling(res.matrix, G1.p, G2.p)
        return res

    return wrapped


def _wrap_mean(fn):
    def wrapped(*args, **kwargs):
        res = fn(*args, **kwargs)
        MONITOR.history("frechet-mean", res.history)
        return res

    return wrapped


def _wrap_sketch(name, fn):
    def wrapped(*args, **kwargs):
        res = fn(*args, **kwargs)
        MONITOR.history(name, res.history)
        return res

    return wrapped


def _install():
    replacements = {
        gw._frank_wolfe: _wrap_frank_wolfe(gw._frank_wolfe),
        gw.solve_coupling: _wrap_solve(gw.solve_coupling),
        gw.frechet_mean: _wrap_mean(gw.frechet_mean),
        sketcher.ifs: _wrap_sketch("ifs", sketcher.ifs),
        sketcher.nmf: _wrap_sketch("nmf", sketcher.nmf),
    }
    for name, module in list(sys.modules.items()):
        if not (name == "mtsketch" or name.startswith("mtsketch.")):
            continue
        for attr, value in list(vars(module).items()):
            for original, wrapper in replacements.items():
                if value is original:
                    setattr(module, attr, wrapper)


_install()


@pytest.fixture(autouse=True)
def _invariants():
    before = len(MONITOR.violations)
    yield
    new = MONITOR.violations[before:]
    assert not new, "solver invariant violated: " + "; ".join(new)


@pytest.fixture
def monitor():
    return MONITOR


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
    if MONITOR.calls:
        counts = ", ".join(f"{k}={v}" for k, v in sorted(MONITOR.calls.items()))
        terminalreporter.write_line(f"solver monitor over the whole session: {counts}; "
                                    f"{len(MONITOR.violations)} violations")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
