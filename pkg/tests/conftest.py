import math
import socket

import numpy as np
import pytest
from scipy.optimize import minimize_scalar


def eigvec(angle, outcome):
    """Eigenvector of cos(angle) Z + sin(angle) X; outcome 0 is the +1 eigenvalue."""
    h = angle / 2
    if outcome == 0:
        return np.array([math.cos(h), math.sin(h)])
    return np.array([-math.sin(h), math.cos(h)])


def born_oracle(psi, alpha, beta):
    """p(a, b) = |<e_a(alpha) (x) e_b(beta)|psi>|^2, from eigenvectors."""
    psi = np.asarray(psi, dtype=complex)
    out = []
    for a in (0, 1):
        for b in (0, 1):
            v = np.kron(eigvec(alpha, a), eigvec(beta, b))
            out.append(abs(np.vdot(v, psi)) ** 2)
    return np.array(out)


def chsh_oracle(psi, alice, bob):
    """Win probability by direct enumeration of questions and outcomes."""
    total = 0.0
    for s in (0, 1):
        for t in (0, 1):
            p = born_oracle(psi, alice[s], bob[t])
            for a in (0, 1):
                for b in (0, 1):
                    if (s & t) == (a ^ b):
                        total += p[2 * a + b]
    return total / 4


def bob_gain(theta, t, beta):
    """Oracle: sum over s of Pr(win | s, t) for Alice at {0, pi/2}; vectorized over beta."""
    beta = np.asarray(beta, dtype=float)
    c, s_ = math.cos(theta), math.sin(theta)
    total = np.zeros_like(beta)
    for s, alpha in ((0, 0.0), (1, math.pi / 2)):
        for a in (0, 1):
            ea = eigvec(alpha, a)
            for b in (0, 1):
                if (s & t) != (a ^ b):
                    continue
                h = beta / 2
                eb0, eb1 = (np.cos(h), np.sin(h)) if b == 0 else (-np.sin(h), np.cos(h))
                total += (ea[0] * eb0 * c + ea[1] * eb1 * s_) ** 2
    return total


def grid_golden_optimum(theta):
    """Best CHSH value with Alice at {0, pi/2}: 360 x 360 grid over Bob's angles, then golden section."""
    grid = np.linspace(-math.pi, math.pi, 360, endpoint=False)
    g0, g1 = bob_gain(theta, 0, grid), bob_gain(theta, 1, grid)
    # full 360 x 360 grid; the objective splits over Bob's two angles
    coarse = (g0[:, None] + g1[None, :]) / 4
    i, j = np.unravel_index(np.argmax(coarse), coarse.shape)
    step = grid[1] - grid[0]
    best = 0.0
    for t, k in ((0, i), (1, j)):
        res = minimize_scalar(lambda b: -bob_gain(theta, t, b), bracket=(grid[k] - step, grid[k], grid[k] + step),
                              method="golden", tol=1e-10)
        best += -res.fun
    return best / 4


def binomial_sigma(n, p):
    return math.sqrt(n * p * (1 - p))


@pytest.fixture
def free_port():
    def _get():
        with socket.socket() as s:
            s.bind(("127.0.0.1", 0))
            return s.getsockname()[1]
    return _get


class RoleProcess:
    """A CLI role started as a subprocess on an ephemeral port."""

    def __init__(self, args):
        import subprocess
        import sys

        self.proc = subprocess.Popen([sys.executable, "-m", "chshauth", *args, "--port", "0"],
                                     stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
        line = self.proc.stdout.readline()
        if "listening on" not in line:
            self.stop()
            raise RuntimeError(f"role failed to start: {line!r} {self.proc.stderr.read()}")
        self.host, port = line.rsplit(" ", 1)[1].strip().rsplit(":", 1)
        self.port = int(port)
        self.address = f"{self.host}:{self.port}"

    def stop(self):
        self.proc.terminate()
        try:
            self.proc.wait(5)
        except Exception:
            self.proc.kill()
        for f in (self.proc.stdout, self.proc.stderr):
            f.close()


@pytest.fixture
def start_role():
    started = []

    def _start(*args):
        role = RoleProcess(list(args))
        started.append(role)
        return role

    yield _start
    for role in started:
        role.stop()


def run_cli(*args, timeout=120):
    import subprocess
    import sys

    return subprocess.run([sys.executable, "-m", "chshauth", *map(str, args)],
                          capture_output=True, text=True, timeout=timeout)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Context manager timing one acceptance criterion and recording a PASS/FAIL line."""
    import contextlib
    import time

    @contextlib.contextmanager
    def _criterion(number, title, limit_s):
        start = time.perf_counter()
        status, detail = "FAIL", ""
        try:
            yield
            elapsed = time.perf_counter() - start
            assert elapsed < limit_s, f"took {elapsed:.1f}s, limit {limit_s}s"
            status = "PASS"
        except BaseException as exc:
            detail = f" [{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}]"
            raise
        finally:
            elapsed = time.perf_counter() - start
            line = f"criterion {number:>2} {status}  {title} ({elapsed:.1f}s, limit {limit_s}s){detail}"
            ACCEPTANCE_LINES.append(line)
            print(line)

    return _criterion


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
