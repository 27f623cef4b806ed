import numpy as np
from hypothesis import strategies as st

from smumle.smu import MixingMeasure


def triangle_density(p):
    """Uniform density on the triangle {x + y <= 1}; not an SMU density."""
    x, y = p
    return 2.0 if (x > 0 and y > 0 and x + y <= 1) else 0.0


def random_mixing(rng: np.random.Generator, d: int, k: int, lattice: bool = False) -> MixingMeasure:
    if lattice:
        atoms = rng.integers(1, 6, size=(k, d)).astype(float)
    else:
        atoms = rng.uniform(0.1, 5.0, size=(k, d))
    return MixingMeasure(atoms, rng.dirichlet(np.ones(k)))


@st.composite
def mixings(draw, dims=(1, 2, 3), max_atoms=8, lattice=False):
    d = draw(st.sampled_from(dims))
    k = draw(st.integers(1, max_atoms))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_mixing(np.random.default_rng(seed), d, k, lattice)


@st.composite
def datasets(draw, dims=(1, 2), max_n=30):
    d = draw(st.sampled_from(dims))
    n = draw(st.integers(1, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    return np.random.default_rng(seed).exponential(size=(n, d)) + 1e-3


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
