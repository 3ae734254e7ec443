import itertools

import pytest

from mdembed import systems


def fibonacci_prefix(length: int) -> str:
    """Fibonacci word via s_n = s_{n-1} s_{n-2}, independent of the substitution code."""
    a, b = "0", "01"
    while len(b) < length:
        a, b = b, b + a
    return b


def factors(word: str, n: int) -> set[str]:
    return {word[i : i + n] for i in range(len(word) - n + 1)}


def brute_words(alphabet: str, n: int, forbidden=()) -> set[str]:
    out = set()
    for t in itertools.product(alphabet, repeat=n):
        w = "".join(t)
        if not any(f in w for f in forbidden):
            out.add(w)
    return out


@pytest.fixture(scope="session")
def fib():
    return systems.fibonacci()


@pytest.fixture(scope="session")
def fib_word():
    return fibonacci_prefix(200_000)


PIPELINE_SEED = 3


@pytest.fixture(scope="session")
def pipeline():
    """The rotation x Fibonacci embedding with D = 1, delta = 0.2, eta = 0.05."""
    from mdembed import embed

    X = systems.product(systems.golden_rotation(), systems.fibonacci())
    return embed.tower_embed(X, embed.circle_seed(1), delta=0.2, eta=0.05, seed=PIPELINE_SEED)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
