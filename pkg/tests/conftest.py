import pytest

from hybridmf import kernels
from hybridmf.data import Dataset, InteractionEvent, Post
from hybridmf.profiles import WeightTable

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def weights():
    return WeightTable.default()


@pytest.fixture(params=kernels.available())
def backend(request):
    previous = kernels.backend()
    kernels.use(request.param)
    yield request.param
    kernels.use(previous)


@pytest.fixture
def tiny_dataset():
    posts = (
        Post("p1", "alpha beta gamma"),
        Post("p2", "alpha beta delta"),
        Post("p3", "omega sigma tau"),
    )
    events = (
        InteractionEvent("u1", "p1", "direct_like", 1.0, 10),
        InteractionEvent("u1", "p1", "twitter_share", 1.0, 11),
        InteractionEvent("u1", "p2", "reading_progress", 0.5, 12),
        InteractionEvent("u2", "p2", "direct_comment", 1.0, 13),
        InteractionEvent("u2", "p3", "facebook_share", 1.0, None),
        InteractionEvent("u3", "p3", "direct_impression", 1.0, 14),
    )
    return Dataset(frozenset({"u1", "u2", "u3"}), posts, events).validate()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
