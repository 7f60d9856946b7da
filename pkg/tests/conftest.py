import pytest

from chaos_sentinel.ci_core import BitState
from chaos_sentinel.primitives import CiGenerator, SecretKey
from chaos_sentinel.scheduler import NodeRuntime

ACCEPTANCE_LINES: list[str] = []


class FixedMaskGen:
    """Stand-in generator that always yields the same N-bit mask."""

    def __init__(self, mask: int):
        self.mask = mask

    def next_int(self, n_bits: int) -> int:
        return self.mask & ((1 << n_bits) - 1)

    def reseed(self, digest: int, tick: int) -> None:
        pass


@pytest.fixture
def make_node():
    def make(node_id=0, N=3, state=0, e=0, battery=100, r=4, gen=None):
        gen = gen if gen is not None else CiGenerator.from_key(SecretKey.from_seed(9), node_id)
        return NodeRuntime(node_id, N, BitState(state, N), gen, r, battery, e=e)

    return make


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1][1:].rstrip(":"))):
        terminalreporter.write_line(line)
