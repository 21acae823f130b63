import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from netplan.network import Arc, Commodity, Instance, Network, parse_instance  # noqa: E402

SINGLE_ARC = """\
NODES 2
s
t
ARCS 1
a s t {u} {c}
COMMODITIES 1
1 s t
PENALTY {phi}
"""


def single_arc(u=0.0, c=1.0, phi=10.0) -> Instance:
    return parse_instance(SINGLE_ARC.format(u=u, c=c, phi=phi))


def random_instance(rng: np.random.Generator, n_nodes=None, k=None, max_nodes=8, u_max=10.0,
                    cost_lo=1.0, cost_hi=10.0, phi=None) -> Instance:
    """Small strongly connected instance: a bidirected ring plus random chords."""
    n = int(n_nodes or rng.integers(3, max_nodes + 1))
    nodes = [f"v{i}" for i in range(n)]
    pairs = {(i, (i + 1) % n) for i in range(n)} | {((i + 1) % n, i) for i in range(n)}
    for _ in range(int(rng.integers(0, n + 1))):
        a, b = rng.choice(n, 2, replace=False)
        pairs.add((int(a), int(b)))
    arcs = []
    for j, (a, b) in enumerate(sorted(pairs)):
        arcs.append(Arc(f"a{j}", nodes[a], nodes[b], float(rng.uniform(0, u_max)),
                        float(rng.uniform(cost_lo, cost_hi))))
    k = int(k or rng.integers(1, 4))
    od = [(a, b) for a in range(n) for b in range(n) if a != b]
    chosen = rng.choice(len(od), size=k, replace=False)
    coms = [Commodity(str(i + 1), nodes[od[c][0]], nodes[od[c][1]]) for i, c in enumerate(chosen)]
    if phi is None:
        phi = float(rng.uniform(20, 60))
    return Instance(Network(tuple(nodes), tuple(arcs)), tuple(coms), phi)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
