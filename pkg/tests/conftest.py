import pathlib

import pytest

import sigaug as sg

REPO = pathlib.Path(__file__).resolve().parent.parent
CONGRESS = REPO / "data" / "congress_synthetic.txt"


@pytest.fixture(scope="session")
def congress_path():
    return CONGRESS


@pytest.fixture(scope="session")
def congress_graph():
    with CONGRESS.open("rb") as fh:
        return sg.build_graph(sg.load_edge_list(fh, "signed"))


def random_signed_graph(rng, n, density=0.3, neg_frac=0.3):
    """Erdos-Renyi signed graph helper shared across test modules."""
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < density:
                edges.append((u, v, -1 if rng.random() < neg_frac else 1))
    return sg.SignedGraph(n, edges)
