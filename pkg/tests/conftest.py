import io

import pytest

from pprbench.graphs import Graph, load_edge_list


@pytest.fixture
def cycle3():
    """The 3-cycle 0 -> 1 -> 2 -> 0."""
    return Graph([[1], [2], [0]])


@pytest.fixture
def bridged_cycles():
    """Two 3-cycles {0,1,2} and {3,4,5} bridged by 2->3 and 5->0."""
    return Graph([[1], [2], [0, 3], [4], [5], [3, 0]])


def graph_from_text(text, **opts):
    return load_edge_list(io.StringIO(text), **opts)
