import math

import pytest

from tapscout.network import (
    FaultFamily,
    Probe,
    build_fattree_topology,
    build_line_topology,
)
from tapscout.probe_stats import ProbeParams

LINE_ETA = 0.9
W = -math.log(LINE_ETA)


@pytest.fixture(scope="session")
def line5():
    return build_line_topology(5, LINE_ETA)


@pytest.fixture(scope="session")
def line5_probes():
    """The five named walks of the line scenario."""
    return {
        "P1": Probe((0, 1, 0)),
        "P2": Probe((0, 1, 2, 1, 0)),
        "P3": Probe((5, 4, 5)),
        "P4": Probe((5, 4, 3, 4, 5)),
        "P5": Probe((0, 1, 2, 3, 4, 5)),
    }


@pytest.fixture(scope="session")
def line5_family(line5):
    return FaultFamily.single_link(line5)


@pytest.fixture(scope="session")
def fattree():
    return build_fattree_topology(LINE_ETA)


@pytest.fixture(scope="session")
def quantum_6db():
    return ProbeParams.squeezed_db(100.0, 6.0)


@pytest.fixture(scope="session")
def classical_params(quantum_6db):
    return ProbeParams.classical(quantum_6db.N, quantum_6db.N_a)
