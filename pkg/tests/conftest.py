import pytest
from hypothesis import settings

from potts_sd.lattice import LatticeSpec, series_logZ, stabilization_bound

# fixed-seed property testing: runs are reproducible across machines
settings.register_profile("fixed", derandomize=True, deadline=None)
settings.load_profile("fixed")

GATE_ORDER = 16


@pytest.fixture(scope="session")
def gate_logz_table():
    """series_logZ at the CI-gate order for all lattices the extraction needs.

    Shared across test modules; this is the expensive piece of the suite.
    """
    bound = stabilization_bound(GATE_ORDER)
    sizes = [(bound, bound), (bound, bound + 1), (bound + 1, bound + 1), (bound + 2, bound + 1)]
    table = {mn: series_logZ(LatticeSpec(*mn), GATE_ORDER) for mn in sizes}
    table[(bound + 1, bound)] = table[(bound, bound + 1)].subst_s_inv()
    return table
