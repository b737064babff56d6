import pytest

from ihdpflight.harness import MODES, RunConfig, run

from helpers import ACCEPTANCE_SEEDS


@pytest.fixture(scope="session")
def nominal_traces():
    """One all-defaults 40 s run per (mode, seed), computed once per session.

    This is the expensive fixture behind the behavioral acceptance checks
    (15 runs at roughly half a minute each); every downstream test reads
    from the same dict instead of re-running.
    """
    return {(mode, seed): run(RunConfig(mode=mode, seed=seed))
            for mode in MODES for seed in ACCEPTANCE_SEEDS}
