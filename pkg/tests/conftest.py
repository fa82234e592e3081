import pytest

from selfcorrect.psi import exp_psi


@pytest.fixture(scope="session")
def psi_exp():
    return exp_psi()


@pytest.fixture(scope="session")
def psi_exp_thinned():
    """exp shape routed through the thinning sampler and quadrature likelihood."""
    return exp_psi().with_integrable(False)


ACCEPTANCE_SEED = 20240601
ACCEPTANCE_STEPS = 10_000


@pytest.fixture(scope="session")
def wiener_1e6():
    """M = 10^6 Wiener functionals on the 10^4 grid, shared across modules."""
    from selfcorrect.limit import simulate_ensemble

    return simulate_ensemble(1_000_000, ACCEPTANCE_STEPS, ACCEPTANCE_SEED)


CRITERIA = {
    1: "threshold table b_eps",
    2: "threshold table c_eps",
    3: "e_0.05 = 0.056",
    4: "closed-form a_eps constants",
    5: "finite-T score size at T = 100",
    6: "score power at T = 1000 matches the limit",
    7: "LR and Wald indistinguishable from the NP envelope",
    8: "ordering at eps = 0.5 for u >= 10",
    9: "property suite",
}


@pytest.fixture(scope="session")
def acceptance(request):
    """Registry of acceptance outcomes, printed by pytest_terminal_summary."""
    registry = getattr(request.config, "_acceptance", None)
    if registry is None:
        registry = request.config._acceptance = {}

    def record(criterion, passed, detail, part=None):
        registry.setdefault(criterion, []).append((part, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    registry = getattr(config, "_acceptance", None)
    if not registry:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid, name in CRITERIA.items():
        entries = registry.get(cid)
        if not entries:
            tr.write_line(f"criterion {cid}: NOT RUN  {name}")
            continue
        ok = all(p for _, p, _ in entries)
        if len(entries) == 1 and entries[0][0] is None:
            tr.write_line(f"criterion {cid}: {'PASS' if ok else 'FAIL'}  {name}: {entries[0][2]}")
            continue
        tr.write_line(f"criterion {cid}: {'PASS' if ok else 'FAIL'}  {name} "
                      f"({sum(p for _, p, _ in entries)}/{len(entries)} parts)")
        for part, p, detail in entries:
            tr.write_line(f"    {part}: {'pass' if p else 'FAIL'}  {detail}")
