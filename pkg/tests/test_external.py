import pytest

from verde2e.core import TOTAL_DISTANCE, InfeasibleError, Satellite, Scenario
from verde2e.external import solve_external
from verde2e.oracle import solve_exact
from verde2e.pareto import sweep
from verde2e.validate import check_feasibility

from instances import t1_instance


@pytest.mark.parametrize("name", ["ehc", "cd", "td", "ehc-hd"])
def test_t1_matches_oracle(t1, name):
    sol, val = solve_external(t1, Scenario.named(name))
    assert val == solve_exact(t1, Scenario.named(name))[1]
    assert check_feasibility(t1, sol) == []


@pytest.mark.parametrize("i", range(0, 100, 11))
@pytest.mark.parametrize("name", ["elc", "td-hd"])
def test_suite_matches_oracle(suite, i, name):
    scenario = Scenario.named(name)
    _, val = solve_external(suite[i], scenario)
    assert val == solve_exact(suite[i], scenario)[1]


def test_infeasible(t1):
    with pytest.raises(InfeasibleError), pytest.warns(RuntimeWarning):
        solve_external(t1_instance(satellites=(Satellite(1, 1.0),)))
    with pytest.raises(InfeasibleError):
        solve_external(t1, bounds={TOTAL_DISTANCE: 20.0})


@pytest.mark.parametrize("i", range(3))
def test_external_sweep_matches_oracle(suite, i):
    a = sweep(suite[i], None, backend="external")
    b = sweep(suite[i], None)
    assert [tuple(p) for p in a] == [pytest.approx(tuple(p), abs=1e-6) for p in b]
