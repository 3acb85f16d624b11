from pathlib import Path

import pytest

from verde2e.core import Scenario
from verde2e.model import (
    BINARY, GE, LE, BuildOptions, Column, MilpModel, Row, VariableIndex, build_model, solution_values,
)
from verde2e.mps import (
    MpsError, SolutionImportError, import_solution, parse_mps, read_solution_file, write_mps,
    write_solution_file,
)
from verde2e.oracle import solve_exact
from verde2e.validate import UNSERVED_CUSTOMER, check_feasibility, evaluate

GOLDEN = Path(__file__).parent / "data" / "single_binary.mps"


def single_binary_model():
    return MilpModel(
        name="single",
        columns=(Column("b", BINARY, 0.0, 1.0, 2.5),),
        rows=(Row("cap", ((0, 1.0),), LE, 1.0), Row("floor", ((0, 1.0),), GE, 0.25)),
        index=VariableIndex((("b",),)),
    )


def test_golden_single_binary():
    assert write_mps(single_binary_model()) == GOLDEN.read_text()


def test_golden_parses_back():
    model = parse_mps(GOLDEN.read_text())
    assert model.columns == single_binary_model().columns
    assert model.rows == single_binary_model().rows


def test_empty_model():
    text = write_mps(MilpModel("", (), (), VariableIndex(())))
    assert text.split() == ["NAME", "ROWS", "COLUMNS", "RHS", "ENDATA"]
    assert parse_mps(text).columns == ()


def test_truncated_file_names_section():
    text = GOLDEN.read_text()
    cut = text[:text.index("RHS")]
    with pytest.raises(MpsError, match="missing section RHS"):
        parse_mps(cut)


def test_duplicate_column():
    text = GOLDEN.read_text().replace("    b         floor     1\n", "    b         floor     1\n    c         cap       1\n    b         OBJ       1\n")
    with pytest.raises(MpsError, match="duplicate column"):
        parse_mps(text)


def test_unknown_row():
    with pytest.raises(MpsError, match="unknown row"):
        parse_mps(GOLDEN.read_text().replace("b         floor", "b         ghost"))


def test_sections_out_of_order():
    swapped = GOLDEN.read_text().replace("RHS\n", "TMP\n").replace("COLUMNS\n", "RHS\n").replace("TMP\n", "COLUMNS\n")
    with pytest.raises(MpsError):
        parse_mps(swapped)


@pytest.mark.parametrize("i", range(0, 100, 7))
@pytest.mark.parametrize("name", ["ehc", "elc-hd"])
def test_round_trip_byte_identical(suite, i, name):
    model = build_model(suite[i], Scenario.named(name), BuildOptions(True, True))
    text = write_mps(model)
    again = parse_mps(text)
    assert write_mps(again) == text
    assert [c.name for c in again.columns] == [c.name for c in model.columns]


def test_long_names_shift_fields():
    model = MilpModel("long", (Column("x" * 30, BINARY, 0.0, 1.0, 1.0),),
                      (Row("r" * 20, ((0, 2.0),), LE, 1.0),), VariableIndex((("x" * 30,),)))
    text = write_mps(model)
    assert write_mps(parse_mps(text)) == text


def test_oracle_export_import_identical_metrics(t1):
    for name in ("ehc", "td-hd"):
        sol, _ = solve_exact(t1, Scenario.named(name))
        model = build_model(t1, Scenario.named(name))
        text = write_solution_file(solution_values(model, t1, sol))
        back = import_solution(text, model, t1)
        assert back == sol
        assert evaluate(t1, back) == evaluate(t1, sol)


@pytest.mark.parametrize("i", range(0, 100, 9))
def test_suite_export_import(suite, i):
    inst = suite[i]
    sol, _ = solve_exact(inst, Scenario.named("td"))
    model = build_model(inst, Scenario.named("td"))
    back = import_solution(solution_values(model, inst, sol), model, inst)
    assert evaluate(inst, back) == evaluate(inst, sol)


def test_all_zero_file_rejected_by_validator(t1):
    model = build_model(t1)
    sol = import_solution("# nothing set\n", model, t1)
    assert UNSERVED_CUSTOMER in {v.code for v in check_feasibility(t1, sol)}


def test_open_path_rejected(t1):
    model = build_model(t1)
    with pytest.raises(SolutionImportError, match="open path"):
        import_solution({"x_0_1_0": 1.0}, model, t1)


def test_fractional_binary_rejected(t1):
    with pytest.raises(SolutionImportError, match="fractional"):
        import_solution({"l_1": 0.5}, build_model(t1), t1)


def test_unknown_variable_rejected(t1):
    with pytest.raises(SolutionImportError):
        import_solution("nope 1\n", build_model(t1), t1)


def test_solution_file_format():
    assert read_solution_file("# c\n\na 1\nb 0.5\n") == {"a": 1.0, "b": 0.5}
    with pytest.raises(SolutionImportError):
        read_solution_file("a 1\na 2\n")
    with pytest.raises(SolutionImportError):
        read_solution_file("a\n")


def test_highs_reads_export(tmp_path, t1):
    highspy = pytest.importorskip("highspy")
    path = tmp_path / "t1.mps"
    path.write_text(write_mps(build_model(t1)))
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    assert h.readModel(str(path)) == highspy.HighsStatus.kOk
    h.run()
    assert h.getInfo().objective_function_value == pytest.approx(2.418, abs=1e-6)
