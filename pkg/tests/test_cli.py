import json

import pytest

from bubblefl.cli import main


@pytest.fixture()
def demo(tmp_path):
    path = tmp_path / "demo.fl"
    path.write_text("-- demo\ndouble X = X + X\n", encoding="utf-8")
    return str(path)


def run_cli(capsys, *argv):
    code = main(["run", *argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_arithmetic_value_exit_zero(demo, capsys):
    code, out, _ = run_cli(capsys, demo, "--goal", "(3 + 4) - 5")
    assert out == "value: 2\n"
    assert code == 0


def test_division_by_zero_exit_one(demo, capsys):
    code, out, _ = run_cli(capsys, demo, "--goal", "1 / 0")
    assert out == "failure\n"
    assert code == 1


def test_loop_choice_completes(demo, capsys):
    code, out, _ = run_cli(capsys, demo, "--goal", "loop ? 1+2",
                           "--max-rounds", "100")
    assert "value: 3" in out
    assert "exhausted" in out
    assert code == 0


def test_bare_loop_exit_two(demo, capsys):
    code, out, _ = run_cli(capsys, demo, "--goal", "loop", "--max-rounds", "20")
    assert out == "exhausted\n"
    assert code == 2


def test_parse_error_exit_three(demo, capsys):
    code, out, err = run_cli(capsys, demo, "--goal", "nonsense ident")
    assert code == 3
    assert "error" in err
    assert out == ""


def test_sorted_and_distinct(demo, capsys):
    code, out, _ = run_cli(capsys, demo, "--goal", "(1 ? 1) ? 0", "--sorted")
    assert out.splitlines() == ["value: 0", "value: 1", "value: 1"]
    code, out, _ = run_cli(capsys, demo, "--goal", "(1 ? 1) ? 0",
                           "--sorted", "--distinct")
    assert out.splitlines() == ["value: 0", "value: 1"]


def test_first_k(demo, capsys):
    code, out, _ = run_cli(capsys, demo, "--goal", "(0 ? 1) ? 2", "--first", "2")
    assert len([l for l in out.splitlines() if l.startswith("value:")]) == 2
    assert code == 0


def test_stats_block_key_order(demo, capsys):
    _, out, _ = run_cli(capsys, demo, "--goal", "1 + 1", "--stats")
    keys = [line.split("=")[0] for line in out.splitlines()[1:]]
    assert keys == [
        "rounds", "rewrites", "bubbling_invocations", "bubbling_copied_nodes",
        "fork_copied_nodes", "peak_table_size", "fails_absorbed",
    ]


def test_stats_json(demo, capsys):
    _, out, _ = run_cli(capsys, demo, "--goal",
                        "(((3/X)+(X*2))-4) where X = 0 ? 1", "--stats-json")
    payload = json.loads(out.splitlines()[-1])
    assert payload["bubbling_copied_nodes"] == 6
    assert payload["bubbling_invocations"] == 1


def test_copying_strategy_stats(demo, capsys):
    _, out, _ = run_cli(capsys, demo, "--goal",
                        "(((3/X)+(X*2))-4) where X = 0 ? 1",
                        "--strategy", "copying", "--stats-json")
    payload = json.loads(out.splitlines()[-1])
    assert payload["bubbling_copied_nodes"] == 8


def test_substitution_oracle_strategy(demo, capsys):
    code, out, _ = run_cli(capsys, demo, "--goal",
                           "(1+X)+(X+2) where X = 0 ? 1",
                           "--strategy", "substitution-oracle", "--sorted")
    assert [l for l in out.splitlines() if l.startswith("value:")] == \
        ["value: 3", "value: 5"]
    assert code == 0


def test_trace_reports_bubbling_events(demo, capsys):
    _, out, _ = run_cli(capsys, demo, "--goal",
                        "(Fact X + Fibo X) where X = 2 ? 3", "--trace")
    trace_lines = [l for l in out.splitlines() if l.startswith("bubble:")]
    assert len(trace_lines) == 1
    assert "|AP|=3" in trace_lines[0]
    assert "copies=6" in trace_lines[0]


def test_dump_trees(demo, capsys):
    code, out, _ = run_cli(capsys, demo, "--dump-trees")
    assert code == 0
    assert "leq:" in out
    assert "[pos 1]" in out and "[pos 2]" in out
    assert out.index("[pos 1]") < out.index("[pos 2]")


def test_check_invariants_clean_run(demo, capsys):
    code, out, _ = run_cli(capsys, demo, "--goal",
                           "double X where X = 2 ? 3", "--check-invariants",
                           "--sorted")
    assert code == 0
    assert [l for l in out.splitlines() if l.startswith("value:")] == \
        ["value: 4", "value: 6"]


def test_no_prelude_hides_prelude_symbols(demo, capsys):
    code, _, err = run_cli(capsys, demo, "--goal", "loop", "--no-prelude")
    assert code == 3
    assert "loop" in err


def test_missing_program_file(capsys):
    code = main(["run", "/nonexistent/prog.fl", "--goal", "1"])
    captured = capsys.readouterr()
    assert code == 3
    assert "error" in captured.err


def test_goal_required_without_dump(demo, capsys):
    code, _, err = run_cli(capsys, demo)
    assert code == 3
    assert "--goal" in err


def test_mode_hnf(demo, capsys):
    code, out, _ = run_cli(capsys, demo, "--goal", "cons (1+1) nil",
                           "--mode", "hnf")
    assert out == "value: cons((1 + 1), nil)\n"
    assert code == 0
