import filecmp
import os
from pathlib import Path

import pytest

from symtree.cli import EXIT_INTERNAL, EXIT_OK, EXIT_USAGE, main
from symtree.experiments import bundled_program
from symtree.ir import format_program

PROGRAMS = Path(__file__).resolve().parents[1] / "src" / "symtree" / "programs"
MOTIVATING = str(PROGRAMS / "motivating.ir")


def _tree(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_run_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "o"
    dump = tmp_path / "tree.csv"
    assert main(["run", MOTIVATING, "--search", "mcts", "--max-selections", "50", "--out", str(out), "--tree-dump", str(dump)]) == EXIT_OK
    assert {"stats.csv", "errors.csv", "terminals.csv"} <= {p.name for p in out.iterdir()}
    assert "AbortReached" in (out / "errors.csv").read_text()
    assert dump.read_text().splitlines()[0] == "id,parent,side,V,R,in_tree,terminal"
    assert "backpropagations=" in capsys.readouterr().out


@pytest.mark.parametrize("strategy", ["bfs", "random", "mcts"])
def test_run_is_byte_identical(tmp_path, strategy):
    for name in ("a", "b"):
        assert main(["run", MOTIVATING, "--search", strategy, "--seed", "3", "--out", str(tmp_path / name), "--tree-dump", str(tmp_path / f"{name}.csv")]) == 0
    assert _tree(tmp_path / "a") == _tree(tmp_path / "b")
    assert filecmp.cmp(tmp_path / "a.csv", tmp_path / "b.csv", shallow=False)


def test_bench_is_byte_identical(tmp_path):
    assert main(["gen-corpus", "--count", "2", "--out", str(tmp_path / "c")]) == 0
    for name in ("a", "b"):
        args = ["bench", str(tmp_path / "c"), "--strategies", "random,mcts,mcts-nosim", "--seeds", "0,1", "--max-selections", "60", "--quiet", "--out", str(tmp_path / name)]
        assert main(args) == 0
    a, b = _tree(tmp_path / "a"), _tree(tmp_path / "b")
    assert a == b and "bench.csv" in a


def test_usage_errors_exit_1(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.ir")]) == EXIT_USAGE
    bad = tmp_path / "bad.ir"
    bad.write_text("func main() {\nentry:\n  frob\n}\n")
    assert main(["run", str(bad)]) == EXIT_USAGE
    assert "line 3" in capsys.readouterr().err
    assert main(["bench", str(tmp_path / "nope")]) == EXIT_USAGE
    assert main(["bench", str(tmp_path), "--strategies", "astar"]) == EXIT_USAGE


@pytest.mark.parametrize(
    "argv",
    [
        ["run"],
        ["run", MOTIVATING, "--search", "astar"],
        ["run", MOTIVATING, "--optimization-degree", "0"],
        ["run", MOTIVATING, "--max-selections", "-1"],
        ["frobnicate"],
    ],
)
def test_argparse_errors_exit_1(argv):
    with pytest.raises(SystemExit) as e:
        main(argv)
    assert e.value.code == EXIT_USAGE


def test_internal_error_exits_2(monkeypatch, tmp_path):
    import symtree.cli as cli

    def boom(*a, **k):
        raise RuntimeError("kaboom")

    monkeypatch.setattr(cli, "write_run_artifacts", boom)
    assert main(["run", MOTIVATING, "--out", str(tmp_path)]) == EXIT_INTERNAL


def test_analyze_motivating_lists_three_unsafe_sites(capsys):
    assert main(["analyze", MOTIVATING]) == 0
    out = capsys.readouterr().out
    assert sorted(x for x in out.splitlines() if x.startswith("UNSAFE")) == [
        "UNSAFE f:BB2:0",
        "UNSAFE f:BB5:1",
        "UNSAFE main:check:0",
    ]


def test_analyze_pointer_free_program(capsys):
    assert main(["analyze", str(PROGRAMS / "loop.ir")]) == 0
    assert "UNSAFE" not in capsys.readouterr().out


def test_analyze_cast_chain_is_dynamic(tmp_path, capsys):
    src = tmp_path / "cast.ir"
    src.write_text("func main() {\nentry:\n  alloc a, 2\n  cast b, a\n  cast c, b\n  load v, c\n  exit\n}\n")
    assert main(["analyze", str(src)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert {"main:entry:0 DYN", "main:entry:1 DYN", "main:entry:2 DYN", "UNSAFE main:entry:3"} <= set(out)


def test_gen_corpus_summary(tmp_path, capsys):
    assert main(["gen-corpus", "--count", "3", "--bug-prob", "0", "--out", str(tmp_path)]) == 0
    assert "(0 with planted bugs)" in capsys.readouterr().out
    assert main(["gen-corpus", "--min-segments", "5", "--max-segments", "2", "--out", str(tmp_path)]) == EXIT_USAGE


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "symtree", "analyze", MOTIVATING], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.count("UNSAFE") == 3


def test_bundled_program_text_roundtrips():
    p = bundled_program("motivating")
    assert format_program(p).startswith("func main() {")
    assert os.path.exists(MOTIVATING)
