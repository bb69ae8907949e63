"""Benchmark corpus generation, strategy comparison, and correlation reporting."""

from __future__ import annotations

import csv
import hashlib
import math
import random
import time
import traceback
from dataclasses import dataclass, field, replace
from pathlib import Path

from .engine import EngineConfig, Executor, TestCase
from .ir import Program, parse_program
from .mcts import MctsConfig
from .strategies import ALL_STRATEGIES, make_searcher

BENCH_COLUMNS = (
    "program",
    "strategy",
    "seed",
    "selections",
    "unsafe_covered",
    "unique_errors",
    "wall_ms",
    "solver_unknowns",
    "failed",
)

# ablated MCTS variants usable wherever a strategy name is accepted in a bench
ABLATIONS = {
    "mcts-noexp": {"guided_expansion": False},
    "mcts-nosim": {"simulation": False},
    "mcts-nosopt": {"sim_optimization": False},
}


class UndefinedCorrelation(ValueError):
    """Pearson's r is undefined when either sample has zero variance."""


def pearson(xs, ys) -> float:
    xs = [float(x) for x in xs]
    ys = [float(y) for y in ys]
    if len(xs) != len(ys):
        raise ValueError("pearson: samples differ in length")
    if len(xs) < 2:
        raise UndefinedCorrelation("pearson: need at least two points")
    n = len(xs)
    mx, my = math.fsum(xs) / n, math.fsum(ys) / n
    sxx = math.fsum((x - mx) ** 2 for x in xs)
    syy = math.fsum((y - my) ** 2 for y in ys)
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelation("pearson: zero variance")
    sxy = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    return max(-1.0, min(1.0, sxy / math.sqrt(sxx * syy)))


# --- corpus ------------------------------------------------------------------


@dataclass
class CorpusSpec:
    program_count: int = 30
    min_segments: int = 10  # top-level branchy segments in main
    max_segments: int = 16
    loop_prob: float = 0.25
    bug_prob: float = 0.7
    bug_density: float = 0.2  # chance an unsafe access in a planted program is a bug
    helpers: int = 2
    max_nesting: int = 2
    seed: int = 0


class _Gen:
    """Emits one random program; names and labels come from counters."""

    def __init__(self, rng: random.Random, spec: CorpusSpec):
        self.rng = rng
        self.spec = spec
        self.n = 0
        self.blocks: list[tuple[str, list[str]]] = []
        self.cur: list[str] = []
        self.bugs = 0

    def fresh(self, prefix: str) -> str:
        self.n += 1
        return f"{prefix}{self.n}"

    def open_block(self, label: str) -> None:
        self.cur = []
        self.blocks.append((label, self.cur))

    def emit(self, line: str) -> None:
        self.cur.append(line)

    # -- leaf statements

    def unsafe_access(self, arr: tuple[str, int], inputs: list[str]) -> None:
        name, size = arr
        q = self.fresh("q")
        self.emit(f"gep {q}, {name}, {self.rng.randrange(size)}")
        if self.rng.random() < 0.5:
            self.emit(f"load {self.fresh('v')}, {q}")
        else:
            self.emit(f"store {q}, {self.rng.choice(inputs)}")

    def safe_access(self, cell: str, inputs: list[str]) -> None:
        if self.rng.random() < 0.5:
            self.emit(f"load {self.fresh('v')}, {cell}")
        else:
            self.emit(f"store {cell}, {self.rng.choice(inputs)}")

    def guard(self, inputs: list[str]) -> str:
        x = self.rng.choice(inputs)
        c = self.fresh("c")
        rel = self.rng.choice(["gt", "lt", "ge", "le", "eq", "ne"])
        k = self.rng.randint(-20, 40)
        if self.rng.random() < 0.3:
            y = self.rng.choice(inputs)
            t = self.fresh("t")
            self.emit(f"binop {t}, add, {x}, {y}")
            x = t
        self.emit(f"cmp {c}, {rel}, {x}, {k}")
        return c

    def planted_bug(self, arr: tuple[str, int], inputs: list[str]) -> None:
        """Off-by-one bounds check: index == size slips through."""
        name, size = arr
        i = self.fresh("i")
        self.emit(f"sym {i}")
        lo, hi, body, join = (self.fresh("L") for _ in range(4))
        g1, g2, q = self.fresh("g"), self.fresh("g"), self.fresh("q")
        self.emit(f"cmp {g1}, ge, {i}, 0")
        self.emit(f"br {g1}, {lo}, {join}")
        self.open_block(lo)
        self.emit(f"cmp {g2}, le, {i}, {size}")
        self.emit(f"br {g2}, {body}, {join}")
        self.open_block(body)
        self.emit(f"gep {q}, {name}, {i}")
        self.emit(f"store {q}, {self.rng.choice(inputs)}")
        self.emit(f"jmp {join}")
        self.open_block(join)
        self.bugs += 1

    def loop(self, arr: tuple[str, int], inputs: list[str]) -> None:
        """Counted loop over the array with a data-dependent branch inside."""
        name, size = arr
        i, lc, q, e = self.fresh("k"), self.fresh("lc"), self.fresh("q"), self.fresh("e")
        head, body, odd, even, latch, out = (self.fresh("L") for _ in range(6))
        x = self.rng.choice(inputs)
        self.emit(f"const {i}, 0")
        self.emit(f"jmp {head}")
        self.open_block(head)
        self.emit(f"cmp {lc}, lt, {i}, {min(size, 3)}")
        self.emit(f"br {lc}, {body}, {out}")
        self.open_block(body)
        self.emit(f"gep {q}, {name}, {i}")
        self.emit(f"cmp {e}, gt, {x}, {i}")
        self.emit(f"br {e}, {odd}, {even}")
        self.open_block(odd)
        self.emit(f"store {q}, {x}")
        self.emit(f"jmp {latch}")
        self.open_block(even)
        self.emit(f"load {self.fresh('v')}, {q}")
        self.emit(f"jmp {latch}")
        self.open_block(latch)
        self.emit(f"binop {i}, add, {i}, 1")
        self.emit(f"jmp {head}")
        self.open_block(out)

    # -- compound statements

    def arm(self, ctx: dict, depth: int) -> None:
        rng = self.rng
        for _ in range(rng.randint(1, 3)):
            r = rng.random()
            if r < 0.4:
                if ctx["planted"] and depth >= 1 and rng.random() < self.spec.bug_density:
                    # bugs sit where unsafe accesses are: density per access, not per program
                    self.planted_bug(rng.choice(ctx["arrays"]), ctx["inputs"])
                else:
                    self.unsafe_access(rng.choice(ctx["arrays"]), ctx["inputs"])
            elif r < 0.6:
                self.safe_access(ctx["cell"], ctx["inputs"])
            elif r < 0.75 and ctx["helpers"]:
                h = rng.choice(ctx["helpers"])
                arr = rng.choice(ctx["arrays"])[0]
                self.emit(f"call {self.fresh('r')}, {h}, {arr}, {rng.choice(ctx['inputs'])}")
            elif r < 0.9 and depth < self.spec.max_nesting:
                self.diamond(ctx, depth + 1)
            else:
                self.emit(f"binop {self.fresh('t')}, mul, {rng.choice(ctx['inputs'])}, {rng.randint(2, 5)}")

    def diamond(self, ctx: dict, depth: int) -> None:
        c = self.guard(ctx["inputs"])
        t, f, j = self.fresh("L"), self.fresh("L"), self.fresh("L")
        self.emit(f"br {c}, {t}, {f}")
        self.open_block(t)
        self.arm(ctx, depth)
        self.emit(f"jmp {j}")
        self.open_block(f)
        if self.rng.random() < 0.6:
            self.arm(ctx, depth)
        self.emit(f"jmp {j}")
        self.open_block(j)

    def render(self, header: str) -> list[str]:
        out = [header]
        for label, lines in self.blocks:
            out.append(f"{label}:")
            out += [f"  {x}" for x in lines]
        out.append("}")
        return out


def _helper(rng: random.Random, spec: CorpusSpec, name: str) -> list[str]:
    g = _Gen(rng, spec)
    g.n = 1000
    g.open_block("entry")
    c = g.fresh("c")
    g.emit(f"cmp {c}, gt, x, {rng.randint(-10, 10)}")
    t, f, j = g.fresh("L"), g.fresh("L"), g.fresh("L")
    g.emit(f"br {c}, {t}, {f}")
    g.open_block(t)
    q = g.fresh("q")
    g.emit(f"gep {q}, p, {rng.randint(0, 1)}")
    g.emit(f"store {q}, x")
    g.emit(f"jmp {j}")
    g.open_block(f)
    g.emit(f"load {g.fresh('v')}, p")
    g.emit(f"jmp {j}")
    g.open_block(j)
    g.emit("ret x")
    return g.render(f"func {name}(p, x) {{")


def gen_program(rng: random.Random, spec: CorpusSpec, planted: bool | None = None) -> tuple[str, int]:
    """Source text of one program and its number of planted bugs."""
    if planted is None:
        planted = rng.random() < spec.bug_prob
    lines: list[str] = []
    helpers = [f"h{k}" for k in range(rng.randint(0, spec.helpers))]
    for h in helpers:
        lines += _helper(rng, spec, h)
        lines.append("")
    g = _Gen(rng, spec)
    g.open_block("entry")
    inputs = []
    for _ in range(rng.randint(3, 5)):
        # scaled inputs in [-128, 127]: sums never wrap and guard chains stay shallow
        raw, x = g.fresh("raw"), g.fresh("x")
        g.emit(f"sym {raw}")
        g.emit(f"binop {x}, sdiv, {raw}, 16777216")
        inputs.append(x)
    arrays = []
    for _ in range(rng.randint(1, 3)):
        a, size = g.fresh("arr"), rng.randint(2, 6)
        g.emit(f"alloc {a}, {size}")
        arrays.append((a, size))
    cell = g.fresh("cell")
    g.emit(f"alloc {cell}, 1")
    ctx = {
        "inputs": inputs,
        "arrays": arrays,
        "cell": cell,
        "helpers": helpers,
        "planted": planted,
    }
    for _ in range(rng.randint(spec.min_segments, spec.max_segments)):
        if rng.random() < spec.loop_prob:
            g.loop(rng.choice(arrays), inputs)
        else:
            g.diamond(ctx, 0)
    g.emit("exit")
    lines += g.render("func main() {")
    if planted and g.bugs == 0:
        # no access was turned into a bug: regenerate so the manifest stays honest
        return gen_program(rng, spec, planted=True)
    return "\n".join(lines) + "\n", g.bugs


def gen_corpus(spec: CorpusSpec, out: Path) -> list[tuple[str, int]]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(spec.seed)
    manifest = []
    for k in range(spec.program_count):
        text, bugs = gen_program(rng, spec)
        name = f"program-{k:03d}.ir"
        parse_program(text)  # generator bug guard
        (out / name).write_text(text)
        manifest.append((name, bugs))
    with open(out / "manifest.csv", "w", newline="") as fh:
        fh.write("# symtree corpus v1\n")
        fh.write("program,planted_bugs\n")
        for name, bugs in manifest:
            fh.write(f"{name},{bugs}\n")
    return manifest


def read_manifest(corpus: Path) -> list[tuple[str, int]]:
    rows = []
    with open(Path(corpus) / "manifest.csv") as fh:
        lines = [x for x in fh if not x.startswith("#")]
    for row in csv.DictReader(lines):
        rows.append((row["program"], int(row["planted_bugs"])))
    return rows


# --- bench -------------------------------------------------------------------


@dataclass
class BenchRecord:
    program: str
    strategy: str
    seed: int
    selections: int = 0
    unsafe_covered: int = 0
    unique_errors: int = 0
    wall_ms: int = 0
    solver_unknowns: int = 0
    failed: bool = False

    def row(self) -> list[str]:
        return [
            self.program,
            self.strategy,
            str(self.seed),
            str(self.selections),
            str(self.unsafe_covered),
            str(self.unique_errors),
            str(self.wall_ms),
            str(self.solver_unknowns),
            str(int(self.failed)),
        ]


@dataclass
class BenchConfig:
    strategies: tuple[str, ...] = ALL_STRATEGIES
    seeds: tuple[int, ...] = (0, 1, 2)
    engine: EngineConfig = field(default_factory=lambda: EngineConfig(max_selections=2000))
    mcts: MctsConfig = field(default_factory=MctsConfig)
    witnesses: bool = True


def make_strategy(name: str, seed: int, mcts: MctsConfig | None = None):
    base = mcts or MctsConfig()
    if name in ABLATIONS:
        return make_searcher("mcts", seed, replace(base, seed=seed, **ABLATIONS[name]))
    if name == "mcts":
        return make_searcher("mcts", seed, replace(base, seed=seed))
    return make_searcher(name, seed)


def run_cell(program: Program, strategy: str, seed: int, engine: EngineConfig, mcts: MctsConfig | None = None):
    searcher = make_strategy(strategy, seed, mcts)
    ex = Executor(program, searcher, replace(engine, seed=seed))
    ex.run()
    return ex


# strategies whose choices never consult the seed: one run serves every seed
SEED_FREE = frozenset({"bfs", "dfs", "covnew", "md2u", "icnt"})


def bench_fingerprint(corpus: Path, config: BenchConfig) -> str:
    """Digest of the corpus text and every setting that affects a cell's outcome."""
    h = hashlib.sha256(repr((config.engine, config.mcts)).encode())
    for p in sorted(Path(corpus).glob("program-*.ir")):
        h.update(p.name.encode() + b"\0" + p.read_bytes())
    return h.hexdigest()[:16]


def _load_prior(prior: Path, fingerprint: str) -> dict[tuple[str, str, int], tuple[BenchRecord, list[str]]]:
    """Cells of an earlier bench with the same fingerprint, with their witnesses."""
    path = Path(prior) / "bench.csv"
    if not path.exists():
        return {}
    with open(path) as fh:
        if fh.readline().strip() != _header(fingerprint):
            return {}
    cells = {}
    for rec in read_bench_csv(path):
        if rec.failed:
            continue
        wdir = Path(prior) / "witnesses" / rec.program.removesuffix(".ir") / f"{rec.strategy}-s{rec.seed}"
        cases = [f.read_text() for f in sorted(wdir.glob("*.case"))]
        if len(cases) == rec.unique_errors:
            cells[(rec.program, rec.strategy, rec.seed)] = (rec, cases)
    return cells


def cmd_bench(corpus: Path, out: Path, config: BenchConfig, log=None, prior: Path | None = None) -> list[BenchRecord]:
    """Run every (program, strategy, seed) cell. Cells already present in the
    ``prior`` output directory under an identical fingerprint are copied."""
    corpus, out = Path(corpus), Path(out)
    out.mkdir(parents=True, exist_ok=True)
    fingerprint = bench_fingerprint(corpus, config)
    done = _load_prior(prior, fingerprint) if prior is not None else {}
    programs = sorted(p.name for p in corpus.glob("program-*.ir"))
    records = []
    for pname in programs:
        program = parse_program((corpus / pname).read_text())
        for strategy in config.strategies:
            reuse: tuple[BenchRecord, list[str]] | None = None
            for seed in config.seeds:
                t0 = time.perf_counter()
                if (pname, strategy, seed) in done:
                    rec, cases = done[(pname, strategy, seed)]
                elif reuse is not None:
                    rec, cases = replace(reuse[0], seed=seed), reuse[1]
                else:
                    rec, cases = _bench_cell(program, pname, strategy, seed, config, log)
                    if strategy in SEED_FREE and not rec.failed:
                        reuse = (rec, cases)
                if config.witnesses and not rec.failed:
                    _write_witnesses(cases, out / "witnesses" / pname.removesuffix(".ir") / f"{strategy}-s{seed}")
                records.append(rec)
                if log:
                    log(
                        f"{pname} {strategy} seed={seed} unsafe={rec.unsafe_covered} "
                        f"errors={rec.unique_errors} ({time.perf_counter() - t0:.2f}s)"
                    )
    write_bench_csv(records, out / "bench.csv", fingerprint)
    (out / "summary.txt").write_text(summarize(records))
    return records


def _bench_cell(program: Program, pname: str, strategy: str, seed: int, config: BenchConfig, log) -> tuple[BenchRecord, list[str]]:
    rec = BenchRecord(pname, strategy, seed)
    try:
        ex = run_cell(program, strategy, seed, config.engine, config.mcts)
    except Exception:
        rec.failed = True
        if log:
            log(f"{pname} {strategy} seed={seed} failed:\n{traceback.format_exc()}")
        return rec, []
    st = ex.stats
    rec.selections = st.selections
    rec.unsafe_covered = st.unsafe_covered
    rec.unique_errors = st.unique_errors
    rec.wall_ms = st.wall_ms
    rec.solver_unknowns = st.solver_unknowns
    cases = [TestCase(err.witness, f"error:{err.kind}@{err.site}").serialize() for err, _, _ in ex.error_log]
    return rec, cases


def _write_witnesses(cases: list[str], wdir: Path) -> None:
    wdir.mkdir(parents=True, exist_ok=True)
    for old in wdir.glob("*.case"):
        old.unlink()
    for k, text in enumerate(cases, start=1):
        (wdir / f"error{k:03d}.case").write_text(text)


def _header(fingerprint: str) -> str:
    return f"# symtree bench v1 config={fingerprint}"


def write_bench_csv(records: list[BenchRecord], path: Path, fingerprint: str = "-") -> None:
    with open(path, "w", newline="") as fh:
        fh.write(_header(fingerprint) + "\n")
        fh.write(",".join(BENCH_COLUMNS) + "\n")
        for r in records:
            fh.write(",".join(r.row()) + "\n")


def read_bench_csv(path: Path) -> list[BenchRecord]:
    with open(path) as fh:
        lines = [x for x in fh if not x.startswith("#")]
    out = []
    for row in csv.DictReader(lines):
        out.append(
            BenchRecord(
                row["program"],
                row["strategy"],
                int(row["seed"]),
                int(row["selections"]),
                int(row["unsafe_covered"]),
                int(row["unique_errors"]),
                int(row["wall_ms"]),
                int(row["solver_unknowns"]),
                row["failed"] == "1",
            )
        )
    return out


def aggregate(records: list[BenchRecord]) -> dict[str, dict[str, int]]:
    totals: dict[str, dict[str, int]] = {}
    for r in records:
        t = totals.setdefault(r.strategy, {"unsafe_covered": 0, "unique_errors": 0, "runs": 0, "failed": 0})
        t["unsafe_covered"] += r.unsafe_covered
        t["unique_errors"] += r.unique_errors
        t["runs"] += 1
        t["failed"] += int(r.failed)
    return totals


def summarize(records: list[BenchRecord]) -> str:
    lines = ["strategy,runs,failed,unsafe_covered,unique_errors"]
    for name, t in aggregate(records).items():
        lines.append(f"{name},{t['runs']},{t['failed']},{t['unsafe_covered']},{t['unique_errors']}")
    ok = [r for r in records if not r.failed]
    try:
        r = pearson([x.unsafe_covered for x in ok], [x.unique_errors for x in ok])
        lines.append(f"pearson(unsafe_covered,unique_errors) = {r:.6f} over {len(ok)} runs")
    except UndefinedCorrelation as e:
        lines.append(f"pearson(unsafe_covered,unique_errors) undefined: {e}")
    return "\n".join(lines) + "\n"
