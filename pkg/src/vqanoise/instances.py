"""Seeded problem ensembles and file formats (DIMACS, edge lists, config JSON, CSV)."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .hamiltonians import CnfInstance, Graph, Hamiltonian, build_ising

PROBLEMS = ("ising", "sat3", "maxcut", "search")
MODES = ("decomposed", "layerwise")
CONFIG_SCHEMA = 1


class ParseError(ValueError):
    """Malformed input file; the message names the offending line."""

    def __init__(self, message: str, line: int | None = None, source: str = "<input>"):
        self.line = line
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)


class ConfigError(ValueError):
    pass


# --- generators ---------------------------------------------------------------------


def count_satisfying(inst: CnfInstance) -> int:
    return int(np.count_nonzero(inst.violations() == 0))


def gen_3sat(n: int, m: int, unique: bool = False, seed=0, max_attempts: int = 100_000) -> CnfInstance:
    """Random 3-SAT: each clause picks 3 distinct variables and independent signs.

    With ``unique=True`` whole instances are redrawn until exactly one
    assignment satisfies them.
    """
    if n < 3:
        raise ValueError("3-SAT needs n >= 3")
    if m < 1:
        raise ValueError("need at least one clause")
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        clauses = []
        for _ in range(m):
            vars_ = rng.choice(n, size=3, replace=False) + 1
            signs = rng.integers(0, 2, size=3) * 2 - 1
            clauses.append(tuple(int(v * s) for v, s in zip(vars_, signs)))
        inst = CnfInstance(n, tuple(clauses))
        if not unique or count_satisfying(inst) == 1:
            return inst
    raise RuntimeError(
        f"no uniquely satisfiable instance with n={n}, m={m} after {max_attempts} attempts; "
        "clause density is probably too low"
    )


def gen_maxcut(n: int, edge_prob: float, seed=0) -> Graph:
    """Erdos-Renyi G(n, edge_prob)."""
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError(f"edge probability {edge_prob} outside [0, 1]")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < edge_prob
    return Graph(n, frozenset(zip(iu[keep].tolist(), ju[keep].tolist())))


def ising_fields(h_min: float, h_max: float, count: int, seed=0) -> np.ndarray:
    if h_min > h_max:
        raise ValueError("h_min must not exceed h_max")
    return np.random.default_rng(seed).uniform(h_min, h_max, size=count)


def gen_ising_ensemble(n: int, h_min: float, h_max: float, count: int, seed=0) -> list[Hamiltonian]:
    return [build_ising(n, float(h)) for h in ising_fields(h_min, h_max, count, seed)]


# --- DIMACS ------------------------------------------------------------------------


def format_dimacs(inst: CnfInstance) -> str:
    lines = [f"p cnf {inst.num_vars} {inst.num_clauses}"]
    lines += [" ".join(str(l) for l in c) + " 0" for c in inst.clauses]
    return "\n".join(lines) + "\n"


def parse_dimacs(text: str, source: str = "<dimacs>") -> CnfInstance:
    """One clause per line, each terminated by ``0``; ``c`` lines are comments."""
    header = None
    clauses = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ParseError(f"bad problem line {line!r}", lineno, source)
            try:
                header = (int(parts[2]), int(parts[3]))
            except ValueError:
                raise ParseError(f"non-integer counts in {line!r}", lineno, source) from None
            continue
        if header is None:
            raise ParseError("clause before 'p cnf' header", lineno, source)
        try:
            lits = [int(tok) for tok in line.split()]
        except ValueError:
            raise ParseError(f"non-integer literal in {line!r}", lineno, source) from None
        if not lits or lits[-1] != 0:
            raise ParseError("clause is missing its 0 terminator", lineno, source)
        if 0 in lits[:-1]:
            raise ParseError("0 inside a clause", lineno, source)
        if len(lits) != 4:
            raise ParseError(f"expected 3 literals, found {len(lits) - 1}", lineno, source)
        if any(abs(l) > header[0] for l in lits[:-1]):
            raise ParseError(f"literal outside 1..{header[0]}", lineno, source)
        clauses.append(tuple(lits[:-1]))
    if header is None:
        raise ParseError("missing 'p cnf' header", None, source)
    if len(clauses) != header[1]:
        raise ParseError(f"header declares {header[1]} clauses, found {len(clauses)}", None, source)
    try:
        return CnfInstance(header[0], tuple(clauses))
    except ValueError as exc:
        raise ParseError(str(exc), None, source) from None


def read_dimacs(path) -> CnfInstance:
    return parse_dimacs(Path(path).read_text(), str(path))


def write_dimacs(inst: CnfInstance, path) -> None:
    Path(path).write_text(format_dimacs(inst))


# --- edge lists ----------------------------------------------------------------------


def format_edge_list(g: Graph) -> str:
    return "\n".join([str(g.num_vertices)] + [f"{u} {v}" for u, v in g.sorted_edges()]) + "\n"


def parse_edge_list(text: str, source: str = "<edges>") -> Graph:
    """First line: vertex count; then one 0-indexed ``u v`` pair per line."""
    num = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        try:
            vals = [int(t) for t in toks]
        except ValueError:
            raise ParseError(f"non-integer token in {line!r}", lineno, source) from None
        if num is None:
            if len(vals) != 1 or vals[0] < 0:
                raise ParseError("first line must hold the vertex count", lineno, source)
            num = vals[0]
            continue
        if len(vals) != 2:
            raise ParseError(f"expected 'u v', got {line!r}", lineno, source)
        u, v = vals
        if u == v or not (0 <= u < num and 0 <= v < num):
            raise ParseError(f"invalid edge ({u}, {v}) for {num} vertices", lineno, source)
        edges.append((u, v))
    if num is None:
        raise ParseError("empty edge list", None, source)
    try:
        return Graph.from_edges(num, edges)
    except ValueError as exc:
        raise ParseError(str(exc), None, source) from None


def read_edge_list(path) -> Graph:
    return parse_edge_list(Path(path).read_text(), str(path))


def write_edge_list(g: Graph, path) -> None:
    Path(path).write_text(format_edge_list(g))


# --- experiment configuration -------------------------------------------------------


@dataclass
class ExperimentConfig:
    problem: str
    n: int
    depth: int
    instance_count: int = 1
    sigma_grid: list[float] = field(default_factory=lambda: [0.0])
    n_samples: int = 2000
    seed: int = 0
    mode: str = "decomposed"
    t_max: float | None = None
    restarts: int | None = None
    h_range: tuple[float, float] = (0.8, 1.2)
    clauses: int | None = None
    unique: bool = True
    edge_prob: float = 0.5
    target: int = 0
    delta_grid: list[float] = field(default_factory=lambda: [-0.2, -0.1, 0.0, 0.1, 0.2])
    p_range: list[int] | None = None
    t_max_grid: list[float] | None = None
    validity_cut: float = 1.0

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem must be one of {PROBLEMS}, got {self.problem!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("n", "depth", "instance_count", "n_samples"):
            val = getattr(self, name)
            if not isinstance(val, int) or isinstance(val, bool) or val <= 0:
                raise ConfigError(f"{name} must be a positive integer, got {val!r}")
        if self.restarts is not None and self.restarts <= 0:
            raise ConfigError("restarts must be positive")
        grid = [float(s) for s in self.sigma_grid]
        if not grid or any(s < 0 for s in grid) or grid != sorted(grid):
            raise ConfigError("sigma_grid must be a non-empty, non-negative ascending list")
        self.sigma_grid = grid
        if self.t_max is not None and self.t_max < 0:
            raise ConfigError("t_max must be non-negative")
        if self.h_range[0] > self.h_range[1]:
            raise ConfigError("h_range must be ascending")
        self.h_range = (float(self.h_range[0]), float(self.h_range[1]))
        if self.t_max_grid is not None:
            tg = [float(t) for t in self.t_max_grid]
            if not tg or any(t < 0 for t in tg):
                raise ConfigError("t_max_grid must be a non-empty list of non-negative budgets")
            self.t_max_grid = tg
        if self.p_range is not None and (not self.p_range or any(int(p) < 1 for p in self.p_range)):
            raise ConfigError("p_range must be a non-empty list of positive depths")

    @property
    def num_clauses(self) -> int:
        # Default density 4.2 clauses per variable, rounded as in 26/34/42 for n = 6/8/10.
        return self.clauses if self.clauses is not None else int(math.ceil(round(4.2 * self.n, 9)))

    def to_dict(self) -> dict:
        d = {"schema": CONFIG_SCHEMA}
        d.update(asdict(self))
        d["h_range"] = list(self.h_range)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        if data.get("schema") != CONFIG_SCHEMA:
            raise ConfigError(f"config 'schema' must be {CONFIG_SCHEMA}, got {data.get('schema')!r}")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known - {"schema"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"problem", "n", "depth"} - set(data)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        kwargs = {k: v for k, v in data.items() if k != "schema"}
        if "h_range" in kwargs:
            kwargs["h_range"] = tuple(kwargs["h_range"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, text: str) -> ExperimentConfig:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        return cls.from_dict(data)


def read_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_json(Path(path).read_text())


def write_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(cfg.to_json() + "\n")


# --- CSV -----------------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def format_csv(rows: Iterable[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path, rows: Iterable[dict], columns: Sequence[str]) -> None:
    Path(path).write_text(format_csv(rows, columns))


def _parse_cell(text: str):
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: _parse_cell(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def ensure_dir(path) -> Path:
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p
