import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vqanoise.hamiltonians import CnfInstance, Graph
from vqanoise.instances import (
    ConfigError,
    ExperimentConfig,
    ParseError,
    count_satisfying,
    format_csv,
    format_dimacs,
    format_edge_list,
    gen_3sat,
    gen_ising_ensemble,
    gen_maxcut,
    parse_dimacs,
    parse_edge_list,
    read_config,
    read_csv,
    read_dimacs,
    read_edge_list,
    write_config,
    write_csv,
    write_dimacs,
    write_edge_list,
)


class TestGen3Sat:
    def test_shape_and_density(self):
        inst = gen_3sat(6, 26, seed=1)
        assert inst.num_vars == 6 and inst.num_clauses == 26
        assert 26 / 6 == pytest.approx(4.33, abs=0.01)
        assert all(len({abs(l) for l in c}) == 3 for c in inst.clauses)

    def test_unique_has_one_solution(self):
        for seed in range(10):
            assert count_satisfying(gen_3sat(6, 26, unique=True, seed=seed)) == 1

    def test_deterministic(self):
        assert gen_3sat(8, 34, seed=[4, 2]) == gen_3sat(8, 34, seed=[4, 2])
        assert gen_3sat(8, 34, seed=1) != gen_3sat(8, 34, seed=2)

    def test_gives_up(self):
        with pytest.raises(RuntimeError, match="density"):
            gen_3sat(8, 1, unique=True, seed=0, max_attempts=5)

    @pytest.mark.parametrize("n,m", [(2, 3), (4, 0)])
    def test_rejects_bad_sizes(self, n, m):
        with pytest.raises(ValueError):
            gen_3sat(n, m)


class TestGenMaxCut:
    def test_extremes(self):
        assert len(gen_maxcut(6, 1.0, 0).edges) == 15
        assert len(gen_maxcut(6, 0.0, 0).edges) == 0

    def test_mean_edge_count(self):
        counts = [len(gen_maxcut(10, 0.5, s).edges) for s in range(1000)]
        assert abs(np.mean(counts) - 22.5) < 1

    def test_rejects_probability(self):
        with pytest.raises(ValueError):
            gen_maxcut(4, 1.5)


class TestIsingEnsemble:
    def test_fixed_field(self):
        hs = gen_ising_ensemble(4, 1.0, 1.0, 3, seed=0)
        assert all(np.array_equal(h.matrix(), hs[0].matrix()) for h in hs)

    def test_range_and_determinism(self):
        from vqanoise.instances import ising_fields

        h = ising_fields(0.8, 1.2, 100, seed=3)
        assert np.all((h >= 0.8) & (h <= 1.2))
        np.testing.assert_array_equal(h, ising_fields(0.8, 1.2, 100, seed=3))
        with pytest.raises(ValueError):
            ising_fields(1.2, 0.8, 3)


class TestDimacs:
    def test_parse_example(self):
        inst = parse_dimacs("p cnf 3 1\n1 -2 3 0\n")
        assert inst == CnfInstance(3, ((1, -2, 3),))

    def test_comments(self):
        assert parse_dimacs("c hello\np cnf 3 1\nc mid\n1 2 3 0\n").num_clauses == 1

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_round_trip(self, seed):
        inst = gen_3sat(5, 7, seed=seed)
        assert parse_dimacs(format_dimacs(inst)) == inst

    def test_file_round_trip(self, tmp_path):
        inst = gen_3sat(8, 34, seed=5)
        write_dimacs(inst, tmp_path / "a.cnf")
        assert read_dimacs(tmp_path / "a.cnf") == inst

    def test_missing_terminator_names_line(self):
        with pytest.raises(ParseError, match=":3:") as err:
            parse_dimacs("p cnf 3 2\n1 2 3 0\n1 -2 3\n")
        assert err.value.line == 3

    @pytest.mark.parametrize("text", [
        "1 2 3 0\n",
        "p cnf 3 2\n1 2 3 0\n",
        "p cnf 3 1\n1 2 0\n",
        "p cnf 3 1\n1 2 4 0\n",
        "p cnf x 1\n",
        "p cnf 3 1\n1 a 3 0\n",
        "p cnf 3 1\n1 1 2 0\n",
        "",
    ])
    def test_malformed(self, text):
        with pytest.raises(ParseError):
            parse_dimacs(text)


class TestEdgeList:
    def test_round_trip(self, tmp_path):
        g = gen_maxcut(7, 0.5, 2)
        assert parse_edge_list(format_edge_list(g)) == g
        write_edge_list(g, tmp_path / "g.txt")
        assert read_edge_list(tmp_path / "g.txt") == g

    def test_parse(self):
        g = parse_edge_list("3\n0 1\n# comment\n1 2\n")
        assert g == Graph.from_edges(3, [(0, 1), (1, 2)])

    @pytest.mark.parametrize("text,line", [("3\n0 1\n1 1\n", 3), ("3\n0 5\n", 2), ("x\n", 1), ("3\n0 1 2\n", 2)])
    def test_malformed(self, text, line):
        with pytest.raises(ParseError) as err:
            parse_edge_list(text)
        assert err.value.line == line

    def test_duplicate_edge(self):
        with pytest.raises(ParseError):
            parse_edge_list("3\n0 1\n1 0\n")


class TestConfig:
    def test_defaults_and_clause_rule(self):
        assert [ExperimentConfig("sat3", n, 1).num_clauses for n in (6, 8, 10)] == [26, 34, 42]
        assert ExperimentConfig("sat3", 6, 1, clauses=20).num_clauses == 20

    def test_json_round_trip(self, tmp_path):
        cfg = ExperimentConfig("maxcut", 5, 3, instance_count=4, sigma_grid=[0.0, 0.1], seed=9, mode="layerwise",
                               t_max=2.5, h_range=(0.9, 1.1), p_range=[1, 2], t_max_grid=[0, 1])
        assert ExperimentConfig.from_json(cfg.to_json()) == cfg
        write_config(cfg, tmp_path / "c.json")
        assert read_config(tmp_path / "c.json") == cfg
        assert json.loads(cfg.to_json())["schema"] == 1

    @pytest.mark.parametrize("data", [
        {"problem": "search", "n": 2, "depth": 1},
        {"schema": 2, "problem": "search", "n": 2, "depth": 1},
        {"schema": 1, "problem": "search", "n": 2},
        {"schema": 1, "problem": "search", "n": 2, "depth": 1, "bogus": 3},
        {"schema": 1, "problem": "tsp", "n": 2, "depth": 1},
        {"schema": 1, "problem": "search", "n": 0, "depth": 1},
        {"schema": 1, "problem": "search", "n": 2, "depth": 1, "sigma_grid": [0.2, 0.1]},
        {"schema": 1, "problem": "search", "n": 2, "depth": 1, "sigma_grid": [-0.1]},
        {"schema": 1, "problem": "search", "n": 2, "depth": 1, "mode": "fused"},
        {"schema": 1, "problem": "search", "n": 2, "depth": 1, "t_max": -1},
        [1, 2],
    ])
    def test_rejects(self, data):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(data)

    def test_malformed_json(self):
        with pytest.raises(ConfigError, match="line 1"):
            ExperimentConfig.from_json("{bad")


class TestCsv:
    def test_format(self):
        text = format_csv([{"a": 0.1, "b": None, "c": True, "d": 3}], ["a", "b", "c", "d"])
        assert text == "a,b,c,d\n0.10000000000000001,,true,3\n"

    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        rows = [{"x": float(v), "flag": bool(v > 0), "k": i} for i, v in enumerate(rng.normal(size=20))]
        write_csv(tmp_path / "t.csv", rows, ["x", "flag", "k"])
        back = read_csv(tmp_path / "t.csv")
        assert back == rows
        assert all(math.isclose(r["x"], b["x"], rel_tol=0, abs_tol=0) for r, b in zip(rows, back))
