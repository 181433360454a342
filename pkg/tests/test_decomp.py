import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from systems import independent_s_panel, mediation_panel, synergy_panel
from tedecomp.decomp import (
    DecompResult,
    SubsetSearchPolicy,
    _argbest,
    bias_matched_pair,
    decompose,
    default_late_offset,
    dtau_scan,
    ired_hat,
    isyn_hat,
    late_past_lags,
    net_effect,
)
from tedecomp.dynsys import TimeSeriesPanel
from tedecomp.errors import ComparisonError, InputError, PolicyError
from tedecomp.te import EmbeddingSpec, transfer_entropy

SPEC = EmbeddingSpec(dim=1)
SMALL = SubsetSearchPolicy((1, 2, 3), max_subset_size=2)


class TestPolicy:
    def test_defaults(self):
        p = SubsetSearchPolicy()
        assert p.candidate_lags == tuple(range(1, 9))
        assert (p.mode, p.max_subset_size, p.exhaustive_limit) == ("exhaustive", 3, 12)

    def test_subsets_include_empty_and_are_ordered(self):
        subsets = SMALL.exhaustive_subsets()
        assert subsets[0] == ()
        assert subsets == [(), (1,), (2,), (3,), (1, 2), (1, 3), (2, 3)]

    def test_too_many_for_exhaustive(self):
        policy = SubsetSearchPolicy(tuple(range(1, 14)))
        with pytest.raises(PolicyError, match="greedy"):
            policy.exhaustive_subsets()

    @pytest.mark.parametrize("kw", [{"candidate_lags": ()}, {"candidate_lags": (0, 1)},
                                    {"mode": "random"}, {"max_subset_size": -1}])
    def test_invalid(self, kw):
        with pytest.raises(PolicyError):
            SubsetSearchPolicy(**kw)

    def test_late_offset(self):
        assert default_late_offset(SubsetSearchPolicy((1, 2))) == 50
        assert default_late_offset(SubsetSearchPolicy((1, 9))) == 90
        assert late_past_lags(3, 50) == (49, 48, 47)


class TestDecompose:
    def test_synergy_construction(self):
        res = decompose(synergy_panel(4000, 0), "X", "Y", ["Z"], "S", SMALL, SPEC)
        assert res.i_syn_hat > 0.2
        assert 1 in res.best_syn_subset
        assert net_effect(res)[1] == "synergy-dominated"

    def test_mediation_construction(self):
        res = decompose(mediation_panel(4000, 0), "X", "Y", ["Z"], "S", SMALL, SPEC)
        assert res.i_red_hat > 0.2
        assert 2 in res.best_red_subset
        assert net_effect(res)[1] == "redundancy-dominated"

    def test_independent_s_is_balanced(self):
        res = decompose(independent_s_panel(8000, 1), "X", "Y", ["Z"], "S", SMALL, SPEC)
        assert res.i_syn_hat <= 0.05
        assert net_effect(res)[1] == "balanced"

    def test_copy_of_conditioner_is_nonnegative(self):
        panel = independent_s_panel(3000, 2)
        data = np.vstack([panel.data, panel["Z"]])
        panel = TimeSeriesPanel(panel.channels + ("Zc",), data)
        res = ired_hat(panel, "X", "Y", ["Z"], "Zc", SMALL, SPEC)
        assert res.i_red_hat >= 0.0

    def test_per_subset_table_and_baseline(self):
        res = decompose(synergy_panel(2000, 3), "X", "Y", [], "S", SMALL, SPEC)
        subsets = [row["subset"] for row in res.per_subset]
        assert subsets == SMALL.exhaustive_subsets()
        base = [r for r in res.per_subset if r["subset"] == ()][0]
        assert base["te"] == res.te_baseline and base["syn_score"] == 0.0
        best = max(r["syn_score"] for r in res.per_subset)
        assert res.i_syn_hat == best

    def test_wrappers_compute_one_side(self):
        panel = synergy_panel(1500, 4)
        syn = isyn_hat(panel, "X", "Y", [], "S", SMALL, SPEC)
        red = ired_hat(panel, "X", "Y", [], "S", SMALL, SPEC)
        assert syn.i_red_hat is None and red.i_syn_hat is None
        both = decompose(panel, "X", "Y", [], "S", SMALL, SPEC)
        net, _ = net_effect(syn, red)
        assert net == pytest.approx(both.net)

    def test_reproducible(self):
        panel = synergy_panel(1500, 5)
        a = decompose(panel, "X", "Y", ["Z"], "S", SMALL, SPEC, seed=3)
        b = decompose(panel, "X", "Y", ["Z"], "S", SMALL, SPEC, seed=3, threads=2)
        assert a == b

    def test_tie_break_prefers_small_then_lexicographic(self):
        # a constant S adds only jitter, so several subsets can tie exactly
        panel = synergy_panel(600, 6)
        flat = TimeSeriesPanel(panel.channels, np.vstack([panel.data[:3], np.zeros((1, 600))]))
        res = decompose(flat, "X", "Y", [], "S", SMALL, SPEC)
        scores = {r["subset"]: r["syn_score"] for r in res.per_subset}
        top = max(scores.values())
        winners = sorted((s for s, v in scores.items() if v == top), key=lambda s: (len(s), s))
        assert res.best_syn_subset == winners[0]

    def test_tie_break_rule(self):
        subsets = [(2, 3), (1, 3), (3,), (2,), ()]
        best, value = _argbest(subsets, [0.5, 0.5, 0.5, 0.5, 0.1])
        assert (best, value) == ((2,), 0.5)

    def test_errors(self):
        panel = synergy_panel(500, 0)
        with pytest.raises(InputError):
            decompose(panel, "X", "Y", [], "X", SMALL, SPEC)
        with pytest.raises(InputError):
            decompose(panel, "X", "Y", ["S"], "S", SMALL, SPEC)
        with pytest.raises(InputError):
            decompose(panel, "X", "Y", [], "Q", SMALL, SPEC)
        with pytest.raises(InputError):
            decompose(panel, "X", "Y", [], "S", SMALL, SPEC, bias_matched=True, T=20)
        with pytest.raises(PolicyError):
            decompose(panel, "X", "Y", [], "S", SubsetSearchPolicy(tuple(range(1, 14))), SPEC)


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["exhaustive", "greedy"]))
def test_nonnegative_without_bias_matching(seed, mode):
    rng = np.random.default_rng(seed)
    panel = TimeSeriesPanel(("X", "Y", "S"), rng.standard_normal((3, 300)))
    res = decompose(panel, "X", "Y", [], "S", SubsetSearchPolicy((1, 2, 3), mode, 2), SPEC,
                    seed=seed)
    assert res.i_syn_hat >= 0.0 and res.i_red_hat >= 0.0


@pytest.mark.parametrize("seed", range(3))
def test_greedy_never_beats_exhaustive(seed):
    panel = synergy_panel(1500, seed)
    kw = dict(spec=SPEC, seed=seed)
    ex = decompose(panel, "X", "Y", [], "S", SubsetSearchPolicy((1, 2, 3, 4), "exhaustive", 3), **kw)
    gr = decompose(panel, "X", "Y", [], "S", SubsetSearchPolicy((1, 2, 3, 4), "greedy", 3), **kw)
    assert gr.i_syn_hat <= ex.i_syn_hat
    assert gr.i_red_hat <= ex.i_red_hat
    # the exhaustive argmax here is a single lag, which greedy reaches first
    if len(ex.best_syn_subset) <= 1:
        assert gr.i_syn_hat == ex.i_syn_hat


class TestBiasMatchedPair:
    def test_empty_subset_gives_zero_difference(self):
        first, second = bias_matched_pair(independent_s_panel(1000, 0), "X", "Y", ["Z"], "S", (), 50,
                                          SPEC)
        assert first.value - second.value == 0.0

    @pytest.mark.parametrize("subset", [(1,), (1, 2), (1, 2, 3)])
    def test_equal_dimensions(self, subset):
        first, second = bias_matched_pair(independent_s_panel(1000, 0), "X", "Y", ["Z"], "S",
                                          subset, 50, SPEC)
        assert first.dims == second.dims and first.n == second.n
        assert second.meta["cond"].count(",") == len(subset) - 1

    def test_requires_large_t_and_long_panel(self):
        panel = independent_s_panel(200, 0)
        with pytest.raises(InputError):
            bias_matched_pair(panel, "X", "Y", [], "S", (1, 2, 3), 20, SPEC)
        with pytest.raises(InputError):
            bias_matched_pair(panel, "X", "Y", [], "S", (1,), 195, SPEC)

    def test_matches_decompose_reference(self):
        panel = independent_s_panel(2000, 1)
        res = decompose(panel, "X", "Y", [], "S", SMALL, SPEC, bias_matched=True, T=50)
        first, second = bias_matched_pair(panel, "X", "Y", [], "S", (1, 3), 50, SPEC)
        row = [r for r in res.per_subset if r["subset"] == (1, 3)][0]
        assert (row["te"], row["reference"]) == (first.value, second.value)


class TestNetEffect:
    def result(self, syn, red, **meta):
        return DecompResult(syn, red, (), (), meta=meta)

    def test_labels(self):
        assert net_effect(self.result(0.3, 0.0)) == (pytest.approx(-0.3), "synergy-dominated")
        assert net_effect(self.result(0.0, 0.3)) == (pytest.approx(0.3), "redundancy-dominated")
        assert net_effect(self.result(0.01, 0.02))[1] == "balanced"
        assert net_effect(self.result(0.01, 0.02), dead_band=0.001)[1] == "redundancy-dominated"

    def test_returns_plain_float(self):
        net, _ = net_effect(self.result(np.float64(0.1), np.float64(0.5)))
        assert type(net) is float

    def test_mismatched_sides(self):
        a = DecompResult(0.1, None, (), None, meta={"k": 10})
        b = DecompResult(None, 0.2, None, (), meta={"k": 5})
        with pytest.raises(ComparisonError):
            net_effect(a, b)
        with pytest.raises(ComparisonError):
            net_effect(a)


class TestDtau:
    def test_counts_and_flatness_for_independent_conditioner(self):
        panel = independent_s_panel(4000, 3)
        rows = dtau_scan(panel, ["X", "Y"], ["S"], [1, 5, 10, 20], SPEC)
        assert [r.tau for r in rows] == [1, 5, 10, 20]
        assert all(r.n_pairs == 2 and r.n_conditioners == 1 for r in rows)
        values = [r.value for r in rows]
        assert max(values) - min(values) <= 0.05 * 2
        assert all(abs(v - rows[0].baseline) <= 0.1 for v in values)

    def test_definition(self):
        panel = independent_s_panel(1500, 4)
        (row,) = dtau_scan(panel, ["X", "Y", "Z"], ["S"], [3], SPEC)
        assert row.n_pairs == 6
        history = 3
        expected = sum(
            transfer_entropy(panel, i, j, {"S": [3]}, SPEC, min_history=history).value
            for i in "XYZ" for j in "XYZ" if i != j
        )
        assert row.value == pytest.approx(expected, abs=1e-12)

    def test_mediator_lowers_value_at_its_lag(self):
        panel = mediation_panel(4000, 5)
        rows = dtau_scan(panel, ["X", "Y"], ["S"], [2, 30], SPEC)
        assert rows[0].value < rows[0].baseline - 0.2
        assert abs(rows[1].value - rows[1].baseline) < 0.05

    def test_errors(self):
        panel = independent_s_panel(300, 0)
        with pytest.raises(InputError):
            dtau_scan(panel, ["X"], ["S"], [1])
        with pytest.raises(InputError):
            dtau_scan(panel, ["X", "Y"], [], [1])
        with pytest.raises(InputError):
            dtau_scan(panel, ["X", "Y"], ["S"], [0])
        with pytest.raises(InputError):
            dtau_scan(panel, ["X", "S"], ["S"], [1])
