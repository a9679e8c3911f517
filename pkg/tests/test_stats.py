import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from eegscore import stats
from eegscore.descriptors import DescriptorId
from eegscore.errors import FormatError, NonFinite, SchemaMismatch, TooFewSamples
from eegscore.features import FeatureMatrix
from eegscore.synth import alpha_rule, gen_synthetic_session

from dcor_oracle import dcor_oracle

A = DescriptorId("abs_energy", "alpha", "TP9")
B = DescriptorId("abs_energy", "alpha", "FP1")
C = DescriptorId("abs_energy", "theta", "TP9")
D = DescriptorId("abs_energy", "theta", "FP1")


def matrix(columns: dict, ratings, participant="p"):
    ids = list(columns)
    values = np.column_stack([np.asarray(columns[d], float) for d in ids])
    n = len(ratings)
    return FeatureMatrix(ids, values, ratings, [f"s{i}" for i in range(n)], np.zeros(n), participant)


def test_dcor_examples():
    assert stats.distance_correlation([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0, abs=1e-12)
    assert stats.distance_correlation([1, 2, 3], [4, 4, 4]) == 0.0
    x, y = [0, 1, 2, 3], [0, 1, 4, 9]
    assert stats.distance_correlation(x, y) == pytest.approx(dcor_oracle(x, y), abs=1e-10)
    with pytest.raises(TooFewSamples):
        stats.distance_correlation([1], [2])
    with pytest.raises(NonFinite):
        stats.distance_correlation([1, np.nan], [1, 2])


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 16), st.integers(1, 3), st.integers(0, 2 ** 32 - 1))
def test_dcor_matches_loop_oracle(n, p, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, p))
    y = rng.normal(size=(n, 1))
    assert abs(stats.distance_correlation(x, y) - dcor_oracle(x.tolist(), y.tolist())) <= 1e-10


_sample = arrays(float, st.tuples(st.integers(2, 12), st.integers(1, 3)),
                 elements=st.floats(-1e3, 1e3, allow_nan=False, allow_subnormal=False))


@settings(max_examples=200, deadline=None)
@given(_sample, st.data())
def test_dcor_symmetry_bounds_and_invariance(x, data):
    y = data.draw(arrays(float, (len(x), 1),
                         elements=st.floats(-1e3, 1e3, allow_nan=False, allow_subnormal=False)))
    r = stats.distance_correlation(x, y)
    assert r == stats.distance_correlation(y, x)
    assert 0.0 <= r <= 1.0 + 1e-12
    c = data.draw(st.floats(0.1, 10) | st.floats(-10, -0.1))
    assert stats.distance_correlation(c * x, y) == pytest.approx(r, abs=1e-9)
    # a shift only stays exact while it does not swamp the spread of x
    if np.ptp(x) > 1e-3:
        shift = data.draw(st.floats(-100, 100))
        assert stats.distance_correlation(x + shift, y) == pytest.approx(r, abs=1e-9)


def test_independent_normals_are_near_zero():
    below = sum(stats.distance_correlation(*np.random.default_rng(s).normal(size=(2, 1000))) < 0.1
                for s in range(100))
    assert below >= 95


def test_linear_relation_gives_one():
    x = np.random.default_rng(0).normal(size=(300, 1))
    assert stats.distance_correlation(x, 3 * x - 2) == pytest.approx(1.0, abs=1e-9)


def test_rank_examples():
    r = np.repeat([1, 2, 3, 4, 5], 8).astype(float)
    rng = np.random.default_rng(0)
    m = matrix({A: r, B: rng.normal(size=40), C: r + 0.1 * rng.normal(size=40)}, r)
    ranked = stats.rank_descriptors([m])
    assert ranked[0] == (A, pytest.approx(1.0))
    assert [d for d, _ in ranked] == [A, C, B]


def test_rank_averages_participants(monkeypatch):
    m1 = matrix({A: [0, 1, 2]}, [1, 2, 3], "one")
    m2 = matrix({A: [0, 1, 2]}, [1, 2, 3], "two")
    values = {"one": 0.8, "two": 0.6}
    monkeypatch.setattr(stats, "participant_r", lambda m, ids, standardize=True: values[m.participant])
    assert stats.rank_descriptors([m1, m2])[0][1] == pytest.approx(0.7)


def test_noise_ranks_below_signal():
    rng = np.random.default_rng(42)
    r = rng.integers(1, 6, 200).astype(float)
    m = matrix({A: rng.normal(size=200), B: r + 0.3 * rng.normal(size=200)}, r)
    ranked = dict(stats.rank_descriptors([m]))
    assert ranked[A] < ranked[B]


def test_rank_ties_broken_by_id_and_schema_checked():
    r = np.arange(10.0)
    m = matrix({C: r, A: r, B: r}, r)
    assert [d for d, _ in stats.rank_descriptors([m])] == sorted([A, B, C], key=str)
    with pytest.raises(SchemaMismatch):
        stats.rank_descriptors([m, matrix({A: r}, r)])


def test_duplicate_column_rejected():
    rng = np.random.default_rng(1)
    r = rng.integers(1, 6, 60).astype(float)
    col = r + rng.normal(size=60)
    m = matrix({A: col, B: col.copy()}, r)
    spec = stats.select_biomarker(stats.rank_descriptors([m]), [m])
    assert len(spec.ids) == 1


def test_xor_pair_needs_its_partner():
    x1 = np.tile([-1.0, 1.0, -1.0, 1.0], 15)
    x2 = np.tile([-1.0, -1.0, 1.0, 1.0], 15)
    y = 3 + x1 * x2
    m = matrix({A: x1, B: x2}, y)
    assert stats.participant_r(m, [A]) == pytest.approx(0.0, abs=1e-12)
    assert stats.participant_r(m, [B]) == pytest.approx(0.0, abs=1e-12)
    spec = stats.select_biomarker([(A, 0.0), (B, 0.0)], [m])
    assert spec.ids == [A, B] and spec.selection_r > 0.4


def test_single_feature_selection():
    r = np.arange(1.0, 6.0)
    m = matrix({A: r ** 2}, r)
    ranked = stats.rank_descriptors([m])
    spec = stats.select_biomarker(ranked, [m])
    assert spec.ids == [A] and spec.selection_r == pytest.approx(ranked[0][1])


def test_max_features_and_exhaustive_mode():
    rng = np.random.default_rng(3)
    n = 80
    cols = {d: rng.normal(size=n) for d in (A, B, C, D)}
    y = cols[A] + cols[B] + cols[C] + cols[D]
    m = matrix(cols, y)
    ranked = stats.rank_descriptors([m])
    assert len(stats.select_biomarker(ranked, [m], max_features=2).ids) == 2
    greedy = stats.select_biomarker(ranked, [m])
    best = stats.select_biomarker(ranked, [m], "exhaustive", top_k=4)
    assert best.selection_r >= greedy.selection_r - 1e-12
    assert set(best.ids) == {A, B, C, D}
    with pytest.raises(ValueError):
        stats.select_biomarker(ranked, [m], "exhaustive", top_k=13)


def test_selection_is_deterministic_and_fixed_mode():
    rng = np.random.default_rng(9)
    m = matrix({A: rng.normal(size=30), B: rng.normal(size=30)}, rng.integers(1, 6, 30))
    ranked = stats.rank_descriptors([m])
    assert stats.select_biomarker(ranked, [m]) == stats.select_biomarker(ranked, [m])
    fixed = stats.select_biomarker([], [], "fixed")
    assert fixed.ids == list(stats.FIXED_BIOMARKER)
    assert [str(d) for d in fixed.ids] == [
        "asym_norm:beta_low@temporal", "rel_energy:alpha@TP9", "rel_energy:alpha@TP10",
        "pac:gamma_low:gamma_high@FP1", "rel_energy:theta@TP9"]


def test_biomarker_file_round_trip(tmp_path):
    spec = stats.BiomarkerSpec([A, DescriptorId("pac", "theta", "FP2", "gamma_low")], 0.8125,
                               {"p1": 0.75, "p2": 0.875}, 70.0, "exhaustive")
    path = tmp_path / "b.txt"
    stats.write_biomarker(spec, path)
    assert stats.read_biomarker(path) == spec
    path.write_text("#biomarker v1\nid nonsense\n")
    with pytest.raises(FormatError):
        stats.read_biomarker(path)
    with pytest.raises(ValueError):
        stats.BiomarkerSpec([A, A])
    with pytest.raises(ValueError):
        stats.BiomarkerSpec([])


def test_monotone_points():
    assert stats.monotone_points([]) == 0
    assert stats.monotone_points([0.5]) == 1
    assert stats.monotone_points([0.1, 0.2, 0.15, 0.3, 0.3]) == 4


@pytest.fixture(scope="module")
def alpha_sessions():
    return [gen_synthetic_session(10, alpha_rule, seed, song_duration=110) for seed in (11, 12)]


def test_sweep_rises_on_alpha_linked_data(alpha_sessions):
    ids = [DescriptorId("rel_energy", "alpha", "TP9")]
    curve = stats.r_vs_window_length(alpha_sessions, ids, [30, 100])
    assert [p.length for p in curve] == [30.0, 100.0]
    assert curve[1].mean_r >= curve[0].mean_r
    assert curve[0].n_windows == [60, 60] and curve[1].n_windows == [10, 10]
    assert stats.r_vs_window_length(alpha_sessions, ids, []) == []
    one = stats.r_vs_window_length(alpha_sessions[:1], ids, [90])
    assert len(one) == 1 and one[0].participant_r == [one[0].mean_r]
