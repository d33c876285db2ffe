import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bayesot.cost_models import (
    Empirical,
    EnsembleFormatError,
    Gaussian,
    HierarchicalModel,
    PointMass,
    ensemble_from_json,
    ensemble_to_json,
    load_ensemble,
    profile_cost,
    sample_cost,
    save_ensemble,
)
from bayesot.posterior import CostEnsemble


class TestSamplers:
    def test_point_mass(self):
        x = PointMass([1.0, 2.0]).draw(np.random.default_rng(0), 3)
        np.testing.assert_array_equal(x, [[1, 2]] * 3)

    def test_empirical_scalar_points(self):
        e = Empirical([0.0, 1.0])
        assert e.dim == 1
        assert set(e.draw(np.random.default_rng(0), 50).ravel()) == {0.0, 1.0}

    def test_gaussian_moments(self):
        x = Gaussian([1.0, -1.0], 2.0).draw(np.random.default_rng(0), 20_000)
        np.testing.assert_allclose(x.mean(axis=0), [1.0, -1.0], atol=0.05)
        np.testing.assert_allclose(x.std(axis=0), [2.0, 2.0], rtol=0.03)

    @pytest.mark.parametrize("make", [
        lambda: PointMass([np.nan]), lambda: Empirical(np.zeros((0, 2))),
        lambda: Gaussian([0.0], -1.0),
    ])
    def test_invalid(self, make):
        with pytest.raises(ValueError):
            make()


class TestHierarchicalModel:
    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            HierarchicalModel([PointMass([0.0, 0.0])], [PointMass([0.0, 0.0, 0.0])])

    def test_empty_side(self):
        with pytest.raises(ValueError):
            HierarchicalModel([], [PointMass([0.0])])

    def test_bad_ground_cost(self):
        with pytest.raises(ValueError):
            HierarchicalModel([PointMass([0.0])], [PointMass([0.0])], "manhattan")

    def test_shape(self):
        m = HierarchicalModel([PointMass([0.0])] * 2, [PointMass([1.0])] * 3)
        assert m.shape == (2, 3) and m.dim == 1


class TestSampleCost:
    def test_point_masses(self):
        model = HierarchicalModel([PointMass([0.0, 0.0])], [PointMass([3.0, 4.0])])
        e = sample_cost(model, 5)
        np.testing.assert_array_equal(e.samples[:, 0, 0], 25.0)

    def test_euclidean(self):
        model = HierarchicalModel([PointMass([0.0, 0.0])], [PointMass([3.0, 4.0])], "euclidean")
        np.testing.assert_array_equal(sample_cost(model, 2).samples[:, 0, 0], 5.0)

    def test_identical_atoms_zero_diagonal(self):
        atoms = [PointMass([1.0, 2.0]), PointMass([-1.0, 0.5]), PointMass([3.0, 3.0])]
        e = sample_cost(HierarchicalModel(atoms, atoms), 4)
        for c in e.samples:
            np.testing.assert_array_equal(np.diag(c), 0.0)

    def test_empirical_frequencies(self):
        # pairs (x, y) in {0, 1} x {0, 3}: squared costs 0, 9, 1, 4 each with probability 1/4
        model = HierarchicalModel([Empirical([0.0, 1.0])], [Empirical([0.0, 3.0])])
        n = 10_000
        vals = sample_cost(model, n, seed=3).samples[:, 0, 0]
        assert set(vals) == {0.0, 1.0, 4.0, 9.0}
        sigma = math.sqrt(0.25 * 0.75 / n)
        for v in (0.0, 1.0, 4.0, 9.0):
            assert abs(np.mean(vals == v) - 0.25) < 3 * sigma

    def test_deterministic(self):
        model = HierarchicalModel([Gaussian([0.0, 0.0])] * 3, [Gaussian([1.0, 1.0], 0.5)] * 2)
        a, b = sample_cost(model, 20, seed=9), sample_cost(model, 20, seed=9)
        np.testing.assert_array_equal(a.samples, b.samples)
        assert not np.array_equal(a.samples, sample_cost(model, 20, seed=10).samples)

    def test_paired_symmetric(self):
        atoms = [Empirical(np.random.default_rng(i).normal(size=(5, 2))) for i in range(4)]
        e = sample_cost(HierarchicalModel(atoms, atoms), 30, seed=1, paired=True)
        for c in e.samples:
            np.testing.assert_array_equal(c, c.T)

    def test_unpaired_not_symmetric(self):
        atoms = [Gaussian([0.0, 0.0])] * 3
        c = sample_cost(HierarchicalModel(atoms, atoms), 1, seed=1).samples[0]
        assert not np.array_equal(c, c.T)

    def test_n_samples(self):
        with pytest.raises(ValueError):
            sample_cost(HierarchicalModel([PointMass([0.0])], [PointMass([1.0])]), 0)


class TestProfileCost:
    def test_identical(self):
        p = np.random.default_rng(0).normal(size=(4, 3))
        np.testing.assert_array_equal(np.diag(profile_cost(p, p)), 0.0)

    def test_value(self):
        # sqrt(2 - 2/e), frozen from mpmath
        c = profile_cost([[0.0, 0.0]], [[0.06, 0.08]], gamma=10.0)
        assert c[0, 0] == pytest.approx(1.12438477295680, abs=1e-13)

    def test_limit(self):
        c = profile_cost([[0.0]], [[1e3]], gamma=10.0)
        assert c[0, 0] == pytest.approx(math.sqrt(2), abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(arrays(float, (3, 2), elements=st.floats(-5, 5)),
           arrays(float, (4, 2), elements=st.floats(-5, 5)),
           st.floats(0.1, 20))
    def test_range(self, p, e, gamma):
        c = profile_cost(p, e, gamma)
        assert c.shape == (3, 4)
        assert np.all(c >= 0) and np.all(c <= math.sqrt(2))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            profile_cost([[0.0, 1.0]], [[0.0]])

    def test_gamma_positive(self):
        with pytest.raises(ValueError):
            profile_cost([[0.0]], [[1.0]], gamma=0.0)


class TestFiles:
    @pytest.mark.parametrize("fmt", ["json", "csv"])
    def test_roundtrip_bit_exact(self, tmp_path, fmt):
        rng = np.random.default_rng(0)
        e = CostEnsemble(rng.uniform(0, 1, (10, 3, 4)) ** 3)
        path = tmp_path / f"e.{fmt}"
        save_ensemble(e, path)
        back = load_ensemble(path)
        assert back.samples.shape == (10, 3, 4)
        np.testing.assert_array_equal(back.samples, e.samples)

    @settings(max_examples=30, deadline=None)
    @given(arrays(float, st.tuples(st.integers(1, 4), st.integers(1, 3), st.integers(1, 3)),
                  elements=st.floats(0, 1e300)))
    def test_json_roundtrip_property(self, samples):
        e = CostEnsemble(samples)
        back = ensemble_from_json(json.loads(json.dumps(ensemble_to_json(e))))
        np.testing.assert_array_equal(back.samples, e.samples)

    def test_explicit_format_overrides_extension(self, tmp_path):
        e = CostEnsemble(np.ones((2, 2, 2)))
        save_ensemble(e, tmp_path / "e.txt", "csv")
        np.testing.assert_array_equal(load_ensemble(tmp_path / "e.txt", "csv").samples, e.samples)

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError):
            save_ensemble(CostEnsemble(np.ones((1, 2, 2))), tmp_path / "e.npy")

    def test_wrong_shape_names_sample(self):
        samples = [np.zeros((2, 2)).tolist()] * 3 + [np.zeros((2, 3)).tolist()]
        with pytest.raises(EnsembleFormatError, match="sample 3"):
            ensemble_from_json({"n": 2, "m": 2, "samples": samples})

    def test_empty(self):
        with pytest.raises(EnsembleFormatError, match="ensemble must contain at least one sample"):
            ensemble_from_json({"n": 2, "m": 2, "samples": []})

    @pytest.mark.parametrize("data,msg", [
        ([], "object"),
        ({"n": 2, "m": 2}, "samples"),
        ({"n": 0, "m": 2, "samples": [[[]]]}, "positive"),
        ({"n": 1, "m": 1, "samples": [[["x"]]]}, "sample 0"),
        ({"n": 1, "m": 1, "samples": [[[-1.0]]]}, "nonnegative"),
    ])
    def test_malformed_json(self, data, msg):
        with pytest.raises(EnsembleFormatError, match=msg):
            ensemble_from_json(data)

    def test_invalid_json_names_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"n": 2,\n "m": 2,\n "samples": [}\n')
        with pytest.raises(EnsembleFormatError, match="line 3"):
            load_ensemble(path)

    @pytest.mark.parametrize("body,msg", [
        ("sample,i,j,value\n0,0,0,1.0\n0,0,x,2.0\n", "line 3"),
        ("sample,i,j,value\n0,0,0,1.0\n0,0,1\n", "line 3"),
        ("sample,i,j,value\n0,0,0,-1.0\n", "line 2"),
        ("sample,i,j,value\n0,0,0,1.0\n0,0,0,2.0\n", "line 3"),
        ("a,b,c,d\n", "line 1"),
        ("", "at least one sample"),
        ("sample,i,j,value\n", "at least one sample"),
        ("sample,i,j,value\n0,0,0,1\n2,0,0,1\n", "sample 1"),
        ("sample,i,j,value\n0,0,0,1\n0,0,1,1\n1,0,0,1\n", "sample 1"),
    ])
    def test_malformed_csv(self, tmp_path, body, msg):
        path = tmp_path / "bad.csv"
        path.write_text(body)
        with pytest.raises(EnsembleFormatError, match=msg):
            load_ensemble(path)

    def test_fixture_is_toy(self, fixtures):
        e = load_ensemble(fixtures / "toy_ensemble.json")
        np.testing.assert_array_equal(e.mean(), np.full((2, 2), 5.0))
