import numpy as np
import pytest

from mlgpi.data import (LabeledDataset, Standardizer, StripeLayout,
                        load_dataset, save_dataset, shear_atlas, stripe_label,
                        stripe_midlines, synth_rotation_atlas, synth_stripes)
from mlgpi.errors import DimensionMismatch, NonPrincipalLog, ParseError


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLoad:
    def test_small_file(self, tmp_path):
        data, _ = load_dataset(write(tmp_path, "1.0,2.0,0\n3.0,4.0,1\n"))
        assert (data.n, data.dim) == (2, 2)
        np.testing.assert_array_equal(data.labels, [0, 1])

    def test_header_skipped(self, tmp_path):
        data, _ = load_dataset(write(tmp_path, "x,y,label\n1,2,0\n"),
                               header=True)
        assert data.n == 1

    def test_non_numeric_names_line(self, tmp_path):
        p = write(tmp_path, "1,2,0\n3,abc,1\n")
        with pytest.raises(ParseError, match="line 2"):
            load_dataset(p)

    def test_bad_label(self, tmp_path):
        with pytest.raises(ParseError, match="line 1"):
            load_dataset(write(tmp_path, "1,2,0.5\n"))

    def test_ragged_rows(self, tmp_path):
        with pytest.raises(DimensionMismatch):
            load_dataset(write(tmp_path, "1,2,0\n1,0\n"))

    def test_empty_file(self, tmp_path):
        with pytest.raises(ParseError):
            load_dataset(write(tmp_path, "\n"))

    def test_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        data = LabeledDataset(rng.normal(size=(7, 3)), rng.integers(0, 3, 7))
        p = tmp_path / "out.csv"
        save_dataset(data, p)
        back, _ = load_dataset(p)
        np.testing.assert_array_equal(back.points, data.points)
        np.testing.assert_array_equal(back.labels, data.labels)

    def test_standardize_flag(self, tmp_path):
        data, scaler = load_dataset(
            write(tmp_path, "1,10,0\n3,30,1\n5,50,1\n"), standardize=True)
        np.testing.assert_allclose(data.points.mean(0), 0.0, atol=1e-15)
        np.testing.assert_allclose(data.points.std(0), 1.0)
        np.testing.assert_allclose(scaler.inverse(data.points)[:, 1],
                                   [10, 30, 50])


class TestDataset:
    def test_label_count_mismatch(self):
        with pytest.raises(DimensionMismatch):
            LabeledDataset(np.zeros((3, 2)), np.zeros(2))

    def test_negative_label(self):
        with pytest.raises(ValueError):
            LabeledDataset(np.zeros((1, 2)), np.array([-1]))

    def test_constant_feature_keeps_unit_scale(self):
        s = Standardizer.fit(np.array([[1.0, 2.0], [1.0, 4.0]]))
        np.testing.assert_array_equal(s.scale, [1.0, 1.0])


class TestStripes:
    def test_counts_and_labels(self):
        layout = StripeLayout()
        data = synth_stripes(layout, seed=3)
        per_class = np.bincount(data.labels)
        assert tuple(per_class) == (8 * layout.stripes, 16 * layout.stripes)
        np.testing.assert_array_equal(stripe_label(data.points[:, 0]),
                                      data.labels)

    def test_noise_free_is_symmetric(self):
        data = synth_stripes(noise=0.0)
        _, mids = stripe_midlines(data)
        np.testing.assert_allclose(mids, 0.0, atol=1e-15)

    def test_seeded(self):
        a, b = synth_stripes(seed=5), synth_stripes(seed=5)
        np.testing.assert_array_equal(a.points, b.points)

    def test_bounds_contain_data(self):
        layout = StripeLayout(stripes=3, width=2.0)
        data = synth_stripes(layout, seed=1)
        x0, x1, y0, y1 = layout.bounds()
        assert data.points[:, 0].min() > x0 and data.points[:, 0].max() < x1
        assert data.points[:, 1].min() > y0 and data.points[:, 1].max() < y1

    def test_rejects_zero_density(self):
        with pytest.raises(ValueError):
            synth_stripes(StripeLayout(densities=(0, 1)))


class TestAtlasFactories:
    def test_rotation_atlas_components(self):
        atlas = synth_rotation_atlas(0.63)
        assert atlas.q == 2
        np.testing.assert_allclose(atlas.components[0].center, [-2.0, 0.0])

    def test_rotation_beyond_pi(self):
        with pytest.raises(NonPrincipalLog):
            synth_rotation_atlas(np.pi)

    def test_shear_atlas_is_opposed(self):
        atlas = shear_atlas(1.5)
        a, b = (c.linear[0, 1] for c in atlas.components)
        assert (a, b) == (1.5, -1.5)
