import numpy as np
import pytest

from dicnn.data import (
    ColumnStandardizer,
    Dataset,
    SplitSpec,
    build_family_subsets,
    build_multifamily_dataset,
    encode_labels,
    impute_or_drop,
    load_csv,
    missing_value_ratio,
    one_hot,
    preprocess_table,
    standardize,
    stratified_split,
)
from dicnn.errors import CsvParseError, DataError, SchemaError, ShapeError


def write(tmp_path, text, name="t.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadCsv:
    def test_clean_three_rows(self, tmp_path):
        path = write(tmp_path, "a,b,label\n1,2,x\n3,4,y\n5,6,x\n")
        table = load_csv(path, "label")
        assert table.values.shape == (3, 2)
        assert table.missing.sum() == 0
        assert table.labels == ["x", "y", "x"]
        assert table.feature_names == ["a", "b"]

    def test_empty_cell_flagged_missing(self, tmp_path):
        path = write(tmp_path, "a,b,label\n1,2,x\n,4,y\n")
        table = load_csv(path, "label")
        assert table.missing[1, 0] and not table.missing[0, 0]
        assert np.isnan(table.values[1, 0])

    @pytest.mark.parametrize("marker", ["NA", "?"])
    def test_configured_markers(self, tmp_path, marker):
        path = write(tmp_path, f"a,label\n{marker},x\n2,y\n")
        table = load_csv(path, "label")
        assert table.missing[0, 0]

    def test_missing_label_column_is_schema_error(self, tmp_path):
        path = write(tmp_path, "a,b\n1,2\n")
        with pytest.raises(SchemaError):
            load_csv(path, "label")

    def test_unparseable_cell_addressed(self, tmp_path):
        path = write(tmp_path, "a,pkg,label\n1,com.x,m\n2,com.y,b\n")
        with pytest.raises(CsvParseError) as err:
            load_csv(path, "label")
        assert "row 2" in str(err.value) and "'pkg'" in str(err.value)

    def test_drop_columns_skips_identifiers(self, tmp_path):
        path = write(tmp_path, "a,pkg,label\n1,com.x,m\n2,com.y,b\n")
        table = load_csv(path, "label", drop_columns=["pkg"])
        assert table.feature_names == ["a"]

    def test_unknown_drop_column(self, tmp_path):
        path = write(tmp_path, "a,label\n1,m\n")
        with pytest.raises(SchemaError):
            load_csv(path, "label", drop_columns=["nope"])


class TestMissingValueRatio:
    def test_no_missing(self, tmp_path):
        table = load_csv(write(tmp_path, "a,label\n" + "1,x\n" * 10), "label")
        assert missing_value_ratio(table).tolist() == [0.0]

    def test_quarter_missing(self, tmp_path):
        table = load_csv(write(tmp_path, "a,label\n1,x\n,x\n3,x\n4,x\n"), "label")
        assert missing_value_ratio(table).tolist() == [0.25]

    def test_matches_per_cell_scan(self, tmp_path, rng_np):
        lines = ["f0,f1,f2,label"]
        for i in range(40):
            cells = [
                "" if rng_np.random() < 0.3 else f"{rng_np.random():.3f}"
                for _ in range(3)
            ]
            lines.append(",".join(cells) + ",x")
        table = load_csv(write(tmp_path, "\n".join(lines) + "\n"), "label")
        # brute-force per-cell scan
        for j in range(3):
            count = sum(1 for i in range(40) if table.missing[i, j])
            assert missing_value_ratio(table)[j] == count / 40


class TestImputeOrDrop:
    def _table(self, tmp_path, text):
        return load_csv(write(tmp_path, text), "label")

    def test_all_present_unchanged(self, tmp_path):
        table = self._table(tmp_path, "a,b,label\n1,2,x\n3,4,y\n")
        out, dropped = impute_or_drop(table, missing_value_ratio(table))
        assert np.array_equal(out.values, table.values)
        assert dropped == []

    def test_high_mvr_column_dropped(self, tmp_path):
        table = self._table(tmp_path, "a,b,label\n,1,x\n,2,y\n,3,x\n,4,y\n")
        out, dropped = impute_or_drop(table, missing_value_ratio(table), 0.5)
        assert out.feature_names == ["b"]
        assert dropped[0]["name"] == "a"

    def test_median_imputation(self, tmp_path):
        table = self._table(tmp_path, "a,label\n1,x\n2,x\n,x\n4,x\n")
        out, _ = impute_or_drop(table, missing_value_ratio(table), 0.5)
        assert out.values[2, 0] == 2.0  # median of {1, 2, 4}

    def test_entirely_missing_at_threshold_one(self, tmp_path):
        table = self._table(tmp_path, "a,label\n,x\n,y\n")
        with pytest.raises(DataError):
            impute_or_drop(table, missing_value_ratio(table), 1.0)


class TestStandardize:
    def test_two_point_column(self):
        out, mu, sigma = standardize(np.array([[0.0], [2.0]]))
        assert out.tolist() == [[-1.0], [1.0]]
        assert mu.tolist() == [1.0] and sigma.tolist() == [1.0]

    def test_constant_column_maps_to_zero(self):
        out, mu, sigma = standardize(np.array([[5.0], [5.0], [5.0]]))
        assert out.tolist() == [[0.0], [0.0], [0.0]]
        assert sigma.tolist() == [0.0]

    def test_population_divisor(self):
        # std of [0, 2] with divisor n is 1; with n-1 it would be sqrt(2)
        _, _, sigma = standardize(np.array([[0.0], [2.0]]))
        assert sigma[0] == 1.0

    def test_moments_match_two_pass_oracle(self, rng_np):
        x = rng_np.standard_normal((200, 7)) * 3.0 + 5.0
        out, mu, sigma = standardize(x)
        for j in range(7):
            col = x[:, j]
            mean = sum(col) / len(col)
            var = sum((v - mean) ** 2 for v in col) / len(col)
            assert mu[j] == pytest.approx(mean, abs=1e-12)
            assert sigma[j] == pytest.approx(np.sqrt(var), abs=1e-12)
            assert abs(out[:, j].mean()) < 1e-9
            assert abs(out[:, j].std() - 1.0) < 1e-6

    def test_restandardize_is_identity_on_params(self, rng_np):
        x = rng_np.standard_normal((100, 4))
        once, _, _ = standardize(x)
        _, mu2, sigma2 = standardize(once)
        assert np.all(np.abs(mu2) < 1e-9)
        assert np.all(np.abs(sigma2 - 1.0) < 1e-9)


class TestEncodeAndOneHot:
    def test_lexicographic_order(self):
        labels, classes = encode_labels(["b", "a", "b"])
        assert labels.tolist() == [1, 0, 1]
        assert classes == ["a", "b"]

    def test_benign_malware(self):
        labels, classes = encode_labels(["benign", "malware"])
        assert labels.tolist() == [0, 1]
        assert classes == ["benign", "malware"]

    def test_single_class_rejected(self):
        with pytest.raises(DataError):
            encode_labels(["only", "only"])

    def test_one_hot_rows(self):
        out = one_hot([0, 2, 1], 3)
        assert out.tolist() == [[1, 0, 0], [0, 0, 1], [0, 1, 0]]

    def test_one_hot_single(self):
        assert one_hot([0], 2).tolist() == [[1.0, 0.0]]

    def test_one_hot_out_of_range(self):
        with pytest.raises(ShapeError):
            one_hot([0, 3], 3)

    def test_one_hot_round_trip(self, rng_np):
        labels = rng_np.integers(0, 5, size=100)
        encoded = one_hot(labels, 5)
        assert np.array_equal(encoded.argmax(axis=1), labels)
        assert np.array_equal(encoded.sum(axis=1), np.ones(100))
        assert np.array_equal(encoded.sum(axis=0), np.bincount(labels, minlength=5))


def make_dataset(counts, n_features=4, seed=0):
    rng = np.random.Generator(np.random.PCG64(seed))
    labels = np.concatenate(
        [np.full(c, i, dtype=np.int64) for i, c in enumerate(counts)]
    )
    return Dataset(
        features=rng.standard_normal((labels.size, n_features)),
        labels=labels,
        feature_names=[f"f{i}" for i in range(n_features)],
        class_names=[f"c{i}" for i in range(len(counts))],
        source="synthetic",
    )


class TestStratifiedSplit:
    def test_forced_counts(self):
        ds = make_dataset([100, 50])
        split = stratified_split(ds, 0.2, seed=1)
        val_labels = ds.labels[split.val_indices]
        train_labels = ds.labels[split.train_indices]
        assert (val_labels == 0).sum() == 20 and (val_labels == 1).sum() == 10
        assert (train_labels == 0).sum() == 80 and (train_labels == 1).sum() == 40

    def test_deterministic(self):
        ds = make_dataset([30, 30, 30])
        a = stratified_split(ds, 0.2, seed=9)
        b = stratified_split(ds, 0.2, seed=9)
        assert a.train_indices.tolist() == b.train_indices.tolist()
        assert a.val_indices.tolist() == b.val_indices.tolist()

    def test_partition_exact(self):
        ds = make_dataset([41, 23, 17])
        split = stratified_split(ds, 0.3, seed=4)
        train = set(split.train_indices.tolist())
        val = set(split.val_indices.tolist())
        assert train | val == set(range(ds.n_samples))
        assert train & val == set()

    def test_proportions_within_one_sample(self):
        ds = make_dataset([137, 89, 54])
        eta = 0.2
        split = stratified_split(ds, eta, seed=2)
        for c in range(3):
            class_size = (ds.labels == c).sum()
            got = (ds.labels[split.val_indices] == c).sum()
            assert abs(got - eta * class_size) <= 1

    def test_single_sample_class_named_in_error(self):
        ds = make_dataset([10, 1])
        with pytest.raises(DataError) as err:
            stratified_split(ds, 0.2, seed=0)
        assert "c1" in str(err.value)

    def test_eta_bounds(self):
        ds = make_dataset([10, 10])
        with pytest.raises(DataError):
            stratified_split(ds, 1.0, seed=0)

    def test_json_round_trip(self):
        ds = make_dataset([20, 20])
        split = stratified_split(ds, 0.2, seed=5)
        again = SplitSpec.from_json(split.to_json())
        assert again.eta == split.eta and again.seed == split.seed
        assert np.array_equal(again.train_indices, split.train_indices)
        assert np.array_equal(again.val_indices, split.val_indices)


def family_dataset(seed=0):
    rng = np.random.Generator(np.random.PCG64(seed))
    names = ["benign"] * 50 + ["SMS"] * 20 + ["BankBot"] * 60
    labels, classes = encode_labels(names)
    return Dataset(
        features=rng.standard_normal((len(names), 3)),
        labels=labels,
        feature_names=["f0", "f1", "f2"],
        class_names=classes,
        source="fam",
    )


class TestFamilySubsets:
    def test_balanced_downsampling(self):
        ds = family_dataset()
        subset = build_family_subsets(ds, ["SMS"], seed=1)["SMS"]
        counts = subset.class_counts()
        assert subset.class_names == ["SMS", "benign"]
        assert counts.tolist() == [20, 20]  # min(50 benign, 20 SMS)

    def test_family_larger_than_benign_capped(self):
        ds = family_dataset()
        subset = build_family_subsets(ds, ["BankBot"], seed=1)["BankBot"]
        assert subset.class_counts().tolist() == [50, 50]

    def test_deterministic(self):
        ds = family_dataset()
        a = build_family_subsets(ds, ["SMS"], seed=7)["SMS"]
        b = build_family_subsets(ds, ["SMS"], seed=7)["SMS"]
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)

    def test_unknown_family(self):
        with pytest.raises(DataError):
            build_family_subsets(family_dataset(), ["Nope"], seed=0)

    def test_multifamily_balanced(self):
        ds = family_dataset()
        multi = build_multifamily_dataset(ds, ["SMS", "BankBot"], seed=3)
        assert multi.class_names == ["BankBot", "SMS"]
        assert multi.class_counts().tolist() == [20, 20]


class TestPreprocessTable:
    def test_end_to_end(self, tmp_path):
        lines = ["a,b,label"]
        rng = np.random.Generator(np.random.PCG64(0))
        for i in range(30):
            lines.append(f"{rng.random():.4f},{rng.random():.4f},"
                         + ("pos" if i % 2 else "neg"))
        path = tmp_path / "p.csv"
        path.write_text("\n".join(lines) + "\n")
        table = load_csv(path, "label")
        dataset, report, split = preprocess_table(table, eta=0.2, seed=1)
        assert report.mvr == {"a": 0.0, "b": 0.0}
        assert dataset.n_samples == 30
        assert split.val_indices.size == 6
        assert abs(sum(report.class_proportions.values()) - 1.0) < 1e-12


class TestColumnStandardizer:
    def test_sklearn_protocol(self, rng_np):
        x = rng_np.standard_normal((50, 3)) * 2 + 1
        scaler = ColumnStandardizer()
        out = scaler.fit_transform(x)
        expected, mu, sigma = standardize(x)
        assert np.array_equal(out, expected)
        assert np.array_equal(scaler.mu_, mu)
        params = scaler.get_params()
        assert params == {}  # stateless constructor

    def test_clone_and_refit(self, rng_np):
        from sklearn.base import clone

        x = rng_np.standard_normal((20, 2))
        scaler = ColumnStandardizer().fit(x)
        fresh = clone(scaler)
        assert not hasattr(fresh, "mu_")

    def test_transform_before_fit(self):
        from dicnn.errors import StateError

        with pytest.raises(StateError):
            ColumnStandardizer().transform(np.zeros((2, 2)))
