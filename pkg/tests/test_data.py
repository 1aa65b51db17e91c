import numpy as np
import pytest

from nidsbalance.data import (
    BOT_IOT_FEATURES,
    CATEGORICAL,
    MISSING,
    NUMERIC,
    Column,
    Dataset,
    FlowRecord,
    RowError,
    SchemaError,
    SyntheticSpec,
    generate_synthetic,
    get_schema,
    load_csv,
    parse_number,
    read_dataset,
    schema_of,
    to_dataset,
    write_csv,
)


def write(tmp_path, text, name="f.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


SMALL = get_schema(["sport", "proto", "bytes"])


def test_builtin_schema_has_43_features():
    assert len(BOT_IOT_FEATURES) == 43
    kinds = {c.name: c.kind for c in get_schema("bot-iot")}
    assert kinds["saddr"] == CATEGORICAL and kinds["daddr"] == CATEGORICAL
    assert kinds["rate"] == NUMERIC


def test_hex_port_parsed(tmp_path):
    p = write(tmp_path, "sport,proto,bytes,attack\n0x11,tcp,10\n80,udp,2.5,0\n"
                        "443,tcp,7,1\n".replace("10\n", "10,1\n"))
    recs = load_csv(p, SMALL)
    assert len(recs) == 3
    assert recs[0].values["sport"] == 17
    assert recs[0].label == 1 and recs[1].label == 0
    assert recs[1].values["bytes"] == 2.5
    assert recs[0].values["proto"] == "tcp"


def test_parse_number_cases():
    assert parse_number("0x0303") == 0x0303
    assert parse_number("12") == 12
    assert parse_number("1e3") == 1000.0
    assert parse_number("") is MISSING
    assert parse_number("nan") is MISSING
    assert parse_number("abc") is MISSING


def test_empty_file_with_header(tmp_path):
    p = write(tmp_path, "sport,proto,bytes,attack\n")
    assert load_csv(p, SMALL) == []


def test_missing_label_column(tmp_path):
    p = write(tmp_path, "sport,proto,bytes\n1,tcp,2\n")
    with pytest.raises(SchemaError):
        load_csv(p, SMALL)


def test_wrong_arity_reports_line(tmp_path):
    p = write(tmp_path, "sport,proto,bytes,attack\n1,tcp,2,1\n1,tcp,1\n")
    with pytest.raises(RowError) as e:
        load_csv(p, SMALL)
    assert e.value.line == 3
    assert "line 3" in str(e.value)


def test_header_mapping_is_case_insensitive(tmp_path):
    p = write(tmp_path, "SPORT,Proto,Bytes,ATTACK\n1,tcp,2,1\n")
    recs = load_csv(p, SMALL, label_column="attack")
    assert recs[0].values == {"sport": 1, "proto": "tcp", "bytes": 2}


def test_to_dataset_shape_and_label_order():
    schema = get_schema(["a", "b", "c"])
    recs = [FlowRecord({"a": 1, "b": 2, "c": 3}, 0), FlowRecord({"a": 4, "b": 5, "c": 6}, 1)]
    d = to_dataset(recs, schema)
    assert (d.n_rows, d.n_cols) == (2, 3)
    assert d.y.tolist() == [0, 1]
    assert d.names == ["a", "b", "c"]


def test_to_dataset_missing_column():
    with pytest.raises(SchemaError):
        to_dataset([FlowRecord({"a": 1}, 0)], get_schema(["a", "b"]))


def test_missing_cells_imputed_zero(tmp_path):
    p = write(tmp_path, "sport,proto,bytes,attack\n,tcp,2,1\n5,udp,x,0\n")
    d = read_dataset(p, SMALL)
    assert d.X[0, 0] == 0 and d.X[1, 2] == 0


def test_full_scale_counts_from_totals():
    # class totals of the published extract; built without materialising the matrix
    n0, n1 = 477, 3_668_041
    assert n0 + n1 == 3_668_518
    recs = [FlowRecord({"x": 0}, 0)] * 3 + [FlowRecord({"x": 1}, 1)] * 5
    d = to_dataset(recs, get_schema(["x"]))
    assert d.class_counts() == {0: 3, 1: 5}


def test_dataset_rejects_non_finite():
    with pytest.raises(ValueError):
        Dataset((Column("a"),), np.array([[np.nan]]), np.array([0]))
    with pytest.raises(ValueError):
        Dataset((Column("a"),), np.array([[1.0]]), np.array([2]))


def test_dataset_is_read_only():
    d = Dataset((Column("a"),), np.array([[1.0]]), np.array([1]))
    with pytest.raises(ValueError):
        d.X[0, 0] = 5


def test_synthetic_counts_and_determinism():
    spec = SyntheticSpec(n_majority=7500, n_minority=1, class_separation=4, noise_sigma=1, seed=7)
    a, b = generate_synthetic(spec), generate_synthetic(spec)
    assert a.class_counts() == {0: 1, 1: 7500}
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)


def test_synthetic_means():
    d = generate_synthetic(SyntheticSpec(n_majority=4000, n_minority=4000, n_features=3,
                                         class_separation=2.0, seed=1))
    gap = d.X[d.y == 0].mean(0) - d.X[d.y == 1].mean(0)
    assert np.allclose(gap, 2.0, atol=0.1)


def test_synthetic_invalid_spec():
    with pytest.raises(ValueError):
        SyntheticSpec(n_majority=0)
    with pytest.raises(ValueError):
        SyntheticSpec(noise_sigma=-1)


def test_csv_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    X = np.column_stack([rng.integers(-5, 70000, 50), rng.normal(size=50) * 1e-7,
                         rng.random(50) * 1e9])
    d = Dataset((Column("port"), Column("tiny"), Column("big")), X, rng.integers(0, 2, 50))
    p = tmp_path / "rt.csv"
    write_csv(d, p)
    back = read_dataset(p, schema_of(d))
    assert np.array_equal(back.X, d.X)
    assert np.array_equal(back.y, d.y)


def test_round_trip_synthetic(tmp_path):
    d = generate_synthetic(SyntheticSpec(n_majority=30, n_minority=5, n_features=4, seed=2))
    p = tmp_path / "s.csv"
    write_csv(d, p)
    back = read_dataset(p, schema_of(d))
    assert np.array_equal(back.X, d.X)
