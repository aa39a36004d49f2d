import json

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from dge.errors import InsufficientData, ManifestMismatch
from dge.generators import GeneratorSpec, fit, sample
from dge.publish import (
    MANIFEST,
    Manifest,
    SyntheticBundle,
    dge_generate,
    load_bundle,
    naive_view,
    publish,
    replicate,
)
from dge.tabular import Column, RngStream, Schema, Synthetic, TabularDataset

from conftest import blobs

KDE = GeneratorSpec("kde", bandwidth_scale=0.5)


def bundle(K=3, n=50, seed=0, spec=KDE, data=None, **kw):
    return dge_generate(spec, data or blobs(80, seed=1), K, n, RngStream(seed), **kw)


def test_k1_is_naive_publisher_output():
    real = blobs(80, seed=1)
    b = bundle(K=1, data=real)
    stream = RngStream(0).child(0)
    model, _ = fit(GeneratorSpec("kde", bandwidth_scale=0.5, seed=stream.seed_int()), real, stream.child(0))
    assert b.K == 1
    assert b.datasets[0] == sample(model, 50, stream.child(1))
    assert naive_view(b, "single") == b.datasets[0]


def test_sets_pairwise_distinct_and_indexed():
    b = bundle(K=5)
    for i in range(5):
        assert b.datasets[i].provenance == Synthetic(b.manifest.seeds[i], "kde")
        for j in range(i):
            assert not np.array_equal(b.datasets[i].features, b.datasets[j].features)
    assert len(set(b.manifest.seeds)) == 5


def test_same_real_data_for_every_generator():
    real = blobs(80, seed=1)
    b = bundle(K=4, data=real, keep_models=True)
    assert all(m.n_train == real.n_rows for m in b.models)
    assert b.manifest.n_train == 80 and not b.manifest.disjoint_train


def test_replay_byte_identical(tmp_path):
    a, b = bundle(K=4, seed=9), bundle(K=4, seed=9)
    assert a == b
    publish(a, tmp_path / "a")
    publish(b, tmp_path / "b")
    for name in sorted(p.name for p in (tmp_path / "a").iterdir()):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_continuous_sets_never_coincide_over_runs():
    hits = 0
    for run in range(100):
        b = bundle(K=2, n=5, seed=run)
        hits += np.array_equal(b.datasets[0].features, b.datasets[1].features)
    assert hits == 0


def test_disjoint_train_partitions_real_rows():
    real = blobs(80, seed=1)
    b = bundle(K=4, data=real, disjoint_train=True, keep_models=True)
    assert b.manifest.disjoint_train
    assert sum(m.n_train for m in b.models) == 80
    assert all(m.n_train == 20 for m in b.models)


def test_fit_error_annotated_with_index():
    real = blobs(12, seed=1)
    with pytest.raises(InsufficientData) as info:
        bundle(K=6, data=real, spec=GeneratorSpec("gmm", components_per_class=2), disjoint_train=True)
    assert info.value.generator_index == 0
    assert "generator k=0" in str(info.value)


def test_bad_k_and_n():
    with pytest.raises(ValueError):
        bundle(K=0)
    with pytest.raises(ValueError):
        bundle(n=0)


# ---- naive views ----

def test_concat_view():
    b = bundle(K=3, n=100)
    c = naive_view(b, "concat")
    assert c.n_rows == 300
    assert c.provenance == Synthetic(-1, "kde")
    assert np.array_equal(c.features[100:200], b.datasets[1].features)


def test_concat_of_one_equals_single_rows():
    b = bundle(K=1)
    c, s = naive_view(b, "concat"), naive_view(b, "single")
    assert np.array_equal(c.features, s.features) and np.array_equal(c.labels, s.labels)
    assert c.provenance.generator_seed == -1


def test_unknown_view():
    with pytest.raises(ValueError):
        naive_view(bundle(K=1), "pool")


def test_replicate_control():
    real = blobs(30)
    r = replicate(real, 4)
    assert r.K == 4 and all(np.array_equal(d.features, real.features) for d in r.datasets)
    assert [d.provenance.generator_seed for d in r.datasets] == [0, 1, 2, 3]


# ---- bundle invariants ----

def test_bundle_invariants():
    b = bundle(K=2)
    with pytest.raises(ManifestMismatch):
        SyntheticBundle(b.datasets[:1], b.manifest)
    swapped = (b.datasets[1], b.datasets[0])
    with pytest.raises(ManifestMismatch):
        SyntheticBundle(swapped, b.manifest)
    other = TabularDataset(Schema.build([Column("u"), Column("v")]), b.datasets[1].features,
                           b.datasets[1].labels, b.datasets[1].provenance)
    with pytest.raises(ManifestMismatch):
        SyntheticBundle((b.datasets[0], other), b.manifest)
    with pytest.raises(ManifestMismatch):
        Manifest("kde", 0.5, 10, 10, 3, (1, 2), {}, b.schema)


# ---- persistence ----

def test_publish_layout(tmp_path):
    b = bundle(K=5)
    publish(b, tmp_path)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == sorted([f"synth_k{k}.csv" for k in range(5)] + [MANIFEST])
    doc = json.loads((tmp_path / MANIFEST).read_text())
    assert doc["K"] == 5 and doc["generator_class"] == "kde" and doc["complexity"] == 0.5
    assert doc["n_synth_per_set"] == 50 and len(doc["seeds"]) == 5 and len(doc["checksums"]) == 5


def test_load_publish_identity(tmp_path):
    b = bundle(K=3, keep_models=True)
    publish(b, tmp_path)
    back = load_bundle(tmp_path)
    assert back == b
    assert back.models is not None
    assert sample(back.models[2], 20, RngStream(1)) == sample(b.models[2], 20, RngStream(1))


def test_missing_csv(tmp_path):
    publish(bundle(K=5), tmp_path)
    (tmp_path / "synth_k3.csv").unlink()
    with pytest.raises(ManifestMismatch):
        load_bundle(tmp_path)


def test_extra_csv(tmp_path):
    publish(bundle(K=2), tmp_path)
    (tmp_path / "synth_k2.csv").write_text((tmp_path / "synth_k1.csv").read_text())
    with pytest.raises(ManifestMismatch):
        load_bundle(tmp_path)


def test_tampered_csv(tmp_path):
    publish(bundle(K=2), tmp_path)
    path = tmp_path / "synth_k0.csv"
    lines = path.read_text().splitlines()
    lines[1] = lines[2]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ManifestMismatch):
        load_bundle(tmp_path)


def test_model_seed_mismatch(tmp_path):
    publish(bundle(K=2, keep_models=True), tmp_path)
    doc = json.loads((tmp_path / "generator_k1.json").read_text())
    doc["spec"]["seed"] += 1
    (tmp_path / "generator_k1.json").write_text(json.dumps(doc))
    with pytest.raises(ManifestMismatch):
        load_bundle(tmp_path)


def test_missing_or_bad_manifest(tmp_path):
    with pytest.raises(ManifestMismatch):
        load_bundle(tmp_path)
    (tmp_path / MANIFEST).write_text("{not json")
    with pytest.raises(ManifestMismatch):
        load_bundle(tmp_path)
    (tmp_path / MANIFEST).write_text(json.dumps({"format": "other"}))
    with pytest.raises(ManifestMismatch):
        load_bundle(tmp_path)


MIXED = Schema.build([Column("x"), Column("c", ("p", "q"))])


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(K=st.integers(1, 4), n=st.integers(1, 30), seed=st.integers(0, 2**31 - 1),
       scale=st.floats(1e-3, 10.0), kind=st.sampled_from(["kde", "gmm", "composite"]))
def test_roundtrip_fuzz(tmp_path_factory, K, n, seed, scale, kind):
    gen = np.random.default_rng(seed)
    y = np.r_[0, 1, gen.integers(0, 2, 38)]
    if kind == "composite":
        real = TabularDataset(MIXED, np.column_stack([gen.standard_normal(40) * 1e3, gen.integers(0, 2, 40)]), y)
    else:
        real = blobs(40, seed=seed % 1000)
    spec = GeneratorSpec(kind, bandwidth_scale=scale, numeric_kind="kde")
    b = dge_generate(spec, real, K, n, RngStream(seed))
    out = tmp_path_factory.mktemp("bundle")
    publish(b, out)
    assert load_bundle(out) == b
