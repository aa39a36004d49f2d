"""K seeded generator fits published as K separate synthetic datasets."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import DgeError, IoError, ManifestMismatch, annotate
from .generators import GeneratorSpec, dumps, fit, loads, sample
from .tabular import (
    RngStream,
    Schema,
    Synthetic,
    TabularDataset,
    concat,
    read_csv,
    write_csv,
)

MANIFEST = "manifest.json"
MANIFEST_FORMAT = "dge.manifest"
MANIFEST_VERSION = 1
ERASED_SEED = -1


def set_file(k: int) -> str:
    return f"synth_k{k}.csv"


def model_file(k: int) -> str:
    return f"generator_k{k}.json"


@dataclass(frozen=True)
class Manifest:
    generator_class: str
    complexity: float
    n_train: int
    n_synth_per_set: int
    K: int
    seeds: tuple
    spec: dict
    schema: Schema
    disjoint_train: bool = False
    checksums: tuple = ()
    created_by: str = f"dge {__version__}"
    rng: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "checksums", tuple(self.checksums))
        if self.K < 1 or len(self.seeds) != self.K:
            raise ManifestMismatch(f"manifest lists {len(self.seeds)} seeds for K={self.K}")
        if self.checksums and len(self.checksums) != self.K:
            raise ManifestMismatch("manifest checksum count differs from K")

    def to_dict(self) -> dict:
        return {
            "format": MANIFEST_FORMAT,
            "version": MANIFEST_VERSION,
            "generator_class": self.generator_class,
            "complexity": self.complexity,
            "n_train": self.n_train,
            "n_synth_per_set": self.n_synth_per_set,
            "K": self.K,
            "seeds": list(self.seeds),
            "files": [set_file(k) for k in range(self.K)],
            "checksums": list(self.checksums),
            "disjoint_train": self.disjoint_train,
            "spec": self.spec,
            "schema": self.schema.to_dict(),
            "created_by": self.created_by,
            "rng": self.rng,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Manifest":
        if d.get("format") != MANIFEST_FORMAT or d.get("version") != MANIFEST_VERSION:
            raise ManifestMismatch("not a version-1 bundle manifest")
        try:
            return cls(
                generator_class=d["generator_class"],
                complexity=d["complexity"],
                n_train=int(d["n_train"]),
                n_synth_per_set=int(d["n_synth_per_set"]),
                K=int(d["K"]),
                seeds=tuple(d["seeds"]),
                spec=d["spec"],
                schema=Schema.from_dict(d["schema"]),
                disjoint_train=bool(d.get("disjoint_train", False)),
                checksums=tuple(d.get("checksums", ())),
                created_by=d.get("created_by", ""),
                rng=d.get("rng", {}),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ManifestMismatch(f"malformed manifest: {e}") from e


@dataclass(frozen=True, eq=False)
class SyntheticBundle:
    """K distinguishable synthetic datasets plus their manifest."""

    datasets: tuple
    manifest: Manifest
    models: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "datasets", tuple(self.datasets))
        if not self.datasets:
            raise ValueError("a bundle needs at least one dataset")
        if len(self.datasets) != self.manifest.K:
            raise ManifestMismatch(f"{len(self.datasets)} datasets for manifest K={self.manifest.K}")
        schema = self.datasets[0].schema
        for k, (d, seed) in enumerate(zip(self.datasets, self.manifest.seeds)):
            if d.schema != schema:
                raise ManifestMismatch(f"dataset {k} has a different schema")
            if not isinstance(d.provenance, Synthetic) or d.provenance.generator_seed != seed:
                raise ManifestMismatch(f"dataset {k} provenance does not match manifest seed {seed}")

    @property
    def K(self) -> int:
        return len(self.datasets)

    @property
    def schema(self) -> Schema:
        return self.datasets[0].schema

    def __eq__(self, other) -> bool:
        if not isinstance(other, SyntheticBundle):
            return NotImplemented
        # checksums only exist once a bundle has been written
        return (self.datasets == other.datasets
                and replace(self.manifest, checksums=()) == replace(other.manifest, checksums=()))

    __hash__ = None


def _disjoint_parts(train: TabularDataset, K: int, rng: RngStream) -> list:
    """Stratified partition of the training rows into K disjoint parts."""
    gen = rng.generator()
    parts = [[] for _ in range(K)]
    for cls in (0, 1):
        ids = gen.permutation(np.flatnonzero(train.labels == cls))
        for k, chunk in enumerate(np.array_split(ids, K)):
            parts[k].extend(chunk.tolist())
    return [train.subset(np.sort(np.array(p, dtype=np.int64))) for p in parts]


def dge_generate(spec: GeneratorSpec, real_train: TabularDataset, K: int, n_synth: int,
                 rng: RngStream, disjoint_train: bool = False, keep_models: bool = False) -> SyntheticBundle:
    """Fit K generators on the same real data, differing only in seed.

    Generator ``k`` fits on stream ``rng.child(k, 0)`` and samples on
    ``rng.child(k, 1)``; its recorded seed is ``rng.child(k).seed_int()``.
    With ``disjoint_train`` each generator instead sees its own stratified
    slice of ``real_train``.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if n_synth < 1:
        raise ValueError("n_synth must be >= 1")
    trains = _disjoint_parts(real_train, K, rng.child(K, 9)) if disjoint_train else [real_train] * K
    datasets, models, seeds = [], [], []
    for k in range(K):
        stream = rng.child(k)
        seed = stream.seed_int()
        spec_k = replace(spec, seed=seed)
        try:
            model, _ = fit(spec_k, trains[k], stream.child(0))
        except DgeError as e:
            raise annotate(e, f"generator k={k}", generator_index=k) from e
        datasets.append(sample(model, n_synth, stream.child(1)))
        models.append(model)
        seeds.append(seed)
    manifest = Manifest(
        generator_class=spec.kind,
        complexity=spec.complexity,
        n_train=real_train.n_rows,
        n_synth_per_set=n_synth,
        K=K,
        seeds=tuple(seeds),
        spec=replace(spec, seed=0).to_dict(),
        schema=real_train.schema,
        disjoint_train=disjoint_train,
        rng={"root_seed": rng.root_seed, "path": list(rng.path)},
    )
    return SyntheticBundle(tuple(datasets), manifest, tuple(models) if keep_models else None)


def replicate(data: TabularDataset, K: int, generator_class: str = "copy") -> SyntheticBundle:
    """A control bundle holding K identical copies of ``data``."""
    seeds = tuple(range(K))
    sets = tuple(data.with_provenance(Synthetic(k, generator_class)) for k in range(K))
    manifest = Manifest(generator_class=generator_class, complexity=0.0, n_train=data.n_rows,
                        n_synth_per_set=data.n_rows, K=K, seeds=seeds, spec={},
                        schema=data.schema)
    return SyntheticBundle(sets, manifest)


def naive_view(bundle: SyntheticBundle, mode: str) -> TabularDataset:
    """``single``: dataset 0. ``concat``: all sets stacked, seed erased to -1."""
    if mode == "single":
        return bundle.datasets[0]
    if mode == "concat":
        return concat(bundle.datasets, Synthetic(ERASED_SEED, bundle.manifest.generator_class))
    raise ValueError(f"unknown naive view {mode!r}; expected 'single' or 'concat'")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def publish(bundle: SyntheticBundle, directory) -> Path:
    """Write ``synth_k{i}.csv`` per set, ``manifest.json`` and any generator models."""
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IoError(str(e)) from e
    sums = []
    for k, d in enumerate(bundle.datasets):
        path = out / set_file(k)
        write_csv(d, path)
        sums.append(_sha256(path))
        if bundle.models is not None:
            _write_text(out / model_file(k), dumps(bundle.models[k]))
    manifest = replace(bundle.manifest, checksums=tuple(sums))
    _write_text(out / MANIFEST, json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n")
    return out


def _write_text(path: Path, text: str):
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise IoError(str(e)) from e


def load_bundle(directory) -> SyntheticBundle:
    """Rebuild a published bundle, refusing one whose files disagree with its manifest."""
    src = Path(directory)
    try:
        doc = json.loads((src / MANIFEST).read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ManifestMismatch(f"no {MANIFEST} in {src}") from e
    except OSError as e:
        raise IoError(str(e)) from e
    except json.JSONDecodeError as e:
        raise ManifestMismatch(f"manifest is not valid JSON: {e}") from e
    manifest = Manifest.from_dict(doc)
    present = sorted(p.name for p in src.glob("synth_k*.csv"))
    expected = sorted(set_file(k) for k in range(manifest.K))
    if present != expected:
        raise ManifestMismatch(f"bundle files {present} do not match manifest K={manifest.K}")
    datasets = []
    for k, seed in enumerate(manifest.seeds):
        path = src / set_file(k)
        if manifest.checksums and _sha256(path) != manifest.checksums[k]:
            raise ManifestMismatch(f"{path.name} checksum differs from manifest")
        datasets.append(read_csv(path, schema_hint=manifest.schema,
                                 provenance=Synthetic(seed, manifest.generator_class)))
    models = None
    if all((src / model_file(k)).exists() for k in range(manifest.K)):
        models = tuple(loads((src / model_file(k)).read_text(encoding="utf-8"))
                       for k in range(manifest.K))
        for k, (m, seed) in enumerate(zip(models, manifest.seeds)):
            if m.spec.seed != seed:
                raise ManifestMismatch(f"{model_file(k)} seed {m.spec.seed} differs from manifest seed {seed}")
    return SyntheticBundle(tuple(datasets), manifest, models)
