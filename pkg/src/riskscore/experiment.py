"""Grid sweeps of seeded simulation runs.

Each run walks the epochs of the contact graph and, per epoch:

1. advances the epidemic,
2. tags newly infected people (score 2) and clears recovered ones,
3. updates every risk score from the previous epoch's scores,
4. records a metrics frame.

Run seeds come from ``SeedSequence([master_seed, cell_key, run_index])``
where ``cell_key`` hashes the cell's (beta, gamma, i0) values, so dropping a
cell from the grid leaves every other cell's output untouched. Each run then
spawns three child streams: initial state, epidemic, risk.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .contact_graph import (
    DatasetFormat,
    SyntheticSpec,
    TemporalGraph,
    generate_synthetic,
    load_dataset,
    serialize,
)
from .epidemic import EpidemicParams, epidemic_step, seed_infected, tag_arrays
from .errors import ConfigError, InvalidSpecError, ParameterError
from .metrics import (
    DEFAULT_THRESHOLD,
    MetricsFrame,
    aggregate_runs,
    frame_from_arrays,
    frames_csv,
    regions_csv,
)
from .risk import ExposureModel, WeightModel, risk_step, sample_vulnerability

log = logging.getLogger(__name__)

PAPER_BETAS = (0.0, 0.5, 1.0)
PAPER_GAMMAS = (0.0, 0.75)
PAPER_I0S = (0.0, 0.01, 0.5)


@dataclass
class ExperimentConfig:
    dataset: str | None = None
    delimiter: str = "comma"
    time_unit: str = "epoch"
    synthetic: dict | None = None
    delta_t: int = 20
    beta: list = field(default_factory=lambda: list(PAPER_BETAS))
    gamma: list = field(default_factory=lambda: list(PAPER_GAMMAS))
    i0: list = field(default_factory=lambda: list(PAPER_I0S))
    runs: int = 50
    seed: int = 0
    threshold: float = DEFAULT_THRESHOLD
    exposure: dict = field(default_factory=lambda: {"mode": "sampled-normal", "mu": 0.5, "sigma": 0.1})
    vulnerability: dict = field(default_factory=lambda: {"mu": 0.5, "sigma": 0.2})
    weight: dict = field(default_factory=lambda: {"mode": "constant", "value": 1.0})
    pin_infected: bool = True
    regions: dict | None = None
    out: str = "results"
    keep_runs: bool = False

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**dict(data))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}: {e}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self):
        for name in ("beta", "gamma", "i0"):
            values = getattr(self, name)
            if not isinstance(values, (list, tuple)) or not values:
                raise ConfigError(f"{name} must be a non-empty list")
            for x in values:
                if not isinstance(x, (int, float)) or isinstance(x, bool) or not 0.0 <= x <= 1.0:
                    raise ConfigError(f"{name} value {x!r} outside [0, 1]")
            if len(set(map(float, values))) != len(values):
                raise ConfigError(f"{name} has duplicate values")
        if not isinstance(self.runs, int) or self.runs < 1:
            raise ConfigError("runs must be an integer >= 1")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if (self.dataset is None) == (self.synthetic is None):
            raise ConfigError("give exactly one of dataset or synthetic")
        if not self.threshold > 0:
            raise ConfigError("threshold must be positive")
        try:
            self.exposure_model()
            self.weight_model()
            DatasetFormat(self.delimiter, self.time_unit, self.delta_t)
            if self.synthetic is not None:
                self.synthetic_spec().validate()
        except (ParameterError, InvalidSpecError, TypeError) as e:
            raise ConfigError(str(e)) from None
        vul = self.vulnerability
        if set(vul) - {"mu", "sigma"} or vul.get("sigma", 0.2) < 0:
            raise ConfigError(f"bad vulnerability parameters {vul!r}")

    def exposure_model(self) -> ExposureModel:
        return ExposureModel(delta_t=self.delta_t, **self.exposure)

    def weight_model(self) -> WeightModel:
        return WeightModel(**self.weight)

    def synthetic_spec(self) -> SyntheticSpec:
        params = {k: v for k, v in self.synthetic.items() if k != "seed"}
        params.setdefault("delta_t", self.delta_t)
        return SyntheticSpec(**params)

    def cells(self) -> list[EpidemicParams]:
        return [
            EpidemicParams(beta=float(b), gamma=float(g), i0=float(i))
            for b in self.beta
            for g in self.gamma
            for i in self.i0
        ]

    def hash(self) -> str:
        return hashlib.sha256(_canonical_json(self.portable_dict()).encode()).hexdigest()

    def portable_dict(self) -> dict:
        """Config without machine-local output settings."""
        d = self.to_dict()
        d.pop("out")
        return d


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def cell_key(params: EpidemicParams) -> int:
    digest = hashlib.blake2b(
        f"{params.beta!r}|{params.gamma!r}|{params.i0!r}".encode(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big")


def cell_name(params: EpidemicParams) -> str:
    return f"beta={params.beta!r}_gamma={params.gamma!r}_i0={params.i0!r}"


def run_entropy(master_seed: int, params: EpidemicParams, run: int) -> list[int]:
    return [int(master_seed), cell_key(params), int(run)]


def load_graph(config: ExperimentConfig) -> TemporalGraph:
    if config.dataset is not None:
        return load_dataset(config.dataset, DatasetFormat(config.delimiter, config.time_unit, config.delta_t))
    seed = config.synthetic.get("seed", config.seed)
    return generate_synthetic(config.synthetic_spec(), seed)


def _region_index(graph: TemporalGraph, regions: Mapping[str, Sequence[str]] | None):
    if regions is None:
        return None
    out = []
    for name in sorted(regions):
        members = regions[name]
        if not members:
            raise ConfigError(f"region {name!r} has no members")
        try:
            idx = np.array(sorted(graph.person_index(p) for p in members), dtype=np.int64)
        except KeyError as e:
            raise ConfigError(f"region {name!r}: unknown person {e}") from None
        out.append((name, idx))
    return out


def simulate_run(
    graph: TemporalGraph,
    params: EpidemicParams,
    config: ExperimentConfig,
    entropy: Sequence[int],
) -> list[MetricsFrame]:
    init_rng, epi_rng, risk_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(list(entropy)).spawn(3)
    )
    n = len(graph.person_order)
    exposure = config.exposure_model()
    weight = config.weight_model()
    static_regions = _region_index(graph, config.regions)

    v = sample_vulnerability(init_rng, n, **config.vulnerability)
    infected = seed_infected(n, params.i0, init_rng)
    flagged = np.zeros(n, dtype=bool)
    r = np.ones(n)
    flagged, r = tag_arrays(infected, flagged, r)

    frames = []
    for epoch in range(graph.n_epochs):
        groups = graph.groups(epoch)
        infected = epidemic_step(groups, infected, params.beta, params.gamma, epi_rng)
        flagged, r = tag_arrays(infected, flagged, r)
        r = risk_step(groups, r, v, flagged, exposure, weight, risk_rng, config.pin_infected)
        if static_regions is None:
            regions = list(zip(sorted(graph.occupied_rooms(epoch)), groups))
        else:
            regions = static_regions
        frames.append(frame_from_arrays(epoch, r, infected, config.threshold, regions))
    return frames


_worker: dict = {}


def _init_worker(graph, config):
    _worker["graph"] = graph
    _worker["config"] = config


def _run_task(task):
    params, entropy = task
    return simulate_run(_worker["graph"], params, _worker["config"], entropy)


def run_experiment(config: ExperimentConfig, workers: int = 1, graph: TemporalGraph | None = None) -> Path:
    """Run the full grid and write artifacts under ``config.out``.

    Layout::

        manifest.json
        <cell>/summary.csv    mean metrics per epoch
        <cell>/regions.csv    mean region score per (epoch, region)
        <cell>/runs/run_NNN.csv   only with keep_runs
    """
    config.validate()
    if graph is None:
        graph = load_graph(config)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    cells = config.cells()
    tasks = [
        (params, run_entropy(config.seed, params, k)) for params in cells for k in range(config.runs)
    ]
    log.info("%d cells x %d runs on %r", len(cells), config.runs, graph)

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(graph, config)) as ex:
            results = list(ex.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        _init_worker(graph, config)
        results = [_run_task(t) for t in tasks]

    manifest_cells = []
    for c, params in enumerate(cells):
        series = results[c * config.runs:(c + 1) * config.runs]
        summary = aggregate_runs(series, seed=config.seed)
        cell_dir = out / cell_name(params)
        cell_dir.mkdir(exist_ok=True)
        _write(cell_dir / "summary.csv", frames_csv(summary.frames, summary.ratio_excluded))
        _write(cell_dir / "regions.csv", regions_csv(summary.frames))
        if config.keep_runs:
            (cell_dir / "runs").mkdir(exist_ok=True)
            for k, frames in enumerate(series):
                _write(cell_dir / "runs" / f"run_{k:03d}.csv", frames_csv(frames))
        manifest_cells.append(
            {
                "dir": cell_name(params),
                "beta": params.beta,
                "gamma": params.gamma,
                "i0": params.i0,
                "model": params.model,
                "seeds": [run_entropy(config.seed, params, k) for k in range(config.runs)],
            }
        )

    manifest = {
        "config": config.portable_dict(),
        "config_hash": config.hash(),
        "graph": {
            "persons": len(graph.persons),
            "rooms": len(graph.rooms),
            "epochs": graph.n_epochs,
            "delta_t": graph.delta_t_seconds,
            "sha256": hashlib.sha256(serialize(graph).encode()).hexdigest(),
        },
        "master_seed": config.seed,
        "seed_scheme": "SeedSequence([master_seed, blake2b64(repr(beta)|repr(gamma)|repr(i0)), run]).spawn(3) -> init, epidemic, risk",
        "cells": manifest_cells,
    }
    _write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def _write(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
