"""Grid-sweep calibration of ordinary-agent model parameters against an empirical trace."""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from hybridsim import abm, rng
from hybridsim.metrics import AttitudeTrace, delta_bias_div

logger = logging.getLogger(__name__)

# Best-fit values per event; the Metoo row is the default anchor for grids.
REFERENCE_PARAMS: dict[str, dict[str, dict[str, float]]] = {
    "metoo": {
        "bc": {"alpha": 0.10, "epsilon": 0.30},
        "hk": {"epsilon": 0.10},
        "ra": {"alpha": 0.30, "init_uncertainty": 0.20},
        "sj": {"alpha": 0.15, "acc_thred": 0.10, "rej_thred": 0.90},
        "lorenz": {"alpha": 0.10, "lam": 1.0, "k": 2.0, "rho": 0.9},
    },
}

GRID_STEP = 0.05


@dataclass(frozen=True)
class ParameterGrid:
    kind: str
    values: Mapping[str, Sequence[float]]
    fixed: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in abm.MODEL_CLASSES:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if not self.values or any(len(v) == 0 for v in self.values.values()):
            raise ValueError("grid needs at least one value per parameter")
        # validate every combination before anything runs
        self.combinations()

    @classmethod
    def from_dict(cls, data: Mapping) -> ParameterGrid:
        data = dict(data)
        kind = str(data.pop("kind")).lower()
        fixed = dict(data.pop("fixed", {}))
        values = {abm._ALIASES.get(k, k): [float(x) for x in v] for k, v in data.items()}
        return cls(kind, values, fixed)

    @classmethod
    def from_json(cls, path: str | Path) -> ParameterGrid:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    @classmethod
    def around(cls, kind: str, center: Mapping[str, float], names: Sequence[str] | None = None,
               step: float = GRID_STEP, width: int = 2) -> ParameterGrid:
        """Grid bracketing ``center`` with ``width`` neighbours of size ``step`` on each side."""
        names = list(names or center)
        values = {}
        for n in names:
            c = center[n]
            vals = [round(c + i * step, 10) for i in range(-width, width + 1)]
            values[n] = [v for v in vals if v > 0 and (n not in ("alpha", "acc_thred", "rej_thred") or v <= 1)]
        fixed = {k: v for k, v in center.items() if k not in names}
        return cls(kind, values, fixed)

    def combinations(self) -> list[abm.ModelParams]:
        names = list(self.values)
        out = []
        for combo in itertools.product(*(self.values[n] for n in names)):
            out.append(abm.params_from_dict({"kind": self.kind, **self.fixed, **dict(zip(names, combo))}))
        return out


def default_grid(kind: str, event: str = "metoo") -> ParameterGrid:
    center = REFERENCE_PARAMS[event][kind]
    names = [n for n in center if n not in ("lam", "k")]
    return ParameterGrid.around(kind, center, names)


@dataclass(frozen=True)
class CalibrationRow:
    index: int
    params: abm.ModelParams
    delta_bias: float
    delta_div: float
    replications: int

    @property
    def objective(self) -> float:
        return self.delta_bias + self.delta_div


@dataclass(frozen=True)
class CalibrationResult:
    best: abm.ModelParams
    table: tuple[CalibrationRow, ...]

    @property
    def objective(self) -> float:
        return next(r.objective for r in self.table if r.params == self.best)

    def to_csv(self) -> str:
        buf = io.StringIO()
        names = [k for k in abm.params_to_dict(self.table[0].params) if k != "kind"]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", *names, "delta_bias", "delta_div", "objective", "replications", "best"])
        for r in self.table:
            d = abm.params_to_dict(r.params)
            w.writerow([r.index, *(d[n] for n in names), repr(r.delta_bias), repr(r.delta_div),
                        repr(r.objective), r.replications, int(r.params == self.best)])
        return buf.getvalue()


def replicate_stream(seed: int, combo: int, replicate: int) -> int:
    return rng.stream_key(seed, combo, replicate)


def _evaluate(params: abm.ModelParams, index: int, population: abm.Population,
              target: AttitudeTrace, replications: int, seed: int) -> CalibrationRow:
    if isinstance(params, abm.RAParams):
        population = abm.Population(population.ids, population.attitudes,
                                    np.full(len(population), params.init_uncertainty), population.keys)
    dbs, dds = [], []
    for r in range(replications):
        vecs = abm.simulate(params, population, len(target), seed,
                            key=replicate_stream(seed, index, r))
        db, dd = delta_bias_div(AttitudeTrace.from_vectors(vecs), target)
        dbs.append(db)
        dds.append(dd)
    return CalibrationRow(index, params, float(np.mean(dbs)), float(np.mean(dds)), replications)


def calibrate(grid: ParameterGrid, target: AttitudeTrace, initial: abm.Population,
              replications: int = 5, seed: int = 0, workers: int = 1) -> CalibrationResult:
    """Pure-ABM sweep; best = argmin(dBias + dDiv), ties by dBias then grid order."""
    if replications < 1:
        raise ValueError("replications must be >= 1")
    if len(initial) == 0:
        raise ValueError("calibration needs a non-empty initial population")
    combos = grid.combinations()
    jobs = [(p, i) for i, p in enumerate(combos)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(lambda j: _evaluate(j[0], j[1], initial, target, replications, seed), jobs))
    else:
        rows = [_evaluate(p, i, initial, target, replications, seed) for p, i in jobs]
    best = min(rows, key=lambda r: (r.objective, r.delta_bias, r.index))
    logger.info("calibration best %s (objective %.6g)", best.params, best.objective)
    return CalibrationResult(best.params, tuple(rows))


def apply_calibrated(params: abm.ModelParams, config):
    """Return ``config`` with its ordinary-agent model replaced by ``params``."""
    if params.kind != config.model.kind:
        raise ValueError(f"calibrated {params.kind!r} parameters do not fit a {config.model.kind!r} run")
    return replace(config, model=params)
