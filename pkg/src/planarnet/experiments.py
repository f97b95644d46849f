"""Evaluation protocols: chained evaluation, parameter sweeps, transfer matrices,
and the polar-versus-Cartesian comparison, each reproducible from a seed.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .datagen import DatasetSpec, EvalSample, RandomNoise, build_dataset, source_kind_name
from .geometry import GridPosition, Topology, cartesian_topology, polar_geometry, polar_topology
from .imaging import Rotate, Scale, Translate
from .network import PlanarNetwork, init_network
from .network import _forward_flat
from .training import TrainConfig, TrainReport, train, _stack

__all__ = [
    "ChainedErrors",
    "TransferMatrix",
    "RunSetup",
    "RunResult",
    "SWEEP_AXES",
    "evaluate_chained",
    "connection_count",
    "run_experiment",
    "sweep",
    "transfer_matrix",
    "write_sweep_csv",
    "write_transfer_csv",
    "repro_table1",
    "repro_table2",
    "repro_fig3",
    "repro_fig8",
    "repro_translation",
]

CHAIN_LENGTHS = (1, 2, 5)


@dataclass(frozen=True)
class ChainedErrors:
    """Mean test error at chain lengths 1, 2 and 5."""

    e1: float
    e2: float
    e5: float

    def astuple(self) -> tuple:
        return (self.e1, self.e2, self.e5)


def evaluate_chained(net: PlanarNetwork, test: Sequence[EvalSample]) -> ChainedErrors:
    """Chain the network j times over each test input and compare against I_j."""
    if not test:
        raise ValueError("test set must be non-empty")
    pred = _stack([s.input for s in test])
    errors = {}
    for step in range(1, max(CHAIN_LENGTHS) + 1):
        pred = _forward_flat(net, pred)
        if step in CHAIN_LENGTHS:
            target = _stack([s.target(step) for s in test])
            errors[step] = float(np.abs(pred - target).mean())
    return ChainedErrors(errors[1], errors[2], errors[5])


def connection_count(net: PlanarNetwork) -> int:
    """Total incoming weights over all nodes; biases are not counted."""
    return net.n_connections


@dataclass(frozen=True)
class RunSetup:
    """Everything one training run needs: data, topology parameters, training config."""

    dataset: DatasetSpec
    config: TrainConfig = TrainConfig()
    radius: float = 2.0  # cartesian neighborhood radius
    base_radius: float = 2.0  # polar dynamic-radius scale
    init_low: float = -1.0
    init_high: float = 1.0

    def with_seed(self, seed: int) -> "RunSetup":
        return replace(
            self,
            dataset=replace(self.dataset, seed=seed),
            config=replace(self.config, seed=seed),
        )

    def topology(self) -> Topology:
        if self.dataset.polar is not None:
            return polar_topology(self.dataset.polar, self.base_radius)
        return cartesian_topology(
            self.dataset.network_height, self.dataset.network_width, self.radius
        )


@dataclass
class RunResult:
    setup: RunSetup
    net: PlanarNetwork
    report: TrainReport

    @property
    def errors(self) -> ChainedErrors:
        return ChainedErrors(self.report.final_1x, self.report.final_2x, self.report.final_5x)


def default_rotation_setup(seed: int = 0, **overrides) -> RunSetup:
    """The default run: upscaled-noise data, 10-degree rotation, 16x16 radius-2 net."""
    dataset = DatasetSpec(source=RandomNoise(), transform=Rotate(10.0), seed=seed)
    return RunSetup(dataset=dataset, config=TrainConfig(seed=seed), **overrides)


def run_experiment(setup: RunSetup, probe_batches: tuple = (200,)) -> RunResult:
    """Build the dataset, train a fresh network, and evaluate chained errors."""
    train_pairs, test_samples = build_dataset(setup.dataset)
    net = init_network(
        setup.topology(), setup.init_low, setup.init_high, seed=setup.config.seed
    )
    report = train(net, train_pairs, test_samples, setup.config, probe_batches=probe_batches)
    return RunResult(setup, net, report)


SWEEP_AXES = (
    "batch_size",
    "learning_rate",
    "rotation_degrees",
    "neighborhood_radius",
    "translation_vector",
    "scale_factor",
)

# Axes that leave the dataset untouched can reuse it across sweep values.
_DATA_AXES = {"rotation_degrees", "translation_vector", "scale_factor"}


def _apply_axis(setup: RunSetup, axis: str, value) -> RunSetup:
    if axis == "batch_size":
        return replace(setup, config=replace(setup.config, batch_size=int(value)))
    if axis == "learning_rate":
        return replace(setup, config=replace(setup.config, learning_rate=float(value)))
    if axis == "neighborhood_radius":
        return replace(setup, radius=float(value))
    if axis == "rotation_degrees":
        return replace(setup, dataset=replace(setup.dataset, transform=Rotate(float(value))))
    if axis == "translation_vector":
        dx, dy = value
        return replace(
            setup, dataset=replace(setup.dataset, transform=Translate(float(dx), float(dy)))
        )
    if axis == "scale_factor":
        return replace(setup, dataset=replace(setup.dataset, transform=Scale(float(value))))
    raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")


@dataclass
class SweepCell:
    axis: str
    value: object
    errors: ChainedErrors
    final_train_error: float
    batch200_test_error: Optional[float]
    seed: int


def _run_sweep_cell(args) -> SweepCell:
    setup, axis, value = args
    cell_setup = _apply_axis(setup, axis, value)
    result = run_experiment(cell_setup)
    return SweepCell(
        axis=axis,
        value=value,
        errors=result.errors,
        final_train_error=result.report.batch_train_errors[-1],
        batch200_test_error=result.report.probe_test_errors.get(200),
        seed=setup.config.seed,
    )


def _pmap(fn, items, jobs: int = 1):
    items = list(items)
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def sweep(setup: RunSetup, axis: str, values: Sequence, jobs: int = 1) -> list:
    """One full train/eval per value, everything else (and all seeds) identical."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    return _pmap(_run_sweep_cell, [(setup, axis, v) for v in values], jobs=jobs)


def write_sweep_csv(cells: Sequence[SweepCell], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["axis", "value", "e1", "e2", "e5", "final_train_error", "batch200_test_error", "seed"]
        )
        for c in cells:
            writer.writerow(
                [
                    c.axis,
                    c.value,
                    repr(c.errors.e1),
                    repr(c.errors.e2),
                    repr(c.errors.e5),
                    repr(c.final_train_error),
                    "" if c.batch200_test_error is None else repr(c.batch200_test_error),
                    c.seed,
                ]
            )


@dataclass
class TransferMatrix:
    """Chained errors from training on row datasets and evaluating on column test sets."""

    labels: list
    cells: list  # cells[row][col] -> ChainedErrors
    train_final_errors: list  # per-row final training-batch error
    seed: int

    def e1_matrix(self) -> np.ndarray:
        return np.array([[c.e1 for c in row] for row in self.cells])


def _same_grid(specs: Sequence[DatasetSpec]) -> bool:
    first = specs[0]
    return all(
        s.grid_dims == first.grid_dims and (s.polar is None) == (first.polar is None)
        for s in specs
    )


def _train_row(args):
    spec, config, radius, base_radius, probe = args
    setup = RunSetup(dataset=spec, config=config, radius=radius, base_radius=base_radius)
    result = run_experiment(setup, probe_batches=probe)
    return result


def transfer_matrix(
    specs: Sequence[DatasetSpec],
    config: TrainConfig = TrainConfig(),
    radius: float = 2.0,
    base_radius: float = 2.0,
    jobs: int = 1,
) -> TransferMatrix:
    """Train one network per dataset and evaluate it on every dataset's test set."""
    if len(specs) < 2:
        raise ValueError("transfer matrix needs at least two datasets")
    if not _same_grid(specs):
        raise ValueError("transfer datasets must share one network topology")
    if len({repr(s.transform) for s in specs}) != 1:
        raise ValueError("transfer datasets must share the same transform")
    results = _pmap(
        _train_row, [(s, config, radius, base_radius, (200,)) for s in specs], jobs=jobs
    )
    test_sets = [build_dataset(replace(s, train_count=0))[1] for s in specs]
    cells = [[evaluate_chained(r.net, tests) for tests in test_sets] for r in results]
    return TransferMatrix(
        labels=[dataset_label(s) for s in specs],
        cells=cells,
        train_final_errors=[r.report.batch_train_errors[-1] for r in results],
        seed=config.seed,
    )


def dataset_label(spec: DatasetSpec) -> str:
    name = source_kind_name(spec.source)
    if ":" in name:
        kind, path = name.split(":", 1)
        name = f"{kind}({path.rstrip('/').rsplit('/', 1)[-1]})"
    return name + ("+bw" if spec.wants_bw else "")


def write_transfer_csv(matrix: TransferMatrix, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["train_dataset", "eval_dataset", "e1", "e2", "e5", "final_train_error", "seed"]
        )
        for i, row_label in enumerate(matrix.labels):
            for j, col_label in enumerate(matrix.labels):
                cell = matrix.cells[i][j]
                writer.writerow(
                    [
                        row_label,
                        col_label,
                        repr(cell.e1),
                        repr(cell.e2),
                        repr(cell.e5),
                        repr(matrix.train_final_errors[i]),
                        matrix.seed,
                    ]
                )


# --- one-shot reproductions of the headline studies ------------------------

DEFAULT_SEEDS = (0, 1, 2, 3, 4)

TABLE1_BATCH_SIZES = (10, 25, 50, 100)
TABLE2_RADII = (1.0, 1.41, 2.0, 2.24, 2.83, 3.0)


def _run_for(args):
    return run_experiment(args[0], probe_batches=args[1])


def _median(values) -> float:
    values = [v for v in values if v is not None and not np.isnan(v)]
    return float(np.median(values)) if values else float("nan")


def repro_table1(seeds: Sequence[int] = DEFAULT_SEEDS, jobs: int = 1) -> list:
    """Batch-size study on 10-degree rotation; medians over seeds.

    Returns one row per batch size: value, test error right after batch 200
    (None when the run has fewer batches), and the 40th-epoch test error.
    """
    tasks = []
    for seed in seeds:
        for size in TABLE1_BATCH_SIZES:
            setup = default_rotation_setup(seed)
            setup = _apply_axis(setup, "batch_size", size)
            tasks.append((setup, (200,)))
    results = _pmap(_run_for, tasks, jobs=jobs)
    rows = []
    for i, size in enumerate(TABLE1_BATCH_SIZES):
        per_seed = results[i :: len(TABLE1_BATCH_SIZES)]
        probes = [r.report.probe_test_errors.get(200) for r in per_seed]
        finals = [r.report.epoch_test_errors[-1] for r in per_seed]
        rows.append(
            {
                "batch_size": size,
                "batch200_error": None if all(p is None for p in probes) else _median(probes),
                "epoch40_error": _median(finals),
            }
        )
    return rows


def repro_table2(seeds: Sequence[int] = DEFAULT_SEEDS, jobs: int = 1) -> list:
    """Neighborhood-radius study on rotation, plus the radius-3 low-rate retrain."""
    tasks = []
    for seed in seeds:
        for radius in TABLE2_RADII:
            setup = default_rotation_setup(seed)
            setup = _apply_axis(setup, "neighborhood_radius", radius)
            tasks.append((setup, (200,)))
        retrain = default_rotation_setup(seed, radius=3.0)
        retrain = _apply_axis(retrain, "learning_rate", 0.005)
        tasks.append((retrain, (200,)))
    results = _pmap(_run_for, tasks, jobs=jobs)
    stride = len(TABLE2_RADII) + 1
    rows = []
    for i, radius in enumerate(TABLE2_RADII):
        per_seed = results[i::stride]
        topo = per_seed[0].net.topology
        interior = GridPosition(topo.height // 2, topo.width // 2)
        rows.append(
            {
                "radius": radius,
                "nbhd": len(topo.neighborhoods[topo.node_index(interior)]),
                "epoch40_error": _median([r.report.epoch_test_errors[-1] for r in per_seed]),
            }
        )
    retrain_rows = results[len(TABLE2_RADII)::stride]
    rows.append(
        {
            "radius": 3.0,
            "nbhd": 25,
            "learning_rate": 0.005,
            "batch200_error": _median(
                [r.report.probe_test_errors.get(200) for r in retrain_rows]
            ),
        }
    )
    return rows


def repro_fig3(seeds: Sequence[int] = DEFAULT_SEEDS, jobs: int = 1) -> list:
    """Chained errors for the three base transformations; medians over seeds."""
    transforms = {
        "translate": Translate(0.0, 1.0),
        "rotate": Rotate(10.0),
        "scale": Scale(0.9),
    }
    tasks = []
    for seed in seeds:
        for t in transforms.values():
            dataset = DatasetSpec(source=RandomNoise(), transform=t, seed=seed)
            tasks.append((RunSetup(dataset=dataset, config=TrainConfig(seed=seed)), (200,)))
    results = _pmap(_run_for, tasks, jobs=jobs)
    rows = []
    for i, name in enumerate(transforms):
        per_seed = results[i :: len(transforms)]
        rows.append(
            {
                "transform": name,
                "e1": _median([r.report.final_1x for r in per_seed]),
                "e2": _median([r.report.final_2x for r in per_seed]),
                "e5": _median([r.report.final_5x for r in per_seed]),
            }
        )
    return rows


def polar_default_geometry():
    return polar_geometry(36, 7, 36)


def repro_fig8(seeds: Sequence[int] = DEFAULT_SEEDS, jobs: int = 1) -> list:
    """Polar versus Cartesian across the three transformations; medians over seeds.

    Scaling uses the polar ring ratio (~0.839) for both topologies so the two
    networks face the same task.
    """
    geometry = polar_default_geometry()
    transforms = {
        "translate": Translate(0.0, 1.0),
        "rotate": Rotate(10.0),
        "scale": Scale(geometry.ratio),
    }
    tasks = []
    for seed in seeds:
        for t in transforms.values():
            cart = DatasetSpec(source=RandomNoise(), transform=t, seed=seed)
            pol = DatasetSpec(source=RandomNoise(), transform=t, polar=geometry, seed=seed)
            tasks.append((RunSetup(dataset=cart, config=TrainConfig(seed=seed)), (200,)))
            tasks.append((RunSetup(dataset=pol, config=TrainConfig(seed=seed)), (200,)))
    results = _pmap(_run_for, tasks, jobs=jobs)
    rows = []
    per_seed_stride = 2 * len(transforms)
    for i, name in enumerate(transforms):
        cart_runs = results[2 * i :: per_seed_stride]
        polar_runs = results[2 * i + 1 :: per_seed_stride]
        rows.append(
            {
                "transform": name,
                "cartesian_e1": _median([r.report.final_1x for r in cart_runs]),
                "cartesian_e5": _median([r.report.final_5x for r in cart_runs]),
                "polar_e1": _median([r.report.final_1x for r in polar_runs]),
                "polar_e5": _median([r.report.final_5x for r in polar_runs]),
            }
        )
    return rows


def repro_translation(seeds: Sequence[int] = DEFAULT_SEEDS, jobs: int = 1) -> list:
    """Discrete (1,1) versus continuous (0.5,0.5) translation; medians over seeds."""
    vectors = ((1.0, 1.0), (0.5, 0.5))
    tasks = []
    for seed in seeds:
        for vec in vectors:
            dataset = DatasetSpec(source=RandomNoise(), transform=Translate(*vec), seed=seed)
            tasks.append((RunSetup(dataset=dataset, config=TrainConfig(seed=seed)), (200,)))
    results = _pmap(_run_for, tasks, jobs=jobs)
    rows = []
    for i, vec in enumerate(vectors):
        per_seed = results[i :: len(vectors)]
        rows.append(
            {
                "translation": vec,
                "e1": _median([r.report.final_1x for r in per_seed]),
                "e2": _median([r.report.final_2x for r in per_seed]),
                "e5": _median([r.report.final_5x for r in per_seed]),
            }
        )
    return rows


def write_rows_csv(rows: Sequence[dict], path) -> None:
    """Generic CSV writer for the repro row dictionaries."""
    if not rows:
        raise ValueError("no rows to write")
    keys = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(keys)
        for row in rows:
            writer.writerow(["" if row.get(k) is None else row.get(k) for k in keys])
