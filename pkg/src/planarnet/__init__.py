"""Planar perceptron networks that learn image transformations from image pairs."""

from .geometry import (
    GridPosition,
    NeighborhoodSpec,
    PolarGeometry,
    Topology,
    cartesian_neighborhood,
    cartesian_topology,
    polar_geometry,
    polar_neighborhood,
    polar_topology,
)
from .imaging import (
    GrayImage,
    PolarImage,
    Rotate,
    Scale,
    Translate,
    apply_transform,
    compose,
    crop_center,
    downscale_bilinear,
    from_polar,
    power,
    read_image,
    threshold,
    to_polar,
    upscale_nearest,
    write_image,
)
from .network import (
    PlanarNetwork,
    StructureGraph,
    export_structure,
    forward,
    forward_chain,
    identity_network,
    init_network,
    load_network,
    save_network,
    shift_network,
)
from .training import (
    NumericError,
    TrainConfig,
    TrainReport,
    batch_delta,
    mean_abs_error,
    train,
    write_report_csv,
)
from .datagen import (
    DataError,
    DatasetSpec,
    EvalSample,
    FrameSequence,
    HighResDot,
    HighResNoise,
    ImageDir,
    ImageDirBW,
    RandomDot,
    RandomNoise,
    SamplePair,
    build_dataset,
    generate_source,
    ingest_frames,
    make_sample,
    materialize_dataset,
    read_manifest,
    write_manifest,
)
from .experiments import (
    ChainedErrors,
    RunSetup,
    TransferMatrix,
    connection_count,
    evaluate_chained,
    run_experiment,
    sweep,
    transfer_matrix,
)

__version__ = "0.1.0"
