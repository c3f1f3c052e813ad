"""TSP-as-image pipeline: instances, rasterization, FCN, decoding, solvers."""

from .instance import PixelCoords, Tour, TspInstance, generate_instance, normalize, tour_length, validate_tour
from .raster import LabelMask, RasterImage, RenderConfig, probs_to_image, render_input, render_label, render_scatter
from .solvers import AcoConfig, GaConfig, solve_ant_colony, solve_branch_bound, solve_dp, solve_exhaustive, solve_genetic
from .decode import DecodeConfig, Solution, greedy_tour, path_density, post_process, sample_pixels
from .evaluation import MetricsReport, PipelineConfig, benchmark_solvers, compute_metrics, generalization_sweep, run_pipeline_eval

__version__ = "0.1.0"

__all__ = [
    "AcoConfig",
    "DecodeConfig",
    "GaConfig",
    "LabelMask",
    "MetricsReport",
    "PipelineConfig",
    "PixelCoords",
    "RasterImage",
    "RenderConfig",
    "Solution",
    "Tour",
    "TspInstance",
    "benchmark_solvers",
    "compute_metrics",
    "generalization_sweep",
    "generate_instance",
    "greedy_tour",
    "normalize",
    "path_density",
    "post_process",
    "probs_to_image",
    "render_input",
    "render_label",
    "render_scatter",
    "run_pipeline_eval",
    "sample_pixels",
    "solve_ant_colony",
    "solve_branch_bound",
    "solve_dp",
    "solve_exhaustive",
    "solve_genetic",
    "tour_length",
    "validate_tour",
]
