"""Reconstruction of four-line (tetragram) staves from partially erased staff images."""

from .morphology import PreprocessParams, preprocess
from .search import SearchParams, StaffHypothesis, search_staff
from .spline import SmoothingParams, interp_spline, round_curve, smooth_curve
from .tracker import ReconstructedStaff, TrackedStaff, TrackerParams, reconstruct_binary, reconstruct_page
from .evaluation import EvalReport, evaluate_page, rasterize_ground_truth
from .config import Config, load_config

__version__ = "0.1.0"
