"""Gradient-based saliency export and a reference scorer service for the benchmark harness."""

from .export import ExportJob, run_export
from .methods import gradcam, integrated_gradients, plain_gradient, smoothgrad
from .modelzoo import ExportError, ModelBundle, ToyConvNet, load_model
from .server import ScorerService, serve_scorer

__version__ = "0.1.0"
