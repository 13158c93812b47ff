"""Gradient-based attribution methods over torch models.

All methods take a (1, C, H, W) input batch and a target class, and return a
float64 numpy relevance grid. Channel reduction (sum) happens here; clamping
and min-max scaling happen at export time.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F

from .modelzoo import ExportError


def _score(model, x: torch.Tensor, target: int) -> torch.Tensor:
    out = model(x)
    if out.ndim != 2 or not 0 <= target < out.shape[1]:
        raise ExportError(f"model output shape {tuple(out.shape)} incompatible with class {target}")
    return out[0, target]


def _gradient(model, x: torch.Tensor, target: int) -> torch.Tensor:
    x = x.detach().requires_grad_(True)
    score = _score(model, x, target)
    return torch.autograd.grad(score, x)[0]


def integrated_gradients(model, x: torch.Tensor, target: int, steps: int = 64) -> np.ndarray:
    """Midpoint-Riemann path integral of gradients from a black baseline.

    With steps=1 this is exactly the gradient at the path midpoint. Attributions
    are summed over channels; their total approximates F(x) - F(baseline).
    """
    if steps < 1:
        raise ExportError("integrated gradients needs steps >= 1")
    baseline = torch.zeros_like(x)
    total = np.zeros(x.shape[1:], dtype=np.float64)
    for step in range(steps):
        alpha = (step + 0.5) / steps
        point = baseline + alpha * (x - baseline)
        total += _gradient(model, point, target)[0].numpy().astype(np.float64)
    attributions = (x - baseline)[0].detach().numpy().astype(np.float64) * (total / steps)
    return attributions.sum(axis=0)


def integrated_gradients_completeness(model, x: torch.Tensor, target: int, steps: int) -> tuple:
    """(sum of raw attributions, score difference) for the completeness check."""
    baseline = torch.zeros_like(x)
    with torch.no_grad():
        difference = float(_score(model, x, target) - _score(model, baseline, target))
    total = integrated_gradients(model, x, target, steps)
    return float(total.sum()), difference


def plain_gradient(model, x: torch.Tensor, target: int) -> np.ndarray:
    """Absolute input gradient, summed over channels."""
    grad = _gradient(model, x, target)[0].numpy().astype(np.float64)
    return np.abs(grad).sum(axis=0)


def smoothgrad(
    model,
    x: torch.Tensor,
    target: int,
    n_samples: int = 25,
    noise_sigma: float = 0.15,
    seed: int = 0,
    signed: bool = False,
) -> np.ndarray:
    """Mean gradient over noisy copies; absolute values by default, signed behind the flag."""
    if n_samples < 1:
        raise ExportError("smoothgrad needs n_samples >= 1")
    if noise_sigma < 0:
        raise ExportError("noise sigma must be >= 0")
    generator = torch.Generator().manual_seed(seed)
    acc = np.zeros(x.shape[1:], dtype=np.float64)
    for _ in range(n_samples):
        if noise_sigma > 0:
            point = x + torch.randn(x.shape, generator=generator) * noise_sigma
        else:
            point = x
        grad = _gradient(model, point, target)[0].numpy().astype(np.float64)
        acc += grad if signed else np.abs(grad)
    return (acc / n_samples).sum(axis=0)


def gradcam(model, layer, x: torch.Tensor, target: int) -> np.ndarray:
    """Gradient-weighted activation map of `layer`, rectified and upsampled to the input size."""
    captured = {}

    def hook(_module, _inputs, output):
        captured["activations"] = output

    handle = layer.register_forward_hook(hook)
    try:
        x = x.detach()
        score = _score(model, x, target)
    finally:
        handle.remove()
    if "activations" not in captured:
        raise ExportError("Grad-CAM target layer did not fire during the forward pass")
    activations = captured["activations"]
    grads = torch.autograd.grad(score, activations)[0]
    weights = grads.mean(dim=(2, 3), keepdim=True)
    cam = torch.relu((weights * activations).sum(dim=1, keepdim=True))
    upsampled = F.interpolate(cam, size=x.shape[2:], mode="bilinear", align_corners=False)
    return upsampled[0, 0].detach().numpy().astype(np.float64)
