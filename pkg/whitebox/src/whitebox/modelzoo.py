"""Model registry: a deterministic toy classifier plus optional torchvision networks."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

ILSVRC_MEAN = (0.485, 0.456, 0.406)
ILSVRC_STD = (0.229, 0.224, 0.225)


class ExportError(RuntimeError):
    """Model could not be loaded or a method prerequisite failed."""


class ToyConvNet(nn.Module):
    """Small fixed-weight conv net with sigmoid class scores in [0,1].

    Weights are seeded at construction, so every instance is identical and
    scoring is reproducible; inputs are normalized RGB of any spatial size.
    """

    def __init__(self, n_classes: int = 5, seed: int = 1234):
        super().__init__()
        with torch.random.fork_rng():
            torch.manual_seed(seed)
            self.conv1 = nn.Conv2d(3, 8, 3, stride=2, padding=1)
            self.conv2 = nn.Conv2d(8, 4, 3, stride=2, padding=1)
            self.head = nn.Linear(4, n_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = torch.relu(self.conv1(x))
        x = torch.relu(self.conv2(x))
        pooled = x.mean(dim=(2, 3))
        return torch.sigmoid(self.head(pooled))


@dataclass(frozen=True)
class ModelBundle:
    """Everything the exporters and the scorer server need to drive one network."""

    model: nn.Module
    n_classes: int
    input_space: str  # "raw01" or "normalized"
    gradcam_layer: nn.Module


def _torchvision_bundle(name: str) -> ModelBundle:
    try:
        import torchvision.models as tvm
    except ImportError as exc:
        raise ExportError(f"torchvision is required for model {name!r}: {exc}") from exc
    try:
        if name == "resnet50":
            model = tvm.resnet50(weights=tvm.ResNet50_Weights.IMAGENET1K_V1)
            layer = model.layer4[-1]
        else:
            model = tvm.vgg16(weights=tvm.VGG16_Weights.IMAGENET1K_V1)
            layer = model.features[-3]
    except Exception as exc:  # weight download/load failures surface as export errors
        raise ExportError(f"cannot load pretrained {name!r}: {exc}") from exc
    model.eval()
    return ModelBundle(model, 1000, "normalized", layer)


def load_model(name: str) -> ModelBundle:
    if name == "toy":
        model = ToyConvNet()
        model.eval()
        return ModelBundle(model, 5, "normalized", model.conv2)
    if name in ("resnet50", "vgg16"):
        return _torchvision_bundle(name)
    raise ExportError(f"unknown model id {name!r} (want toy/resnet50/vgg16)")
