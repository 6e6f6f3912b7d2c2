"""Backbone construction: a 50-layer residual trunk tapped after its third stage.

The tap point halves the input four times (stem conv, pool, stages two and
three), so one output cell covers a 16-pixel stride and carries 1024 channels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
from torch import nn

from .spec import DEFAULT_BACKBONE, BackboneUnavailableError

RESNET50_REDUCTION = 16
RESNET50_CHANNELS = 1024
RANDOM_PREFIX = "resnet50-random"


@dataclass(frozen=True)
class Backbone:
    """A ready-to-run trunk plus the geometry the planner needs."""

    identifier: str
    module: nn.Module = field(repr=False)
    reduction: int
    channels: int


def _resnet50_trunk(weights) -> nn.Module:
    from torchvision.models import resnet50

    net = resnet50(weights=weights)
    trunk = nn.Sequential(net.conv1, net.bn1, net.relu, net.maxpool, net.layer1, net.layer2, net.layer3)
    trunk.eval()
    trunk.requires_grad_(False)
    return trunk


def load_backbone(identifier: str = DEFAULT_BACKBONE) -> Backbone:
    """Build the trunk named by identifier.

    "resnet50-imagenet" uses the pretrained classification weights and fails
    with BackboneUnavailableError when they cannot be fetched.  The
    "resnet50-random[:seed]" family draws fresh weights from the given seed
    (default 0); it produces well-formed grids with no semantic content and
    exists for smoke runs and tests.
    """
    if identifier == "resnet50-imagenet":
        from torchvision.models import ResNet50_Weights

        try:
            trunk = _resnet50_trunk(ResNet50_Weights.IMAGENET1K_V2)
        except Exception as exc:
            raise BackboneUnavailableError(
                f"backbone '{identifier}' unavailable: {exc}"
            ) from exc
        return Backbone(identifier, trunk, RESNET50_REDUCTION, RESNET50_CHANNELS)

    if identifier == RANDOM_PREFIX or identifier.startswith(RANDOM_PREFIX + ":"):
        _, _, suffix = identifier.partition(":")
        try:
            seed = int(suffix) if suffix else 0
        except ValueError:
            raise BackboneUnavailableError(
                f"backbone '{identifier}' unavailable: seed must be an integer"
            ) from None
        torch.manual_seed(seed)
        trunk = _resnet50_trunk(None)
        return Backbone(identifier, trunk, RESNET50_REDUCTION, RESNET50_CHANNELS)

    raise BackboneUnavailableError(f"backbone '{identifier}' unavailable: unknown identifier")
