"""Inception-v3 feature taps.

Four extraction depths are exposed, each named for where it sits in the
network and the vector width it produces:

    pool64      output of the first max pool (64 channels)
    pool192     output of the second max pool (192 channels)
    preaux768   output of the last 17x17 mixed block, the node feeding the
                auxiliary classifier (768 channels)
    final2048   output of the final average pool (2048 channels)

Spatial maps from the sub-final taps are global-average-pooled to fixed
vectors. Images are resized to 299x299, grayscale replicated to 3 channels,
scaled to [0, 1], and normalized with the standard ImageNet statistics.

Weights come from (in order of precedence) an explicit state-dict file, the
torchvision pretrained download when requested, or a seed-deterministic
random initialization; whichever is used, inference is run in eval mode with
no augmentation, so repeated extraction of the same input is bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torchvision.models import inception_v3

from .errors import ExtractionError

LAYER_DIMS = {"pool64": 64, "pool192": 192, "preaux768": 768, "final2048": 2048}

_IMAGENET_MEAN = torch.tensor([0.485, 0.456, 0.406]).view(1, 3, 1, 1)
_IMAGENET_STD = torch.tensor([0.229, 0.224, 0.225]).view(1, 3, 1, 1)
_INPUT_SIZE = 299


@dataclass(frozen=True)
class ExtractionJob:
    """One extraction request: source, tap layer, output path, batch size."""

    input: str
    layer: str
    output: str
    batch: int = 16

    def __post_init__(self):
        if self.layer not in LAYER_DIMS:
            raise ExtractionError(
                f"unknown layer {self.layer!r}; choose from {sorted(LAYER_DIMS)}"
            )
        if self.batch < 1:
            raise ExtractionError("batch size must be >= 1")


class InceptionTaps:
    """Inception-v3 wrapper exposing the four tap depths and class probs."""

    def __init__(self, weights_path: str | None = None, pretrained: bool = False,
                 seed: int = 0):
        if pretrained and weights_path is None:
            from torchvision.models import Inception_V3_Weights

            self.model = inception_v3(weights=Inception_V3_Weights.DEFAULT)
        else:
            torch.manual_seed(seed)
            self.model = inception_v3(weights=None, init_weights=True)
            if weights_path is not None:
                try:
                    state = torch.load(weights_path, map_location="cpu")
                except (OSError, RuntimeError) as exc:
                    raise ExtractionError(f"cannot load weights: {exc}") from exc
                self.model.load_state_dict(state)
        self.model.eval()

    def preprocess(self, images: list[np.ndarray]) -> torch.Tensor:
        """uint8 (H, W) or (H, W, 3) arrays -> normalized (N, 3, 299, 299)."""
        tensors = []
        for arr in images:
            t = torch.from_numpy(np.ascontiguousarray(arr)).float() / 255.0
            if t.ndim == 2:
                t = t.unsqueeze(0).repeat(3, 1, 1)  # grayscale -> 3 channels
            elif t.ndim == 3:
                t = t.permute(2, 0, 1)
            else:
                raise ExtractionError(f"unsupported image shape {tuple(t.shape)}")
            tensors.append(t)
        batch = torch.stack(tensors)
        batch = torch.nn.functional.interpolate(
            batch, size=(_INPUT_SIZE, _INPUT_SIZE), mode="bilinear",
            align_corners=False, antialias=True,
        )
        return (batch - _IMAGENET_MEAN) / _IMAGENET_STD

    def _forward_to_tap(self, x: torch.Tensor, layer: str) -> torch.Tensor:
        m = self.model
        x = m.Conv2d_1a_3x3(x)
        x = m.Conv2d_2a_3x3(x)
        x = m.Conv2d_2b_3x3(x)
        x = m.maxpool1(x)
        if layer == "pool64":
            return x
        x = m.Conv2d_3b_1x1(x)
        x = m.Conv2d_4a_3x3(x)
        x = m.maxpool2(x)
        if layer == "pool192":
            return x
        x = m.Mixed_5b(x)
        x = m.Mixed_5c(x)
        x = m.Mixed_5d(x)
        x = m.Mixed_6a(x)
        x = m.Mixed_6b(x)
        x = m.Mixed_6c(x)
        x = m.Mixed_6d(x)
        x = m.Mixed_6e(x)
        if layer == "preaux768":
            return x
        x = m.Mixed_7a(x)
        x = m.Mixed_7b(x)
        x = m.Mixed_7c(x)
        return m.avgpool(x)

    def activations(self, images: list[np.ndarray], layer: str, batch: int = 16) -> np.ndarray:
        """Extract (N, LAYER_DIMS[layer]) float32 feature vectors."""
        if layer not in LAYER_DIMS:
            raise ExtractionError(f"unknown layer {layer!r}")
        chunks = []
        with torch.no_grad():
            for start in range(0, len(images), batch):
                x = self.preprocess(images[start : start + batch])
                h = self._forward_to_tap(x, layer)
                chunks.append(h.mean(dim=(2, 3)).numpy())  # GAP to a vector
        out = np.concatenate(chunks, axis=0).astype(np.float32)
        assert out.shape[1] == LAYER_DIMS[layer]
        return out

    def class_probs(self, images: list[np.ndarray], batch: int = 16) -> np.ndarray:
        """Post-softmax (N, 1000) class probabilities; rows sum to 1."""
        chunks = []
        with torch.no_grad():
            for start in range(0, len(images), batch):
                x = self.preprocess(images[start : start + batch])
                logits = self.model(x).double()
                chunks.append(torch.softmax(logits, dim=1).numpy())
        return np.concatenate(chunks, axis=0)
