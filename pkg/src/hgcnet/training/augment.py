"""Pad-crop-flip augmentation of normalized training images."""

from typing import NamedTuple, Optional

import numpy as np

from ..core.exceptions import ShapeError, ValidationError

PAD = 4
IMAGE_SIZE = 32
# Crop offsets 0..2*PAD inclusive; PAD is the centered crop.
OFFSETS = 2 * PAD + 1


class AugmentParams(NamedTuple):
    dy: int
    dx: int
    flip: bool


CENTER = AugmentParams(PAD, PAD, False)


def draw_augment_params(rng: np.random.Generator) -> AugmentParams:
    """Draw (dy, dx, flip) in that order from `rng`."""
    dy = int(rng.integers(0, OFFSETS))
    dx = int(rng.integers(0, OFFSETS))
    flip = bool(rng.random() < 0.5)
    return AugmentParams(dy, dx, flip)


def augment(
    image: np.ndarray,
    rng: Optional[np.random.Generator] = None,
    params: Optional[AugmentParams] = None,
) -> np.ndarray:
    """Zero-pad by 4, crop a random 32x32 window, mirror with probability 0.5.

    Output pixel (y, x) is input pixel (y + dy - 4, x + dx - 4), or 0 where
    that falls into the padding.
    """
    if image.ndim != 3 or image.shape[1:] != (IMAGE_SIZE, IMAGE_SIZE):
        raise ShapeError(f"augment expects a (c, 32, 32) image, got shape {image.shape}")
    if params is None:
        if rng is None:
            raise ValidationError("augment needs either rng or params")
        params = draw_augment_params(rng)
    padded = np.pad(image, ((0, 0), (PAD, PAD), (PAD, PAD)))
    out = padded[:, params.dy : params.dy + IMAGE_SIZE, params.dx : params.dx + IMAGE_SIZE]
    if params.flip:
        out = out[:, :, ::-1]
    return np.ascontiguousarray(out)


def augment_batch(images: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Augment every image of a (n, c, 32, 32) batch, drawing params in batch order."""
    if images.ndim != 4:
        raise ShapeError(f"augment_batch expects (n, c, h, w), got shape {images.shape}")
    return np.stack([augment(image, rng) for image in images])
