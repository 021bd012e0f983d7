"""Seeded synthetic image classification data for desk-scale runs."""

from typing import Tuple

import numpy as np

from ..core.exceptions import ValidationError
from ..engine.tensor import DTYPE
from .dataset import Dataset

SPLITS = ("train", "val", "test")
MIN_COLOR_DISTANCE = 0.25
PATTERN_AMPLITUDE = 0.1


def _palette(rng: np.random.Generator, classes: int) -> np.ndarray:
    """Class colors in [0.15, 0.85]^3, kept apart by rejection sampling."""
    colors: list = []
    min_distance, failures = MIN_COLOR_DISTANCE, 0
    while len(colors) < classes:
        candidate = rng.uniform(0.15, 0.85, size=3)
        if all(np.linalg.norm(candidate - c) >= min_distance for c in colors):
            colors.append(candidate)
            continue
        failures += 1
        if failures % 1000 == 0:
            min_distance *= 0.9
    return np.stack(colors)


def _patterns(rng: np.random.Generator, classes: int, size: int) -> np.ndarray:
    """One low-frequency sinusoid per class, shape (classes, size, size)."""
    ys, xs = np.mgrid[0:size, 0:size] / size
    freq = rng.integers(1, 4, size=(classes, 2))
    phase = rng.uniform(0, 2 * np.pi, size=classes)
    waves = [
        np.sin(2 * np.pi * (fy * ys + fx * xs) + p) for (fy, fx), p in zip(freq, phase)
    ]
    return PATTERN_AMPLITUDE * np.stack(waves)


def class_prototypes(seed: int, classes: int, size: int = 32) -> Tuple[np.ndarray, np.ndarray]:
    """(colors (classes, 3), patterns (classes, size, size)) shared by every split."""
    rng = np.random.default_rng(seed)
    return _palette(rng, classes), _patterns(rng, classes, size)


def synth_dataset(
    seed: int,
    n: int,
    classes: int = 10,
    difficulty: float = 0.0,
    split: str = "train",
    size: int = 32,
) -> Dataset:
    """Class-conditional noisy color patterns, a pure function of its arguments.

    Each class has a base color and a sinusoid texture; samples add Gaussian
    pixel noise (std 0.05 + 0.25 * difficulty) and, for difficulty > 0, a
    per-sample color shift. At difficulty 0 the classes are linearly
    separable. Labels are balanced to within one sample.

    Args:
        seed: seeds the class prototypes and, together with `split`, the samples
        n: number of samples, at least `classes`
        classes: number of classes
        difficulty: 0 for separable data, larger values add noise
        split: train, val or test; splits share prototypes but not samples
        size: image height and width
    """
    if classes < 2:
        raise ValidationError(f"need at least 2 classes, got {classes}")
    if n < classes:
        raise ValidationError(f"n={n} must be at least classes={classes}")
    if difficulty < 0:
        raise ValidationError(f"difficulty must be >= 0, got {difficulty}")
    if split not in SPLITS:
        raise ValidationError(f"unknown split {split!r}, expected one of {SPLITS}")

    colors, patterns = class_prototypes(seed, classes, size)
    rng = np.random.default_rng([seed, SPLITS.index(split) + 1])
    labels = np.arange(n) % classes
    rng.shuffle(labels)

    images = colors[labels][:, :, None, None] + patterns[labels][:, None, :, :]
    if difficulty > 0:
        images = images + rng.normal(0, 0.15 * difficulty, size=(n, 3, 1, 1))
    images = images + rng.normal(0, 0.05 + 0.25 * difficulty, size=images.shape)
    images = np.clip(images, 0.0, 1.0).astype(DTYPE)
    return Dataset(images, labels, classes, split)
