"""Deterministic fixture data and networks for tests, acceptance runs and scripts.

Real MNIST files are not shipped; ``synthetic_idx`` produces MNIST-format
bytes from ``dataset.synthetic_digits`` so the whole IDX -> toy -> train
pipeline runs offline.
"""

from __future__ import annotations

from . import dataset, nn


def synthetic_idx(count: int = 600, seed: int = 0) -> tuple[bytes, bytes]:
    images, labels = dataset.synthetic_digits(count, seed)
    return images.to_bytes(), labels.to_bytes()


def toy_data(side: int = 4, count: int = 600, seed: int = 0):
    images, labels = dataset.synthetic_digits(count, seed)
    return dataset.derive_toy(images, labels, side=side)


def trained_toy_network(
    side: int = 4, epochs: int = 30, lr: float = 0.1, seed: int = 0, count: int = 600
) -> nn.Network:
    """TinyCNN trained on synthetic toy digits; identical for identical arguments."""
    net = nn.tiny_cnn(side, side, 2, seed=seed)
    nn.train(net, toy_data(side, count, seed), epochs, lr, batch_size=32, seed=seed)
    return net
