"""Gradient-sign attacks and the substitute-model black-box protocol.

Epsilons are expressed on the 0-255 intensity scale and mapped onto the
[0, 1] pixel range. The black-box attack direction is fixed: perturb
morphs so the classifier calls them genuine.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import errors
from .nn import Network, train

GENUINE = 1  # class index convention: column 1 = genuine, column 0 = morph
MORPH = 0
DEFAULT_EPSILONS = (1, 2, 3, 4, 6, 8, 12, 16)


@dataclass
class Oracle:
    """Opaque classify function with a query counter."""

    classify: object  # callable: (N,H,W,C) batch -> (N,) label array
    queries: int = 0

    def __call__(self, batch):
        batch = np.asarray(batch, dtype=np.float64)
        self.queries += len(batch)
        return np.asarray(self.classify(batch))


def oracle_from_network(net: Network) -> Oracle:
    return Oracle(classify=lambda batch: net.predict(batch).argmax(axis=1))


def fgsm(net: Network, img, true_label, epsilon) -> np.ndarray:
    """Fast gradient sign perturbation, clamped to [0, 1].

    epsilon is on the 0-255 scale; the L-inf distance of the result is at
    most epsilon/255 and zero-gradient pixels stay untouched.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    x = np.asarray(img, dtype=np.float64)
    squeeze = x.ndim == 3
    if squeeze:
        x = x[None]
    n_out = net.layers[-1].nout
    y = np.zeros((len(x), n_out))
    y[np.arange(len(x)), true_label] = 1.0
    g = net.input_gradient(x, y)
    adv = np.clip(x + (epsilon / 255.0) * np.sign(g), 0.0, 1.0)
    adv = np.where(g == 0.0, x, adv)
    return adv[0] if squeeze else adv


@dataclass
class SubstituteResult:
    net: Network
    agreement: list = field(default_factory=list)  # per-round oracle agreement


def train_substitute(oracle: Oracle, seed_set, rounds=3, lam=0.1,
                     sub_net: Network | None = None, epochs=10, lr=0.05,
                     seed=0) -> SubstituteResult:
    """Substitute training with Jacobian dataset augmentation.

    Each round labels the current set through the oracle, fits the
    substitute to those labels, then augments the set with
    x' = x + lam * sign(d substitute-score / d x).
    """
    x = np.asarray(seed_set, dtype=np.float64)
    if len(x) == 0:
        raise errors.OracleUnavailable("empty seed set")
    if sub_net is None:
        raise ValueError("sub_net is required (desk-scale substitute network)")
    net = sub_net
    agreement = []
    for rnd in range(rounds + 1):
        labels = oracle(x)
        y = np.zeros((len(x), net.layers[-1].nout))
        y[np.arange(len(x)), labels] = 1.0
        train(net, x, y, lr=lr, epochs=epochs, seed=seed + rnd)
        pred = net.predict(x).argmax(axis=1)
        agreement.append(float((pred == labels).mean()))
        if rnd == rounds:
            break
        # Jacobian-based dataset augmentation toward the oracle's label
        g = net.input_gradient(x, y)
        x_new = np.clip(x + lam * np.sign(g), 0.0, 1.0)
        x = np.concatenate([x, x_new], axis=0)
    return SubstituteResult(net=net, agreement=agreement)


@dataclass
class RobustnessCurve:
    """(epsilon, fraction of morphs still detected) pairs."""

    points: list  # [(epsilon, fraction)], epsilons strictly increasing

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write("epsilon\tdetected_fraction\n")
            for eps, frac in self.points:
                f.write(f"{eps}\t{frac:.6f}\n")


def blackbox_attack(oracle: Oracle, substitute: Network, morph_images,
                    epsilon_list=DEFAULT_EPSILONS) -> RobustnessCurve:
    """Robustness of the oracle against substitute-crafted FGSM morphs.

    A screening pass keeps only morphs the oracle detects unperturbed; per
    epsilon each kept morph is perturbed toward the genuine class on the
    substitute and the oracle is queried exactly once per image.
    """
    x = np.asarray(morph_images, dtype=np.float64)
    eps_arr = list(epsilon_list)
    if any(b <= a for a, b in zip(eps_arr, eps_arr[1:])):
        raise ValueError("epsilons must be strictly increasing")
    detected = oracle(x) == MORPH
    x = x[detected]
    if len(x) == 0:
        raise errors.NoCorrectlyDetectedMorphs("oracle detects none of the morphs")
    points = []
    for eps in eps_arr:
        if eps == 0:
            points.append((0.0, 1.0))
            continue
        adv = fgsm(substitute, x, MORPH, eps)
        frac = float((oracle(adv) == MORPH).mean())
        points.append((float(eps), frac))
    return RobustnessCurve(points=points)
