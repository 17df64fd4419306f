"""
Experiments for the Low Vision GUI Checker.

Reruns the model variations on a labeled corpus: deeper conv stacks,
masked attribute groups, no fully connected layer, and how strongly a
flag on one component predicts flags on its graph neighbours.
"""

import logging
from dataclasses import replace
from typing import Dict, Optional, Sequence

import numpy as np

from checker import train_on_corpus
from feature_encoder import MASKS, IssueClass
from gcn_model import GcnConfig, GcnModel, accuracy, predict
from graph_builder import GraphTensors
from synth_corpus import SyntheticGui
from utils.logging_config import setup_logger

# Configure logger
logger = setup_logger(__name__, logging.INFO)


def _with_depth(base: GcnConfig, depth: int) -> GcnConfig:
    """Same block widths, depth // n_blocks convs per block."""
    if depth < base.n_blocks or depth % base.n_blocks:
        raise ValueError(f"conv depth {depth} is not a multiple of {base.n_blocks} blocks")
    per_block = depth // base.n_blocks
    block_widths = base.hidden_dims[:: base.n_conv_per_block]
    hidden = tuple(w for w in block_widths for _ in range(per_block))
    return replace(base, hidden_dims=hidden, n_conv_per_block=per_block)


def conv_depth_sweep(
    corpus: Sequence[SyntheticGui],
    depths: Sequence[int] = (2, 6),
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    base: Optional[GcnConfig] = None,
) -> Dict[int, float]:
    """
    Mean validation accuracy per total number of conv layers.

    Args:
        corpus: Labeled GUIs, split 80/20 per seed
        depths: Total conv layers to try, each a multiple of n_blocks
        seeds: Model and split seeds averaged over
        base: Configuration the variants are derived from

    Returns:
        Map of depth to mean validation accuracy
    """
    base = base or GcnConfig.from_config()
    results = {}
    for depth in depths:
        scores = []
        for seed in seeds:
            cfg = replace(_with_depth(base, depth), seed=seed)
            model, _, val_set = train_on_corpus(corpus, cfg)
            scores.append(accuracy(model, val_set))
        results[depth] = float(np.mean(scores))
        logger.info(f"{depth} conv layers: mean validation accuracy {results[depth]:.4f}")
    return results


def attribute_ablation(
    corpus: Sequence[SyntheticGui], seed: int = 7, base: Optional[GcnConfig] = None
) -> Dict[str, float]:
    """
    Validation accuracy with no mask, accessibility columns zeroed, and
    inherent columns zeroed.
    """
    cfg = replace(base or GcnConfig.from_config(), seed=seed)
    results = {}
    for mask in MASKS:
        model, _, val_set = train_on_corpus(corpus, cfg, mask=mask)
        results[mask] = accuracy(model, val_set)
        logger.info(f"Attribute mask '{mask}': validation accuracy {results[mask]:.4f}")
    return results


def fc_ablation(
    corpus: Sequence[SyntheticGui], seed: int = 7, base: Optional[GcnConfig] = None
) -> Dict[str, float]:
    """Validation accuracy with and without the fully connected layer."""
    cfg = replace(base or GcnConfig.from_config(), seed=seed)
    results = {}
    for name, use_fc in (("with_fc", True), ("without_fc", False)):
        model, _, val_set = train_on_corpus(corpus, replace(cfg, use_fc=use_fc))
        results[name] = accuracy(model, val_set)
        logger.info(f"{name}: validation accuracy {results[name]:.4f}")
    return results


def neighbor_correlation(model: GcnModel, dataset: Sequence[GraphTensors]) -> Dict[str, float]:
    """
    How much a flagged neighbour raises the chance of being flagged.

    Over every ordered pair of component-nodes joined by a nonzero edge,
    conditional is P(j flagged | i flagged); marginal is the share of all
    component-nodes that are flagged.

    Returns:
        {"conditional", "marginal", "lift"} where lift = conditional - marginal
        (NaN when no component is flagged)
    """
    flagged_total = components_total = 0
    pairs_total = pairs_flagged = 0
    for tensors in dataset:
        components = np.flatnonzero(tensors.component_mask)
        flagged = predict(model, tensors).class_of[components] != IssueClass.ACCESSIBLE
        flagged_total += int(flagged.sum())
        components_total += len(components)

        linked = tensors.adjacency[np.ix_(components, components)] != 0
        from_flagged = linked[flagged]
        pairs_total += int(from_flagged.sum())
        pairs_flagged += int((from_flagged & flagged[None, :]).sum())

    marginal = flagged_total / components_total if components_total else float("nan")
    conditional = pairs_flagged / pairs_total if pairs_total else float("nan")
    return {
        "conditional": conditional,
        "marginal": marginal,
        "lift": conditional - marginal,
    }
