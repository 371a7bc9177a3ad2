"""Desk-scale evaluation toolkit for abstaining image classifiers.

Submodules:

- data_model: value types, logit CSV, binary PGM/PPM
- scoring: MSP, energy, and ODIN confidence scores
- tiny_model: small differentiable classifier with exact gradients
- ood_eval: AUROC / AUPR / FPR@95TPR and the abstention sweep
- cls_eval: cross-entropy, confusion counts, per-class P/R/F1
- seg_eval: mask overlap metrics with bootstrap summaries
- stats: McNemar, paired accuracy deltas, percentile bootstrap
- hygiene: perceptual-hash dedup, stratified splits, nested CV
- pseudomask: box-seeded GrabCut-style mask generation
- cli: every operation as a subcommand emitting JSON
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
