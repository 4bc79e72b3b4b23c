"""roofpv: rooftop solar PV deployment measurement and prediction.

Pipeline stages, each usable on its own:

- :mod:`roofpv.geo` -- WGS84/Web Mercator geometry and tile planning over
  census units.
- :mod:`roofpv.detect` -- bounding-box post-processing (IoU, NMS, greedy
  matching) and a COCO-style AP/AR evaluation report.
- :mod:`roofpv.deploy` -- per-image detections rolled up into block-group
  deployment measures (PV count per household, PV-to-roof area ratio).
- :mod:`roofpv.ingest` -- feature-table construction: spatial joins, tract
  broadcasts, adjacency imputation, schema validation, tile fetching.
- :mod:`roofpv.learn` -- from-scratch regression-tree ensembles (random
  forest and second-order gradient boosting) plus the 16-model experiment
  harness.
- :mod:`roofpv.explain` -- feature-importance aggregation, exact TreeSHAP,
  OLS with robust standard errors, and average marginal effects.
- :mod:`roofpv.synth` -- seeded synthetic scenes and regression datasets
  with known ground truth, used as oracles throughout the test suite.
- :mod:`roofpv.cli` -- command-line orchestration of the full pipeline.
"""

__version__ = "0.1.0"
