"""Desk-scale pipeline for Parkinson detection from facial expression dynamics.

Subpackages and modules:

- ``nn``          minimal differentiable network primitives
- ``backbones``   VGG-8 / ResNet-7 / face-recognition backbone builders, freezing
- ``fau``         face action unit head, training and per-AU scoring
- ``triplet``     affective triplet loss and embedding training
- ``sequence``    expression stage detection and sequence fusion
- ``svm``         SMO-trained kernel SVM with nested cross-validated grid search
- ``metrics``     binary/multiclass metrics, ROC/AUC/EER, kappa, PCA
- ``synthetic``   seeded generators standing in for the unavailable corpora
- ``experiments`` end-to-end experiment runners and report export
- ``cli``         command line entry point
"""

__version__ = "0.1.0"
