"""Reference results from the original clinical study, for display only.

These numbers were measured on a private clinical corpus that is not
available here; they ship purely so reports can show the synthetic-data
results side by side with the published ones.  They are never folded into
any computed statistic.  Keys are (model, sequence, kernel); values are
percentages (mean, std) unless noted.
"""

BASELINE_LABEL = "published baseline (different data)"

# Binary PD-vs-HC accuracy tables: {experiment: {(model, sequence, kernel):
#   {"acc": mean, "acc_std": std, "sens": ..., "spec": ..., "f1": ...}}}
PD_DETECTION = {
    "exp1_single": {
        ("fr", "neutral", "gaussian"): {"acc": 69.0, "acc_std": 10.1, "sens": 74.0, "spec": 63.0, "f1": 67.8},
        ("fr", "apex", "gaussian"): {"acc": 70.0, "acc_std": 9.1, "sens": 84.4, "spec": 53.3, "f1": 61.0},
        ("fr", "onset", "gaussian"): {"acc": 71.4, "acc_std": 3.2, "sens": 88.6, "spec": 50.0, "f1": 63.1},
        ("fr", "offset", "gaussian"): {"acc": 71.6, "acc_std": 5.2, "sens": 79.5, "spec": 61.9, "f1": 68.6},
        ("fr", "neutral", "linear"): {"acc": 70.8, "acc_std": 9.6, "sens": 77.3, "spec": 63.0, "f1": 69.3},
        ("fr", "apex", "linear"): {"acc": 70.8, "acc_std": 9.1, "sens": 83.7, "spec": 55.7, "f1": 63.8},
        ("fr", "onset", "linear"): {"acc": 72.9, "acc_std": 4.2, "sens": 88.6, "spec": 53.4, "f1": 66.1},
        ("fr", "offset", "linear"): {"acc": 72.8, "acc_std": 4.3, "sens": 81.5, "spec": 61.9, "f1": 69.2},
    },
    "exp1_sequence": {
        ("fr", "NOnA", "gaussian"): {"acc": 77.4, "acc_std": 8.7, "sens": 89.3, "spec": 63.0, "f1": 72.9},
        ("fr", "AOffN", "gaussian"): {"acc": 76.3, "acc_std": 8.0, "sens": 86.8, "spec": 63.5, "f1": 69.2},
        ("fr", "NOnAOffN", "gaussian"): {"acc": 77.2, "acc_std": 8.6, "sens": 86.1, "spec": 67.2, "f1": 74.2},
        ("fr", "NOnA", "linear"): {"acc": 78.2, "acc_std": 9.8, "sens": 90.1, "spec": 63.8, "f1": 73.8},
        ("fr", "AOffN", "linear"): {"acc": 77.8, "acc_std": 9.1, "sens": 88.8, "spec": 64.2, "f1": 70.4},
        ("fr", "NOnAOffN", "linear"): {"acc": 78.4, "acc_std": 7.1, "sens": 87.8, "spec": 67.7, "f1": 75.4},
    },
    "exp2_adaptation": {
        ("fr-freeze75", "NOnA", "gaussian"): {"acc": 84.2, "acc_std": 5.4, "sens": 90.0, "spec": 77.2, "f1": 82.3},
        ("fr-freeze75", "AOffN", "gaussian"): {"acc": 81.6, "acc_std": 8.6, "sens": 87.8, "spec": 73.9, "f1": 80.0},
        ("fr-freeze75", "NOnAOffN", "gaussian"): {"acc": 86.7, "acc_std": 8.9, "sens": 91.2, "spec": 81.6, "f1": 85.5},
        ("fr-freeze75", "NOnA", "linear"): {"acc": 84.7, "acc_std": 5.4, "sens": 89.5, "spec": 78.9, "f1": 82.9},
        ("fr-freeze75", "AOffN", "linear"): {"acc": 82.6, "acc_std": 9.6, "sens": 87.8, "spec": 76.1, "f1": 81.2},
        ("fr-freeze75", "NOnAOffN", "linear"): {"acc": 87.3, "acc_std": 8.0, "sens": 90.6, "spec": 83.6, "f1": 86.6},
        ("fr-freeze50", "NOnA", "gaussian"): {"acc": 83.1, "acc_std": 6.0, "sens": 87.7, "spec": 77.5, "f1": 81.1},
        ("fr-freeze50", "AOffN", "gaussian"): {"acc": 81.3, "acc_std": 7.5, "sens": 86.3, "spec": 75.6, "f1": 80.1},
        ("fr-freeze50", "NOnAOffN", "gaussian"): {"acc": 81.9, "acc_std": 9.2, "sens": 97.4, "spec": 63.4, "f1": 75.5},
        ("fr-freeze50", "NOnA", "linear"): {"acc": 82.1, "acc_std": 6.8, "sens": 85.0, "spec": 78.6, "f1": 80.2},
        ("fr-freeze50", "AOffN", "linear"): {"acc": 80.0, "acc_std": 7.6, "sens": 83.4, "spec": 76.1, "f1": 79.1},
        ("fr-freeze50", "NOnAOffN", "linear"): {"acc": 80.2, "acc_std": 11.1, "sens": 84.3, "spec": 75.3, "f1": 78.3},
        ("vgg8", "NOnA", "gaussian"): {"acc": 58.3, "acc_std": 3.7, "sens": 94.6, "spec": 14.1, "f1": 24.0},
        ("vgg8", "AOffN", "gaussian"): {"acc": 65.6, "acc_std": 8.6, "sens": 80.6, "spec": 47.6, "f1": 58.1},
        ("vgg8", "NOnAOffN", "gaussian"): {"acc": 62.7, "acc_std": 8.3, "sens": 66.4, "spec": 58.2, "f1": 60.9},
        ("vgg8", "NOnA", "linear"): {"acc": 67.4, "acc_std": 8.3, "sens": 72.4, "spec": 61.3, "f1": 66.0},
        ("vgg8", "AOffN", "linear"): {"acc": 67.6, "acc_std": 5.8, "sens": 70.6, "spec": 63.9, "f1": 65.9},
        ("vgg8", "NOnAOffN", "linear"): {"acc": 64.9, "acc_std": 7.7, "sens": 71.0, "spec": 57.7, "f1": 62.2},
        ("resnet7", "NOnA", "gaussian"): {"acc": 73.0, "acc_std": 9.5, "sens": 75.9, "spec": 69.7, "f1": 68.9},
        ("resnet7", "AOffN", "gaussian"): {"acc": 73.4, "acc_std": 9.9, "sens": 81.7, "spec": 63.6, "f1": 70.5},
        ("resnet7", "NOnAOffN", "gaussian"): {"acc": 78.8, "acc_std": 6.4, "sens": 79.3, "spec": 78.2, "f1": 77.6},
        ("resnet7", "NOnA", "linear"): {"acc": 74.1, "acc_std": 6.9, "sens": 82.2, "spec": 64.5, "f1": 69.3},
        ("resnet7", "AOffN", "linear"): {"acc": 72.4, "acc_std": 10.8, "sens": 84.2, "spec": 58.2, "f1": 68.1},
        ("resnet7", "NOnAOffN", "linear"): {"acc": 78.3, "acc_std": 7.3, "sens": 80.1, "spec": 76.2, "f1": 77.3},
    },
    "exp3_triplet": {
        ("triplet75", "NOnA", "gaussian"): {"acc": 85.2, "acc_std": 7.4, "sens": 87.6, "spec": 82.5, "f1": 84.5},
        ("triplet75", "AOffN", "gaussian"): {"acc": 86.0, "acc_std": 6.1, "sens": 91.4, "spec": 79.5, "f1": 84.9},
        ("triplet75", "NOnAOffN", "gaussian"): {"acc": 86.0, "acc_std": 9.0, "sens": 92.1, "spec": 78.7, "f1": 84.5},
        ("triplet75", "NOnA", "linear"): {"acc": 84.4, "acc_std": 6.6, "sens": 87.4, "spec": 80.9, "f1": 83.4},
        ("triplet75", "AOffN", "linear"): {"acc": 85.0, "acc_std": 5.9, "sens": 90.3, "spec": 78.7, "f1": 84.0},
        ("triplet75", "NOnAOffN", "linear"): {"acc": 86.1, "acc_std": 9.6, "sens": 91.4, "spec": 79.9, "f1": 85.0},
        ("triplet50", "NOnA", "gaussian"): {"acc": 78.9, "acc_std": 5.5, "sens": 84.3, "spec": 72.4, "f1": 76.7},
        ("triplet50", "AOffN", "gaussian"): {"acc": 73.2, "acc_std": 8.7, "sens": 69.1, "spec": 78.3, "f1": 72.2},
        ("triplet50", "NOnAOffN", "gaussian"): {"acc": 75.8, "acc_std": 11.8, "sens": 77.4, "spec": 74.3, "f1": 74.2},
        ("triplet50", "NOnA", "linear"): {"acc": 80.7, "acc_std": 6.6, "sens": 86.4, "spec": 73.9, "f1": 78.1},
        ("triplet50", "AOffN", "linear"): {"acc": 76.3, "acc_std": 8.7, "sens": 79.1, "spec": 73.3, "f1": 74.5},
        ("triplet50", "NOnAOffN", "linear"): {"acc": 77.1, "acc_std": 10.2, "sens": 83.0, "spec": 69.9, "f1": 73.9},
        ("triplet-vgg8", "NOnA", "gaussian"): {"acc": 71.2, "acc_std": 8.8, "sens": 76.4, "spec": 64.9, "f1": 68.7},
        ("triplet-vgg8", "AOffN", "gaussian"): {"acc": 69.9, "acc_std": 9.6, "sens": 67.4, "spec": 72.9, "f1": 69.8},
        ("triplet-vgg8", "NOnAOffN", "gaussian"): {"acc": 66.0, "acc_std": 8.4, "sens": 79.0, "spec": 50.7, "f1": 58.2},
        ("triplet-vgg8", "NOnA", "linear"): {"acc": 72.7, "acc_std": 7.2, "sens": 80.8, "spec": 62.6, "f1": 69.1},
        ("triplet-vgg8", "AOffN", "linear"): {"acc": 70.3, "acc_std": 7.0, "sens": 74.9, "spec": 64.8, "f1": 68.3},
        ("triplet-vgg8", "NOnAOffN", "linear"): {"acc": 65.3, "acc_std": 5.1, "sens": 65.0, "spec": 65.4, "f1": 64.1},
        ("triplet-resnet7", "NOnA", "gaussian"): {"acc": 82.1, "acc_std": 8.8, "sens": 87.2, "spec": 76.0, "f1": 80.5},
        ("triplet-resnet7", "AOffN", "gaussian"): {"acc": 78.2, "acc_std": 12.9, "sens": 79.6, "spec": 76.3, "f1": 77.3},
        ("triplet-resnet7", "NOnAOffN", "gaussian"): {"acc": 69.9, "acc_std": 10.8, "sens": 82.8, "spec": 54.7, "f1": 61.8},
        ("triplet-resnet7", "NOnA", "linear"): {"acc": 82.4, "acc_std": 8.5, "sens": 89.2, "spec": 74.1, "f1": 80.7},
        ("triplet-resnet7", "AOffN", "linear"): {"acc": 76.2, "acc_std": 11.0, "sens": 78.9, "spec": 72.8, "f1": 75.3},
        ("triplet-resnet7", "NOnAOffN", "linear"): {"acc": 79.6, "acc_std": 5.4, "sens": 89.0, "spec": 68.6, "f1": 76.5},
    },
}

# Per-AU detection quality, {model: {"auc": {au: value}, "eer_pct": {au: value}}}
AU_DETECTION = {
    "fr-freeze100": {
        "auc": {1: 0.83, 2: 0.83, 4: 0.87, 5: 0.80, 6: 0.94, 12: 0.95, 25: 0.92, 26: 0.80},
        "eer_pct": {1: 24.58, 2: 23.78, 4: 21.01, 5: 27.13, 6: 12.82, 12: 12.11, 25: 15.38, 26: 27.32},
    },
    "fr-freeze75": {
        "auc": {1: 0.84, 2: 0.84, 4: 0.86, 5: 0.84, 6: 0.92, 12: 0.93, 25: 0.95, 26: 0.85},
        "eer_pct": {1: 21.84, 2: 20.80, 4: 19.90, 5: 21.65, 6: 14.34, 12: 10.42, 25: 8.63, 26: 22.48},
    },
    "fr-freeze50": {
        "auc": {1: 0.84, 2: 0.87, 4: 0.87, 5: 0.87, 6: 0.93, 12: 0.95, 25: 0.90, 26: 0.83},
        "eer_pct": {1: 20.56, 2: 19.29, 4: 18.92, 5: 19.53, 6: 13.22, 12: 10.58, 25: 10.99, 26: 24.32},
    },
    "resnet7": {
        "auc": {1: 0.92, 2: 0.93, 4: 0.91, 5: 0.91, 6: 0.96, 12: 0.97, 25: 0.97, 26: 0.91},
        "eer_pct": {1: 15.25, 2: 14.21, 4: 16.20, 5: 13.58, 6: 10.05, 12: 8.42, 25: 7.39, 26: 16.32},
    },
    "vgg8": {
        "auc": {1: 0.89, 2: 0.87, 4: 0.89, 5: 0.90, 6: 0.96, 12: 0.96, 25: 0.96, 26: 0.90},
        "eer_pct": {1: 16.59, 2: 16.08, 4: 16.88, 5: 14.87, 6: 9.51, 12: 8.11, 25: 7.83, 26: 16.55},
    },
}

# Tri-class impairment grouping, row-normalized confusion (percent) plus
# the summary scores.
TRI_CLASS = {
    "fr-freeze75": {
        "sequence": "NOnAOffN",
        "confusion_pct": [
            [45.80, 35.30, 18.90],
            [33.47, 42.26, 24.27],
            [15.45, 39.49, 45.06],
        ],
        "acc": 44.0, "f1": 0.45, "kappa": 0.17, "C": 1e-3,
    },
    "triplet-resnet7": {
        "sequence": "NOnA",
        "confusion_pct": [
            [30.07, 39.60, 30.33],
            [34.60, 20.53, 44.87],
            [10.28, 18.62, 71.10],
        ],
        "acc": 40.0, "f1": 0.38, "kappa": 0.11, "C": 1e-3,
    },
}

# Parameter totals of the two compact architectures.
PARAM_TOTALS = {"vgg8": 295_448, "resnet7": 366_626}


def lookup_pd_baseline(experiment: str, model: str, sequence: str,
                       kernel: str) -> dict | None:
    return PD_DETECTION.get(experiment, {}).get((model, sequence, kernel))
