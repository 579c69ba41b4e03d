"""Kernel SVM trained by sequential minimal optimization.

The decision function is f(x) = sum_i alpha_i y_i k(x_i, x) + b with
0 <= alpha <= C.  Features are z-normalized inside ``train_svm`` using the
training statistics, which are stored on the model.  Hyperparameter search
follows the published protocol: an outer subject-disjoint k-fold, an inner
cross-validation on each training portion for cell selection, and the
reported cell is the mode over the outer folds (ties toward smaller C,
then smaller gamma).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .metrics import BinaryReport, ConfusionMatrix, binary_metrics, cohen_kappa, macro_f1, roc_auc_eer
from .synthetic import FoldAssignment, split_folds

GAUSSIAN_C_GRID = tuple(10.0 ** e for e in range(-4, 4))   # 1e-4 .. 1e3
GAUSSIAN_GAMMA_GRID = tuple(10.0 ** e for e in range(-4, 4))
LINEAR_C_GRID = tuple(10.0 ** e for e in range(-1, 5))     # 1e-1 .. 1e4


class DataError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message, max_violation=None, sweeps=None):
        super().__init__(message)
        self.max_violation = max_violation
        self.sweeps = sweeps


@dataclass(frozen=True)
class SvmHyperParams:
    kernel: str                  # "linear" | "gaussian"
    C: float
    gamma: float | None = None

    def __post_init__(self):
        if self.kernel not in ("linear", "gaussian"):
            raise DataError(f"unknown kernel {self.kernel!r}")
        if self.C <= 0:
            raise DataError("C must be positive")
        if self.kernel == "gaussian":
            if self.gamma is None or self.gamma <= 0:
                raise DataError("gaussian kernel needs positive gamma")
        elif self.gamma is not None:
            raise DataError("linear kernel takes no gamma")

    def sort_key(self):
        return (self.C, self.gamma if self.gamma is not None else 0.0)


def full_grid(kernel: str) -> list[SvmHyperParams]:
    """The full powers-of-ten search grids used by the reference protocol."""
    if kernel == "linear":
        return [SvmHyperParams("linear", c) for c in LINEAR_C_GRID]
    if kernel == "gaussian":
        return [SvmHyperParams("gaussian", c, g)
                for c in GAUSSIAN_C_GRID for g in GAUSSIAN_GAMMA_GRID]
    raise DataError(f"unknown kernel {kernel!r}")


def fast_grid(kernel: str) -> list[SvmHyperParams]:
    """Reduced grid for quick runs and the acceptance suite."""
    if kernel == "linear":
        return [SvmHyperParams("linear", c) for c in (1e-2, 1e-1, 1.0, 10.0)]
    if kernel == "gaussian":
        return [SvmHyperParams("gaussian", c, g)
                for c in (1e-1, 1.0, 10.0) for g in (1e-3, 1e-2, 1e-1)]
    raise DataError(f"unknown kernel {kernel!r}")


def kernel_matrix(params: SvmHyperParams, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    if params.kernel == "linear":
        return A @ B.T
    sq = (
        np.sum(A * A, axis=1)[:, None]
        + np.sum(B * B, axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    return np.exp(-params.gamma * np.clip(sq, 0.0, None))


# -- SMO core -----------------------------------------------------------------

def smo_solve(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3,
              max_passes: int | None = None):
    """Solve the dual on a precomputed kernel matrix by pairwise updates.

    Each iteration picks the most violating sample and the partner giving
    the largest closed-form objective decrease, then optimizes the two
    multipliers jointly.  Deterministic: ties break toward the first
    index.  Returns (alpha, b, iterations).  Raises ConvergenceError when
    the KKT violation still exceeds ``tol`` after the iteration budget
    (``max_passes`` * n pair steps, default 10n * n).

    The hot loop runs through a numba-compiled kernel when available; set
    HYPOMIMIA_PURE_PYTHON=1 to force the plain numpy path.
    """
    n = len(y)
    if max_passes is None:
        max_passes = 10 * n
    max_iter = max_passes * n
    y = y.astype(float)
    K = np.ascontiguousarray(K, dtype=np.float64)
    eps_a = 1e-12 * max(C, 1.0)
    core = _compiled_core()
    if core is not None:
        alpha, g, iterations = core(K, y, float(C), float(tol), int(max_iter))
    else:
        alpha, g, iterations = _smo_python(K, y, C, tol, max_iter, eps_a)
    b = _feasible_bias(K, y, alpha, g, C, eps_a)
    violation = kkt_violation(K, y, alpha, b, C)
    if violation > tol:
        raise ConvergenceError(
            f"SMO did not converge within {max_iter} pair steps "
            f"(max KKT violation {violation:.3e} > tol {tol:g})",
            max_violation=violation, sweeps=iterations,
        )
    return alpha, b, iterations


def _smo_python(K, y, C, tol, max_iter, eps_a):
    n = len(y)
    alpha = np.zeros(n)
    g = np.zeros(n)           # g_i = sum_j alpha_j y_j K_ij

    def take_step(i1, i2):
        nonlocal g
        a1, a2 = alpha[i1], alpha[i2]
        y1, y2 = y[i1], y[i2]
        s = y1 * y2
        if y1 != y2:
            L, H = max(0.0, a2 - a1), min(C, C + a2 - a1)
        else:
            L, H = max(0.0, a1 + a2 - C), min(C, a1 + a2)
        if L >= H:
            return False
        eta = K[i1, i1] + K[i2, i2] - 2.0 * K[i1, i2]
        if eta <= 1e-12:
            return False
        # F_i = y_i - g_i; the unconstrained optimum moves a2 by y2(F2-F1)/eta
        a2_new = a2 + y2 * ((y[i2] - g[i2]) - (y[i1] - g[i1])) / eta
        a2_new = min(max(a2_new, L), H)
        if abs(a2_new - a2) < 1e-14 * (a2_new + a2 + 1e-14):
            return False
        a1_new = a1 + s * (a2 - a2_new)
        if a1_new < eps_a:
            a1_new = 0.0
        elif a1_new > C - eps_a:
            a1_new = C
        da1, da2 = a1_new - a1, a2_new - a2
        alpha[i1], alpha[i2] = a1_new, a2_new
        g += y1 * da1 * K[:, i1] + y2 * da2 * K[:, i2]
        return True

    diag = np.diag(K).copy()
    iterations = 0
    while iterations < max_iter:
        F = y - g
        lower = ((y > 0) & (alpha < C - eps_a)) | ((y < 0) & (alpha > eps_a))
        upper = ((y > 0) & (alpha > eps_a)) | ((y < 0) & (alpha < C - eps_a))
        if not lower.any() or not upper.any():
            break
        Fl = np.where(lower, F, -np.inf)
        Fu = np.where(upper, F, np.inf)
        i = int(np.argmax(Fl))
        if Fl[i] - Fu.min() <= 2.0 * tol:
            break
        # Second-order partner choice: maximize the closed-form objective
        # decrease (F_i - F_t)^2 / eta over eligible t; eta <= 0 pairs
        # (duplicate points) cannot move and are skipped.
        diff = F[i] - F
        eta_row = diag[i] + diag - 2.0 * K[i]
        eligible = upper & (diff > 0) & (eta_row > 1e-12)
        gain = np.where(eligible, diff * diff / np.where(eligible, eta_row, 1.0),
                        -np.inf)
        j_best = int(np.argmax(gain))
        moved = False
        if np.isfinite(gain[j_best]) and gain[j_best] > 0:
            moved = take_step(i, j_best)
            if not moved:
                for j in np.argsort(gain)[::-1][1:]:
                    if not np.isfinite(gain[j]) or gain[j] <= 0:
                        break
                    if take_step(i, int(j)):
                        moved = True
                        break
        if not moved:
            break
        iterations += 1
    return alpha, g, iterations


_CORE_CACHE: list = []


def _compiled_core():
    """Numba-compiled pair-update loop, or None on the pure-python path."""
    if _CORE_CACHE:
        return _CORE_CACHE[0]
    import os

    if os.environ.get("HYPOMIMIA_PURE_PYTHON"):
        _CORE_CACHE.append(None)
        return None
    try:
        import numba
    except ImportError:
        _CORE_CACHE.append(None)
        return None

    @numba.njit(cache=True, fastmath=False)
    def core(K, y, C, tol, max_iter):  # pragma: no cover - compiled
        n = K.shape[0]
        alpha = np.zeros(n)
        g = np.zeros(n)
        eps_a = 1e-12 * max(C, 1.0)
        iterations = 0
        while iterations < max_iter:
            i_best = -1
            F_i = -1e300
            j_min = -1
            F_j = 1e300
            for t in range(n):
                Ft = y[t] - g[t]
                if (y[t] > 0 and alpha[t] < C - eps_a) or \
                        (y[t] < 0 and alpha[t] > eps_a):
                    if Ft > F_i:
                        F_i = Ft
                        i_best = t
                if (y[t] > 0 and alpha[t] > eps_a) or \
                        (y[t] < 0 and alpha[t] < C - eps_a):
                    if Ft < F_j:
                        F_j = Ft
                        j_min = t
            if i_best < 0 or j_min < 0 or F_i - F_j <= 2.0 * tol:
                break
            i = i_best
            k_ii = K[i, i]
            j_best = -1
            best_gain = 0.0
            for t in range(n):
                if not ((y[t] > 0 and alpha[t] > eps_a) or
                        (y[t] < 0 and alpha[t] < C - eps_a)):
                    continue
                d = F_i - (y[t] - g[t])
                if d <= 0.0:
                    continue
                eta = k_ii + K[t, t] - 2.0 * K[i, t]
                if eta <= 1e-12:
                    continue
                gain = d * d / eta
                if gain > best_gain:
                    best_gain = gain
                    j_best = t
            if j_best < 0:
                break
            j = j_best
            a1 = alpha[i]
            a2 = alpha[j]
            y1 = y[i]
            y2 = y[j]
            if y1 != y2:
                L = max(0.0, a2 - a1)
                H = min(C, C + a2 - a1)
            else:
                L = max(0.0, a1 + a2 - C)
                H = min(C, a1 + a2)
            eta = k_ii + K[j, j] - 2.0 * K[i, j]
            a2_new = a2 + y2 * ((y2 - g[j]) - (y1 - g[i])) / eta
            if a2_new < L:
                a2_new = L
            elif a2_new > H:
                a2_new = H
            if abs(a2_new - a2) < 1e-14 * (a2_new + a2 + 1e-14):
                break
            a1_new = a1 + y1 * y2 * (a2 - a2_new)
            if a1_new < eps_a:
                a1_new = 0.0
            elif a1_new > C - eps_a:
                a1_new = C
            da1 = a1_new - a1
            da2 = a2_new - a2
            alpha[i] = a1_new
            alpha[j] = a2_new
            for t in range(n):
                g[t] += y1 * da1 * K[t, i] + y2 * da2 * K[t, j]
            iterations += 1
        return alpha, g, iterations

    _CORE_CACHE.append(core)
    return core


def _feasible_bias(K, y, alpha, g, C, eps_a) -> float:
    """Midpoint of the KKT-feasible bias interval for fixed alpha."""
    F = y - g
    lower = ((y > 0) & (alpha < C - eps_a)) | ((y < 0) & (alpha > eps_a))
    upper = ((y > 0) & (alpha > eps_a)) | ((y < 0) & (alpha < C - eps_a))
    b_lo = F[lower].max() if lower.any() else -np.inf
    b_hi = F[upper].min() if upper.any() else np.inf
    if not np.isfinite(b_lo):
        return float(b_hi) if np.isfinite(b_hi) else 0.0
    if not np.isfinite(b_hi):
        return float(b_lo)
    return float(0.5 * (b_lo + b_hi))


def kkt_violation(K, y, alpha, b, C) -> float:
    """Largest violation of the KKT optimality conditions."""
    yf = y * (K @ (alpha * y) + b)
    at_zero = alpha <= 1e-10 * max(C, 1.0)
    at_c = alpha >= C * (1.0 - 1e-10)
    viol = np.abs(yf - 1.0)
    viol[at_zero] = np.clip(1.0 - yf[at_zero], 0.0, None)
    viol[at_c] = np.clip(yf[at_c] - 1.0, 0.0, None)
    return float(viol.max()) if len(viol) else 0.0


def dual_objective(K, y, alpha) -> float:
    u = alpha * y
    return float(alpha.sum() - 0.5 * u @ K @ u)


# -- model --------------------------------------------------------------------

@dataclass
class SvmModel:
    params: SvmHyperParams
    mean: np.ndarray
    std: np.ndarray
    X_train: np.ndarray          # normalized training samples
    y_train: np.ndarray
    alpha: np.ndarray
    b: float
    kkt: float
    n_iterations: int

    @property
    def support_(self) -> np.ndarray:
        return np.nonzero(self.alpha > 1e-10)[0]

    @property
    def support_vectors(self) -> np.ndarray:
        return self.X_train[self.support_]

    @property
    def dual_coef(self) -> np.ndarray:
        sv = self.support_
        return self.alpha[sv] * self.y_train[sv]

    def decision(self, X: np.ndarray) -> np.ndarray:
        Xn = (np.asarray(X, dtype=float) - self.mean) / self.std
        sv = self.support_
        if len(sv) == 0:
            return np.full(len(Xn), self.b)
        Ksv = kernel_matrix(self.params, Xn, self.X_train[sv])
        return Ksv @ self.dual_coef + self.b

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.where(self.decision(X) >= 0.0, 1, -1)


def train_svm(X, y, params: SvmHyperParams, tol: float = 1e-3,
              max_passes: int | None = None) -> SvmModel:
    """Fit a binary SVM; y must be in {-1, +1} with both classes present."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) != len(y):
        raise DataError("X must be 2-D and aligned with y")
    if len(X) < 2:
        raise DataError("need at least two samples")
    values = set(np.unique(y).tolist())
    if not values <= {-1, 1}:
        raise DataError(f"labels must be -1/+1, got {sorted(values)}")
    if len(values) < 2:
        raise DataError("training data contains a single class")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    Xn = (X - mean) / std
    y = y.astype(float)
    K = kernel_matrix(params, Xn, Xn)
    alpha, b, iterations = smo_solve(K, y, params.C, tol=tol,
                                     max_passes=max_passes)
    return SvmModel(params, mean, std, Xn, y, alpha, b,
                    kkt=kkt_violation(K, y, alpha, b, params.C),
                    n_iterations=iterations)


# -- cross-validated grid search ------------------------------------------------

@dataclass
class FoldResult:
    fold: int
    params: SvmHyperParams
    report: BinaryReport
    n_test: int


@dataclass
class CvResult:
    folds: list[FoldResult]
    selected: SvmHyperParams
    acc_mean: float
    acc_std: float
    sens_mean: float | None
    spec_mean: float | None
    f1_mean: float | None
    auc: float | None
    eer: float | None
    pooled_scores: np.ndarray
    pooled_labels: np.ndarray
    warnings: list = field(default_factory=list)
    models: list | None = None


def _mode_params(chosen: list[SvmHyperParams]) -> SvmHyperParams:
    counts = Counter(chosen)
    top = max(counts.values())
    return min((p for p, c in counts.items() if c == top),
               key=lambda p: p.sort_key())


def _mean_optional(values):
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def _subseed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


def grid_search_cv(X, y, subjects, grid, fold_assignment: FoldAssignment,
                   seed: int = 0, inner_k: int = 4, tol: float = 1e-3,
                   max_passes: int | None = None,
                   keep_models: bool = False) -> CvResult:
    """Nested subject-disjoint cross-validation over a hyperparameter grid.

    Per outer fold, the cell maximizing inner-validation accuracy (inner
    ``inner_k``-fold on the training subjects) is refit on the whole
    training portion and scored on the untouched test fold.  y is -1/+1.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    subjects = np.asarray(subjects)
    if not grid:
        raise DataError("empty hyperparameter grid")
    folds = np.array([fold_assignment.fold_of(s) for s in subjects])
    k = fold_assignment.k
    fold_results: list[FoldResult] = []
    warnings: list[str] = []
    kept_models = [] if keep_models else None
    all_scores, all_labels = [], []
    for f in range(k):
        test = folds == f
        train = ~test
        for name, mask in (("train", train), ("test", test)):
            if len(np.unique(y[mask])) < 2:
                raise DataError(f"fold {f}: {name} portion is missing a class")
        ranked = _select_cell(X[train], y[train], subjects[train], grid,
                              inner_k, _subseed(seed, f), tol, max_passes,
                              warnings, f)
        best, model = None, None
        for cell in ranked:
            try:
                model = train_svm(X[train], y[train], cell, tol=tol,
                                  max_passes=max_passes)
                best = cell
                break
            except ConvergenceError as exc:
                warnings.append(f"outer fold {f}: selected cell {cell} failed "
                                f"on the full training fold ({exc})")
        if model is None:
            raise ConvergenceError(f"outer fold {f}: no grid cell converged")
        scores = model.decision(X[test])
        pred01 = (scores >= 0.0).astype(int)
        report = binary_metrics(((y[test] + 1) // 2), pred01)
        fold_results.append(FoldResult(f, best, report, int(test.sum())))
        if keep_models:
            kept_models.append(model)
        all_scores.append(scores)
        all_labels.append((y[test] + 1) // 2)
    accs = [fr.report.acc for fr in fold_results]
    pooled_scores = np.concatenate(all_scores)
    pooled_labels = np.concatenate(all_labels)
    roc = roc_auc_eer(pooled_scores, pooled_labels)
    return CvResult(
        folds=fold_results,
        selected=_mode_params([fr.params for fr in fold_results]),
        acc_mean=float(np.mean(accs)),
        acc_std=float(np.std(accs)),
        sens_mean=_mean_optional([fr.report.sens for fr in fold_results]),
        spec_mean=_mean_optional([fr.report.spec for fr in fold_results]),
        f1_mean=_mean_optional([fr.report.f1 for fr in fold_results]),
        auc=roc.auc, eer=roc.eer,
        pooled_scores=pooled_scores, pooled_labels=pooled_labels,
        warnings=warnings, models=kept_models,
    )


def _select_cell(X, y, subjects, grid, inner_k, seed, tol, max_passes,
                 warnings, outer_fold) -> list[SvmHyperParams]:
    """Rank grid cells by inner-validation accuracy, best first.

    Ties order toward smaller C then smaller gamma; cells whose every inner
    fit failed rank last and are dropped.
    """
    uniq, first = np.unique(subjects, return_index=True)
    subj_label = {s: y[i] for s, i in zip(uniq, first)}
    per_class = Counter(subj_label.values())
    eff_k = min(inner_k, min(per_class.values()))
    if eff_k < 2:
        raise DataError("too few subjects per class for inner validation")
    inner = split_folds(list(uniq), [subj_label[s] for s in uniq], eff_k, seed)
    inner_folds = np.array([inner.fold_of(s) for s in subjects])
    scores: dict[SvmHyperParams, float] = {}
    for cell in grid:
        accs = []
        for g in range(eff_k):
            val = inner_folds == g
            tr = ~val
            if len(np.unique(y[tr])) < 2 or len(np.unique(y[val])) < 2:
                continue
            try:
                model = train_svm(X[tr], y[tr], cell, tol=tol,
                                  max_passes=max_passes)
            except ConvergenceError as exc:
                warnings.append(
                    f"outer fold {outer_fold}: cell {cell} inner fold {g} "
                    f"failed to converge ({exc})"
                )
                continue
            pred = model.predict(X[val])
            accs.append(float(np.mean(pred == y[val])))
        scores[cell] = float(np.mean(accs)) if accs else -1.0
    if max(scores.values()) < 0:
        raise ConvergenceError("every grid cell failed inner validation")
    return sorted((c for c, a in scores.items() if a >= 0),
                  key=lambda c: (-scores[c], c.sort_key()))


# -- one-vs-all multi-class -----------------------------------------------------

@dataclass
class MultiClassModel:
    classes: tuple
    models: dict

    def decision(self, X) -> np.ndarray:
        return np.stack([self.models[c].decision(X) for c in self.classes])

    def predict(self, X) -> np.ndarray:
        # argmax returns the first maximum: ties break toward the lower class.
        idx = np.argmax(self.decision(X), axis=0)
        return np.array([self.classes[i] for i in idx])


def one_vs_all_train(X, y_multiclass, params: SvmHyperParams,
                     tol: float = 1e-3,
                     max_passes: int | None = None) -> MultiClassModel:
    """One binary SVM per class (that class vs the rest)."""
    y_multiclass = np.asarray(y_multiclass)
    classes = tuple(sorted(set(y_multiclass.tolist())))
    if len(classes) < 2:
        raise DataError("one-vs-all needs at least two classes")
    for c in classes:
        if not np.any(y_multiclass == c):
            raise DataError(f"class {c!r} is empty")
    models = {}
    for c in classes:
        yc = np.where(y_multiclass == c, 1, -1)
        models[c] = train_svm(X, yc, params, tol=tol, max_passes=max_passes)
    return MultiClassModel(classes, models)


@dataclass
class MultiCvResult:
    folds: list
    selected: SvmHyperParams
    acc_mean: float
    acc_std: float
    f1_macro: float
    kappa: float | None
    confusion: ConfusionMatrix
    warnings: list = field(default_factory=list)
    models: list | None = None


def grid_search_cv_multiclass(X, y, subjects, grid,
                              fold_assignment: FoldAssignment, seed: int = 0,
                              inner_k: int = 4, tol: float = 1e-3,
                              max_passes: int | None = None,
                              keep_models: bool = False) -> MultiCvResult:
    """Nested CV for the one-vs-all classifier; confusion pooled over folds."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    subjects = np.asarray(subjects)
    folds = np.array([fold_assignment.fold_of(s) for s in subjects])
    classes = tuple(sorted(set(y.tolist())))
    k = fold_assignment.k
    fold_entries = []
    warnings: list[str] = []
    kept_models = [] if keep_models else None
    y_true_all, y_pred_all = [], []
    for f in range(k):
        test = folds == f
        train = ~test
        for name, mask in (("train", train), ("test", test)):
            if len(set(y[mask].tolist())) < len(classes):
                raise DataError(f"fold {f}: {name} portion is missing a class")
        ranked = _select_cell_multi(X[train], y[train], subjects[train], grid,
                                    inner_k, _subseed(seed, f), tol, max_passes,
                                    warnings, f)
        best, model = None, None
        for cell in ranked:
            try:
                model = one_vs_all_train(X[train], y[train], cell, tol=tol,
                                         max_passes=max_passes)
                best = cell
                break
            except ConvergenceError as exc:
                warnings.append(f"outer fold {f}: selected cell {cell} failed "
                                f"on the full training fold ({exc})")
        if model is None:
            raise ConvergenceError(f"outer fold {f}: no grid cell converged")
        pred = model.predict(X[test])
        acc = 100.0 * float(np.mean(pred == y[test]))
        fold_entries.append({"fold": f, "params": best, "acc": acc,
                             "n_test": int(test.sum())})
        if keep_models:
            kept_models.append(model)
        y_true_all.extend(y[test].tolist())
        y_pred_all.extend(pred.tolist())
    confusion = ConfusionMatrix.from_predictions(y_true_all, y_pred_all, classes)
    accs = [e["acc"] for e in fold_entries]
    return MultiCvResult(
        folds=fold_entries,
        selected=_mode_params([e["params"] for e in fold_entries]),
        acc_mean=float(np.mean(accs)), acc_std=float(np.std(accs)),
        f1_macro=macro_f1(confusion), kappa=cohen_kappa(confusion),
        confusion=confusion, warnings=warnings, models=kept_models,
    )


def _select_cell_multi(X, y, subjects, grid, inner_k, seed, tol, max_passes,
                       warnings, outer_fold) -> list[SvmHyperParams]:
    uniq, first = np.unique(subjects, return_index=True)
    subj_label = {s: y[i] for s, i in zip(uniq, first)}
    per_class = Counter(subj_label.values())
    eff_k = min(inner_k, min(per_class.values()))
    if eff_k < 2:
        raise DataError("too few subjects per class for inner validation")
    inner = split_folds(list(uniq), [subj_label[s] for s in uniq], eff_k, seed)
    inner_folds = np.array([inner.fold_of(s) for s in subjects])
    n_classes = len(set(y.tolist()))
    scores: dict[SvmHyperParams, float] = {}
    for cell in grid:
        accs = []
        for g in range(eff_k):
            val = inner_folds == g
            tr = ~val
            if len(set(y[tr].tolist())) < n_classes:
                continue
            try:
                model = one_vs_all_train(X[tr], y[tr], cell, tol=tol,
                                         max_passes=max_passes)
            except ConvergenceError as exc:
                warnings.append(
                    f"outer fold {outer_fold}: cell {cell} inner fold {g} "
                    f"failed to converge ({exc})"
                )
                continue
            accs.append(float(np.mean(model.predict(X[val]) == y[val])))
        scores[cell] = float(np.mean(accs)) if accs else -1.0
    if max(scores.values()) < 0:
        raise ConvergenceError("every grid cell failed inner validation")
    return sorted((c for c, a in scores.items() if a >= 0),
                  key=lambda c: (-scores[c], c.sort_key()))
