"""Regression surrogates for the homogenized membrane law.

Three model families map the membrane strain vector
``e = (E11, E22, 2 E12)`` to the stress vector ``s = (S11, S22, S12)``:

* linear: ``s = C_l e`` with symmetric ``C_l``;
* quadratic: ``s = C_q phi(e)`` over the 9-entry feature list
  ``(e1, e2, e3, e1^2, e2^2, e3^2, e3 e2, e3 e2, e1 e2)`` (the duplicated
  feature is kept; the pivoted least squares puts the minimum-norm split
  on the redundant direction);
* neural-corrected: ``s = C_l e + N(e)`` with a one-hidden-layer MLP
  correction trained by L-BFGS, optionally with the shear-weighted loss.

The shear weight is deduced from the data as
``w = RMS(S11 and S22 columns) / RMS(S12 column)``.
"""

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import RankDeficientData, ZeroShearColumn
from .optimize import lbfgs_minimize


# -- model containers -------------------------------------------------------


@dataclass
class LinearModel:
    c_l: np.ndarray  # (3, 3) symmetric, Pa

    kind = "linear"

    def predict(self, e):
        return self.c_l @ np.asarray(e, dtype=float)

    def predict_batch(self, e):
        return np.asarray(e, dtype=float) @ self.c_l.T

    def tangent(self, e=None):
        return self.c_l.copy()

    def operation_count(self):
        return 15  # 9 multiplies + 6 adds of a 3x3 matvec


def quadratic_features(e):
    e = np.atleast_2d(np.asarray(e, dtype=float))
    e1, e2, e3 = e[:, 0], e[:, 1], e[:, 2]
    return np.stack(
        [e1, e2, e3, e1**2, e2**2, e3**2, e3 * e2, e3 * e2, e1 * e2], axis=1
    )


@dataclass
class QuadraticModel:
    c_q: np.ndarray  # (3, 9), Pa

    kind = "quadratic"

    def predict(self, e):
        return (quadratic_features(e) @ self.c_q.T)[0]

    def predict_batch(self, e):
        return quadratic_features(e) @ self.c_q.T

    def tangent(self, e):
        e1, e2, e3 = np.asarray(e, dtype=float)
        dphi = np.zeros((9, 3))
        dphi[0, 0] = dphi[1, 1] = dphi[2, 2] = 1.0
        dphi[3, 0] = 2 * e1
        dphi[4, 1] = 2 * e2
        dphi[5, 2] = 2 * e3
        dphi[6, 1], dphi[6, 2] = e3, e2
        dphi[7, 1], dphi[7, 2] = e3, e2
        dphi[8, 0], dphi[8, 1] = e2, e1
        return self.c_q @ dphi

    def operation_count(self):
        return 51  # 27 multiplies + 24 adds of a 3x9 matvec


@dataclass
class NnModel:
    """Linear model with a one-hidden-layer MLP correction."""

    c_l: np.ndarray
    w1: np.ndarray  # (H, 3)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (3, H)
    b2: np.ndarray  # (3,)
    activation: str = "relu"
    shear_weight: float = 1.0
    reg_lambda: float = 1e-4
    seed: int = 0
    training_stats: dict = field(default_factory=dict)

    kind = "nn_corrected"

    @property
    def hidden(self):
        return self.w1.shape[0]

    def _act(self, z):
        if self.activation == "relu":
            return np.maximum(z, 0.0)
        return np.tanh(z)

    def _act_right_derivative(self, z):
        # constitutive tangent convention: right derivative at the kink
        if self.activation == "relu":
            return (z >= 0.0).astype(float)
        t = np.tanh(z)
        return 1.0 - t * t

    def predict(self, e):
        e = np.asarray(e, dtype=float)
        h = self._act(self.w1 @ e + self.b1)
        return self.c_l @ e + self.w2 @ h + self.b2

    def predict_batch(self, e):
        e = np.asarray(e, dtype=float)
        h = self._act(e @ self.w1.T + self.b1)
        return e @ self.c_l.T + h @ self.w2.T + self.b2

    def tangent(self, e):
        z = self.w1 @ np.asarray(e, dtype=float) + self.b1
        return self.c_l + (self.w2 * self._act_right_derivative(z)) @ self.w1

    def operation_count(self):
        h = self.hidden
        # layer 1: 3H mult + 2H add + H bias; activation: H;
        # layer 2: 3H mult + 3(H-1) add + 3 bias; linear part: 15
        return (3 * h + 2 * h + h) + h + (3 * h + 3 * (h - 1) + 3) + 15


# -- fitting ----------------------------------------------------------------


def fit_linear(dataset):
    """Least squares over the six free entries of the symmetric matrix."""
    e, s = dataset.strains, dataset.stresses
    n = len(e)
    if n < 6:
        raise RankDeficientData("need at least 6 records for the linear fit")
    a = np.zeros((3 * n, 6))
    # unknowns: (C11, C22, C33, C12, C13, C23)
    a[0::3, 0] = e[:, 0]
    a[0::3, 3] = e[:, 1]
    a[0::3, 4] = e[:, 2]
    a[1::3, 1] = e[:, 1]
    a[1::3, 3] = e[:, 0]
    a[1::3, 5] = e[:, 2]
    a[2::3, 2] = e[:, 2]
    a[2::3, 4] = e[:, 0]
    a[2::3, 5] = e[:, 1]
    rhs = s.reshape(-1)
    theta, _, rank, _ = np.linalg.lstsq(a, rhs, rcond=None)
    if rank < 6:
        raise RankDeficientData(
            f"linear design matrix rank {rank} < 6; data does not span"
        )
    c11, c22, c33, c12, c13, c23 = theta
    c_l = np.array([[c11, c12, c13], [c12, c22, c23], [c13, c23, c33]])
    return LinearModel(c_l)


def fit_quadratic(dataset):
    """Row-wise least squares on the 9-entry feature map.

    The duplicated feature makes the design matrix rank-deficient by one;
    the SVD-based solve returns the minimum-norm coefficients, splitting
    the shared coefficient evenly across the twin columns.
    """
    e, s = dataset.strains, dataset.stresses
    if len(e) < 27:
        raise RankDeficientData("need at least 27 records for the quadratic fit")
    phi = quadratic_features(e)
    c_q = np.empty((3, 9))
    for row in range(3):
        coef, _, rank, _ = np.linalg.lstsq(phi, s[:, row], rcond=None)
        if rank < 8:
            raise RankDeficientData(
                f"quadratic design rank {rank} < 8; strain sampling degenerate"
            )
        c_q[row] = coef
    return QuadraticModel(c_q)


def compute_shear_weight(dataset):
    """Scaling weight w = RMS(S11 and S22) / RMS(S12)."""
    s = dataset.stresses
    axial = np.concatenate([s[:, 0], s[:, 1]])
    rms_axial = np.sqrt(np.mean(axial**2))
    rms_shear = np.sqrt(np.mean(s[:, 2] ** 2))
    if rms_shear == 0.0:
        warnings.warn("shear column is identically zero; using w = 1",
                      category=UserWarning)
        return 1.0
    return rms_axial / rms_shear


@dataclass(frozen=True)
class NnConfig:
    hidden: int = 20
    activation: str = "relu"  # "relu" | "tanh"
    weighted: bool = True
    reg_lambda: float = 1e-4
    seed: int = 0
    max_iter: int = 2000
    memory: int = 10
    grad_tol: float = 1e-8

    def __post_init__(self):
        if self.hidden <= 0:
            raise ValueError("hidden width must be positive")
        if self.activation not in ("relu", "tanh"):
            raise ValueError("activation must be 'relu' or 'tanh'")


def _xavier_init(rng, fan_out, fan_in):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def _pack(w1, b1, w2, b2):
    return np.concatenate([w1.ravel(), b1, w2.ravel(), b2])


def _unpack(theta, hidden):
    i = 0
    w1 = theta[i:i + 3 * hidden].reshape(hidden, 3)
    i += 3 * hidden
    b1 = theta[i:i + hidden]
    i += hidden
    w2 = theta[i:i + 3 * hidden].reshape(3, hidden)
    i += 3 * hidden
    b2 = theta[i:i + 3]
    return w1, b1, w2, b2


def nn_loss_and_grad(theta, e, s, c_l, config, weight):
    """Weighted squared loss and its reverse-mode gradient.

    The ReLU subgradient at the kink is taken as 0, so the training loss
    gradient is exactly the limit from the negative side.
    """
    hidden = config.hidden
    w1, b1, w2, b2 = _unpack(theta, hidden)
    n = e.shape[0]
    omega2 = np.array([1.0, 1.0, weight**2])

    z = e @ w1.T + b1  # (n, H)
    if config.activation == "relu":
        a = np.maximum(z, 0.0)
        dact = (z > 0.0).astype(float)
    else:
        a = np.tanh(z)
        dact = 1.0 - a * a
    pred = e @ c_l.T + a @ w2.T + b2
    r = pred - s
    loss = float(np.sum(r * r @ omega2)) + config.reg_lambda * float(theta @ theta)

    dp = 2.0 * r * omega2  # (n, 3)
    dw2 = dp.T @ a + 2.0 * config.reg_lambda * w2
    db2 = dp.sum(axis=0) + 2.0 * config.reg_lambda * b2
    da = dp @ w2
    dz = da * dact
    dw1 = dz.T @ e + 2.0 * config.reg_lambda * w1
    db1 = dz.sum(axis=0) + 2.0 * config.reg_lambda * b1
    grad = _pack(dw1, db1, dw2, db2)
    del n
    return loss, grad


def fit_nn(dataset, config=None):
    """Train the NN-corrected model: prefit C_l, freeze it, fit the MLP.

    Deterministic given the seed (Xavier-uniform initialization); training
    uses L-BFGS (memory 10) with a strong-Wolfe line search and terminates
    on ``||g|| <= grad_tol (1 + |loss|)`` or the iteration cap.
    """
    config = config or NnConfig()
    c_l = fit_linear(dataset).c_l
    weight = compute_shear_weight(dataset) if config.weighted else 1.0

    rng = np.random.default_rng(config.seed)
    w1 = _xavier_init(rng, config.hidden, 3)
    b1 = np.zeros(config.hidden)
    w2 = _xavier_init(rng, 3, config.hidden)
    b2 = np.zeros(3)
    theta0 = _pack(w1, b1, w2, b2)

    e, s = dataset.strains, dataset.stresses

    def fun_grad(theta):
        return nn_loss_and_grad(theta, e, s, c_l, config, weight)

    result = lbfgs_minimize(
        fun_grad,
        theta0,
        memory=config.memory,
        max_iter=config.max_iter,
        grad_tol=config.grad_tol,
    )
    w1, b1, w2, b2 = _unpack(result.x, config.hidden)
    if result.flag == "line_search_failure":
        warnings.warn("NN training line search failed; best iterate kept",
                      category=UserWarning)
    return NnModel(
        c_l=c_l,
        w1=w1,
        b1=b1,
        w2=w2,
        b2=b2,
        activation=config.activation,
        shear_weight=weight,
        reg_lambda=config.reg_lambda,
        seed=config.seed,
        training_stats={
            "final_loss": result.fun,
            "grad_norm": result.grad_norm,
            "iterations": result.iterations,
            "n_evals": result.n_evals,
            "flag": result.flag,
            "weighted": config.weighted,
        },
    )


# -- evaluation and reporting ------------------------------------------------


def evaluate_model(model, e):
    """Stress prediction for one strain vector."""
    return model.predict(e)


def error_report(model, dataset):
    """Relative L2 errors per stress component and stacked total.

    Columns with zero reference norm are flagged and reported as NaN.
    """
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    pred = model.predict_batch(dataset.strains)
    true = dataset.stresses
    report = {"flags": []}
    names = ("S11", "S22", "S12")
    for k, name in enumerate(names):
        denom = np.linalg.norm(true[:, k])
        if denom == 0.0:
            report[name] = float("nan")
            report["flags"].append(f"zero-norm column {name}")
            continue
        report[name] = float(np.linalg.norm(pred[:, k] - true[:, k]) / denom)
    total_denom = np.linalg.norm(true)
    if total_denom == 0.0:
        report["total"] = float("nan")
        report["flags"].append("zero-norm dataset")
    else:
        report["total"] = float(np.linalg.norm(pred - true) / total_denom)
    return report


def report_table(reports):
    """Plain-text table of error reports: {model name: report dict}."""
    cols = list(reports.keys())
    rows = ["total", "S11", "S22", "S12"]
    width = max(12, *(len(c) + 2 for c in cols))
    out = ["model".ljust(8) + "".join(c.rjust(width) for c in cols)]
    for row in rows:
        cells = "".join(
            f"{100.0 * reports[c][row]:.2f}%".rjust(width) for c in cols
        )
        out.append(row.ljust(8) + cells)
    return "\n".join(out)


# -- persistence -------------------------------------------------------------


def model_to_json(model):
    doc = {"type": model.kind}
    if model.kind == "linear":
        doc["C_l"] = model.c_l.tolist()
    elif model.kind == "quadratic":
        doc["C_q"] = model.c_q.tolist()
    else:
        doc.update(
            {
                "C_l": model.c_l.tolist(),
                "mlp": {
                    "H": model.hidden,
                    "activation": model.activation,
                    "W1": model.w1.tolist(),
                    "b1": model.b1.tolist(),
                    "W2": model.w2.tolist(),
                    "b2": model.b2.tolist(),
                },
                "w": model.shear_weight,
                "lambda": model.reg_lambda,
                "seed": model.seed,
                "training_stats": model.training_stats,
            }
        )
    return json.dumps(doc, indent=1)


def model_from_json(text):
    doc = json.loads(text)
    kind = doc["type"]
    if kind == "linear":
        return LinearModel(np.asarray(doc["C_l"], dtype=float))
    if kind == "quadratic":
        return QuadraticModel(np.asarray(doc["C_q"], dtype=float))
    if kind == "nn_corrected":
        mlp = doc["mlp"]
        return NnModel(
            c_l=np.asarray(doc["C_l"], dtype=float),
            w1=np.asarray(mlp["W1"], dtype=float),
            b1=np.asarray(mlp["b1"], dtype=float),
            w2=np.asarray(mlp["W2"], dtype=float),
            b2=np.asarray(mlp["b2"], dtype=float),
            activation=mlp["activation"],
            shear_weight=doc.get("w", 1.0),
            reg_lambda=doc.get("lambda", 0.0),
            seed=doc.get("seed", 0),
            training_stats=doc.get("training_stats", {}),
        )
    raise ValueError(f"unknown model type {kind!r}")


def save_model(model, path):
    with open(path, "w") as fh:
        fh.write(model_to_json(model))


def load_model(path):
    with open(path) as fh:
        return model_from_json(fh.read())


class SurrogateLaw:
    """Membrane-law adapter: a fitted model as a constitutive law."""

    def __init__(self, model):
        self.model = model
        self.last_iterations = 0

    def stress(self, e):
        return self.model.predict(e)

    def stress_batch(self, e):
        return self.model.predict_batch(e)

    def tangent3(self, e):
        return self.model.tangent(np.asarray(e, dtype=float))

    def clone(self):
        return SurrogateLaw(self.model)
