"""
Risk probes and reference solutions

Excess risk is measured against the exact minimizer of a quadratic
objective: either the ERM (or ridge) minimizer of the complete pre-mask
sample, or the population minimizer of the Gaussian linear model. Both
make traces nonnegative; the population reference shares no noise with
the SGD stream.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .errors import InvalidData, SingularError

logger = logging.getLogger(__name__)

ERM_CONVENTION = "erm_minimizer_on_complete_data"
POPULATION_CONVENTION = "population_minimizer"
REFERENCE_CONVENTIONS = {"erm": ERM_CONVENTION, "population": POPULATION_CONVENTION}


def _check_design(X: np.ndarray, y: np.ndarray) -> tuple:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.shape[0] == 0:
        raise InvalidData("Risk of an empty sample is undefined")
    if X.shape[0] != y.shape[0]:
        raise InvalidData(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
    return X, y


def empirical_risk(X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> float:
    """(1/n) sum_i (<X_i, beta> - y_i)^2 / 2"""
    X, y = _check_design(X, y)
    residual = X @ np.asarray(beta, dtype=np.float64) - y
    return float(residual @ residual) / (2.0 * X.shape[0])


def ols_reference(X: np.ndarray, y: np.ndarray, lam: float = 0.0) -> np.ndarray:
    """
    Exact minimizer of R_n(beta) + lam ||beta||^2

    Args:
        X: (n, d) complete design
        y: Responses
        lam: Ridge weight (>= 0)

    Returns:
        Solution of (X^T X / n + 2 lam I) beta = X^T y / n
    """
    X, y = _check_design(X, y)
    if lam < 0:
        raise InvalidData(f"Ridge weight must be >= 0, got {lam}")
    n, d = X.shape
    gram = X.T @ X / n + 2.0 * lam * np.eye(d)
    if lam == 0 and np.linalg.matrix_rank(X) < d:
        raise SingularError("Design is rank deficient; use lam > 0 for a unique reference")
    try:
        return np.linalg.solve(gram, X.T @ y / n)
    except np.linalg.LinAlgError as e:
        raise SingularError(f"Normal equations are singular ({e}); try lam > 0") from e


@dataclass(frozen=True, eq=False)
class RiskProbe:
    """
    Quadratic objective 1/2 b^T G b - b^T m + lam ||b||^2 plus its minimizer

    For a complete sample G = X^T X / n and m = X^T y / n; for the Gaussian
    linear model G = Sigma and m = Sigma beta*.
    """
    gram: np.ndarray
    moment: np.ndarray
    reference_beta: np.ndarray
    reference_risk: float
    lam: float = 0.0
    convention: str = ERM_CONVENTION

    @classmethod
    def from_complete(cls, X: np.ndarray, y: np.ndarray, lam: float = 0.0) -> 'RiskProbe':
        """Solve for the ERM (or ridge) minimizer of a complete sample and build the probe"""
        X, y = _check_design(X, y)
        beta_ref = ols_reference(X, y, lam)
        objective = empirical_risk(X, y, beta_ref) + lam * float(beta_ref @ beta_ref)
        n = X.shape[0]
        probe = cls(X.T @ X / n, X.T @ y / n, beta_ref, objective, lam, ERM_CONVENTION)
        grad_norm = float(np.linalg.norm(probe.objective_gradient(beta_ref)))
        if grad_norm > 1e-8 * (1.0 + np.linalg.norm(y)):
            logger.warning(f"Reference minimizer gradient norm {grad_norm:.3g} is not small")
        return probe

    @classmethod
    def from_population(cls, sigma: np.ndarray, beta_star: np.ndarray, lam: float = 0.0,
                        noise_var: float = 1.0) -> 'RiskProbe':
        """
        Probe on the population risk of y = <x, beta*> + eps, x ~ N(0, Sigma)

        The reference is beta* itself when lam == 0 and the population ridge
        solution (Sigma + 2 lam I)^-1 Sigma beta* otherwise. Independent of
        any sample, so the trace carries no overfitting of the stream.

        Raises:
            InvalidData: non-square Sigma, mismatched beta*, lam < 0
            SingularError: singular Sigma with lam == 0
        """
        sigma = np.atleast_2d(np.asarray(sigma, dtype=np.float64))
        beta_star = np.asarray(beta_star, dtype=np.float64).reshape(-1)
        d = beta_star.shape[0]
        if sigma.shape != (d, d):
            raise InvalidData(f"Sigma has shape {sigma.shape}, expected ({d}, {d})")
        if lam < 0:
            raise InvalidData(f"Ridge weight must be >= 0, got {lam}")
        moment = sigma @ beta_star
        try:
            beta_ref = np.linalg.solve(sigma + 2.0 * lam * np.eye(d), moment)
        except np.linalg.LinAlgError as e:
            raise SingularError(f"Population covariance is singular ({e}); try lam > 0") from e
        delta = beta_ref - beta_star
        objective = 0.5 * noise_var + 0.5 * float(delta @ sigma @ delta) + lam * float(beta_ref @ beta_ref)
        return cls(sigma, moment, beta_ref, objective, lam, POPULATION_CONVENTION)

    def objective_gradient(self, beta: np.ndarray) -> np.ndarray:
        return self.gram @ beta - self.moment + 2.0 * self.lam * beta

    def __call__(self, beta: np.ndarray) -> float:
        return excess_risk(self, beta)


def excess_risk(probe: RiskProbe, beta: np.ndarray) -> float:
    """
    Objective at beta minus its minimum

    Evaluated as 1/2 delta^T G delta + lam ||delta||^2 with
    delta = beta - reference_beta, which equals the objective difference
    because the gradient vanishes at the reference.
    """
    delta = np.asarray(beta, dtype=np.float64) - probe.reference_beta
    return 0.5 * float(delta @ probe.gram @ delta) + probe.lam * float(delta @ delta)


def population_excess_risk(sigma: np.ndarray, beta: np.ndarray, beta_star: np.ndarray) -> float:
    """R(beta) - R(beta*) = 1/2 (beta - beta*)^T Sigma (beta - beta*) for the linear model"""
    delta = np.asarray(beta, dtype=np.float64) - np.asarray(beta_star, dtype=np.float64)
    return 0.5 * float(delta @ sigma @ delta)


def predict(X: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """y_hat = X beta"""
    return np.atleast_2d(np.asarray(X, dtype=np.float64)) @ np.asarray(beta, dtype=np.float64)


def relative_prediction_error(y_hat: np.ndarray, y: np.ndarray) -> float:
    """||y_hat - y||^2 / ||y||^2"""
    y_hat = np.asarray(y_hat, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y_hat.shape != y.shape:
        raise InvalidData(f"Prediction length {y_hat.shape[0]} differs from target length {y.shape[0]}")
    denom = float(y @ y)
    if denom == 0.0:
        raise InvalidData("Relative error is undefined for a zero-norm target")
    diff = y_hat - y
    return float(diff @ diff) / denom
