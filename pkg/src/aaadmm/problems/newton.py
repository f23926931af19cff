"""Newton's method for the smooth, strongly convex x-subproblems."""

import numpy as np
import scipy.linalg


class InnerSolverError(RuntimeError):
    """Newton failed to reach the gradient tolerance."""

    def __init__(self, message, gradient_norm):
        super().__init__(message)
        self.gradient_norm = gradient_norm


def newton_inner_solve(gradient, hessian, x0, tol=1e-12, max_iter=50):
    """Minimize a smooth function given its gradient and SPD Hessian.

    Returns the first iterate with ``||gradient(x)|| <= tol``; ``x0`` itself
    when it already qualifies.

    Raises
    ------
    InnerSolverError
        When the Hessian is not positive definite at an iterate or the
        tolerance is not met within ``max_iter`` steps.
    """
    x = np.array(x0, dtype=float)
    g = gradient(x)
    gnorm = float(np.linalg.norm(g))
    for _ in range(max_iter):
        if gnorm <= tol:
            return x
        try:
            step = scipy.linalg.cho_solve(scipy.linalg.cho_factor(hessian(x)), g)
        except np.linalg.LinAlgError as exc:
            raise InnerSolverError(f"Hessian not positive definite ({exc})", gnorm) from exc
        x = x - step
        g = gradient(x)
        gnorm = float(np.linalg.norm(g))
    if gnorm <= tol:
        return x
    raise InnerSolverError(
        f"Newton did not reach gradient norm {tol:g} in {max_iter} iterations "
        f"(last {gnorm:.3g})",
        gnorm,
    )
