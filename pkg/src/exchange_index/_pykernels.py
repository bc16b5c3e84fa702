"""Pure-Python (numpy) kernels.  Same signatures and status codes as ``_ckernels``.

All kernels take the uniform CES parametrization of an economy: ``coef[i, j]``
is ``share_ij ** sigma_i`` (Cobb-Douglas: the weight, with ``sigma_i = 1``), so
demand is ``x_ij = W_i coef_ij p_j**-sigma_i / sum_k coef_ik p_k**(1 - sigma_i)``.
"""
import numpy as np

OK = 0
NO_CONVERGENCE = 1
LEFT_DOMAIN = 2
BRANCH_LOST = 3

_ARMIJO = 1e-4
_MAX_BACKTRACKS = 60


def _demands(coef, sigma, omega, p):
    W = omega @ p
    num = coef * np.exp(-sigma[:, None] * np.log(p)[None, :])
    x = (W / (num @ p))[:, None] * num
    return x, W


def excess_demand(coef, sigma, omega, p):
    x, _ = _demands(coef, sigma, omega, p)
    return x.sum(axis=0) - omega.sum(axis=0)


def _jac_from(x, W, sigma, omega, p):
    m = p.size - 1
    xt = x[:, :m]
    J = -np.diag((sigma[:, None] * xt).sum(axis=0) / p[:m])
    J -= np.einsum("i,ij,ik->jk", (1.0 - sigma) / W, xt, xt)
    J += np.einsum("ij,ik->jk", xt / W[:, None], omega[:, :m])
    return J


def excess_jacobian(coef, sigma, omega, p):
    x, W = _demands(coef, sigma, omega, p)
    return _jac_from(x, W, sigma, omega, p)


def _residual(coef, sigma, omega, p):
    return excess_demand(coef, sigma, omega, p)[:-1]


def newton(coef, sigma, omega, p0, tol, max_iter, backtrack, floor):
    """Damped Newton on the truncated excess demand.

    Returns ``(p, residual_inf, iterations, status)``.
    """
    p = np.array(p0, dtype=float)
    m = p.size - 1
    F = _residual(coef, sigma, omega, p)
    res = np.max(np.abs(F))
    it = 0
    while True:
        if not np.isfinite(res):
            return p, res, it, NO_CONVERGENCE
        if res < tol:
            # one polishing step, kept only if it does not hurt
            try:
                dq = np.linalg.solve(excess_jacobian(coef, sigma, omega, p), -F)
                cand = p.copy()
                cand[:m] += dq
                if np.all(cand[:m] >= floor):
                    Fc = _residual(coef, sigma, omega, cand)
                    rc = np.max(np.abs(Fc))
                    if rc <= res:
                        p, res = cand, rc
            except np.linalg.LinAlgError:
                pass
            return p, res, it, OK
        if it >= max_iter:
            return p, res, it, NO_CONVERGENCE
        it += 1
        try:
            dq = np.linalg.solve(excess_jacobian(coef, sigma, omega, p), -F)
        except np.linalg.LinAlgError:
            return p, res, it, NO_CONVERGENCE
        if not np.all(np.isfinite(dq)):
            return p, res, it, NO_CONVERGENCE
        f2 = F @ F
        t = 1.0
        seen_positive = False
        for _ in range(_MAX_BACKTRACKS):
            cand = p.copy()
            cand[:m] += t * dq
            if np.all(cand[:m] >= floor):
                seen_positive = True
                Fc = _residual(coef, sigma, omega, cand)
                if np.all(np.isfinite(Fc)) and Fc @ Fc <= (1.0 - _ARMIJO * t) ** 2 * f2:
                    break
            t *= backtrack
        else:
            return p, res, it, (NO_CONVERGENCE if seen_positive else LEFT_DOMAIN)
        p, F = cand, Fc
        res = np.max(np.abs(F))


def continuation(coef, sigma, omega0, omega1, p_star, steps, tol, max_iter, backtrack, floor, trust):
    """Track the equilibrium price along the segment omega0 -> omega1.

    Each sub-step uses a tangent predictor and a Newton corrector; the corrector
    may not move farther than ``trust`` times the predictor displacement.
    Returns ``(p, residual_inf, failed_step, status)``; ``failed_step`` is 0 on success.
    """
    p = np.array(p_star, dtype=float)
    m = p.size - 1
    d = (omega1 - omega0) / steps
    res = 0.0
    for k in range(1, steps + 1):
        om_prev = omega0 + (k - 1) * d
        om_k = omega1 if k == steps else omega0 + k * d
        x, W = _demands(coef, sigma, om_prev, p)
        J = _jac_from(x, W, sigma, om_prev, p)
        dz = (x[:, :m] / W[:, None]).T @ (om_k - om_prev) @ p - (om_k - om_prev).sum(axis=0)[:m]
        try:
            dp = np.linalg.solve(J, -dz)
        except np.linalg.LinAlgError:
            return p, res, k, BRANCH_LOST
        pred = p.copy()
        pred[:m] += dp
        if not np.all(pred[:m] >= floor):
            return p, res, k, BRANCH_LOST
        p_new, res, _, status = newton(coef, sigma, om_k, pred, tol, max_iter, backtrack, floor)
        if status != OK:
            return p, res, k, BRANCH_LOST
        radius = trust * np.max(np.abs(dp)) + 1e-8 * (1.0 + np.max(np.abs(p)))
        if np.max(np.abs(p_new - pred)) > radius:
            return p, res, k, BRANCH_LOST
        p = p_new
    return p, res, 0, OK
