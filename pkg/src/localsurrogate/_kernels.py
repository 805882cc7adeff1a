"""Compiled inner loops for the local surrogate fit and its scoring.

Everything here works on plain float64 arrays. The Python wrappers in
``surrogate.py`` own validation and result types.
"""

import numpy as np
from numba import njit

VIF_CUTOFF = 10.0
N_FOLDS = 5
N_LAMBDAS = 100
LAMBDA_DECADES = 3.0
CD_TOL = 1e-8
CD_MAX_SWEEPS = 100_000

# relative thresholds for exact collinearity / constant columns
_COLLINEAR_RTOL = 1e-10
_CONST_RTOL = 1e-12
_LSTSQ_RCOND = 1e-12


@njit(cache=True, nogil=True)
def fold_bounds(n, k):
    """Start offsets of k contiguous folds; the first n % k folds get one extra row."""
    q = n // k
    r = n - q * k
    out = np.empty(k + 1, dtype=np.int64)
    out[0] = 0
    for f in range(k):
        out[f + 1] = out[f] + q + (1 if f < r else 0)
    return out


@njit(cache=True, nogil=True)
def center(X, y):
    n, p = X.shape
    xbar = np.zeros(p)
    for i in range(n):
        for j in range(p):
            xbar[j] += X[i, j]
    xbar /= n
    ybar = y.sum() / n
    Xc = np.empty((n, p))
    for i in range(n):
        for j in range(p):
            Xc[i, j] = X[i, j] - xbar[j]
    return Xc, y - ybar, xbar, ybar


@njit(cache=True, nogil=True)
def constant_columns(X, Xc):
    n, p = X.shape
    out = np.zeros(p, dtype=np.bool_)
    for j in range(p):
        scale = 1.0
        dev = 0.0
        for i in range(n):
            a = abs(X[i, j])
            if a > scale:
                scale = a
            d = abs(Xc[i, j])
            if d > dev:
                dev = d
        out[j] = dev <= _CONST_RTOL * scale
    return out


@njit(cache=True, nogil=True)
def _vif_cholesky(G, idx):
    """diag(R^-1) of the correlation matrix, or an empty array if R is near singular."""
    m = len(idx)
    L = np.zeros((m, m))
    for a in range(m):
        for b in range(a + 1):
            s = G[idx[a], idx[b]] / np.sqrt(G[idx[a], idx[a]] * G[idx[b], idx[b]])
            for k in range(b):
                s -= L[a, k] * L[b, k]
            if a == b:
                if s <= 1e-9:
                    return np.empty(0)
                L[a, a] = np.sqrt(s)
            else:
                L[a, b] = s / L[b, b]
    # columns of L^-1 by forward substitution; VIF_k = sum_i (L^-1)_{ik}^2
    out = np.zeros(m)
    col = np.empty(m)
    for k in range(m):
        for i in range(m):
            if i < k:
                col[i] = 0.0
                continue
            s = 1.0 if i == k else 0.0
            for j in range(k, i):
                s -= L[i, j] * col[j]
            col[i] = s / L[i, i]
            out[k] += col[i] * col[i]
    return out


@njit(cache=True, nogil=True)
def vif_values(G, const, active):
    """VIF of every active column given the centered Gram matrix.

    VIF_k = TSS_k / RSS_k from regressing column k (with intercept) on the
    other active columns. Constant and exactly collinear columns get +inf.
    """
    p = G.shape[0]
    idx = np.nonzero(active)[0]
    m = len(idx)
    out = np.full(p, np.nan)
    if m >= 2 and not const[idx].any():
        fast = _vif_cholesky(G, idx)
        if len(fast) == m:
            for a in range(m):
                out[idx[a]] = fast[a]
            return out
    for a in range(m):
        k = idx[a]
        if const[k]:
            out[k] = np.inf
            continue
        gkk = G[k, k]
        others = np.empty(m - 1, dtype=np.int64)
        c = 0
        for b in range(m):
            if b != a:
                others[c] = idx[b]
                c += 1
        if m == 1:
            out[k] = 1.0
            continue
        A = np.empty((m - 1, m - 1))
        rhs = np.empty(m - 1)
        for r in range(m - 1):
            rhs[r] = G[others[r], k]
            for s in range(m - 1):
                A[r, s] = G[others[r], others[s]]
        coef = np.linalg.lstsq(A, rhs, _LSTSQ_RCOND)[0]
        rss = gkk - np.dot(coef, rhs)
        if rss <= _COLLINEAR_RTOL * gkk:
            out[k] = np.inf
        else:
            out[k] = gkk / rss
    return out


@njit(cache=True, nogil=True)
def vif_select(X):
    """Iteratively drop the highest-VIF column while that VIF exceeds the cutoff.

    Returns (kept mask, removal order). Ties go to the later column. Fewer
    than two columns are left alone.
    """
    n, p = X.shape
    Xc = center(X, np.zeros(n))[0]
    const = constant_columns(X, Xc)
    G = Xc.T @ Xc
    active = np.ones(p, dtype=np.bool_)
    removed = np.full(p, -1, dtype=np.int64)
    nrem = 0
    while active.sum() >= 2:
        v = vif_values(G, const, active)
        worst = -1
        best = -1.0
        for j in range(p):
            if active[j] and v[j] >= best:
                best = v[j]
                worst = j
        if best <= VIF_CUTOFF:
            break
        active[worst] = False
        removed[nrem] = worst
        nrem += 1
    return active, removed[:nrem]


@njit(cache=True, nogil=True)
def cd_lasso(G, c, lam, beta, tol, max_sweeps):
    """Cyclic coordinate descent for ||y - X b||^2 + lam ||b||_1 on centered data.

    ``G = X'X`` and ``c = X'y``; ``beta`` is updated in place (warm start).
    Returns the number of sweeps, or -1 when ``max_sweeps`` is exhausted.
    """
    p = len(c)
    half = 0.5 * lam
    grad = np.empty(p)
    for r in range(p):
        acc = c[r]
        for j in range(p):
            acc -= G[r, j] * beta[j]
        grad[r] = acc
    for sweep in range(max_sweeps):
        maxd = 0.0
        for j in range(p):
            gjj = G[j, j]
            old = beta[j]
            if gjj <= 0.0:
                new = 0.0
            else:
                z = grad[j] + gjj * old
                if z > half:
                    new = (z - half) / gjj
                elif z < -half:
                    new = (z + half) / gjj
                else:
                    new = 0.0
            d = new - old
            if d != 0.0:
                beta[j] = new
                for r in range(p):
                    grad[r] -= d * G[r, j]
                if abs(d) > maxd:
                    maxd = abs(d)
        if maxd < tol:
            return sweep + 1
    return -1


@njit(cache=True, nogil=True)
def lambda_grid(lam_max, count, decades):
    out = np.empty(count)
    for i in range(count):
        out[i] = lam_max * 10.0 ** (-decades * i / (count - 1))
    return out


@njit(cache=True, nogil=True)
def lambda_max(Xc, yc):
    return 2.0 * np.max(np.abs(Xc.T @ yc)) if Xc.shape[1] else 0.0


@njit(cache=True, nogil=True)
def _moments(X, y, lo, hi):
    """Count, means, and moments centered at the slice's own means."""
    p = X.shape[1]
    m = hi - lo
    xbar = np.zeros(p)
    ybar = 0.0
    for i in range(lo, hi):
        ybar += y[i]
        for j in range(p):
            xbar[j] += X[i, j]
    xbar /= m
    ybar /= m
    Sxx = np.zeros((p, p))
    Sxy = np.zeros(p)
    Syy = 0.0
    dx = np.empty(p)
    for i in range(lo, hi):
        dy = y[i] - ybar
        Syy += dy * dy
        for j in range(p):
            dx[j] = X[i, j] - xbar[j]
        for j in range(p):
            Sxy[j] += dx[j] * dy
            for k in range(j, p):
                Sxx[j, k] += dx[j] * dx[k]
    for j in range(p):
        for k in range(j):
            Sxx[j, k] = Sxx[k, j]
    return m, xbar, ybar, Sxx, Sxy, Syy


@njit(cache=True, nogil=True)
def lasso_cv_errors(X, y, lambdas, tol, max_sweeps):
    """Per-fold held-out MSE over the lambda path (5 contiguous folds).

    Returns (errors[fold, lambda], status); status -1 means some fit hit
    ``max_sweeps`` and ``errors`` is incomplete.
    """
    n, p = X.shape
    L = len(lambdas)
    bounds = fold_bounds(n, N_FOLDS)
    ms = np.empty(N_FOLDS)
    xbars = np.empty((N_FOLDS, p))
    ybars = np.empty(N_FOLDS)
    Sxxs = np.empty((N_FOLDS, p, p))
    Sxys = np.empty((N_FOLDS, p))
    Syys = np.empty(N_FOLDS)
    for f in range(N_FOLDS):
        m, xb, yb, Sxx, Sxy, Syy = _moments(X, y, bounds[f], bounds[f + 1])
        ms[f] = m
        xbars[f] = xb
        ybars[f] = yb
        Sxxs[f] = Sxx
        Sxys[f] = Sxy
        Syys[f] = Syy

    errors = np.empty((N_FOLDS, L))
    for f in range(N_FOLDS):
        # pool the other folds' moments about the training mean
        mt = 0.0
        xt = np.zeros(p)
        yt = 0.0
        for g in range(N_FOLDS):
            if g != f:
                mt += ms[g]
                xt += ms[g] * xbars[g]
                yt += ms[g] * ybars[g]
        xt /= mt
        yt /= mt
        G = np.zeros((p, p))
        c = np.zeros(p)
        for g in range(N_FOLDS):
            if g == f:
                continue
            dy = ybars[g] - yt
            for j in range(p):
                dxj = xbars[g, j] - xt[j]
                c[j] += Sxys[g, j] + ms[g] * dxj * dy
                for k in range(p):
                    G[j, k] += Sxxs[g, j, k] + ms[g] * dxj * (xbars[g, k] - xt[k])
        beta = np.zeros(p)
        shift_x = xbars[f] - xt
        shift_y = ybars[f] - yt
        for li in range(L):
            if cd_lasso(G, c, lambdas[li], beta, tol, max_sweeps) < 0:
                return errors, -1
            # held-out residual e_i + s with sum(e_i) = 0 inside the fold
            e2 = Syys[f]
            s = shift_y
            for j in range(p):
                bj = beta[j]
                if bj == 0.0:
                    continue
                s -= shift_x[j] * bj
                e2 -= 2.0 * bj * Sxys[f, j]
                for k in range(p):
                    e2 += bj * Sxxs[f, j, k] * beta[k]
            if e2 < 0.0:
                e2 = 0.0
            errors[f, li] = (e2 + ms[f] * s * s) / ms[f]
    return errors, 0


@njit(cache=True, nogil=True)
def one_se_choice(means, ses):
    best = 0
    for i in range(len(means)):
        if means[i] < means[best]:
            best = i
    limit = means[best] + ses[best]
    for i in range(len(means)):
        if means[i] <= limit:
            return i
    return best


@njit(cache=True, nogil=True)
def ols_centered(Xc, yc):
    if Xc.shape[1] == 0:
        return np.zeros(0)
    return np.linalg.lstsq(Xc, yc, -1.0)[0]


@njit(cache=True, nogil=True)
def _failed_fit(p, lambdas, removed):
    z = np.zeros(p)
    return (np.zeros(p, dtype=np.bool_), np.zeros(p, dtype=np.bool_), z, 0.0, lambdas,
            np.zeros(len(lambdas)), np.zeros(len(lambdas)), 0, z.copy(), removed, -1)


@njit(cache=True, nogil=True)
def fit_surrogate(X, y):
    """VIF filter, 5-fold Lasso CV with the one-SE rule, OLS refit.

    Returns (kept, selected, coef, intercept, lambdas, cv_mean, cv_se,
    chosen, lasso_coef, removed, status); coefficient vectors are full width.
    A coordinate descent run that hits the sweep cap aborts the fit with
    status -1 and placeholder outputs.
    """
    n, p = X.shape
    kept, removed = vif_select(X)
    kidx = np.nonzero(kept)[0]
    pk = len(kidx)
    Xk = np.empty((n, pk))
    for j in range(pk):
        Xk[:, j] = X[:, kidx[j]]
    Xc, yc, xbar, ybar = center(Xk, y)

    lam_max = lambda_max(Xc, yc)
    lambdas = lambda_grid(lam_max, N_LAMBDAS, LAMBDA_DECADES)
    status = 0
    if lam_max > 0.0:
        errors, status = lasso_cv_errors(Xk, y, lambdas, CD_TOL, CD_MAX_SWEEPS)
        if status < 0:
            return _failed_fit(p, lambdas, removed)
        cv_mean = np.empty(N_LAMBDAS)
        cv_se = np.empty(N_LAMBDAS)
        for li in range(N_LAMBDAS):
            col = errors[:, li]
            mu = col.mean()
            cv_mean[li] = mu
            cv_se[li] = np.sqrt(((col - mu) ** 2).sum() / (N_FOLDS - 1)) / np.sqrt(N_FOLDS)
        chosen = one_se_choice(cv_mean, cv_se)
    else:
        # nothing to explain: every lambda yields the null model
        cv_mean = np.full(N_LAMBDAS, ((y - ybar) ** 2).mean())
        cv_se = np.zeros(N_LAMBDAS)
        chosen = 0

    G = Xc.T @ Xc
    c = Xc.T @ yc
    beta = np.zeros(pk)
    if lam_max > 0.0:
        for li in range(chosen + 1):
            if cd_lasso(G, c, lambdas[li], beta, CD_TOL, CD_MAX_SWEEPS) < 0:
                return _failed_fit(p, lambdas, removed)

    sel_local = np.nonzero(beta != 0.0)[0]
    Xs = np.empty((n, len(sel_local)))
    for j in range(len(sel_local)):
        Xs[:, j] = Xc[:, sel_local[j]]
    b = ols_centered(Xs, yc)

    coef = np.zeros(p)
    lasso_coef = np.zeros(p)
    selected = np.zeros(p, dtype=np.bool_)
    intercept = ybar
    for j in range(len(sel_local)):
        col = kidx[sel_local[j]]
        coef[col] = b[j]
        selected[col] = True
        intercept -= b[j] * xbar[sel_local[j]]
    for j in range(pk):
        lasso_coef[kidx[j]] = beta[j]
    return (kept, selected, coef, intercept, lambdas, cv_mean, cv_se, chosen,
            lasso_coef, removed, status)


@njit(cache=True, nogil=True)
def agreement_moments(y, yhat):
    """(delta, mu, sigma, scale) for the universal R of ``yhat`` against ``y``.

    sigma is the sample std of the squared residuals (0 when n = 1) and scale
    the second moment mean(y^2) + mean(yhat^2) used for the degeneracy test.
    """
    n = len(y)
    my = 0.0
    mh = 0.0
    delta = 0.0
    scale = 0.0
    for i in range(n):
        r = yhat[i] - y[i]
        my += y[i]
        mh += yhat[i]
        delta += r * r
        scale += y[i] * y[i] + yhat[i] * yhat[i]
    my /= n
    mh /= n
    delta /= n
    scale /= n
    vy = 0.0
    vh = 0.0
    ss = 0.0
    for i in range(n):
        r = yhat[i] - y[i]
        vy += (y[i] - my) ** 2
        vh += (yhat[i] - mh) ** 2
        ss += (r * r - delta) ** 2
    mu = vy / n + vh / n + (mh - my) ** 2
    sigma = np.sqrt(ss / (n - 1)) if n > 1 else 0.0
    return delta, mu, sigma, scale


@njit(cache=True, nogil=True)
def score_prefixes(X, y, sizes):
    """Fit a surrogate on each prefix X[:s] and score its in-sample predictions.

    Returns an (len(sizes), 4) array of agreement moments and a per-size
    status (-1 where the fit did not converge; that row is left as NaN).
    """
    out = np.full((len(sizes), 4), np.nan)
    status = np.zeros(len(sizes), dtype=np.int64)
    for k in range(len(sizes)):
        s = sizes[k]
        Xs = X[:s]
        ys = y[:s]
        res = fit_surrogate(Xs, ys)
        if res[10] < 0:
            status[k] = -1
            continue
        selected, coef, intercept = res[1], res[2], res[3]
        pred = np.full(s, intercept)
        for j in range(X.shape[1]):
            if selected[j]:
                pred += Xs[:, j] * coef[j]
        d, m, sg, sc = agreement_moments(ys, pred)
        out[k, 0] = d
        out[k, 1] = m
        out[k, 2] = sg
        out[k, 3] = sc
    return out, status
