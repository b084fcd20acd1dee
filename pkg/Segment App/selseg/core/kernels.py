"""Relaxation and analysis kernels compiled with ``numba``.

All sweeps work in place on a float64 level set indexed ``[i, j]``. Ghost
cells mirror the boundary pixel, so a coefficient pointing out of the grid
couples the pixel to itself and is folded into the diagonal.

Kernels report failures through an integer status: ``-1`` on success,
otherwise the flat index ``i*m + j`` of the offending pixel.
"""

import numba as nb
import numpy as np

# fastmath stays off: sweeps must be bit-reproducible
_numba_setting = {'nogil': True, 'fastmath': False, 'cache': True}

# Labels of the four neighbour couplings
LAG_A, LAG_B, LAG_C, LAG_D = 0, 1, 2, 3
NO_LAG = -1

_TINY = 1e-300


@nb.njit(**_numba_setting)
def heaviside(phi, eps):
    return 0.5 + np.arctan(phi / eps) / np.pi


@nb.njit(**_numba_setting)
def delta(phi, eps):
    return eps / (np.pi * (eps * eps + phi * phi))


@nb.njit(**_numba_setting)
def delta_prime(phi, eps):
    t = eps * eps + phi * phi
    return -2.0 * eps * phi / (np.pi * t * t)


# -- local coefficient refresh ------------------------------------------------

@nb.njit(**_numba_setting)
def _cell_weight(phi, weight, p, q, hx, hy, eps_grad):
    n, m = phi.shape
    pe = min(p + 1, n - 1)
    pw = max(p - 1, 0)
    qn = min(q + 1, m - 1)
    qs = max(q - 1, 0)
    gx = (phi[pe, q] - phi[pw, q]) / (2.0 * hx)
    gy = (phi[p, qn] - phi[p, qs]) / (2.0 * hy)
    return weight[p, q] / np.sqrt(gx * gx + gy * gy + eps_grad * eps_grad)


@nb.njit(**_numba_setting)
def pixel_coefficients(phi, weight, i, j, mu, eps, hx, hy, eps_grad):
    """Coefficients ``(A, B, C, D)`` of pixel ``(i, j)`` from the current ``phi``."""
    n, m = phi.shape
    g0 = _cell_weight(phi, weight, i, j, hx, hy, eps_grad)
    ge = _cell_weight(phi, weight, min(i + 1, n - 1), j, hx, hy, eps_grad)
    gw = _cell_weight(phi, weight, max(i - 1, 0), j, hx, hy, eps_grad)
    gn = _cell_weight(phi, weight, i, min(j + 1, m - 1), hx, hy, eps_grad)
    gs = _cell_weight(phi, weight, i, max(j - 1, 0), hx, hy, eps_grad)
    scale = mu * delta(phi[i, j], eps)
    a = scale * 0.5 * (g0 + ge) / (hx * hx)
    b = scale * 0.5 * (g0 + gw) / (hx * hx)
    c = scale * 0.5 * (g0 + gn) / (hy * hy)
    d = scale * 0.5 * (g0 + gs) / (hy * hy)
    return a, b, c, d


@nb.njit(**_numba_setting)
def _refresh_pixel(phi, A, B, C, D, S, f, weight, fit, area_term, fas_rhs,
                   i, j, mu, eps, hx, hy, eps_grad):
    a, b, c, d = pixel_coefficients(phi, weight, i, j, mu, eps, hx, hy, eps_grad)
    A[i, j] = a
    B[i, j] = b
    C[i, j] = c
    D[i, j] = d
    S[i, j] = a + b + c + d
    f[i, j] = delta(phi[i, j], eps) * (fit[i, j] + area_term) + fas_rhs[i, j]


@nb.njit(**_numba_setting)
def _neighbour_sum(phi, a, b, c, d, s, i, j):
    """Sum of ``coef * phi`` over in-grid neighbours and the folded diagonal."""
    n, m = phi.shape
    acc = 0.0
    diag = s
    if i + 1 < n:
        acc += a * phi[i + 1, j]
    else:
        diag -= a
    if i > 0:
        acc += b * phi[i - 1, j]
    else:
        diag -= b
    if j + 1 < m:
        acc += c * phi[i, j + 1]
    else:
        diag -= c
    if j > 0:
        acc += d * phi[i, j - 1]
    else:
        diag -= d
    return acc, diag


@nb.njit(**_numba_setting)
def _traversal(order, o, k, n, m):
    """Pixel visited at outer step ``o`` and inner step ``k`` of ``order``.

    0: columns i ascending, j ascending; 1: i descending, j descending;
    2: rows j ascending, i ascending; 3: j descending, i descending.
    """
    if order == 0:
        return o, k
    if order == 1:
        return n - 1 - o, m - 1 - k
    if order == 2:
        return k, o
    return n - 1 - k, m - 1 - o


# -- direct solvers -----------------------------------------------------------

@nb.njit(**_numba_setting)
def thomas(lower, diag, upper, rhs, out, work):
    """Tridiagonal solve; ``lower[0]`` and ``upper[-1]`` are ignored."""
    n = diag.shape[0]
    den = diag[0]
    if den == 0.0 or not np.isfinite(den):
        return 0
    work[0] = upper[0] / den if n > 1 else 0.0
    out[0] = rhs[0] / den
    for k in range(1, n):
        den = diag[k] - lower[k] * work[k - 1]
        if den == 0.0 or not np.isfinite(den):
            return k
        work[k] = upper[k] / den if k < n - 1 else 0.0
        out[k] = (rhs[k] - lower[k] * out[k - 1]) / den
    for k in range(n - 2, -1, -1):
        out[k] -= work[k] * out[k + 1]
    return -1


@nb.njit(**_numba_setting)
def arrow4(mat, rhs, out):
    """Solve a 4x4 arrow system (dense first row and column, diagonal rest)."""
    pivot = mat[0, 0]
    top = rhs[0]
    for k in range(1, 4):
        if mat[k, k] == 0.0:
            return k
        pivot -= mat[0, k] * mat[k, 0] / mat[k, k]
        top -= mat[0, k] * rhs[k] / mat[k, k]
    if pivot == 0.0 or not np.isfinite(pivot):
        return 0
    out[0] = top / pivot
    for k in range(1, 4):
        out[k] = (rhs[k] - mat[k, 0] * out[0]) / mat[k, k]
    return -1


# -- standard smoothers -------------------------------------------------------

@nb.njit(**_numba_setting)
def gslex(phi, A, B, C, D, S, f, order, local, weight, fit, area_term, fas_rhs,
          mu, eps, hx, hy, eps_grad):
    """Lexicographic Gauss-Seidel (GSLEX-I, or GSLEX-II when ``local``)."""
    n, m = phi.shape
    outer = n if order < 2 else m
    inner = m if order < 2 else n
    for o in range(outer):
        for k in range(inner):
            i, j = _traversal(order, o, k, n, m)
            if local:
                _refresh_pixel(phi, A, B, C, D, S, f, weight, fit, area_term, fas_rhs,
                               i, j, mu, eps, hx, hy, eps_grad)
            acc, diag = _neighbour_sum(phi, A[i, j], B[i, j], C[i, j], D[i, j], S[i, j], i, j)
            if not diag > _TINY:
                return i * m + j
            phi[i, j] = (acc - f[i, j]) / diag
    return -1


@nb.njit(**_numba_setting)
def _line_solve_x(phi, A, B, C, D, S, f, j, lower, diag, upper, rhs, out, work):
    """Solve all pixels of row ``j`` together (coupled along i)."""
    n, m = phi.shape
    for i in range(n):
        a = A[i, j]
        b = B[i, j]
        c = C[i, j]
        d = D[i, j]
        dg = -S[i, j]
        r = f[i, j]
        if i == 0:
            dg += b
        if i == n - 1:
            dg += a
        if j + 1 < m:
            r -= c * phi[i, j + 1]
        else:
            dg += c
        if j > 0:
            r -= d * phi[i, j - 1]
        else:
            dg += d
        lower[i] = b
        upper[i] = a
        diag[i] = dg
        rhs[i] = r
    status = thomas(lower, diag, upper, rhs, out, work)
    if status >= 0:
        return status * m + j
    for i in range(n):
        phi[i, j] = out[i]
    return -1


@nb.njit(**_numba_setting)
def gsline(phi, A, B, C, D, S, f, local, weight, fit, area_term, fas_rhs,
           mu, eps, hx, hy, eps_grad):
    """Line Gauss-Seidel with lines along i, rows taken in increasing j."""
    n, m = phi.shape
    lower = np.empty(n)
    diag = np.empty(n)
    upper = np.empty(n)
    rhs = np.empty(n)
    out = np.empty(n)
    work = np.empty(n)
    for j in range(m):
        if local:
            for i in range(n):
                _refresh_pixel(phi, A, B, C, D, S, f, weight, fit, area_term, fas_rhs,
                               i, j, mu, eps, hx, hy, eps_grad)
        status = _line_solve_x(phi, A, B, C, D, S, f, j, lower, diag, upper, rhs, out, work)
        if status >= 0:
            return status
    return -1


@nb.njit(**_numba_setting)
def _newton_residual(value, diag, p_term, two_nu, hxhy, others, area_target, eps):
    area = hxhy * (others + heaviside(value, eps)) - area_target
    return diag * value - p_term + two_nu * delta(value, eps) * area


@nb.njit(**_numba_setting)
def newton(phi, A, B, C, D, S, fit, fas_rhs, local, weight, mu, eps, hx, hy, eps_grad,
           two_nu, area_target, h_sum, status):
    """Pointwise Newton (NEWT-I, or NEWT-II when ``local``).

    The area sum is kept current as pixels change. ``status`` receives the
    failing pixel (or -1) and the number of damped updates; the final area
    sum is returned.
    """
    n, m = phi.shape
    hxhy = hx * hy
    status[0] = -1
    status[1] = 0
    for i in range(n):
        for j in range(m):
            if local:
                a, b, c, d = pixel_coefficients(phi, weight, i, j, mu, eps, hx, hy, eps_grad)
                A[i, j] = a
                B[i, j] = b
                C[i, j] = c
                D[i, j] = d
                S[i, j] = a + b + c + d
            acc, diag = _neighbour_sum(phi, A[i, j], B[i, j], C[i, j], D[i, j], S[i, j], i, j)
            if not diag > _TINY:
                status[0] = i * m + j
                return h_sum
            p = phi[i, j]
            dl = delta(p, eps)
            p_term = acc - (dl * fit[i, j] + fas_rhs[i, j])
            h_old = heaviside(p, eps)
            others = h_sum - h_old
            area = hxhy * h_sum - area_target
            q = two_nu * dl * area
            dq = two_nu * (dl * dl * hxhy + delta_prime(p, eps) * area)
            den = diag + dq
            if den > 1e-12 * diag:
                new = (p_term - q + dq * p) / den
            else:
                # Picard direction, halved until the local residual drops
                r0 = abs(_newton_residual(p, diag, p_term, two_nu, hxhy, others, area_target, eps))
                step = (diag * p - p_term + q) / diag
                t = 1.0
                new = p
                for _ in range(30):
                    cand = p - t * step
                    r = abs(_newton_residual(cand, diag, p_term, two_nu, hxhy, others,
                                             area_target, eps))
                    if r < r0:
                        new = cand
                        break
                    t *= 0.5
                status[1] += 1
            if not np.isfinite(new):
                status[0] = i * m + j
                return h_sum
            phi[i, j] = new
            h_sum = others + heaviside(new, eps)
    return h_sum


# -- hybrid smoothers ---------------------------------------------------------

@nb.njit(**_numba_setting)
def _known_part(phi, A, B, C, D, S, p, q, skip):
    """In-grid neighbour sum of ``(p, q)`` leaving out direction ``skip``.

    ``skip`` is 0 (E), 1 (W), 2 (N) or 3 (S). Returns the sum and the
    folded diagonal ``S - ghosts``.
    """
    n, m = phi.shape
    acc = 0.0
    diag = S[p, q]
    if p + 1 < n:
        if skip != 0:
            acc += A[p, q] * phi[p + 1, q]
    else:
        diag -= A[p, q]
    if p > 0:
        if skip != 1:
            acc += B[p, q] * phi[p - 1, q]
    else:
        diag -= B[p, q]
    if q + 1 < m:
        if skip != 2:
            acc += C[p, q] * phi[p, q + 1]
    else:
        diag -= C[p, q]
    if q > 0:
        if skip != 3:
            acc += D[p, q] * phi[p, q - 1]
    else:
        diag -= D[p, q]
    return acc, diag


@nb.njit(**_numba_setting)
def arrow_block(phi, A, B, C, D, S, f, i, j, lag, mat, rhs, out):
    """Collective update of pixel ``(i, j)`` and its three unlagged neighbours."""
    n, m = phi.shape
    # neighbour offsets in E, W, N, S order; the coefficient of the centre
    # pixel seen from each neighbour is the opposite direction
    di = (1, -1, 0, 0)
    dj = (0, 0, 1, -1)
    for r in range(4):
        for c in range(4):
            mat[r, c] = 0.0
        rhs[r] = 0.0
    coef = (A[i, j], B[i, j], C[i, j], D[i, j])
    mat[0, 0] = -S[i, j]
    rhs[0] = f[i, j]
    slots = np.full(4, -1)
    slot = 1
    for k in range(4):
        p = i + di[k]
        q = j + dj[k]
        inside = 0 <= p < n and 0 <= q < m
        if not inside:
            mat[0, 0] += coef[k]
            continue
        if k == lag:
            rhs[0] -= coef[k] * phi[p, q]
            continue
        slots[k] = slot
        mat[0, slot] = coef[k]
        # opposite direction: E<->W, N<->S
        back = k + 1 if k % 2 == 0 else k - 1
        acc, diag = _known_part(phi, A, B, C, D, S, p, q, back)
        if back == 0:
            towards = A[p, q]
        elif back == 1:
            towards = B[p, q]
        elif back == 2:
            towards = C[p, q]
        else:
            towards = D[p, q]
        mat[slot, 0] = towards
        mat[slot, slot] = -diag
        rhs[slot] = f[p, q] - acc
        slot += 1
    while slot < 4:
        mat[slot, slot] = 1.0
        slot += 1
    status = arrow4(mat, rhs, out)
    if status >= 0:
        return i * m + j
    phi[i, j] = out[0]
    for k in range(4):
        if slots[k] > 0:
            phi[i + di[k], j + dj[k]] = out[slots[k]]
    return -1


@nb.njit(**_numba_setting)
def hybrid1(phi, A, B, C, D, S, f, in_jump, smallest):
    """GSLINE-I sweep followed by arrow solves on the jump set."""
    n, m = phi.shape
    empty = np.empty((1, 1))
    status = gsline(phi, A, B, C, D, S, f, False, empty, empty, 0.0, empty,
                    0.0, 1.0, 1.0, 1.0, 1.0)
    if status >= 0:
        return status
    mat = np.empty((4, 4))
    rhs = np.empty(4)
    out = np.empty(4)
    for i in range(n):
        for j in range(m):
            if in_jump[i, j]:
                status = arrow_block(phi, A, B, C, D, S, f, i, j, smallest[i, j], mat, rhs, out)
                if status >= 0:
                    return status
    return -1


@nb.njit(**_numba_setting)
def superpixel_runs(smallest, lag):
    """Runs of pixels labelled ``lag`` along the direction coupled by that lag.

    Rows of the result are ``(line_index, start, end)`` with ``start <= end``.
    A and B runs lie along j at fixed i; C and D runs along i at fixed j.
    Single pixels are paired with the next pixel in the traversal direction
    when it exists.
    """
    n, m = smallest.shape
    along_j = lag == LAG_A or lag == LAG_B
    forward = lag == LAG_A or lag == LAG_C
    lines = n if along_j else m
    length = m if along_j else n
    runs = np.empty((n * m, 3), dtype=np.int64)
    count = 0
    # runs are emitted per line in increasing position
    for line in range(lines):
        k = 0
        while k < length:
            i = line if along_j else k
            j = k if along_j else line
            if smallest[i, j] != lag:
                k += 1
                continue
            start = k
            while k + 1 < length:
                ii = line if along_j else k + 1
                jj = k + 1 if along_j else line
                if smallest[ii, jj] != lag:
                    break
                k += 1
            end = k
            if start == end:
                if forward and end + 1 < length:
                    end += 1
                elif not forward and start > 0:
                    start -= 1
            runs[count, 0] = line
            runs[count, 1] = start
            runs[count, 2] = end
            count += 1
            k = end + 1
    return runs[:count]


@nb.njit(**_numba_setting)
def _partial_line(phi, snap, A, B, C, D, S, f, lag, line, start, end,
                  lower, diag, upper, rhs, out, work):
    """Collective solve of one superpixel with the lagged neighbour frozen."""
    n, m = phi.shape
    along_j = lag == LAG_A or lag == LAG_B
    size = end - start + 1
    for t in range(size):
        k = start + t
        i = line if along_j else k
        j = k if along_j else line
        a = A[i, j]
        b = B[i, j]
        c = C[i, j]
        d = D[i, j]
        dg = -S[i, j]
        r = f[i, j]
        if along_j:
            # couplings across the line: E (A) and W (B)
            if i + 1 < n:
                r -= a * (snap[i + 1, j] if lag == LAG_A else phi[i + 1, j])
            else:
                dg += a
            if i > 0:
                r -= b * (snap[i - 1, j] if lag == LAG_B else phi[i - 1, j])
            else:
                dg += b
            up, lo = c, d
            if t == size - 1:
                if j + 1 < m:
                    r -= c * phi[i, j + 1]
                else:
                    dg += c
            if t == 0:
                if j > 0:
                    r -= d * phi[i, j - 1]
                else:
                    dg += d
        else:
            # couplings across the line: N (C) and S (D)
            if j + 1 < m:
                r -= c * (snap[i, j + 1] if lag == LAG_C else phi[i, j + 1])
            else:
                dg += c
            if j > 0:
                r -= d * (snap[i, j - 1] if lag == LAG_D else phi[i, j - 1])
            else:
                dg += d
            up, lo = a, b
            if t == size - 1:
                if i + 1 < n:
                    r -= a * phi[i + 1, j]
                else:
                    dg += a
            if t == 0:
                if i > 0:
                    r -= b * phi[i - 1, j]
                else:
                    dg += b
        lower[t] = lo
        upper[t] = up
        diag[t] = dg
        rhs[t] = r
    status = thomas(lower[:size], diag[:size], upper[:size], rhs[:size], out[:size], work[:size])
    if status >= 0:
        k = start + status
        i = line if along_j else k
        j = k if along_j else line
        return i * m + j
    for t in range(size):
        k = start + t
        if along_j:
            phi[line, k] = out[t]
        else:
            phi[k, line] = out[t]
    return -1


@nb.njit(**_numba_setting)
def hybrid2(phi, A, B, C, D, S, f, smallest, visits, count_visits):
    """Four directional sub-sweeps (lag A, B, C, D) with superpixel line solves.

    Non-starred pixels take the GSLEX-I update in the traversal order of the
    sub-sweep. ``visits[s, i, j]`` counts updates per sub-sweep when
    ``count_visits`` is set.
    """
    n, m = phi.shape
    size = max(n, m)
    lower = np.empty(size)
    diag = np.empty(size)
    upper = np.empty(size)
    rhs = np.empty(size)
    out = np.empty(size)
    work = np.empty(size)
    run_of = np.empty((n, m), dtype=np.int64)
    for lag in range(4):
        snap = phi.copy()
        runs = superpixel_runs(smallest, lag)
        along_j = lag == LAG_A or lag == LAG_B
        run_of[:, :] = -1
        for r in range(runs.shape[0]):
            for k in range(runs[r, 1], runs[r, 2] + 1):
                if along_j:
                    run_of[runs[r, 0], k] = r
                else:
                    run_of[k, runs[r, 0]] = r
        done = np.zeros(runs.shape[0], dtype=np.bool_)
        outer = n if lag < 2 else m
        inner = m if lag < 2 else n
        for o in range(outer):
            for k in range(inner):
                i, j = _traversal(lag, o, k, n, m)
                r = run_of[i, j]
                if r >= 0:
                    if done[r]:
                        continue
                    done[r] = True
                    status = _partial_line(phi, snap, A, B, C, D, S, f, lag, runs[r, 0],
                                           runs[r, 1], runs[r, 2], lower, diag, upper,
                                           rhs, out, work)
                    if status >= 0:
                        return status
                    if count_visits:
                        for t in range(runs[r, 1], runs[r, 2] + 1):
                            if along_j:
                                visits[lag, runs[r, 0], t] += 1
                            else:
                                visits[lag, t, runs[r, 0]] += 1
                    continue
                acc, dg = _neighbour_sum(phi, A[i, j], B[i, j], C[i, j], D[i, j], S[i, j], i, j)
                if not dg > _TINY:
                    return i * m + j
                phi[i, j] = (acc - f[i, j]) / dg
                if count_visits:
                    visits[lag, i, j] += 1
    return -1


# -- local Fourier analysis ---------------------------------------------------

@nb.njit(**_numba_setting)
def amplification(coeffs, lagged, cos1, sin1, cos2, sin2):
    """Largest amplification factor per coefficient row.

    ``coeffs`` rows are ``(A, B, C, D, S)`` and ``lagged`` rows flag which of
    A, B, C, D keep their old value. Phases are ``e^{+i a1}``, ``e^{-i a1}``,
    ``e^{+i a2}``, ``e^{-i a2}`` for A, B, C, D. Returns the maxima, the
    sample index attaining each and the number of skipped singular samples.
    """
    rows = coeffs.shape[0]
    samples = cos1.shape[0]
    rates = np.zeros(rows)
    argmax = np.full(rows, -1, dtype=np.int64)
    singular = np.zeros(rows, dtype=np.int64)
    for r in range(rows):
        a = coeffs[r, 0]
        b = coeffs[r, 1]
        c = coeffs[r, 2]
        d = coeffs[r, 3]
        s = coeffs[r, 4]
        guard = 1e-14 * max(abs(s), a + b + c + d, _TINY)
        best = 0.0
        best_k = -1
        for p in range(samples):
            nr = 0.0
            ni = 0.0
            dr = s
            di = 0.0
            if lagged[r, 0]:
                nr += a * cos1[p]
                ni += a * sin1[p]
            else:
                dr -= a * cos1[p]
                di -= a * sin1[p]
            if lagged[r, 1]:
                nr += b * cos1[p]
                ni -= b * sin1[p]
            else:
                dr -= b * cos1[p]
                di += b * sin1[p]
            if lagged[r, 2]:
                nr += c * cos2[p]
                ni += c * sin2[p]
            else:
                dr -= c * cos2[p]
                di -= c * sin2[p]
            if lagged[r, 3]:
                nr += d * cos2[p]
                ni -= d * sin2[p]
            else:
                dr -= d * cos2[p]
                di += d * sin2[p]
            den = np.hypot(dr, di)
            if den <= guard:
                singular[r] += 1
                continue
            ratio = np.hypot(nr, ni) / den
            if ratio > best:
                best = ratio
                best_k = p
        rates[r] = best
        argmax[r] = best_k
    return rates, argmax, singular
