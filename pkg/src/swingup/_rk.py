"""Compiled Dormand-Prince 5(4) integrator for rotating-frame Lindblad dynamics.

State is a complex n x n density matrix. Output times are hit exactly by
the step sequence rather than interpolated, so stored states are genuine
integrator states. The drive is a piecewise cubic
(complex) on a uniform knot grid and vanishes outside it. Status codes:
0 ok, 1 step-size underflow, 2 invariant violation, 3 too many steps.
"""

import numba as nb
import numpy as np

# Dormand-Prince tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.zeros((7, 7))
_A[1, 0] = 1 / 5
_A[2, :2] = [3 / 40, 9 / 40]
_A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
_A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
_A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
_A[6, :6] = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]
_B5 = _A[6].copy()
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

OK, UNDERFLOW, INVARIANT, MAXSTEPS = 0, 1, 2, 3


@nb.njit(cache=True)
def drive_at(t, t0, dt, coef):
    nseg = coef.shape[1]
    x = (t - t0) / dt
    if x < 0.0 or x > nseg:
        return 0j
    i = int(x)
    if i >= nseg:
        i = nseg - 1
    s = t - (t0 + i * dt)
    return ((coef[0, i] * s + coef[1, i]) * s + coef[2, i]) * s + coef[3, i]


@nb.njit(cache=True)
def lindblad_rhs(t, rho, out, oi, oj, ri, rj, vals, up, lo, dip, w, t0, dt, coef):
    """Interaction picture of the drive-free Hamiltonian: the dissipator as a
    sparse superoperator, the drive commutator on transitions only, each
    carrying its phase exp(i w t)."""
    n = rho.shape[0]
    for i in range(n):
        for j in range(n):
            out[i, j] = 0j
    for q in range(vals.shape[0]):
        out[oi[q], oj[q]] += vals[q] * rho[ri[q], rj[q]]
    om = drive_at(t, t0, dt, coef)
    if om == 0j:
        return
    for m in range(up.shape[0]):
        # -i [g |u><l| + g* |l><u|, rho]
        ph = np.exp(1j * w[m] * t)
        g = -0.5j * dip[m] * om * ph
        gc = -0.5j * dip[m] * np.conj(om * ph)
        u = up[m]
        l = lo[m]
        for j in range(n):
            out[u, j] += g * rho[l, j]
            out[l, j] += gc * rho[u, j]
        for i in range(n):
            out[i, l] -= rho[i, u] * g
            out[i, u] -= rho[i, l] * gc


@nb.njit(cache=True)
def _err_norm(y, ynew, err, rtol, atol):
    n = y.shape[0]
    s = 0.0
    for i in range(n):
        for j in range(n):
            sc_r = atol + rtol * max(abs(y[i, j].real), abs(ynew[i, j].real))
            sc_i = atol + rtol * max(abs(y[i, j].imag), abs(ynew[i, j].imag))
            s += (err[i, j].real / sc_r) ** 2 + (err[i, j].imag / sc_i) ** 2
    return np.sqrt(s / (2 * n * n))


@nb.njit(cache=True)
def dopri5(rho0, t_start, t_end, rtol, atol, h_init, h_max, t_out,
           oi, oj, ri, rj, vals, up, lo, dip, w, t0, dt, coef, inv_tol, max_steps, t_log):
    """Integrate from t_start to t_end, writing states at sorted ``t_out``.

    Accepted step end times are written to ``t_log`` while it has room.

    Returns (status, n_accepted, n_rejected, states, final, max_trace_dev,
    max_herm_dev).
    """
    n = rho0.shape[0]
    A = _A
    B5 = _B5
    E = _E
    C = _C
    k = np.zeros((7, n, n), dtype=np.complex128)
    y = rho0.copy()
    ynew = np.zeros((n, n), dtype=np.complex128)
    ytmp = np.zeros((n, n), dtype=np.complex128)
    err = np.zeros((n, n), dtype=np.complex128)
    nout = t_out.shape[0]
    states = np.zeros((nout, n, n), dtype=np.complex128)
    iout = 0
    while iout < nout and t_out[iout] <= t_start:
        states[iout] = y
        iout += 1

    tr0 = 0j
    for i in range(n):
        tr0 += y[i, i]
    max_tr = 0.0
    max_herm = 0.0

    t = t_start
    span = t_end - t_start
    h_prop = min(h_init, h_max, span)
    h_min = 1e-13 * max(abs(t_end), abs(t_start), span)
    lindblad_rhs(t, y, k[0], oi, oj, ri, rj, vals, up, lo, dip, w, t0, dt, coef)
    n_acc = 0
    n_rej = 0
    status = 0
    while t < t_end:
        if n_acc + n_rej >= max_steps:
            status = 3
            break
        if h_prop < h_min:
            status = 1
            break
        h = h_prop
        last = False
        hit = False
        if t + h >= t_end:
            h = t_end - t
            last = True
        if iout < nout and t_out[iout] < t_end and t + h >= t_out[iout]:
            h = t_out[iout] - t
            hit = True
            last = False
        for s in range(1, 7):
            for i in range(n):
                for j in range(n):
                    acc = y[i, j]
                    for r in range(s):
                        if A[s, r] != 0.0:
                            acc += h * A[s, r] * k[r, i, j]
                    ytmp[i, j] = acc
            lindblad_rhs(t + C[s] * h, ytmp, k[s], oi, oj, ri, rj, vals, up, lo, dip, w, t0, dt, coef)
        # stage 7 was evaluated at y + h*sum(B5 k) = ynew (FSAL)
        for i in range(n):
            for j in range(n):
                ynew[i, j] = ytmp[i, j]
                e = 0j
                for r in range(7):
                    e += E[r] * k[r, i, j]
                err[i, j] = h * e
        en = _err_norm(y, ynew, err, rtol, atol)
        if en <= 1.0:
            tn = t + h
            if hit:
                states[iout] = ynew
                iout += 1
            tr = 0j
            hm = 0.0
            for i in range(n):
                tr += ynew[i, i]
                for j in range(i, n):
                    d = abs(ynew[i, j] - np.conj(ynew[j, i]))
                    if d > hm:
                        hm = d
            dtr = abs(tr - tr0)
            if dtr > max_tr:
                max_tr = dtr
            if hm > max_herm:
                max_herm = hm
            y[:, :] = ynew
            k[0] = k[6]
            t = tn
            if n_acc < t_log.shape[0]:
                t_log[n_acc] = t_end if last else tn
            n_acc += 1
            if dtr > inv_tol[0] or hm > inv_tol[1]:
                status = 2
                break
            if last:
                t = t_end
                break
            fac = 5.0 if en == 0.0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
            # a step shortened to land on an output time keeps the old proposal
            h_prop = min(max(h * fac, h_prop) if hit else h * fac, h_max)
        else:
            n_rej += 1
            h_prop = h * max(0.2, 0.9 * en ** -0.2)
    while iout < nout and status == 0:
        states[iout] = y
        iout += 1
    return status, n_acc, n_rej, states, y, max_tr, max_herm


@nb.njit(cache=True)
def _axpy(y, a, x, out):
    n = y.shape[0]
    for i in range(n):
        for j in range(n):
            out[i, j] = y[i, j] + a * x[i, j]


@nb.njit(cache=True)
def rk4_fixed(rho0, t_start, t_end, nsteps, oi, oj, ri, rj, vals, up, lo, dip, w, t0, dt, coef):
    """Classic fixed-step RK4; the reference path for oracle comparisons."""
    n = rho0.shape[0]
    k1 = np.zeros((n, n), dtype=np.complex128)
    k2 = np.zeros_like(k1)
    k3 = np.zeros_like(k1)
    k4 = np.zeros_like(k1)
    tmp = np.zeros_like(k1)
    y = rho0.copy()
    h = (t_end - t_start) / nsteps
    for step in range(nsteps):
        t = t_start + step * h
        lindblad_rhs(t, y, k1, oi, oj, ri, rj, vals, up, lo, dip, w, t0, dt, coef)
        _axpy(y, h / 2, k1, tmp)
        lindblad_rhs(t + h / 2, tmp, k2, oi, oj, ri, rj, vals, up, lo, dip, w, t0, dt, coef)
        _axpy(y, h / 2, k2, tmp)
        lindblad_rhs(t + h / 2, tmp, k3, oi, oj, ri, rj, vals, up, lo, dip, w, t0, dt, coef)
        _axpy(y, h, k3, tmp)
        lindblad_rhs(t + h, tmp, k4, oi, oj, ri, rj, vals, up, lo, dip, w, t0, dt, coef)
        for i in range(n):
            for j in range(n):
                y[i, j] += h / 6 * (k1[i, j] + 2 * k2[i, j] + 2 * k3[i, j] + k4[i, j])
    return y


@nb.njit(cache=True)
def rk4_mesh(rho0, mesh, refine, oi, oj, ri, rj, vals, up, lo, dip, w, t0, dt, coef):
    """RK4 over ``mesh`` with each interval split into ``refine`` equal steps."""
    n = rho0.shape[0]
    k1 = np.zeros((n, n), dtype=np.complex128)
    k2 = np.zeros_like(k1)
    k3 = np.zeros_like(k1)
    k4 = np.zeros_like(k1)
    tmp = np.zeros_like(k1)
    y = rho0.copy()
    for m in range(mesh.shape[0] - 1):
        h = (mesh[m + 1] - mesh[m]) / refine
        for step in range(refine):
            t = mesh[m] + step * h
            lindblad_rhs(t, y, k1, oi, oj, ri, rj, vals, up, lo, dip, w, t0, dt, coef)
            _axpy(y, h / 2, k1, tmp)
            lindblad_rhs(t + h / 2, tmp, k2, oi, oj, ri, rj, vals, up, lo, dip, w, t0, dt, coef)
            _axpy(y, h / 2, k2, tmp)
            lindblad_rhs(t + h / 2, tmp, k3, oi, oj, ri, rj, vals, up, lo, dip, w, t0, dt, coef)
            _axpy(y, h, k3, tmp)
            lindblad_rhs(t + h, tmp, k4, oi, oj, ri, rj, vals, up, lo, dip, w, t0, dt, coef)
            for i in range(n):
                for j in range(n):
                    y[i, j] += h / 6 * (k1[i, j] + 2 * k2[i, j] + 2 * k3[i, j] + k4[i, j])
    return y
