# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; mirrors ``reference.py`` function for function."""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin, sqrt

from ..errors import NumericalFault

BACKEND_NAME = "compiled"
FD_STEP = 1e-6
DEGENERATE_PATH = 1e-9

cdef double _DEGENERATE_PATH = 1e-9

ctypedef cnp.int64_t idx_t


cdef void _fk_into(const double[:, ::1] base, const double[:, ::1] dh,
                   const double* q, double[:, :, ::1] frames) noexcept nogil:
    cdef Py_ssize_t nrows = dh.shape[0]
    cdef Py_ssize_t r, i, j, iq
    cdef double theta, d, a, alpha, ct, st, ca, sa
    cdef double ar[3][3]
    cdef double ap[3]
    cdef double rn[3][3]
    cdef double pn[3]
    for i in range(4):
        for j in range(4):
            frames[0, i, j] = base[i, j]
    iq = 0
    for r in range(nrows):
        theta = dh[r, 0]
        if dh[r, 4] != 0.0:
            theta = theta + q[iq]
            iq += 1
        d = dh[r, 1]
        a = dh[r, 2]
        alpha = dh[r, 3]
        ct = cos(theta); st = sin(theta)
        ca = cos(alpha); sa = sin(alpha)
        ar[0][0] = ct; ar[0][1] = -st * ca; ar[0][2] = st * sa
        ar[1][0] = st; ar[1][1] = ct * ca;  ar[1][2] = -ct * sa
        ar[2][0] = 0.0; ar[2][1] = sa;      ar[2][2] = ca
        ap[0] = a * ct; ap[1] = a * st; ap[2] = d
        for i in range(3):
            for j in range(3):
                rn[i][j] = (frames[r, i, 0] * ar[0][j]
                            + frames[r, i, 1] * ar[1][j]
                            + frames[r, i, 2] * ar[2][j])
            pn[i] = (frames[r, i, 0] * ap[0] + frames[r, i, 1] * ap[1]
                     + frames[r, i, 2] * ap[2] + frames[r, i, 3])
        for i in range(3):
            for j in range(3):
                frames[r + 1, i, j] = rn[i][j]
            frames[r + 1, i, 3] = pn[i]
        frames[r + 1, 3, 0] = 0.0
        frames[r + 1, 3, 1] = 0.0
        frames[r + 1, 3, 2] = 0.0
        frames[r + 1, 3, 3] = 1.0


def fk_frames(const double[:, ::1] base, const double[:, ::1] dh, const double[::1] q):
    """World pose of every frame: the base first, then one per DH row."""
    frames = np.empty((dh.shape[0] + 1, 4, 4))
    cdef double[:, :, ::1] fv = frames
    cdef const double* qp = NULL
    if q.shape[0] > 0:
        qp = &q[0]
    _fk_into(base, dh, qp, fv)
    return frames


cdef void _mass_gravity_c(const double[:, ::1] base, const double[:, ::1] dh,
                          const idx_t[::1] var_rows, const idx_t[::1] body_frame,
                          const double[::1] mass, const double[:, ::1] com,
                          const double[:, :, ::1] inertia, const double[::1] gravity,
                          const double* q, double[:, :, ::1] frames,
                          double[:, ::1] D, double[::1] g) noexcept nogil:
    cdef Py_ssize_t n = var_rows.shape[0]
    cdef Py_ssize_t nb = body_frame.shape[0]
    cdef Py_ssize_t b, i, j, k, f
    cdef double c[3]
    cdef double rw[3][3]
    cdef double iw[3][3]
    cdef double tmp[3][3]
    cdef double jv[3][8]
    cdef double jw[3][8]
    cdef double zx, zy, zz, dx, dy, dz, m

    _fk_into(base, dh, q, frames)
    for i in range(n):
        for j in range(n):
            D[i, j] = 0.0
        g[i] = 0.0
    for b in range(nb):
        f = body_frame[b]
        for i in range(3):
            for j in range(3):
                rw[i][j] = frames[f, i, j]
        for i in range(3):
            c[i] = (rw[i][0] * com[b, 0] + rw[i][1] * com[b, 1]
                    + rw[i][2] * com[b, 2] + frames[f, i, 3])
        # iw = rw @ inertia[b] @ rw^T
        for i in range(3):
            for j in range(3):
                tmp[i][j] = (rw[i][0] * inertia[b, 0, j] + rw[i][1] * inertia[b, 1, j]
                             + rw[i][2] * inertia[b, 2, j])
        for i in range(3):
            for j in range(3):
                iw[i][j] = tmp[i][0] * rw[j][0] + tmp[i][1] * rw[j][1] + tmp[i][2] * rw[j][2]
        m = mass[b]
        for i in range(n):
            if var_rows[i] < f:
                zx = frames[var_rows[i], 0, 2]
                zy = frames[var_rows[i], 1, 2]
                zz = frames[var_rows[i], 2, 2]
                dx = c[0] - frames[var_rows[i], 0, 3]
                dy = c[1] - frames[var_rows[i], 1, 3]
                dz = c[2] - frames[var_rows[i], 2, 3]
                jv[0][i] = zy * dz - zz * dy
                jv[1][i] = zz * dx - zx * dz
                jv[2][i] = zx * dy - zy * dx
                jw[0][i] = zx
                jw[1][i] = zy
                jw[2][i] = zz
            else:
                jv[0][i] = 0.0; jv[1][i] = 0.0; jv[2][i] = 0.0
                jw[0][i] = 0.0; jw[1][i] = 0.0; jw[2][i] = 0.0
        for i in range(n):
            for j in range(n):
                D[i, j] += m * (jv[0][i] * jv[0][j] + jv[1][i] * jv[1][j] + jv[2][i] * jv[2][j])
                D[i, j] += (jw[0][i] * (iw[0][0] * jw[0][j] + iw[0][1] * jw[1][j] + iw[0][2] * jw[2][j])
                            + jw[1][i] * (iw[1][0] * jw[0][j] + iw[1][1] * jw[1][j] + iw[1][2] * jw[2][j])
                            + jw[2][i] * (iw[2][0] * jw[0][j] + iw[2][1] * jw[1][j] + iw[2][2] * jw[2][j]))
            g[i] -= m * (jv[0][i] * gravity[0] + jv[1][i] * gravity[1] + jv[2][i] * gravity[2])


def dynamics_terms(const double[:, ::1] base, const double[:, ::1] dh,
                   const idx_t[::1] var_rows, const idx_t[::1] body_frame,
                   const double[::1] mass, const double[:, ::1] com,
                   const double[:, :, ::1] inertia, const double[::1] gravity,
                   const double[::1] q, const double[::1] qdot, double h=FD_STEP):
    """(D, C, g) with C from Christoffel symbols of central differences of D."""
    cdef Py_ssize_t n = q.shape[0]
    if n > 8:
        raise NumericalFault("compiled backend supports at most 8 DOF")
    D = np.empty((n, n))
    C = np.empty((n, n))
    g = np.empty(n)
    dD = np.empty((n, n, n))
    frames = np.empty((dh.shape[0] + 1, 4, 4))
    qs = np.empty(n)
    Dp = np.empty((n, n))
    Dm = np.empty((n, n))
    gs = np.empty(n)
    cdef double[:, ::1] Dv = D
    cdef double[:, ::1] Cv = C
    cdef double[::1] gv = g
    cdef double[:, :, ::1] dDv = dD
    cdef double[:, :, ::1] fv = frames
    cdef double[::1] qsv = qs
    cdef double[:, ::1] Dpv = Dp
    cdef double[:, ::1] Dmv = Dm
    cdef double[::1] gsv = gs
    cdef Py_ssize_t i, j, k
    cdef double acc
    with nogil:
        _mass_gravity_c(base, dh, var_rows, body_frame, mass, com, inertia, gravity,
                        &q[0], fv, Dv, gv)
        for k in range(n):
            for i in range(n):
                qsv[i] = q[i]
            qsv[k] = q[k] + h
            _mass_gravity_c(base, dh, var_rows, body_frame, mass, com, inertia, gravity,
                            &qsv[0], fv, Dpv, gsv)
            qsv[k] = q[k] - h
            _mass_gravity_c(base, dh, var_rows, body_frame, mass, com, inertia, gravity,
                            &qsv[0], fv, Dmv, gsv)
            for i in range(n):
                for j in range(n):
                    dDv[k, i, j] = (Dpv[i, j] - Dmv[i, j]) / (2.0 * h)
        # C[k, j] = 1/2 sum_i (dD_kj/dq_i + dD_ki/dq_j - dD_ij/dq_k) qdot_i
        for k in range(n):
            for j in range(n):
                acc = 0.0
                for i in range(n):
                    acc += (dDv[i, k, j] + dDv[j, k, i] - dDv[k, i, j]) * qdot[i]
                Cv[k, j] = 0.5 * acc
    return D, C, g


def potential_energy(const double[:, ::1] base, const double[:, ::1] dh,
                     const idx_t[::1] body_frame, const double[::1] mass,
                     const double[:, ::1] com, const double[::1] gravity,
                     const double[::1] q):
    """Sum over bodies of -m * dot(gravity, com_world)."""
    frames = np.empty((dh.shape[0] + 1, 4, 4))
    cdef double[:, :, ::1] fv = frames
    cdef const double* qp = NULL
    if q.shape[0] > 0:
        qp = &q[0]
    cdef Py_ssize_t b, i, f
    cdef double pe = 0.0
    cdef double c[3]
    with nogil:
        _fk_into(base, dh, qp, fv)
        for b in range(body_frame.shape[0]):
            f = body_frame[b]
            for i in range(3):
                c[i] = (fv[f, i, 0] * com[b, 0] + fv[f, i, 1] * com[b, 1]
                        + fv[f, i, 2] * com[b, 2] + fv[f, i, 3])
            pe -= mass[b] * (gravity[0] * c[0] + gravity[1] * c[1] + gravity[2] * c[2])
    return pe


cdef inline double _tendon_one(double slack, double fmax, double eps_ref,
                               double eps_toe, double S, double* dphi_dS) noexcept nogil:
    cdef double eps = (S - slack) / slack
    cdef double K = fmax / (eps_ref - 0.5 * eps_toe)
    cdef double phi
    if eps <= 0.0:
        phi = 0.0
        dphi_dS[0] = 0.0
    elif eps < eps_toe:
        phi = 0.5 * K * (eps * eps) / eps_toe
        dphi_dS[0] = (K * eps / eps_toe) / slack
    else:
        phi = K * (eps - 0.5 * eps_toe)
        dphi_dS[0] = K / slack
    return phi


def tendon_forces(const double[::1] slack, const double[::1] fmax,
                  const double[::1] eps_ref, const double[::1] eps_toe,
                  const double[::1] S):
    """Piecewise-C1 tendon law; returns (phi, dphi_dS), both per muscle."""
    cdef Py_ssize_t m = S.shape[0]
    phi = np.empty(m)
    dphi = np.empty(m)
    cdef double[::1] pv = phi
    cdef double[::1] dv = dphi
    cdef Py_ssize_t j
    cdef double d
    for j in range(m):
        pv[j] = _tendon_one(slack[j], fmax[j], eps_ref[j], eps_toe[j], S[j], &d)
        dv[j] = d
    return phi, dphi


cdef int _muscle_pass(const double[:, :, ::1] frames, const idx_t[::1] var_rows,
                      const idx_t[::1] o_frame, const double[:, ::1] o_pt,
                      const idx_t[::1] i_frame, const double[:, ::1] i_pt,
                      const double* phi, double* L, double[:, ::1] J,
                      double* tau, bint want_jac) noexcept nogil:
    """Shared geometry sweep; returns the index of a degenerate muscle or -1.

    Fills L (if non-NULL), J (if want_jac), and accumulates cross-product
    torques into tau (if non-NULL) using the supplied tendon forces.
    """
    cdef Py_ssize_t mcount = o_frame.shape[0]
    cdef Py_ssize_t n = var_rows.shape[0]
    cdef Py_ssize_t j, i, fo, fi, r
    cdef double po[3]
    cdef double pi[3]
    cdef double dvec[3]
    cdef double u[3]
    cdef double z[3]
    cdef double rel[3]
    cdef double cr[3]
    cdef double lj, acc, invl, f
    if tau != NULL:
        for i in range(n):
            tau[i] = 0.0
    for j in range(mcount):
        fo = o_frame[j]
        fi = i_frame[j]
        for i in range(3):
            po[i] = (frames[fo, i, 0] * o_pt[j, 0] + frames[fo, i, 1] * o_pt[j, 1]
                     + frames[fo, i, 2] * o_pt[j, 2] + frames[fo, i, 3])
            pi[i] = (frames[fi, i, 0] * i_pt[j, 0] + frames[fi, i, 1] * i_pt[j, 1]
                     + frames[fi, i, 2] * i_pt[j, 2] + frames[fi, i, 3])
            dvec[i] = po[i] - pi[i]
        lj = sqrt(dvec[0] * dvec[0] + dvec[1] * dvec[1] + dvec[2] * dvec[2])
        if lj < _DEGENERATE_PATH:
            return <int>j
        invl = 1.0 / lj
        for i in range(3):
            u[i] = dvec[i] * invl
        if L != NULL:
            L[j] = lj
        if want_jac:
            for i in range(n):
                r = var_rows[i]
                z[0] = frames[r, 0, 2]; z[1] = frames[r, 1, 2]; z[2] = frames[r, 2, 2]
                acc = 0.0
                if r < fo:
                    rel[0] = po[0] - frames[r, 0, 3]
                    rel[1] = po[1] - frames[r, 1, 3]
                    rel[2] = po[2] - frames[r, 2, 3]
                    cr[0] = z[1] * rel[2] - z[2] * rel[1]
                    cr[1] = z[2] * rel[0] - z[0] * rel[2]
                    cr[2] = z[0] * rel[1] - z[1] * rel[0]
                    acc += u[0] * cr[0] + u[1] * cr[1] + u[2] * cr[2]
                if r < fi:
                    rel[0] = pi[0] - frames[r, 0, 3]
                    rel[1] = pi[1] - frames[r, 1, 3]
                    rel[2] = pi[2] - frames[r, 2, 3]
                    cr[0] = z[1] * rel[2] - z[2] * rel[1]
                    cr[1] = z[2] * rel[0] - z[0] * rel[2]
                    cr[2] = z[0] * rel[1] - z[1] * rel[0]
                    acc -= u[0] * cr[0] + u[1] * cr[1] + u[2] * cr[2]
                J[j, i] = acc
        # Torque stays on the cross-product route: axis . ((P - o) x F) per
        # joint-dependent endpoint, with F the tension on that endpoint.
        f = phi[j]
        if tau != NULL and f != 0.0:
            for i in range(n):
                r = var_rows[i]
                z[0] = frames[r, 0, 2]; z[1] = frames[r, 1, 2]; z[2] = frames[r, 2, 2]
                if r < fo:
                    rel[0] = po[0] - frames[r, 0, 3]
                    rel[1] = po[1] - frames[r, 1, 3]
                    rel[2] = po[2] - frames[r, 2, 3]
                    cr[0] = rel[1] * u[2] - rel[2] * u[1]
                    cr[1] = rel[2] * u[0] - rel[0] * u[2]
                    cr[2] = rel[0] * u[1] - rel[1] * u[0]
                    tau[i] -= f * (z[0] * cr[0] + z[1] * cr[1] + z[2] * cr[2])
                if r < fi:
                    rel[0] = pi[0] - frames[r, 0, 3]
                    rel[1] = pi[1] - frames[r, 1, 3]
                    rel[2] = pi[2] - frames[r, 2, 3]
                    cr[0] = rel[1] * u[2] - rel[2] * u[1]
                    cr[1] = rel[2] * u[0] - rel[0] * u[2]
                    cr[2] = rel[0] * u[1] - rel[1] * u[0]
                    tau[i] += f * (z[0] * cr[0] + z[1] * cr[1] + z[2] * cr[2])
    return -1


def muscle_eval(const double[:, ::1] base, const double[:, ::1] dh,
                const idx_t[::1] var_rows, const idx_t[::1] o_frame,
                const double[:, ::1] o_pt, const idx_t[::1] i_frame,
                const double[:, ::1] i_pt, const double[::1] slack,
                const double[::1] fmax, const double[::1] eps_ref,
                const double[::1] eps_toe, const double[::1] q, const double[::1] S):
    """One-pass muscle geometry and actuation at (q, S); see reference."""
    cdef Py_ssize_t mcount = o_frame.shape[0]
    cdef Py_ssize_t n = var_rows.shape[0]
    L = np.empty(mcount)
    J = np.zeros((mcount, n))
    tau = np.empty(n)
    phi = np.empty(mcount)
    frames = np.empty((dh.shape[0] + 1, 4, 4))
    cdef double[::1] Lv = L
    cdef double[:, ::1] Jv = J
    cdef double[::1] tv = tau
    cdef double[::1] pv = phi
    cdef double[:, :, ::1] fv = frames
    cdef Py_ssize_t j
    cdef double d
    cdef int bad
    cdef const double* qp = NULL
    cdef double* taup = NULL
    if q.shape[0] > 0:
        qp = &q[0]
    if n > 0:
        taup = &tv[0]
    with nogil:
        _fk_into(base, dh, qp, fv)
        for j in range(mcount):
            pv[j] = _tendon_one(slack[j], fmax[j], eps_ref[j], eps_toe[j], S[j], &d)
        bad = _muscle_pass(fv, var_rows, o_frame, o_pt, i_frame, i_pt,
                           &pv[0], &Lv[0], Jv, taup, True)
    if bad >= 0:
        raise NumericalFault(f"degenerate muscle path (index {bad}): attachments coincide")
    return L, J, phi, tau


def torque_jacobians(const double[:, ::1] base, const double[:, ::1] dh,
                     const idx_t[::1] var_rows, const idx_t[::1] o_frame,
                     const double[:, ::1] o_pt, const idx_t[::1] i_frame,
                     const double[:, ::1] i_pt, const double[::1] slack,
                     const double[::1] fmax, const double[::1] eps_ref,
                     const double[::1] eps_toe, const double[::1] q,
                     const double[::1] S, double h=FD_STEP):
    """(dtau/dq, dtau/dS): FD over q; analytic -J^T diag(dphi/dS) over S."""
    cdef Py_ssize_t mcount = o_frame.shape[0]
    cdef Py_ssize_t n = q.shape[0]
    if n > 8:
        raise NumericalFault("compiled backend supports at most 8 DOF")
    if n == 0:
        return np.empty((0, 0)), np.empty((0, mcount))
    J = np.zeros((mcount, n))
    phi = np.empty(mcount)
    dphi = np.empty(mcount)
    dtau_dq = np.empty((n, n))
    dtau_dS = np.empty((n, mcount))
    frames = np.empty((dh.shape[0] + 1, 4, 4))
    qs = np.empty(n)
    cdef double[:, ::1] Jv = J
    cdef double[::1] pv = phi
    cdef double[::1] dv = dphi
    cdef double[:, ::1] dqv = dtau_dq
    cdef double[:, ::1] dSv = dtau_dS
    cdef double[:, :, ::1] fv = frames
    cdef double[::1] qsv = qs
    cdef double tp[8]
    cdef double tm[8]
    cdef Py_ssize_t i, j, k
    cdef double d
    cdef int bad = -1
    with nogil:
        _fk_into(base, dh, &q[0], fv)
        for j in range(mcount):
            pv[j] = _tendon_one(slack[j], fmax[j], eps_ref[j], eps_toe[j], S[j], &d)
            dv[j] = d
        bad = _muscle_pass(fv, var_rows, o_frame, o_pt, i_frame, i_pt,
                           &pv[0], NULL, Jv, NULL, True)
        if bad < 0:
            for i in range(n):
                for j in range(mcount):
                    dSv[i, j] = -Jv[j, i] * dv[j]
            for k in range(n):
                for i in range(n):
                    qsv[i] = q[i]
                qsv[k] = q[k] + h
                _fk_into(base, dh, &qsv[0], fv)
                bad = _muscle_pass(fv, var_rows, o_frame, o_pt, i_frame, i_pt,
                                   &pv[0], NULL, Jv, &tp[0], False)
                if bad >= 0:
                    break
                qsv[k] = q[k] - h
                _fk_into(base, dh, &qsv[0], fv)
                bad = _muscle_pass(fv, var_rows, o_frame, o_pt, i_frame, i_pt,
                                   &pv[0], NULL, Jv, &tm[0], False)
                if bad >= 0:
                    break
                for i in range(n):
                    dqv[i, k] = (tp[i] - tm[i]) / (2.0 * h)
    if bad >= 0:
        raise NumericalFault(f"degenerate muscle path (index {bad}): attachments coincide")
    return dtau_dq, dtau_dS
