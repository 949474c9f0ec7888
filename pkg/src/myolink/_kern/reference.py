"""Pure-numpy kernels: forward kinematics, rigid-body terms, muscle geometry.

This module is the fallback backend and the ground truth for the compiled
backend in ``_speedups.pyx``; both expose the same functions over the same
packed-array arguments (see ``linkage.LinkageModel.packed`` and
``muscle.MuscleSet.packed``).
"""

import numpy as np

from ..errors import NumericalFault

BACKEND_NAME = "reference"

# Central-difference step (rad) used for the Coriolis matrix and the
# torque-position Jacobian. Shared by both backends.
FD_STEP = 1e-6

# Below this separation (m) a muscle path is treated as degenerate.
DEGENERATE_PATH = 1e-9


def _dh_transform(theta, d, a, alpha):
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    return np.array(
        [
            [ct, -st * ca, st * sa, a * ct],
            [st, ct * ca, -ct * sa, a * st],
            [0.0, sa, ca, d],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def fk_frames(base, dh, q):
    """World pose of every frame: the base first, then one per DH row.

    Rows with a nonzero flag in column 4 are revolute and consume the next
    entry of ``q`` as an offset added to theta.
    """
    nrows = dh.shape[0]
    frames = np.empty((nrows + 1, 4, 4))
    frames[0] = base
    iq = 0
    for r in range(nrows):
        theta = dh[r, 0]
        if dh[r, 4] != 0.0:
            theta = theta + q[iq]
            iq += 1
        frames[r + 1] = frames[r] @ _dh_transform(theta, dh[r, 1], dh[r, 2], dh[r, 3])
    return frames


def _mass_gravity(base, dh, var_rows, body_frame, mass, com, inertia, gravity, q):
    """Inertia matrix and gravity vector at q (no velocity terms)."""
    n = var_rows.shape[0]
    frames = fk_frames(base, dh, q)
    axes = frames[var_rows, :3, 2]
    origins = frames[var_rows, :3, 3]
    D = np.zeros((n, n))
    g = np.zeros(n)
    for b in range(body_frame.shape[0]):
        f = body_frame[b]
        R = frames[f, :3, :3]
        c = R @ com[b] + frames[f, :3, 3]
        iw = R @ inertia[b] @ R.T
        jv = np.zeros((3, n))
        jw = np.zeros((3, n))
        for i in range(n):
            if var_rows[i] < f:
                jv[:, i] = np.cross(axes[i], c - origins[i])
                jw[:, i] = axes[i]
        D += mass[b] * (jv.T @ jv) + jw.T @ iw @ jw
        g -= mass[b] * (jv.T @ gravity)
    return D, g


def dynamics_terms(base, dh, var_rows, body_frame, mass, com, inertia, gravity, q, qdot, h=FD_STEP):
    """(D, C, g) with C from Christoffel symbols of central differences of D."""
    n = q.shape[0]
    D, g = _mass_gravity(base, dh, var_rows, body_frame, mass, com, inertia, gravity, q)
    dD = np.empty((n, n, n))
    for k in range(n):
        qp = q.copy()
        qm = q.copy()
        qp[k] += h
        qm[k] -= h
        Dp, _ = _mass_gravity(base, dh, var_rows, body_frame, mass, com, inertia, gravity, qp)
        Dm, _ = _mass_gravity(base, dh, var_rows, body_frame, mass, com, inertia, gravity, qm)
        dD[k] = (Dp - Dm) / (2.0 * h)
    # C[k, j] = 1/2 sum_i (dD_kj/dq_i + dD_ki/dq_j - dD_ij/dq_k) qdot_i
    C = 0.5 * (
        np.einsum("ikj,i->kj", dD, qdot)
        + np.einsum("jki,i->kj", dD, qdot)
        - np.einsum("kij,i->kj", dD, qdot)
    )
    return D, C, g


def potential_energy(base, dh, body_frame, mass, com, gravity, q):
    """Sum over bodies of -m * dot(gravity, com_world)."""
    frames = fk_frames(base, dh, q)
    pe = 0.0
    for b in range(body_frame.shape[0]):
        f = body_frame[b]
        c = frames[f, :3, :3] @ com[b] + frames[f, :3, 3]
        pe -= mass[b] * float(gravity @ c)
    return pe


def tendon_forces(slack, fmax, eps_ref, eps_toe, S):
    """Piecewise-C1 tendon law; returns (phi, dphi_dS), both per muscle.

    Slack below zero strain; quadratic toe up to eps_toe with slope matched
    at the junction; linear beyond, normalized so phi(eps_ref) = fmax.
    """
    eps = (S - slack) / slack
    K = fmax / (eps_ref - 0.5 * eps_toe)  # dphi/deps on the linear branch
    in_toe = (eps > 0.0) & (eps < eps_toe)
    taut = eps >= eps_toe
    phi = np.zeros_like(eps)
    dphi = np.zeros_like(eps)
    phi[in_toe] = 0.5 * K[in_toe] * eps[in_toe] ** 2 / eps_toe[in_toe]
    dphi[in_toe] = K[in_toe] * eps[in_toe] / eps_toe[in_toe]
    phi[taut] = K[taut] * (eps[taut] - 0.5 * eps_toe[taut])
    dphi[taut] = K[taut]
    return phi, dphi / slack


def muscle_eval(base, dh, var_rows, o_frame, o_pt, i_frame, i_pt, slack, fmax, eps_ref, eps_toe, q, S):
    """One-pass muscle geometry and actuation at (q, S).

    Returns (L, J, phi, tau): path lengths, dL/dq, tendon forces and the
    cross-product joint torques. The torque of each muscle is the sum over
    its joint-dependent endpoints of axis . ((P - joint_origin) x F) with
    F the tension pulling that endpoint toward the other one.
    """
    frames = fk_frames(base, dh, q)
    axes = frames[var_rows, :3, 2]
    origins = frames[var_rows, :3, 3]
    m = o_frame.shape[0]
    n = var_rows.shape[0]
    L = np.empty(m)
    J = np.zeros((m, n))
    tau = np.zeros(n)
    phi, _ = tendon_forces(slack, fmax, eps_ref, eps_toe, S)
    for j in range(m):
        fo, fi = o_frame[j], i_frame[j]
        po = frames[fo, :3, :3] @ o_pt[j] + frames[fo, :3, 3]
        pi = frames[fi, :3, :3] @ i_pt[j] + frames[fi, :3, 3]
        dvec = po - pi
        lj = float(np.linalg.norm(dvec))
        if lj < DEGENERATE_PATH:
            raise NumericalFault(f"degenerate muscle path (index {j}): attachments coincide")
        L[j] = lj
        u = dvec / lj  # gradient of the length w.r.t. the origin point
        for i in range(n):
            r = var_rows[i]
            acc = 0.0
            if r < fo:
                acc += u @ np.cross(axes[i], po - origins[i])
            if r < fi:
                acc -= u @ np.cross(axes[i], pi - origins[i])
            J[j, i] = acc
        if phi[j] != 0.0:
            f_on_ins = phi[j] * u  # insertion end pulled toward the origin
            for i in range(n):
                r = var_rows[i]
                if r < fo:
                    tau[i] -= axes[i] @ np.cross(po - origins[i], f_on_ins)
                if r < fi:
                    tau[i] += axes[i] @ np.cross(pi - origins[i], f_on_ins)
    return L, J, phi, tau


def _torques_only(base, dh, var_rows, o_frame, o_pt, i_frame, i_pt, phi, q):
    """Cross-product torques for fixed tendon forces phi (FD helper)."""
    frames = fk_frames(base, dh, q)
    axes = frames[var_rows, :3, 2]
    origins = frames[var_rows, :3, 3]
    n = var_rows.shape[0]
    tau = np.zeros(n)
    for j in range(o_frame.shape[0]):
        if phi[j] == 0.0:
            continue
        fo, fi = o_frame[j], i_frame[j]
        po = frames[fo, :3, :3] @ o_pt[j] + frames[fo, :3, 3]
        pi = frames[fi, :3, :3] @ i_pt[j] + frames[fi, :3, 3]
        dvec = po - pi
        lj = float(np.linalg.norm(dvec))
        if lj < DEGENERATE_PATH:
            raise NumericalFault(f"degenerate muscle path (index {j}): attachments coincide")
        f_on_ins = (phi[j] / lj) * dvec
        for i in range(n):
            r = var_rows[i]
            if r < fo:
                tau[i] -= axes[i] @ np.cross(po - origins[i], f_on_ins)
            if r < fi:
                tau[i] += axes[i] @ np.cross(pi - origins[i], f_on_ins)
    return tau


def torque_jacobians(base, dh, var_rows, o_frame, o_pt, i_frame, i_pt, slack, fmax, eps_ref, eps_toe, q, S, h=FD_STEP):
    """(dtau/dq, dtau/dS): FD over q; analytic -J^T diag(dphi/dS) over S."""
    _, J, _, _ = muscle_eval(
        base, dh, var_rows, o_frame, o_pt, i_frame, i_pt, slack, fmax, eps_ref, eps_toe, q, S
    )
    phi, dphi = tendon_forces(slack, fmax, eps_ref, eps_toe, S)
    dtau_dS = -J.T * dphi
    n = q.shape[0]
    dtau_dq = np.empty((n, n))
    for k in range(n):
        qp = q.copy()
        qm = q.copy()
        qp[k] += h
        qm[k] -= h
        tp = _torques_only(base, dh, var_rows, o_frame, o_pt, i_frame, i_pt, phi, qp)
        tm = _torques_only(base, dh, var_rows, o_frame, o_pt, i_frame, i_pt, phi, qm)
        dtau_dq[:, k] = (tp - tm) / (2.0 * h)
    return dtau_dq, dtau_dS
