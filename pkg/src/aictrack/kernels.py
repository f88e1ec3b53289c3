"""Per-step numeric kernels shared by the networks and the plants.

Everything here is written in the numpy subset that numba compiles, so the
same source serves both backends (see ``_accel``). Arguments are float64
arrays; nothing here allocates Python objects or raises.
"""
import numpy as np

from ._accel import jit


@jit
def bipolar_sigmoid(z):
    # 2/(1+exp(-z)) - 1 == tanh(z/2); tanh form does not overflow.
    return np.tanh(0.5 * z)


@jit
def bipolar_sigmoid_slope(s):
    """Derivative of the bipolar sigmoid written in terms of its output ``s``."""
    return 0.5 * (1.0 - s * s)


@jit
def two_layer_forward(W, V, x):
    h = bipolar_sigmoid(V @ x)
    return W @ h, h


@jit
def two_layer_jacobian(W, V, x):
    h = bipolar_sigmoid(V @ x)
    d = bipolar_sigmoid_slope(h)
    return W @ (d.reshape(-1, 1) * V)


@jit
def identifier_step(W, V, x_tilde, x_bar, a_c_diag, eta1, eta2, rho, dt):
    """One Euler step of the identifier weight laws.

    The error is back-projected through ``A_c^{-1}`` and the sign is chosen so
    that the step descends on the prediction error for a Hurwitz ``A_c``.
    """
    back = -x_tilde / a_c_diag
    h = bipolar_sigmoid(V @ x_bar)
    shrink = rho * np.sqrt(x_tilde @ x_tilde)
    dW = eta1 * np.outer(back, h) - shrink * W
    dV = eta2 * np.outer((back @ W) * bipolar_sigmoid_slope(h), x_bar) - shrink * V
    return W + dt * dW, V + dt * dV


@jit
def actor_gradients(W, V, bracket, e):
    """Gradients of the actor objective w.r.t. ``W`` and ``V``.

    ``bracket`` is d(objective)/d(u) at the actor output.
    """
    h = bipolar_sigmoid(V @ e)
    gW = np.outer(bracket, h)
    gV = np.outer((bracket @ W) * bipolar_sigmoid_slope(h), e)
    return gW, gV


@jit
def quadratic_features(e):
    n = e.shape[0]
    out = np.empty(n * (n + 1) // 2)
    k = 0
    for i in range(n):
        for j in range(i, n):
            out[k] = e[i] * e[j]
            k += 1
    return out


@jit
def quadratic_features_jacobian(e):
    n = e.shape[0]
    out = np.zeros((n * (n + 1) // 2, n))
    k = 0
    for i in range(n):
        for j in range(i, n):
            out[k, i] += e[j]
            out[k, j] += e[i]
            k += 1
    return out


# --- benchmark plants -------------------------------------------------------

@jit
def simo_f(x):
    c = np.cos(2.0 * x[0]) + 2.0
    out = np.empty(2)
    out[0] = -x[0] + x[1]
    out[1] = -0.5 * x[0] - 0.5 * x[1] * (1.0 - c * c)
    return out


@jit
def simo_g(x):
    out = np.zeros((2, 1))
    out[1, 0] = np.cos(2.0 * x[0]) + 2.0
    return out


@jit
def mimo_f(x):
    out = np.empty(2)
    out[0] = x[1] - x[0]
    out[1] = 0.5 * (x[0] * x[1] - x[0])
    return out


@jit
def mimo_g(x):
    out = np.zeros((2, 2))
    out[0, 1] = 3.0 + x[1]
    out[1, 0] = 1.0 + x[0]
    return out


@jit
def vsm_f(x, inertia, damping, p_max, p_imbalance):
    # state: load angle [rad], speed deviation from nominal [rad/s]
    out = np.empty(2)
    out[0] = x[1]
    out[1] = (p_imbalance - damping * x[1] - p_max * np.sin(x[0])) / inertia
    return out


@jit
def vsm_g(x, inertia):
    out = np.zeros((2, 1))
    out[1, 0] = 1.0 / inertia
    return out


# --- fused episode ----------------------------------------------------------
# Plant / reference selectors for ``run_fused``.
PLANT_SIMO, PLANT_MIMO, PLANT_VSM = 0, 1, 2
REF_SINE, REF_CONST = 0, 1
# status codes returned by ``run_fused``
OK, BLOWUP, IDENTIFIER_NAN, CRITIC_NAN, ACTOR_NAN = 0, 1, 2, 3, 4


@jit
def plant_f(kind, x, p):
    if kind == PLANT_SIMO:
        return simo_f(x)
    if kind == PLANT_MIMO:
        return mimo_f(x)
    return vsm_f(x, p[0], p[1], p[2], p[3])


@jit
def plant_g(kind, x, p):
    if kind == PLANT_SIMO:
        return simo_g(x)
    if kind == PLANT_MIMO:
        return mimo_g(x)
    return vsm_g(x, p[0])


@jit
def reference(kind, t, p):
    out = np.empty(2)
    if kind == REF_SINE:
        out[0] = p[0] * np.sin(t)
        out[1] = np.cos(t) + np.sin(t)
    else:
        out[0] = p[0]
        out[1] = p[1]
    return out


@jit
def _finite(a):
    return np.all(np.isfinite(a))


@jit
def _fro(a):
    return np.sqrt(np.sum(a * a))


@jit
def run_fused(plant_kind, plant_p, ref_kind, ref_p, x0, a_c, dt, n_steps, gates_s, gates_c, belief,
              Wi, Vi, Wc, Wa, Va, rates, Q, R, clamp, uncontrolled, envelope,
              T, X, XD, XU, E, U, UA, S):
    """Whole closed-loop episode in one call.

    Mirrors ``aic.control_step`` followed by a forward-Euler plant step.
    Weight arrays are updated in place; per-step outputs go into the
    preallocated arrays (``S`` holds the scalar columns td, value,
    x_tilde_norm, five weight norms, actor_grad_mean, alignment).
    Returns ``(rows_filled, status)``.
    """
    eta_i1, eta_i2, rho, eta_c, eta_a1, eta_a2 = rates[0], rates[1], rates[2], rates[3], rates[4], rates[5]
    n_x = x0.shape[0]
    n_u = Wa.shape[0]
    x = x0.copy()
    zero_u = np.zeros(n_u)
    last_pred = np.zeros(n_x)
    last_xbar = np.zeros(n_x + n_u)
    have_pred = False
    x_d_next = reference(ref_kind, 0.0, ref_p)
    for k in range(n_steps):
        x_d = x_d_next
        x_d_next = reference(ref_kind, (k + 1) * dt, ref_p)
        gs = gates_s[k]
        gc = gates_c[k]
        td = np.nan
        value = np.nan
        xtn = np.nan
        agm = 0.0
        align = np.nan
        if uncontrolled:
            u = zero_u.copy()
            if gs:
                x_used = x.copy()
            else:
                x_used = np.full(n_x, np.nan)
            e = np.full(n_x, np.nan)
        else:
            if gs:
                x_used = x.copy()
            elif have_pred:
                x_used = last_pred.copy()
            else:
                x_used = x_d.copy()
            e = x_used - x_d
            h_a = bipolar_sigmoid(Va @ e)
            u = Wa @ h_a
            if clamp > 0:
                for j in range(n_u):
                    u[j] = min(max(u[j], -clamp), clamp)
            xb = np.concatenate((x_used, u))
            xb0 = np.concatenate((x_used, zero_u))
            pred_u = x_used + dt * (a_c * x_used + two_layer_forward(Wi, Vi, xb)[0])
            pred_0 = x_used + dt * (a_c * x_used + two_layer_forward(Wi, Vi, xb0)[0])
            en_u = pred_u - x_d_next
            en_0 = pred_0 - x_d_next

            psi_e = quadratic_features(e)
            value = Wc @ psi_e
            cost = (e @ Q @ e + u @ R @ u) * dt
            td = cost + belief * (Wc @ quadratic_features(en_u)) + (1.0 - belief) * (Wc @ quadratic_features(en_0)) - value
            Wc_new = Wc + dt * eta_c * td * psi_e
            if not _finite(Wc_new):
                return k, CRITIC_NAN
            Wc[:] = Wc_new

            if gs and have_pred:
                x_tilde = x_used - last_pred
                xtn = np.sqrt(x_tilde @ x_tilde)
                Wi_new, Vi_new = identifier_step(Wi, Vi, x_tilde, last_xbar, a_c, eta_i1, eta_i2, rho, dt)
                if not (_finite(Wi_new) and _finite(Vi_new)):
                    return k, IDENTIFIER_NAN
                Wi[:, :] = Wi_new
                Vi[:, :] = Vi_new
            last_pred = belief * pred_u + (1.0 - belief) * pred_0
            last_xbar = xb
            have_pred = True

            J_u = np.ascontiguousarray(two_layer_jacobian(Wi, Vi, xb)[:, n_x:])
            cg = Wc @ quadratic_features_jacobian(en_u)
            bracket = dt * (cg @ J_u) + dt * ((R + R.T) @ u)
            gW, gV = actor_gradients(Wa, Va, bracket, e)
            Wa_new = Wa - dt * eta_a1 * gW
            Va_new = Va - dt * eta_a2 * gV
            if not (_finite(Wa_new) and _finite(Va_new)):
                return k, ACTOR_NAN
            Wa[:, :] = Wa_new
            Va[:, :] = Va_new
            agm = (np.sum(np.abs(gW)) + np.sum(np.abs(gV))) / (gW.size + gV.size)

            G = plant_g(plant_kind, x, plant_p)
            align = 1.0
            for b in range(n_u):
                num = 0.0
                d1 = 0.0
                d2 = 0.0
                for a in range(n_x):
                    num += J_u[a, b] * G[a, b]
                    d1 += J_u[a, b] * J_u[a, b]
                    d2 += G[a, b] * G[a, b]
                den = np.sqrt(d1) * np.sqrt(d2)
                c = num / den if den > 0 else 0.0
                align = min(align, c)

        u_applied = u * (1.0 if gc else 0.0)
        T[k] = k * dt
        X[k] = x
        XD[k] = x_d
        XU[k] = x_used
        E[k] = e
        U[k] = u
        UA[k] = u_applied
        S[k, 0] = td
        S[k, 1] = value
        S[k, 2] = xtn
        S[k, 3] = _fro(Wi)
        S[k, 4] = _fro(Vi)
        S[k, 5] = _fro(Wc)
        S[k, 6] = _fro(Wa)
        S[k, 7] = _fro(Va)
        S[k, 8] = agm
        S[k, 9] = align

        x = x + dt * (plant_f(plant_kind, x, plant_p) + plant_g(plant_kind, x, plant_p) @ u_applied)
        if not _finite(x) or np.sqrt(x @ x) > envelope:
            return k + 1, BLOWUP
    return n_steps, OK
