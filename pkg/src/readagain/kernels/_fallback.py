"""Pure numpy recurrent kernels.

Mirrors ``_recurrent.pyx`` operation-for-operation.  Every weight matrix acts
on the concatenation ``[x, h]`` (input first), has shape ``(d, k + d)`` and no
bias.  Backward functions accumulate weight gradients into the ``dW*`` arrays
passed in and return gradients for the inputs.
"""
import numpy as np


def sigmoid(x):
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _check(X, h0, *Ws):
    n, k = X.shape
    d = h0.shape[0]
    for W in Ws:
        if W.shape != (d, k + d):
            raise ValueError(
                f"weight shape {W.shape} does not match input width {k} + hidden {d}")
    return n, k, d


def gru_forward(X, h0, Wz, Wr, Wh, A=None):
    """Run a GRU over the rows of ``X``; ``A`` optionally scales the update gate.

    With ``A`` the update is ``h = (1 - a*z)*h_prev + (a*z)*h_tilde``.
    Returns ``(H, Z, R, HT)``.
    """
    n, k, d = _check(X, h0, Wz, Wr, Wh)
    H = np.empty((n, d))
    Z = np.empty((n, d))
    R = np.empty((n, d))
    HT = np.empty((n, d))
    u = np.empty(k + d)
    hp = h0
    for i in range(n):
        u[:k] = X[i]
        u[k:] = hp
        Z[i] = sigmoid(Wz @ u)
        R[i] = sigmoid(Wr @ u)
        u[k:] = R[i] * hp
        HT[i] = np.tanh(Wh @ u)
        g = Z[i] if A is None else A[i] * Z[i]
        H[i] = (1.0 - g) * hp + g * HT[i]
        hp = H[i]
    return H, Z, R, HT


def gru_backward(X, h0, Wz, Wr, Wh, A, H, Z, R, HT, dH, dWz, dWr, dWh):
    """Returns ``(dX, dh0, dA)``; ``dA`` is None when ``A`` is None."""
    n, k, d = _check(X, h0, Wz, Wr, Wh)
    dX = np.zeros((n, k))
    dA = None if A is None else np.zeros((n, d))
    dnext = np.zeros(d)
    u = np.empty(k + d)
    for i in range(n - 1, -1, -1):
        hp = h0 if i == 0 else H[i - 1]
        z, r, ht = Z[i], R[i], HT[i]
        dh = dH[i] + dnext
        g = z if A is None else A[i] * z
        dg = dh * (ht - hp)
        dht = dh * g
        dprev = dh * (1.0 - g)
        if A is None:
            dz = dg
        else:
            dz = dg * A[i]
            dA[i] = dg * z
        dht_pre = dht * (1.0 - ht * ht)
        u[:k] = X[i]
        u[k:] = r * hp
        dWh += np.outer(dht_pre, u)
        dv = Wh.T @ dht_pre
        dX[i] += dv[:k]
        drh = dv[k:]
        dprev += drh * r
        dr_pre = drh * hp * r * (1.0 - r)
        dz_pre = dz * z * (1.0 - z)
        u[k:] = hp
        dWr += np.outer(dr_pre, u)
        dWz += np.outer(dz_pre, u)
        du = Wr.T @ dr_pre + Wz.T @ dz_pre
        dX[i] += du[:k]
        dnext = dprev + du[k:]
    return dX, dnext, dA


def lstm_forward(X, h0, C0, Wf, Wi, Wo, Wc):
    """Run an LSTM over the rows of ``X``.  Returns ``(H, C, F, I, O, CT)``."""
    n, k, d = _check(X, h0, Wf, Wi, Wo, Wc)
    H = np.empty((n, d))
    C = np.empty((n, d))
    F = np.empty((n, d))
    I = np.empty((n, d))
    O = np.empty((n, d))
    CT = np.empty((n, d))
    u = np.empty(k + d)
    hp, cp = h0, C0
    for t in range(n):
        u[:k] = X[t]
        u[k:] = hp
        F[t] = sigmoid(Wf @ u)
        I[t] = sigmoid(Wi @ u)
        O[t] = sigmoid(Wo @ u)
        CT[t] = np.tanh(Wc @ u)
        C[t] = F[t] * cp + I[t] * CT[t]
        H[t] = O[t] * np.tanh(C[t])
        hp, cp = H[t], C[t]
    return H, C, F, I, O, CT


def lstm_backward(X, h0, C0, Wf, Wi, Wo, Wc, H, C, F, I, O, CT, dH, dCN,
                  dWf, dWi, dWo, dWc):
    """``dCN`` is the gradient arriving at the last cell state from outside.

    Returns ``(dX, dh0, dC0)``.
    """
    n, k, d = _check(X, h0, Wf, Wi, Wo, Wc)
    dX = np.zeros((n, k))
    dhn = np.zeros(d)
    dcn = np.array(dCN, dtype=np.float64, copy=True)
    u = np.empty(k + d)
    for t in range(n - 1, -1, -1):
        hp = h0 if t == 0 else H[t - 1]
        cp = C0 if t == 0 else C[t - 1]
        f, i, o, ct = F[t], I[t], O[t], CT[t]
        tc = np.tanh(C[t])
        dh = dH[t] + dhn
        do = dh * tc
        dc = dcn + dh * o * (1.0 - tc * tc)
        df = dc * cp
        di = dc * ct
        dct = dc * i
        dcn = dc * f
        df_pre = df * f * (1.0 - f)
        di_pre = di * i * (1.0 - i)
        do_pre = do * o * (1.0 - o)
        dct_pre = dct * (1.0 - ct * ct)
        u[:k] = X[t]
        u[k:] = hp
        dWf += np.outer(df_pre, u)
        dWi += np.outer(di_pre, u)
        dWo += np.outer(do_pre, u)
        dWc += np.outer(dct_pre, u)
        du = Wf.T @ df_pre + Wi.T @ di_pre + Wo.T @ do_pre + Wc.T @ dct_pre
        dX[t] = du[:k]
        dhn = du[k:]
    return dX, dhn, dcn
