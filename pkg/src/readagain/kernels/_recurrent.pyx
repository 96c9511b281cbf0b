# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled GRU/LSTM sequence kernels (forward and backward).

Same contract as ``_fallback``: weights are ``(d, k + d)`` row-major, acting
on ``[x, h]``.  Matrix-vector products go through BLAS ``dgemv``/``dger``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, tanh, fabs
from scipy.linalg.cython_blas cimport dgemv, dger

cnp.import_array()


cdef inline double _sigmoid(double x) nogil:
    cdef double e = exp(-fabs(x))
    if x >= 0:
        return 1.0 / (1.0 + e)
    return e / (1.0 + e)


cdef inline void _matvec(double[:, ::1] W, double* u, double* out) nogil:
    # out = W @ u  (W row-major d x K == column-major K x d)
    cdef int K = <int>W.shape[1]
    cdef int d = <int>W.shape[0]
    cdef int one = 1
    cdef double a = 1.0, b = 0.0
    cdef char t = b'T'
    dgemv(&t, &K, &d, &a, &W[0, 0], &K, u, &one, &b, out, &one)


cdef inline void _matTvec_acc(double[:, ::1] W, double* v, double* out) nogil:
    # out += W.T @ v
    cdef int K = <int>W.shape[1]
    cdef int d = <int>W.shape[0]
    cdef int one = 1
    cdef double a = 1.0, b = 1.0
    cdef char t = b'N'
    dgemv(&t, &K, &d, &a, &W[0, 0], &K, v, &one, &b, out, &one)


cdef inline void _outer_acc(double[:, ::1] dW, double* a, double* u) nogil:
    # dW += outer(a, u)
    cdef int K = <int>dW.shape[1]
    cdef int d = <int>dW.shape[0]
    cdef int one = 1
    cdef double s = 1.0
    dger(&K, &d, &s, u, &one, a, &one, &dW[0, 0], &K)


cdef _check(double[:, ::1] X, double[::1] h0, tuple Ws):
    cdef Py_ssize_t k = X.shape[1], d = h0.shape[0]
    for W in Ws:
        if W.shape != (d, k + d):
            raise ValueError(
                f"weight shape {W.shape} does not match input width {k} + hidden {d}")


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def gru_forward(X, h0, Wz, Wr, Wh, A=None):
    X, h0, Wz, Wr, Wh = _c(X), _c(h0), _c(Wz), _c(Wr), _c(Wh)
    _check(X, h0, (Wz, Wr, Wh))
    cdef Py_ssize_t n = X.shape[0], k = X.shape[1], d = h0.shape[0]
    cdef bint use_a = A is not None
    cdef double[:, ::1] Av
    if use_a:
        A = _c(A)
        if A.shape != (n, d):
            raise ValueError(f"gate scale shape {A.shape} != {(n, d)}")
        Av = A
    H = np.empty((n, d)); Z = np.empty((n, d)); R = np.empty((n, d)); HT = np.empty((n, d))
    cdef double[:, ::1] Xv = X, Hv = H, Zv = Z, Rv = R, HTv = HT
    cdef double[:, ::1] Wzv = Wz, Wrv = Wr, Whv = Wh
    cdef double[::1] h0v = h0
    cdef double[::1] u = np.empty(k + d)
    cdef double* hp
    cdef double g
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(n):
            hp = &h0v[0] if i == 0 else &Hv[i - 1, 0]
            for j in range(k):
                u[j] = Xv[i, j]
            for j in range(d):
                u[k + j] = hp[j]
            _matvec(Wzv, &u[0], &Zv[i, 0])
            _matvec(Wrv, &u[0], &Rv[i, 0])
            for j in range(d):
                Zv[i, j] = _sigmoid(Zv[i, j])
                Rv[i, j] = _sigmoid(Rv[i, j])
                u[k + j] = Rv[i, j] * hp[j]
            _matvec(Whv, &u[0], &HTv[i, 0])
            for j in range(d):
                HTv[i, j] = tanh(HTv[i, j])
                g = Av[i, j] * Zv[i, j] if use_a else Zv[i, j]
                Hv[i, j] = (1.0 - g) * hp[j] + g * HTv[i, j]
    return H, Z, R, HT


def gru_backward(X, h0, Wz, Wr, Wh, A, H, Z, R, HT, dH, dWz, dWr, dWh):
    X, h0, Wz, Wr, Wh = _c(X), _c(h0), _c(Wz), _c(Wr), _c(Wh)
    H, Z, R, HT, dH = _c(H), _c(Z), _c(R), _c(HT), _c(dH)
    _check(X, h0, (Wz, Wr, Wh))
    cdef Py_ssize_t n = X.shape[0], k = X.shape[1], d = h0.shape[0]
    cdef bint use_a = A is not None
    cdef double[:, ::1] Av, dAv
    dA = None
    if use_a:
        A = _c(A)
        dA = np.zeros((n, d))
        Av = A
        dAv = dA
    dX = np.zeros((n, k))
    dh0 = np.zeros(d)
    cdef double[:, ::1] Xv = X, Hv = H, Zv = Z, Rv = R, HTv = HT, dHv = dH, dXv = dX
    cdef double[:, ::1] Wzv = Wz, Wrv = Wr, Whv = Wh
    cdef double[:, ::1] dWzv = dWz, dWrv = dWr, dWhv = dWh
    cdef double[::1] h0v = h0
    cdef double[::1] dnext = dh0
    cdef double[::1] u = np.empty(k + d)
    cdef double[::1] du = np.empty(k + d)
    cdef double[::1] dprev = np.empty(d)
    cdef double[::1] dht_pre = np.empty(d)
    cdef double[::1] dr_pre = np.empty(d)
    cdef double[::1] dz_pre = np.empty(d)
    cdef double* hp
    cdef double z, r, ht, dh, g, dg, dz
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(n - 1, -1, -1):
            hp = &h0v[0] if i == 0 else &Hv[i - 1, 0]
            for j in range(d):
                z = Zv[i, j]; ht = HTv[i, j]
                dh = dHv[i, j] + dnext[j]
                g = Av[i, j] * z if use_a else z
                dg = dh * (ht - hp[j])
                dprev[j] = dh * (1.0 - g)
                if use_a:
                    dz = dg * Av[i, j]
                    dAv[i, j] = dg * z
                else:
                    dz = dg
                dht_pre[j] = dh * g * (1.0 - ht * ht)
                dz_pre[j] = dz * z * (1.0 - z)
            for j in range(k):
                u[j] = Xv[i, j]
            for j in range(d):
                u[k + j] = Rv[i, j] * hp[j]
            _outer_acc(dWhv, &dht_pre[0], &u[0])
            for j in range(k + d):
                du[j] = 0.0
            _matTvec_acc(Whv, &dht_pre[0], &du[0])
            for j in range(k):
                dXv[i, j] += du[j]
            for j in range(d):
                r = Rv[i, j]
                dprev[j] += du[k + j] * r
                dr_pre[j] = du[k + j] * hp[j] * r * (1.0 - r)
                u[k + j] = hp[j]
            _outer_acc(dWrv, &dr_pre[0], &u[0])
            _outer_acc(dWzv, &dz_pre[0], &u[0])
            for j in range(k + d):
                du[j] = 0.0
            _matTvec_acc(Wrv, &dr_pre[0], &du[0])
            _matTvec_acc(Wzv, &dz_pre[0], &du[0])
            for j in range(k):
                dXv[i, j] += du[j]
            for j in range(d):
                dnext[j] = dprev[j] + du[k + j]
    return dX, dh0, dA


def lstm_forward(X, h0, C0, Wf, Wi, Wo, Wc):
    X, h0, C0 = _c(X), _c(h0), _c(C0)
    Wf, Wi, Wo, Wc = _c(Wf), _c(Wi), _c(Wo), _c(Wc)
    _check(X, h0, (Wf, Wi, Wo, Wc))
    cdef Py_ssize_t n = X.shape[0], k = X.shape[1], d = h0.shape[0]
    H = np.empty((n, d)); C = np.empty((n, d)); F = np.empty((n, d))
    I = np.empty((n, d)); O = np.empty((n, d)); CT = np.empty((n, d))
    cdef double[:, ::1] Xv = X, Hv = H, Cv = C, Fv = F, Iv = I, Ov = O, CTv = CT
    cdef double[:, ::1] Wfv = Wf, Wiv = Wi, Wov = Wo, Wcv = Wc
    cdef double[::1] h0v = h0, C0v = C0
    cdef double[::1] u = np.empty(k + d)
    cdef double* hp
    cdef double* cp
    cdef Py_ssize_t t, j
    with nogil:
        for t in range(n):
            if t == 0:
                hp = &h0v[0]; cp = &C0v[0]
            else:
                hp = &Hv[t - 1, 0]; cp = &Cv[t - 1, 0]
            for j in range(k):
                u[j] = Xv[t, j]
            for j in range(d):
                u[k + j] = hp[j]
            _matvec(Wfv, &u[0], &Fv[t, 0])
            _matvec(Wiv, &u[0], &Iv[t, 0])
            _matvec(Wov, &u[0], &Ov[t, 0])
            _matvec(Wcv, &u[0], &CTv[t, 0])
            for j in range(d):
                Fv[t, j] = _sigmoid(Fv[t, j])
                Iv[t, j] = _sigmoid(Iv[t, j])
                Ov[t, j] = _sigmoid(Ov[t, j])
                CTv[t, j] = tanh(CTv[t, j])
                Cv[t, j] = Fv[t, j] * cp[j] + Iv[t, j] * CTv[t, j]
                Hv[t, j] = Ov[t, j] * tanh(Cv[t, j])
    return H, C, F, I, O, CT


def lstm_backward(X, h0, C0, Wf, Wi, Wo, Wc, H, C, F, I, O, CT, dH, dCN,
                  dWf, dWi, dWo, dWc):
    X, h0, C0 = _c(X), _c(h0), _c(C0)
    Wf, Wi, Wo, Wc = _c(Wf), _c(Wi), _c(Wo), _c(Wc)
    H, C, F, I, O, CT, dH = _c(H), _c(C), _c(F), _c(I), _c(O), _c(CT), _c(dH)
    _check(X, h0, (Wf, Wi, Wo, Wc))
    cdef Py_ssize_t n = X.shape[0], k = X.shape[1], d = h0.shape[0]
    dX = np.zeros((n, k))
    dh0 = np.zeros(d)
    dC0 = np.array(dCN, dtype=np.float64, copy=True)
    cdef double[:, ::1] Xv = X, Hv = H, Cv = C, Fv = F, Iv = I, Ov = O, CTv = CT
    cdef double[:, ::1] dHv = dH, dXv = dX
    cdef double[:, ::1] Wfv = Wf, Wiv = Wi, Wov = Wo, Wcv = Wc
    cdef double[:, ::1] dWfv = dWf, dWiv = dWi, dWov = dWo, dWcv = dWc
    cdef double[::1] h0v = h0, C0v = C0
    cdef double[::1] dhn = dh0, dcn = dC0
    cdef double[::1] u = np.empty(k + d)
    cdef double[::1] du = np.empty(k + d)
    cdef double[::1] df_pre = np.empty(d), di_pre = np.empty(d)
    cdef double[::1] do_pre = np.empty(d), dct_pre = np.empty(d)
    cdef double* hp
    cdef double* cp
    cdef double f, i_, o, ct, tc, dh, dc
    cdef Py_ssize_t t, j
    with nogil:
        for t in range(n - 1, -1, -1):
            if t == 0:
                hp = &h0v[0]; cp = &C0v[0]
            else:
                hp = &Hv[t - 1, 0]; cp = &Cv[t - 1, 0]
            for j in range(d):
                f = Fv[t, j]; i_ = Iv[t, j]; o = Ov[t, j]; ct = CTv[t, j]
                tc = tanh(Cv[t, j])
                dh = dHv[t, j] + dhn[j]
                dc = dcn[j] + dh * o * (1.0 - tc * tc)
                df_pre[j] = dc * cp[j] * f * (1.0 - f)
                di_pre[j] = dc * ct * i_ * (1.0 - i_)
                do_pre[j] = dh * tc * o * (1.0 - o)
                dct_pre[j] = dc * i_ * (1.0 - ct * ct)
                dcn[j] = dc * f
            for j in range(k):
                u[j] = Xv[t, j]
            for j in range(d):
                u[k + j] = hp[j]
            _outer_acc(dWfv, &df_pre[0], &u[0])
            _outer_acc(dWiv, &di_pre[0], &u[0])
            _outer_acc(dWov, &do_pre[0], &u[0])
            _outer_acc(dWcv, &dct_pre[0], &u[0])
            for j in range(k + d):
                du[j] = 0.0
            _matTvec_acc(Wfv, &df_pre[0], &du[0])
            _matTvec_acc(Wiv, &di_pre[0], &du[0])
            _matTvec_acc(Wov, &do_pre[0], &du[0])
            _matTvec_acc(Wcv, &dct_pre[0], &du[0])
            for j in range(k):
                dXv[t, j] = du[j]
            for j in range(d):
                dhn[j] = du[k + j]
    return dX, dh0, dC0
