"""First-order solver for cone programs with zero, nonnegative, second-order,
and semidefinite blocks.

Canonical form:

    minimize    c'x
    subject to  Ax + s = b,  s in K

where K is a Cartesian product of a zero cone, a nonnegative orthant,
second-order cones, and vectorized real-symmetric PSD cones. The solver runs
Douglas-Rachford splitting on the homogeneous self-dual embedding, so a
single cached factorization serves every iteration and primal or dual
infeasibility shows up as a certificate instead of a stall.

PSD blocks use the scaled lower-triangle vectorization (off-diagonal entries
multiplied by sqrt(2)) so that inner products of vectorized matrices equal
trace inner products.
"""

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from dataclasses import dataclass, field
from functools import lru_cache


@dataclass(frozen=True)
class ConeSpec:
    zero_dim: int = 0
    nonneg_dim: int = 0
    soc_dims: tuple = ()
    psd_dims: tuple = ()  # matrix orders; block length is d*(d+1)/2
    # Marks PSD blocks that are real embeddings [[Re,-Im],[Im,Re]] of Hermitian
    # matrices of half order. The cone is then PSD intersected with that
    # subspace, and projections run a complex eigendecomposition at half size.
    psd_cplx: tuple = ()

    def __post_init__(self):
        if self.zero_dim < 0 or self.nonneg_dim < 0:
            raise ValueError("cone dimensions must be nonnegative")
        for q in self.soc_dims:
            if q < 1:
                raise ValueError("SOC dimension must be >= 1")
        for d in self.psd_dims:
            if d < 1:
                raise ValueError("PSD order must be >= 1")
        if self.psd_cplx:
            if len(self.psd_cplx) != len(self.psd_dims):
                raise ValueError("psd_cplx must parallel psd_dims")
            for d, cx in zip(self.psd_dims, self.psd_cplx):
                if cx and d % 2:
                    raise ValueError("embedded Hermitian blocks need even order")

    @property
    def total_dim(self):
        return (self.zero_dim + self.nonneg_dim + sum(self.soc_dims)
                + sum(d * (d + 1) // 2 for d in self.psd_dims))


@dataclass(frozen=True)
class ConicProgram:
    c: np.ndarray
    A: object  # dense ndarray or scipy.sparse matrix, shape (m, n)
    b: np.ndarray
    cones: ConeSpec

    def __post_init__(self):
        m, n = self.A.shape
        if len(self.b) != m or len(self.c) != n:
            raise ValueError("A, b, c dimensions inconsistent")
        if self.cones.total_dim != m:
            raise ValueError(
                f"cone dimension {self.cones.total_dim} != row count {m}")
        data = self.A.data if scipy.sparse.issparse(self.A) else self.A
        if not (np.all(np.isfinite(data)) and np.all(np.isfinite(self.b))
                and np.all(np.isfinite(self.c))):
            raise ValueError("program data must be finite")

    def dump(self, path):
        """Write the program as self-describing text for offline checks."""
        A = self.A.toarray() if scipy.sparse.issparse(self.A) else np.asarray(self.A)
        with open(path, "w") as f:
            f.write(f"m {A.shape[0]} n {A.shape[1]}\n")
            f.write(f"zero {self.cones.zero_dim} nonneg {self.cones.nonneg_dim} "
                    f"soc {list(self.cones.soc_dims)} psd {list(self.cones.psd_dims)}\n")
            f.write("c " + " ".join(repr(x) for x in self.c) + "\n")
            f.write("b " + " ".join(repr(x) for x in self.b) + "\n")
            for i in range(A.shape[0]):
                f.write("A " + " ".join(repr(x) for x in A[i]) + "\n")


@dataclass
class ConicSolution:
    x: np.ndarray
    s: np.ndarray
    y: np.ndarray
    status: str  # optimal | infeasible | unbounded | max_iter
    iterations: int
    residuals: dict = field(default_factory=dict)


# -- vectorized symmetric matrices -------------------------------------------

_SQRT2 = np.sqrt(2.0)


@lru_cache(maxsize=None)
def _svec_cache(d):
    cols, rows = np.meshgrid(np.arange(d), np.arange(d))
    mask = rows >= cols
    # column-major enumeration of the lower triangle
    order = np.argsort(cols[mask] * d + rows[mask], kind="stable")
    r, c = rows[mask][order], cols[mask][order]
    offdiag = r != c
    scale = np.where(offdiag, _SQRT2, 1.0)
    return r, c, offdiag, scale


def svec_indices(d):
    """Row/column index arrays of the lower triangle in column-major order."""
    r, c, _, _ = _svec_cache(d)
    return r, c


def svec(S):
    d = S.shape[0]
    r, c, _, scale = _svec_cache(d)
    return S[r, c].astype(float) * scale


def unsvec(v, d):
    r, c, _, scale = _svec_cache(d)
    vals = np.asarray(v, dtype=float) / scale
    S = np.zeros((d, d))
    S[r, c] = vals
    S[c, r] = vals
    return S


# -- cone projections ---------------------------------------------------------

def _project_soc(z):
    t, x = z[0], z[1:]
    nx = np.linalg.norm(x)
    if nx <= t:
        return z.copy()
    if nx <= -t:
        return np.zeros_like(z)
    a = 0.5 * (t + nx)
    out = np.empty_like(z)
    out[0] = a
    out[1:] = (a / nx) * x if nx > 0 else 0.0
    return out


def _project_psd_block(z, d):
    X = unsvec(z, d)
    w, Q = np.linalg.eigh(X)
    if w[0] >= 0:
        return z.copy()
    wc = np.clip(w, 0.0, None)
    return svec((Q * wc) @ Q.T)


def embed_hermitian(V):
    """Real symmetric embedding [[Re V, -Im V], [Im V, Re V]]."""
    Vr, Vi = V.real, V.imag
    return np.block([[Vr, -Vi], [Vi, Vr]])


def extract_hermitian(X):
    """Orthogonal projection of a symmetric matrix onto embedded-Hermitian form."""
    q = X.shape[0] // 2
    P = 0.5 * (X[:q, :q] + X[q:, q:])
    Qs = X[q:, :q]
    return 0.5 * (P + P.T) + 0.5j * (Qs - Qs.T)


def _project_psd_cplx_block(z, d):
    # Projection onto PSD intersected with the embedded-Hermitian subspace:
    # extract the Hermitian half-order matrix, clip, re-embed.
    V = extract_hermitian(unsvec(z, d))
    w, Q = np.linalg.eigh(V)
    wc = np.clip(w, 0.0, None)
    Vp = (Q * wc) @ Q.conj().T
    return svec(embed_hermitian(Vp))


def project_cone(s, cones: ConeSpec, dual=False):
    """Blockwise Euclidean projection onto K (or its dual when dual=True).

    The dual of the zero cone is the free cone; nonnegative, SOC, and plain
    PSD blocks are self-dual. Embedded-Hermitian PSD blocks are PSD
    intersected with a subspace, whose dual projection follows from the
    Moreau decomposition.
    """
    s = np.asarray(s, dtype=float)
    if len(s) != cones.total_dim:
        raise ValueError("vector length does not match cone spec")
    out = np.empty_like(s)
    i = 0
    z = cones.zero_dim
    out[:z] = s[:z] if dual else 0.0
    i += z
    nn = cones.nonneg_dim
    out[i:i + nn] = np.maximum(s[i:i + nn], 0.0)
    i += nn
    for q in cones.soc_dims:
        out[i:i + q] = _project_soc(s[i:i + q]) if q > 1 else max(s[i], 0.0)
        i += q
    cplx = cones.psd_cplx or (False,) * len(cones.psd_dims)
    for d, cx in zip(cones.psd_dims, cplx):
        ln = d * (d + 1) // 2
        blk = s[i:i + ln]
        if not cx:
            out[i:i + ln] = _project_psd_block(blk, d)
        elif dual:
            # dual of (PSD & S) is PSD + S_perp: w + proj_{PSD & S}(-w)
            out[i:i + ln] = blk + _project_psd_cplx_block(-blk, d)
        else:
            out[i:i + ln] = _project_psd_cplx_block(blk, d)
        i += ln
    return out


# -- equilibration ------------------------------------------------------------

def _block_slices(cones: ConeSpec):
    """Row slices that must share a uniform scale (SOC and PSD blocks)."""
    slices = []
    i = cones.zero_dim + cones.nonneg_dim
    for q in cones.soc_dims:
        slices.append(slice(i, i + q))
        i += q
    for d in cones.psd_dims:
        ln = d * (d + 1) // 2
        slices.append(slice(i, i + ln))
        i += ln
    return slices


def ruiz_equilibrate(A, cones: ConeSpec, iters=10):
    """Row/column scaling D A E with per-cone-block uniform row scales."""
    A = A.tocsr().astype(float) if scipy.sparse.issparse(A) else np.asarray(A, dtype=float).copy()
    sparse = scipy.sparse.issparse(A)
    m, n = A.shape
    D = np.ones(m)
    E = np.ones(n)
    blocks = _block_slices(cones)
    for _ in range(iters):
        if sparse:
            Aabs = abs(A)
            Aabs_max_row = np.asarray(Aabs.max(axis=1).todense()).ravel()
            Aabs_max_col = np.asarray(Aabs.max(axis=0).todense()).ravel()
        else:
            Aabs = np.abs(A)
            Aabs_max_row = Aabs.max(axis=1)
            Aabs_max_col = Aabs.max(axis=0)
        r = np.where(Aabs_max_row > 0, Aabs_max_row, 1.0)
        # uniform scale inside SOC/PSD blocks keeps cone membership intact
        for sl in blocks:
            r[sl] = max(float(np.max(r[sl])), 1e-12)
        dr = 1.0 / np.sqrt(r)
        c = np.where(Aabs_max_col > 0, Aabs_max_col, 1.0)
        dc = 1.0 / np.sqrt(c)
        if sparse:
            A = scipy.sparse.diags(dr) @ A @ scipy.sparse.diags(dc)
        else:
            A = A * dr[:, None] * dc[None, :]
        D *= dr
        E *= dc
    return A, D, E


# -- the solver ----------------------------------------------------------------

@dataclass(frozen=True)
class ConicSettings:
    max_iter: int = 50_000
    eps: float = 1e-7
    eps_infeas: float = 1e-7
    check_every: int = 25
    grace_iters: int = 500  # iterations before infeasibility certificates fire
    alpha: float = 1.5  # over-relaxation
    aa_memory: int = 8  # Anderson acceleration history (0 disables)


class _HsdeSystem:
    """Cached factorization for (I + Q) u = w with the SCS block reduction.

    Rows of A denser than ~10% are pulled out of the sparse kernel and
    reapplied as a Woodbury correction, so programs with a handful of dense
    constraint rows (trace constraints on a vectorized matrix variable)
    keep a cheap, nearly fill-free factorization.
    """

    def __init__(self, A, b, c):
        m, n = A.shape
        self.m, self.n = m, n
        h = np.concatenate([c, b])

        if m + n <= 600:
            Ad = A.toarray() if scipy.sparse.issparse(A) else np.asarray(A)
            Mmat = np.block([[np.eye(n), Ad.T], [-Ad, np.eye(m)]])
            lu = scipy.linalg.lu_factor(Mmat, check_finite=False)
            self._solve_M = lambda w: scipy.linalg.lu_solve(lu, w, check_finite=False)
        else:
            As = scipy.sparse.csr_matrix(A)
            nnz_per_row = np.diff(As.indptr)
            dense_rows = np.where(nnz_per_row > max(0.1 * n, 32))[0]
            A_sp = As
            if len(dense_rows):
                keep = As.tolil()
                keep[dense_rows, :] = 0.0
                A_sp = keep.tocsr()
            solve_sp = self._factor_quasidef(A_sp)
            if len(dense_rows):
                # M = M_sp + W Z' with one (row, col) pair per extracted row
                r = len(dense_rows)
                Dr = As[dense_rows, :].toarray()  # (r, n)
                W = np.zeros((n + m, 2 * r))
                Z = np.zeros((n + m, 2 * r))
                for j, i in enumerate(dense_rows):
                    W[:n, j] = Dr[j]            # A' block: column n+i gets d_j
                    Z[n + i, j] = 1.0
                    W[n + i, r + j] = -1.0      # -A block: row n+i gets -d_j
                    Z[:n, r + j] = Dr[j]
                MiW = np.column_stack([solve_sp(W[:, j]) for j in range(2 * r)])
                cap = np.eye(2 * r) + Z.T @ MiW
                cap_lu = scipy.linalg.lu_factor(cap, check_finite=False)

                def solve_M(w):
                    t = solve_sp(w)
                    corr = scipy.linalg.lu_solve(cap_lu, Z.T @ t, check_finite=False)
                    return t - MiW @ corr

                self._solve_M = solve_M
            else:
                self._solve_M = solve_sp
        self.h = h
        self.g = self._solve_M(h)
        self.gamma = 1.0 + h @ self.g

    def _factor_quasidef(self, A_sp):
        """Solver for [[I, A'], [-A, I]] via the normal matrix I + A'A."""
        n = self.n
        A_sp = A_sp.tocsr()
        AT = A_sp.T.tocsr()
        S = (scipy.sparse.eye(n) + AT @ A_sp).tocsc()
        if S.nnz <= n:  # diagonal normal matrix: elementwise solve
            dvec = S.diagonal()

            def solve_S(r):
                return r / dvec
        else:
            lu = scipy.sparse.linalg.splu(S)
            solve_S = lu.solve

        def solve_sp(w):
            rx, ry = w[:n], w[n:]
            zx = solve_S(rx - AT @ ry)
            zy = ry + A_sp @ zx
            return np.concatenate([zx, zy])

        return solve_sp

    def solve(self, w):
        # Solve (I + Q) z = w, Q = [[0, A', c], [-A, 0, b], [-c', -b', 0]].
        w_xy, w_tau = w[:-1], w[-1]
        r = w_xy - w_tau * self.h
        p = self._solve_M(r)
        z_xy = p - self.g * ((self.h @ p) / self.gamma)
        z_tau = w_tau + self.h @ z_xy
        out = np.empty(len(w))
        out[:-1] = z_xy
        out[-1] = z_tau
        return out


def _residuals(A, b, c, x, y, s):
    nb = np.linalg.norm(b)
    nc = np.linalg.norm(c)
    pres = np.linalg.norm(A @ x + s - b) / (1.0 + nb)
    dres = np.linalg.norm(A.T @ y + c) / (1.0 + nc)
    pobj = float(c @ x)
    dobj = float(-b @ y)
    gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
    return {"primal": float(pres), "dual": float(dres), "gap": float(gap),
            "pobj": pobj, "dobj": dobj}


def solve_conic(prog: ConicProgram, settings: ConicSettings = ConicSettings()) -> ConicSolution:
    """Run the splitting iteration until the residual criteria or max_iter.

    Status is reported honestly: `optimal` only when unscaled primal, dual,
    and gap residuals all pass, `infeasible`/`unbounded` on a certificate,
    otherwise `max_iter` with the last residuals attached.
    """
    cones = prog.cones
    m, n = prog.A.shape
    # keep a sparse copy for the per-check residual and certificate products
    A_orig = prog.A if scipy.sparse.issparse(prog.A) else scipy.sparse.csr_matrix(prog.A)
    b_orig = np.asarray(prog.b, dtype=float)
    c_orig = np.asarray(prog.c, dtype=float)

    As, D, E = ruiz_equilibrate(A_orig, cones)
    bs = D * b_orig
    cs = E * c_orig
    # scalar normalization of the scaled rhs/cost
    sigma_b = 1.0 / max(np.linalg.norm(bs), 1e-12)
    sigma_c = 1.0 / max(np.linalg.norm(cs), 1e-12)
    bs = bs * sigma_b
    cs = cs * sigma_c

    sys_ = _HsdeSystem(As, bs, cs)
    N = n + m + 1

    def project_u(w):
        # projection onto R^n x K* x R+
        out = w.copy()
        out[n:-1] = project_cone(w[n:-1], cones, dual=True)
        out[-1] = max(w[-1], 0.0)
        return out

    def dr_step(z):
        ut = sys_.solve(z)
        u = project_u(2.0 * ut - z)
        return z + settings.alpha * (u - ut), ut

    def unscale(ut, z):
        # at a fixed point: u = ut, v = z - ut with Qu = v
        tau = max(ut[-1], 1e-12)
        x = E * ut[:n] / (tau * sigma_b)
        y = D * ut[n:-1] / (tau * sigma_c)
        s = ((z - ut)[n:-1] / D) / (tau * sigma_b)
        return x, y, s

    z = np.zeros(N)
    z[-1] = 1.0

    status = "max_iter"
    res = {}
    best = None
    it = 0
    # safeguarded Anderson acceleration on the DR fixed-point map
    mem = settings.aa_memory
    dZ = np.zeros((N, mem)) if mem else None
    dG = np.zeros((N, mem)) if mem else None
    n_hist = 0
    col = 0
    z_prev = None
    g_prev = None
    fallback = None
    best_fp = np.inf
    for it in range(1, settings.max_iter + 1):
        z_dr, ut = dr_step(z)
        g = z_dr - z
        fp_res = np.linalg.norm(g)
        if fp_res > 5.0 * best_fp and fallback is not None:
            # acceleration went astray: rewind to the last plain step
            z = fallback
            fallback = None
            n_hist = 0
            z_prev = g_prev = None
            best_fp = np.inf
            continue
        best_fp = min(best_fp, fp_res)

        do_check = it % settings.check_every == 0 or it == settings.max_iter
        if do_check:
            if ut[-1] > 1e-12:
                x, y, s = unscale(ut, z)
                res = _residuals(A_orig, b_orig, c_orig, x, y, s)
                best = (x, y, s)
                if max(res["primal"], res["dual"], res["gap"]) <= settings.eps:
                    status = "optimal"
                    break
            if it >= settings.grace_iters:
                # certificates are rays, so positive rescaling is free
                uy = D * ut[n:-1]
                bty = float(b_orig @ uy)
                if bty < -1e-14 * max(1.0, np.linalg.norm(uy)) * max(1.0, np.linalg.norm(b_orig)):
                    yn = uy / (-bty)
                    if np.linalg.norm(A_orig.T @ yn) * max(1.0, np.linalg.norm(b_orig)) \
                            <= settings.eps_infeas:
                        status = "infeasible"
                        best = (np.full(n, np.nan), yn, np.full(m, np.nan))
                        res = {"certificate": float(np.linalg.norm(A_orig.T @ yn))}
                        break
                ux = E * ut[:n]
                ctx = float(c_orig @ ux)
                if ctx < -1e-14 * max(1.0, np.linalg.norm(ux)) * max(1.0, np.linalg.norm(c_orig)):
                    xn = ux / (-ctx)
                    sn = project_cone(-(A_orig @ xn), cones)
                    if np.linalg.norm(A_orig @ xn + sn) * max(1.0, np.linalg.norm(c_orig)) \
                            <= settings.eps_infeas:
                        status = "unbounded"
                        best = (xn, np.full(m, np.nan), sn)
                        res = {"certificate": float(np.linalg.norm(A_orig @ xn + sn))}
                        break

        if mem > 0 and z_prev is not None:
            dZ[:, col] = z - z_prev
            dG[:, col] = g - g_prev
            col = (col + 1) % mem
            n_hist = min(n_hist + 1, mem)
        z_prev = z
        g_prev = g
        fallback = z_dr
        if mem > 0 and n_hist >= 2:
            Gk = dG[:, :n_hist] if n_hist < mem else dG
            Zk = dZ[:, :n_hist] if n_hist < mem else dZ
            gram = Gk.T @ Gk
            gram[np.diag_indices_from(gram)] += 1e-12 * max(1.0, gram.trace())
            try:
                gamma = np.linalg.solve(gram, Gk.T @ g)
                z = z + g - (Zk + Gk) @ gamma
            except np.linalg.LinAlgError:
                z = z_dr
        else:
            z = z_dr

    if best is None:
        _, ut = dr_step(z)
        best = unscale(ut, z)
        res = _residuals(A_orig, b_orig, c_orig, *best)
    x, y, s = best
    return ConicSolution(x=x, s=s, y=y, status=status, iterations=it, residuals=res)
