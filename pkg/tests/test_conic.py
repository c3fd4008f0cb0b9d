import numpy as np
import pytest
from hypothesis import given, strategies as st

from airfl import conic
from airfl.conic import ConeSpec, ConicProgram, ConicSettings


def diag_index(i, d):
    r, c = conic.svec_indices(d)
    return int(np.where((r == i) & (c == i))[0][0])


def unit_diag_sdp(C):
    """min Tr(C X) s.t. diag(X) = 1, X psd, for real symmetric C."""
    d = C.shape[0]
    n = d * (d + 1) // 2
    A_eq = np.zeros((d, n))
    for i in range(d):
        A_eq[i, diag_index(i, d)] = 1.0
    A = np.vstack([A_eq, -np.eye(n)])
    b = np.concatenate([np.ones(d), np.zeros(n)])
    return ConicProgram(c=conic.svec(C), A=A, b=b,
                        cones=ConeSpec(zero_dim=d, psd_dims=(d,)))


class TestSvec:
    def test_roundtrip(self, rng):
        S = rng.standard_normal((5, 5))
        S = 0.5 * (S + S.T)
        np.testing.assert_allclose(conic.unsvec(conic.svec(S), 5), S, atol=1e-14)

    def test_inner_product_matches_trace(self, rng):
        A = rng.standard_normal((4, 4)); A = 0.5 * (A + A.T)
        B = rng.standard_normal((4, 4)); B = 0.5 * (B + B.T)
        assert conic.svec(A) @ conic.svec(B) == pytest.approx(np.trace(A @ B))


class TestProjections:
    def test_nonneg_clamp(self):
        out = conic.project_cone(np.array([-1.0, 2.0]), ConeSpec(nonneg_dim=2))
        np.testing.assert_allclose(out, [0.0, 2.0])

    def test_zero_block(self):
        spec = ConeSpec(zero_dim=2)
        np.testing.assert_allclose(conic.project_cone(np.array([1.0, -3.0]), spec), 0.0)
        # dual of the zero cone is free
        np.testing.assert_allclose(
            conic.project_cone(np.array([1.0, -3.0]), spec, dual=True), [1.0, -3.0])

    def test_soc_boundary_case(self):
        z = np.array([0.0, 2.0, 0.0])
        out = conic.project_cone(z, ConeSpec(soc_dims=(3,)))
        np.testing.assert_allclose(out, [1.0, 1.0, 0.0])

    def test_soc_minimal_distance(self, rng):
        # projection must be at least as close as 10^4 random cone points
        spec = ConeSpec(soc_dims=(4,))
        z = rng.standard_normal(4) * 3.0
        p = conic.project_cone(z, spec)
        dist = np.linalg.norm(z - p)
        x = rng.standard_normal((10_000, 3))
        t = np.linalg.norm(x, axis=1) * (1.0 + rng.uniform(0, 1.0, 10_000))
        pts = np.column_stack([t, x])
        d_all = np.linalg.norm(pts - z, axis=1)
        assert d_all.min() >= dist - 1e-9

    def test_psd_block_delegates_to_clipping(self):
        spec = ConeSpec(psd_dims=(2,))
        z = conic.svec(np.diag([1.0, -2.0]))
        out = conic.project_cone(z, spec)
        np.testing.assert_allclose(conic.unsvec(out, 2), np.diag([1.0, 0.0]), atol=1e-12)

    @given(st.integers(0, 500))
    def test_idempotent_and_nonexpansive(self, seed):
        rng = np.random.default_rng(seed)
        spec = ConeSpec(zero_dim=2, nonneg_dim=3, soc_dims=(3,), psd_dims=(3,))
        a = rng.standard_normal(spec.total_dim) * 2
        b = rng.standard_normal(spec.total_dim) * 2
        for dual in (False, True):
            pa = conic.project_cone(a, spec, dual=dual)
            pb = conic.project_cone(b, spec, dual=dual)
            again = conic.project_cone(pa, spec, dual=dual)
            assert np.linalg.norm(again - pa) <= 1e-10 * (1 + np.linalg.norm(pa))
            assert np.linalg.norm(pa - pb) <= np.linalg.norm(a - b) + 1e-12

    def test_embedded_hermitian_projection_matches_complex_clip(self, rng):
        q = 3
        V = rng.standard_normal((q, q)) + 1j * rng.standard_normal((q, q))
        V = 0.5 * (V + V.conj().T)
        X = conic.embed_hermitian(V)
        spec = ConeSpec(psd_dims=(2 * q,), psd_cplx=(True,))
        out = conic.unsvec(conic.project_cone(conic.svec(X), spec), 2 * q)
        w, Q = np.linalg.eigh(V)
        Vp = (Q * np.clip(w, 0, None)) @ Q.conj().T
        np.testing.assert_allclose(out, conic.embed_hermitian(Vp), atol=1e-12)


class TestSolveConic:
    def test_lp(self):
        prog = ConicProgram(c=np.array([1.0]), A=np.array([[-1.0]]),
                            b=np.array([-1.0]), cones=ConeSpec(nonneg_dim=1))
        sol = conic.solve_conic(prog)
        assert sol.status == "optimal"
        assert sol.x[0] == pytest.approx(1.0, abs=1e-6)

    def test_unit_diag_sdp_value(self):
        C = np.array([[0.0, 1.0], [1.0, 0.0]])
        sol = conic.solve_conic(unit_diag_sdp(C))
        assert sol.status == "optimal"
        assert conic.svec(C) @ sol.x == pytest.approx(-2.0, abs=1e-5)
        X = conic.unsvec(sol.x, 2)
        np.testing.assert_allclose(X, [[1.0, -1.0], [-1.0, 1.0]], atol=1e-4)

    def test_unit_diag_sdp_against_grid(self):
        # 1-D oracle: X = [[1, t], [t, 1]] psd iff |t| <= 1; objective 2t
        C = np.array([[0.0, 1.0], [1.0, 0.0]])
        ts = np.linspace(-1, 1, 2001)
        oracle = (2 * ts).min()
        sol = conic.solve_conic(unit_diag_sdp(C))
        assert conic.svec(C) @ sol.x == pytest.approx(oracle, abs=1e-5)

    def test_rotated_coupling_membership(self):
        # eta^2 <= p encoded as ||(2 eta, p - 1)|| <= p + 1
        def member(eta, p):
            z = np.array([p + 1.0, 2.0 * eta, p - 1.0])
            return np.linalg.norm(z[1:]) <= z[0] + 1e-12
        assert member(1.0, 1.0)
        assert not member(2.0, 1.0)

    def test_infeasible_program(self):
        prog = ConicProgram(c=np.array([0.0]), A=np.array([[-1.0], [1.0]]),
                            b=np.array([-1.0, 0.0]), cones=ConeSpec(nonneg_dim=2))
        assert conic.solve_conic(prog).status == "infeasible"

    def test_unbounded_program(self):
        prog = ConicProgram(c=np.array([-1.0]), A=np.array([[-1.0]]),
                            b=np.array([0.0]), cones=ConeSpec(nonneg_dim=1))
        assert conic.solve_conic(prog).status == "unbounded"

    def test_reported_residuals_recompute(self, rng):
        C = rng.standard_normal((4, 4))
        C = 0.5 * (C + C.T)
        prog = unit_diag_sdp(C)
        sol = conic.solve_conic(prog)
        assert sol.status == "optimal"
        x, y, s = sol.x, sol.y, sol.s
        pres = np.linalg.norm(prog.A @ x + s - prog.b) / (1 + np.linalg.norm(prog.b))
        dres = np.linalg.norm(prog.A.T @ y + prog.c) / (1 + np.linalg.norm(prog.c))
        pobj, dobj = prog.c @ x, -prog.b @ y
        gap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        assert abs(pres - sol.residuals["primal"]) <= 1e-9
        assert abs(dres - sol.residuals["dual"]) <= 1e-9
        assert abs(gap - sol.residuals["gap"]) <= 1e-9

    def test_small_sdp_matches_grid_refinement(self, rng):
        # order-3 unit-diagonal SDP: exhaustive refinement over the two free
        # off-diagonals after eliminating the third by psd boundary search
        C = np.array([[0.0, 1.0, 0.5], [1.0, 0.0, -0.3], [0.5, -0.3, 0.0]])
        sol = conic.solve_conic(unit_diag_sdp(C))
        assert sol.status == "optimal"
        val = conic.svec(C) @ sol.x
        grid = np.linspace(-1, 1, 121)
        best = np.inf
        for a in grid:
            for b_ in grid:
                for c_ in grid:
                    X = np.array([[1, a, b_], [a, 1, c_], [b_, c_, 1]])
                    if np.linalg.eigvalsh(X)[0] >= -1e-9:
                        best = min(best, np.trace(C @ X))
        assert val <= best + 1e-4

    def test_dump_roundtrip(self, tmp_path):
        prog = unit_diag_sdp(np.array([[0.0, 1.0], [1.0, 0.0]]))
        path = tmp_path / "prog.txt"
        prog.dump(path)
        text = path.read_text().splitlines()
        assert text[0] == "m 5 n 3"
        assert text[1].startswith("zero 2 nonneg 0")
        assert len([l for l in text if l.startswith("A ")]) == 5

    def test_determinism(self, rng):
        C = rng.standard_normal((5, 5))
        C = 0.5 * (C + C.T)
        prog = unit_diag_sdp(C)
        s1 = conic.solve_conic(prog)
        s2 = conic.solve_conic(prog)
        np.testing.assert_array_equal(s1.x, s2.x)
        assert s1.iterations == s2.iterations
