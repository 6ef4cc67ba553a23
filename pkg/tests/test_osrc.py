import numpy as np
import pytest

from osrc_efie import osrc
from osrc_efie.mesh import estimate_curvature
from osrc_efie.pade import compute_pade
from osrc_efie.sparse_ops import assemble_sparse_set, build_damped_wavenumber

KAPPA = np.pi


def operators(d, kappa=KAPPA):
    kw = build_damped_wavenumber(kappa, estimate_curvature(d.mesh, topo=d.topo))
    return assemble_sparse_set(d.mesh, d.topo, d.snc, d.p1, kw)


@pytest.fixture(scope="module")
def ops2(sphere2):
    return operators(sphere2)


def cplx(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.mark.parametrize("n_terms", [1, 2, 5])
def test_block_solve_equals_schur_path(ops2, rng, n_terms):
    pade = compute_pade(n_terms)
    pre = osrc.build_preconditioner(ops2, pade, "A")
    for _ in range(5):
        y = cplx(rng, ops2.n_edges)
        ref = osrc.schur_apply_dense(ops2, pade, y)
        assert np.linalg.norm(pre.apply(y) - ref) <= 1e-10 * np.linalg.norm(ref)


def test_apply_is_linear_and_accepts_blocks(ops2, rng):
    pre = osrc.build_preconditioner(ops2, compute_pade(2))
    x, y = cplx(rng, ops2.n_edges), cplx(rng, ops2.n_edges)
    a = 0.3 - 2j
    lhs = pre.apply(a * x + y)
    assert np.linalg.norm(lhs - a * pre.apply(x) - pre.apply(y)) <= 1e-12 * np.linalg.norm(lhs)
    both = pre.apply(np.column_stack([x, y]))
    assert np.allclose(both[:, 0], pre.apply(x)) and np.allclose(both[:, 1], pre.apply(y))
    assert not np.any(pre.apply(np.zeros(ops2.n_edges)))


def test_variant_b_is_single_solve(ops2, rng):
    pre = osrc.build_preconditioner(ops2, variant="B")
    assert pre.n_factorizations == 1
    y = cplx(rng, ops2.n_edges)
    x = pre.apply(y)
    M = (ops2.G - ops2.N_eps).toarray()
    assert np.linalg.norm(M @ x + y) <= 1e-12 * np.linalg.norm(y)


def test_factorization_count_and_block_size(ico):
    ops = operators(ico)
    pre = osrc.build_preconditioner(ops, compute_pade(2), "a")
    assert pre.n_factorizations == 3
    assert pre.shape == (30, 30)
    assert all(b.shape == (42, 42) for b in pre.blocks)


def test_apply_trace_residuals(ops2, rng):
    pre = osrc.build_preconditioner(ops2, compute_pade(4))
    trace = osrc.ApplyTrace()
    pre.apply(cplx(rng, ops2.n_edges), trace)
    assert len(trace.phi_norms) == 4
    assert max(trace.block_residuals) < 1e-10
    assert trace.outer_residual < 1e-10


def test_dimension_errors(ops2, sphere2, ico):
    pre = osrc.build_preconditioner(ops2, compute_pade(1))
    with pytest.raises(ValueError):
        pre.apply(np.ones(ops2.n_edges + 1))
    with pytest.raises(ValueError):
        osrc.build_preconditioner(ops2, None, "A")
    with pytest.raises(ValueError):
        osrc.build_preconditioner(ops2, compute_pade(1), "C")
    bad = type(ops2)(**{**vars(ops2), "L": operators(ico).L})
    with pytest.raises(ValueError):
        osrc.build_preconditioner(bad, compute_pade(1))


def test_singular_outer_matrix_is_reported(ops2):
    zero = type(ops2)(**{**vars(ops2), "G": 0 * ops2.G, "N_eps": 0 * ops2.N_eps})
    with pytest.raises(osrc.FactorizationError):
        osrc.build_preconditioner(zero, variant="B")


def test_factorizations_succeed_on_finer_mesh():
    from conftest import Discretization

    d = Discretization(5)  # h ~ 0.25
    for variant in ("A", "B"):
        pre = osrc.osrc_from_mesh(d.mesh, d.topo, KAPPA, variant, n_terms=3)
        assert np.all(np.isfinite(pre.apply(np.ones(pre.shape[0]))))


def test_pade_family_approaches_exact_operator(ops2):
    exact = osrc.exact_osrc_matrix(ops2)
    n = ops2.n_edges
    errs = []
    for n_terms in (1, 4, 16):
        pre = osrc.build_preconditioner(ops2, compute_pade(n_terms))
        M = pre.apply(np.eye(n, dtype=complex))
        errs.append(np.linalg.norm(M - exact) / np.linalg.norm(exact))
    assert errs[0] > errs[1] > errs[2]
