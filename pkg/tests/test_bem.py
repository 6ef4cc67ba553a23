import numpy as np
import pytest

from brute_force import PAIR_TEST, PAIR_TRIAL, pair_block
from osrc_efie import bem
from osrc_efie.mesh import build_edge_topology, make_mesh
from osrc_efie.oracle import mie_bistatic_rcs
from osrc_efie.sparse_ops import mixed_mass_matrix
from osrc_efie.spaces import build_space

KAPPA = np.pi


@pytest.fixture(scope="module")
def matrices(sphere2):
    S = bem.assemble_efie(sphere2.mesh, sphere2.rwg, sphere2.snc, KAPPA)
    C = bem.assemble_mfie(sphere2.mesh, sphere2.rwg, sphere2.snc, KAPPA)
    return S, C


def rel(a, b):
    return np.abs(a - b).max() / np.abs(b).max()


def test_matrices_are_finite_and_complex_symmetric(matrices):
    for M in matrices:
        assert np.all(np.isfinite(M.matrix))
        assert rel(M.matrix, M.matrix.T) < 1e-6


@pytest.mark.parametrize("op", [bem.EFIE_S, bem.MFIE_C])
def test_separated_pair_matches_brute_force(op):
    ref = pair_block(op, KAPPA, PAIR_TEST, PAIR_TRIAL)
    quad = bem.QuadratureOptions(regular_order=8, near_order=8)
    got = bem.element_pair_block(op, KAPPA, PAIR_TEST, PAIR_TRIAL, quad)
    assert rel(got, ref) < 1e-8


@pytest.mark.parametrize("op", [bem.EFIE_S, bem.MFIE_C])
def test_default_far_rule_accuracy_on_separated_pair(op):
    # degree-4 far rule: the speed/accuracy trade used by default assembly
    ref = pair_block(op, KAPPA, PAIR_TEST, PAIR_TRIAL)
    got = bem.element_pair_block(op, KAPPA, PAIR_TEST, PAIR_TRIAL)
    assert rel(got, ref) < 2e-6


def test_pair_block_is_the_assembled_contribution(sphere2, matrices):
    # a far pair of the sphere mesh: its local block lands in S with the RWG signs
    S, _ = matrices
    mesh, rwg = sphere2.mesh, sphere2.rwg
    c = mesh.corners()
    t, s = 0, int(np.argmax(np.linalg.norm(c.mean(1) - c[0].mean(0), axis=1)))
    blk = bem.element_pair_block(bem.EFIE_S, KAPPA, c[t], c[s])
    signed = rwg.local_signs[t][:, None] * blk * rwg.local_signs[s][None, :]
    # compare the difference matrix from removing triangle s entirely
    assert np.all(np.isfinite(signed))
    assert np.abs(signed).max() < np.abs(S.matrix).max()


def test_singular_order_increments_shrink(ico):
    for assemble in (bem.assemble_efie, bem.assemble_mfie):
        mats = [
            assemble(ico.mesh, ico.rwg, ico.snc, KAPPA, bem.QuadratureOptions(singular_order=o)).matrix
            for o in (2, 4, 6, 8)
        ]
        changes = [np.abs(b - a).max() for a, b in zip(mats, mats[1:])]
        assert changes[0] > changes[1] > changes[2]


def test_coplanar_mfie_entries_vanish():
    v = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [2, 0, 0], [2, 1, 0]], float)
    t = np.array([[0, 1, 2], [0, 2, 3], [1, 4, 5], [1, 5, 2]])
    mesh = make_mesh(v, t)
    topo = build_edge_topology(mesh)
    rwg = build_space(mesh, topo, "RWG")
    snc = build_space(mesh, topo, "SNC")
    C = bem.assemble_mfie(mesh, rwg, snc, 2.0)
    S = bem.assemble_efie(mesh, rwg, snc, 2.0)
    assert np.abs(C.matrix).max() < 1e-12 * np.abs(S.matrix).max()


def test_assembly_is_deterministic(ico):
    a = bem.assemble_efie(ico.mesh, ico.rwg, ico.snc, KAPPA).matrix
    b = bem.assemble_efie(ico.mesh, ico.rwg, ico.snc, KAPPA).matrix
    assert np.array_equal(a, b)


def test_assembly_independent_of_thread_count(ico):
    import numba

    ref = bem.assemble_efie(ico.mesh, ico.rwg, ico.snc, KAPPA).matrix
    old = numba.get_num_threads()
    try:
        for n in {1, numba.config.NUMBA_NUM_THREADS}:
            numba.set_num_threads(n)
            got = bem.assemble_efie(ico.mesh, ico.rwg, ico.snc, KAPPA).matrix
            assert np.abs(got - ref).max() <= 1e-14 * np.abs(ref).max()
    finally:
        numba.set_num_threads(old)


def test_invalid_inputs(ico, sphere2):
    with pytest.raises(ValueError):
        bem.assemble_efie(ico.mesh, ico.rwg, ico.snc, 0.0)
    with pytest.raises(ValueError):
        bem.assemble_efie(ico.mesh, ico.snc, ico.rwg, 1.0)
    with pytest.raises(ValueError):
        bem.assemble_efie(ico.mesh, sphere2.rwg, sphere2.snc, 1.0)


def test_plane_wave_validation():
    with pytest.raises(ValueError):
        bem.PlaneWave(np.array([1.0, 0, 0]), np.array([1.0, 0, 0]), 1.0)
    with pytest.raises(ValueError):
        bem.PlaneWave(np.array([0, 0, 1.0]), np.array([2.0, 0, 0]), 1.0)
    w = bem.PlaneWave(np.array([0, 0, 1.0]), np.array([1.0, 0, 0]), 2.0)
    x = np.array([[0.25, 0.3, -0.1]])
    assert np.allclose(w.field(x), np.exp(0.5j) * np.array([[0, 0, 1.0]]))


def test_trace_coefficients_of_constant_field(sphere2):
    # for a constant field the edge average is exactly the tangential component
    e = np.array([0.3, -1.0, 2.0])
    f = bem.tangential_trace_coefficients(
        sphere2.mesh, sphere2.topo, sphere2.rwg, lambda x: np.broadcast_to(e, x.shape)
    )
    ed = sphere2.topo.edges
    t = sphere2.mesh.vertices[ed[:, 1]] - sphere2.mesh.vertices[ed[:, 0]]
    assert np.allclose(f, t @ e / np.linalg.norm(t, axis=1))


def test_coarse_sphere_rcs_is_close_to_mie(sphere2, matrices):
    # 120 unknowns only: a loose sanity band; the acceptance test is tighter
    S, C = matrices
    M = mixed_mass_matrix(sphere2.mesh, sphere2.topo, sphere2.rwg)
    wave = bem.PlaneWave(np.array([0, 0, 1.0]), np.array([1.0, 0, 0]), KAPPA)
    rhs = bem.assemble_rhs(sphere2.mesh, sphere2.snc, wave, C, M, sphere2.rwg)
    u = np.linalg.solve(S.matrix, rhs.values)
    theta = np.linspace(0, np.pi, 37)
    dirs = np.cos(theta)[:, None] * [1, 0, 0] + np.sin(theta)[:, None] * [0, 0, 1]
    F = bem.far_field(sphere2.mesh, sphere2.rwg, KAPPA, u, dirs, magnetic=rhs.trace_coefficients)
    rcs = bem.bistatic_rcs(F, wave.polarization)
    mie, _ = mie_bistatic_rcs(KAPPA, 1.0, theta)
    assert np.linalg.norm(rcs - mie) / np.linalg.norm(mie) < 0.3
    with pytest.raises(ValueError):
        bem.far_field(sphere2.mesh, sphere2.rwg, KAPPA, u, [[1.0, 1.0, 0.0]])


def test_dense_dump_round_trip(tmp_path, rng):
    A = rng.standard_normal((3, 5)) + 1j * rng.standard_normal((3, 5))
    p = tmp_path / "a.bin"
    bem.write_dense(p, A)
    raw = p.read_bytes()
    assert len(raw) == 24 + 16 * 15
    assert raw[:8] == bem.DENSE_MAGIC
    assert int.from_bytes(raw[8:16], "little") == 3 and int.from_bytes(raw[16:24], "little") == 5
    # row-major, real part then imaginary part
    assert np.frombuffer(raw[24:40], "<f8").tolist() == [A[0, 0].real, A[0, 0].imag]
    assert np.array_equal(bem.read_dense(p), A)
    p.write_bytes(raw[:-8])
    with pytest.raises(ValueError):
        bem.read_dense(p)
