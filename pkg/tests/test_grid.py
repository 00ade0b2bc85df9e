import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from meanfield_swarm.grid import (
    Grid,
    ScalarField,
    VectorField,
    divergence,
    gradient,
    integrate,
    interpolate,
    laplacian,
    read_scalar_csv,
    write_scalar_csv,
    write_vector_csv,
)

G2 = Grid.cube(64, 2)
G1 = Grid.cube(64, 1)


def test_grid_geometry():
    g = Grid(2, (8, 4))
    assert g.shape == (8, 4)
    assert g.widths == (0.125, 0.25)
    assert g.cell_volume == pytest.approx(1 / 32)
    assert g.centers(0)[0] == 0.0625
    assert g.points().shape == (32, 2)


@pytest.mark.parametrize("dim,cells", [(3, (4, 4, 4)), (0, ()), (2, (4,)), (1, (0,))])
def test_grid_rejects_bad_shape(dim, cells):
    with pytest.raises(ValueError):
        Grid(dim, cells)


def test_fields_are_immutable():
    f = ScalarField.constant(G1, 1.0)
    with pytest.raises(ValueError):
        f.values[0] = 2.0


def test_gradient_of_constant_is_zero():
    g = gradient(ScalarField.constant(G2, 5.0))
    assert all(np.all(c == 0) for c in g.components)


@pytest.mark.parametrize("no_flux", [False, True])
def test_gradient_affine_exact_interior(no_flux):
    f = ScalarField.from_function(G2, lambda x, y: x)
    g = gradient(f, no_flux=no_flux)
    np.testing.assert_allclose(g.components[0][1:-1, :], 1.0, atol=1e-12)
    np.testing.assert_allclose(g.components[1], 0.0, atol=1e-12)


def test_gradient_one_sided_boundary_exact_for_quadratic():
    f = ScalarField.from_function(G1, lambda x: x**2)
    g = gradient(f).components[0]
    np.testing.assert_allclose(g, 2 * G1.centers(0), atol=1e-11)


def test_gradient_of_quadratic_at_half():
    # odd cell count puts a cell center at 0.5
    grid = Grid.cube(65, 1)
    x = grid.centers(0)
    i = int(np.argmin(abs(x - 0.5)))
    assert x[i] == 0.5
    h = grid.widths[0]
    manual = ((x[i] + h) ** 2 - (x[i] - h) ** 2) / (2 * h)
    g = gradient(ScalarField.from_function(grid, lambda x: x**2)).components[0]
    assert manual == pytest.approx(1.0, abs=1e-14)
    assert g[i] == pytest.approx(1.0, abs=1e-13)


def test_gradient_rejects_small_grids():
    with pytest.raises(ValueError):
        gradient(ScalarField.constant(Grid.cube(2, 1), 1.0))
    with pytest.raises(ValueError):
        divergence(VectorField(Grid(2, (5, 2)), (np.zeros(10), np.zeros(10))))


def test_divergence_of_constant_and_affine():
    c = VectorField(G2, (np.full(G2.shape, 1.5), np.full(G2.shape, -2.0)))
    assert np.all(divergence(c).values == 0)
    X, Y = G2.mesh()
    d = divergence(VectorField(G2, (X, Y))).values
    np.testing.assert_allclose(d[1:-1, 1:-1], 2.0, atol=1e-11)


def test_div_grad_matches_laplacian_on_quadratic():
    f = ScalarField.from_function(G2, lambda x, y: x**2 + y**2)
    dg = divergence(gradient(f)).values
    lap = laplacian(f).values
    # wide (div-grad) and compact stencils are both exact for quadratics away from walls
    np.testing.assert_allclose(dg[2:-2, 2:-2], 4.0, atol=1e-9)
    np.testing.assert_allclose(lap[1:-1, 1:-1], 4.0, atol=1e-9)
    np.testing.assert_allclose(dg[2:-2, 2:-2], lap[2:-2, 2:-2], atol=1e-9)


def test_laplacian_boundary_stencils():
    f = ScalarField.from_function(G1, lambda x: x**3)
    np.testing.assert_allclose(laplacian(f).values, 6 * G1.centers(0), atol=1e-8)
    # mirrored ghosts: a cosine mode with zero normal derivative is an eigenvector
    g = Grid.cube(32, 1)
    h = g.widths[0]
    f = ScalarField.from_function(g, lambda x: np.cos(np.pi * x))
    lam = 4 / h**2 * np.sin(np.pi * h / 2) ** 2
    np.testing.assert_allclose(laplacian(f, no_flux=True).values, -lam * f.values, atol=1e-10)


def test_integrate():
    assert integrate(ScalarField.constant(G2, 1.0)) == pytest.approx(1.0, abs=1e-14)
    assert integrate(ScalarField.constant(G2, 0.0)) == 0.0
    f = ScalarField.from_function(G1, lambda x: 2 * x)
    direct = sum(2 * x for x in G1.centers(0)) / 64
    assert direct == pytest.approx(1.0, abs=1e-14)
    assert integrate(f) == pytest.approx(1.0, abs=1e-14)


def test_interpolate_basic():
    f = ScalarField.constant(G2, 3.25)
    assert interpolate(f, [0.123, 0.9]) == pytest.approx(3.25)
    lin = ScalarField.from_function(G2, lambda x, y: x)
    assert interpolate(lin, [0.5, 0.5]) == pytest.approx(0.5, abs=1e-14)
    rnd = ScalarField(G2, np.random.default_rng(0).random(G2.shape))
    c = (np.array([10, 41]) + 0.5) / 64
    assert interpolate(rnd, c) == rnd.values[10, 41]


def test_interpolate_clamps_near_walls_and_rejects_outside():
    lin = ScalarField.from_function(G1, lambda x: x)
    assert interpolate(lin, 0.0) == pytest.approx(G1.centers(0)[0])
    assert interpolate(lin, 1.0) == pytest.approx(G1.centers(0)[-1])
    with pytest.raises(ValueError):
        interpolate(lin, 1.01)
    with pytest.raises(ValueError):
        interpolate(ScalarField.constant(G2, 1.0), [0.5, -0.1])


def test_interpolate_vector_field_batch():
    X, Y = G2.mesh()
    v = VectorField(G2, (2 * X - Y, X + 3 * Y))
    pts = np.random.default_rng(1).uniform(0.05, 0.95, (50, 2))
    out = interpolate(v, pts)
    assert out.shape == (50, 2)
    np.testing.assert_allclose(out[:, 0], 2 * pts[:, 0] - pts[:, 1], atol=1e-12)
    np.testing.assert_allclose(out[:, 1], pts[:, 0] + 3 * pts[:, 1], atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(
    a=st.floats(-2, 2), b=st.floats(-2, 2), c=st.floats(-2, 2), d=st.floats(-2, 2),
    x=st.floats(1 / 128, 1 - 1 / 128), y=st.floats(1 / 128, 1 - 1 / 128),
)
def test_interpolate_reproduces_bilinear(a, b, c, d, x, y):
    f = ScalarField.from_function(G2, lambda X, Y: a + b * X + c * Y + d * X * Y)
    assert interpolate(f, [x, y]) == pytest.approx(a + b * x + c * y + d * x * y, abs=1e-11)


field_values = arrays(np.float64, (12, 9), elements=st.floats(-10, 10))


@settings(max_examples=50, deadline=None)
@given(f=field_values, F1=field_values, F2=field_values)
def test_discrete_integration_by_parts(f, F1, F2):
    g = Grid(2, (12, 9))
    sf = ScalarField(g, f)
    F = VectorField(g, (F1, F2))
    lhs = integrate(ScalarField(g, f * divergence(F, no_flux=True).values))
    gr = gradient(sf, no_flux=True)
    rhs = integrate(ScalarField(g, gr.components[0] * F1 + gr.components[1] * F2))
    assert abs(lhs + rhs) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(f=field_values, g_=field_values, a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_operators_are_linear(f, g_, a, b):
    grid = Grid(2, (12, 9))
    comb = ScalarField(grid, a * f + b * g_)
    for no_flux in (False, True):
        lhs = gradient(comb, no_flux).components
        r1 = gradient(ScalarField(grid, f), no_flux).components
        r2 = gradient(ScalarField(grid, g_), no_flux).components
        for k in range(2):
            np.testing.assert_allclose(lhs[k], a * r1[k] + b * r2[k], atol=1e-9)
        F, G = VectorField(grid, (f, g_)), VectorField(grid, (g_, -f))
        mixed = VectorField(grid, (a * f + b * g_, a * g_ - b * f))
        np.testing.assert_allclose(
            divergence(mixed, no_flux).values,
            a * divergence(F, no_flux).values + b * divergence(G, no_flux).values,
            atol=1e-8,
        )


def test_scalar_csv_roundtrip(tmp_path):
    g = Grid(2, (5, 3))
    f = ScalarField(g, np.random.default_rng(0).random(g.shape))
    write_scalar_csv(f, tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "5,3,0.2"
    assert len(lines) == 6
    back = read_scalar_csv(tmp_path / "f.csv")
    assert back.grid == g
    assert np.array_equal(back.values, f.values)

    f1 = ScalarField.from_function(G1, np.sin)
    write_scalar_csv(f1, tmp_path / "g.csv")
    assert np.array_equal(read_scalar_csv(tmp_path / "g.csv").values, f1.values)


def test_vector_csv(tmp_path):
    g = Grid.cube(4, 2)
    X, Y = g.mesh()
    write_vector_csv(VectorField(g, (X, -Y)), tmp_path / "v.csv")
    lines = (tmp_path / "v.csv").read_text().splitlines()
    assert lines[0] == "x,y,v1,v2"
    assert len(lines) == 17
    x, y, v1, v2 = map(float, lines[1].split(","))
    assert (x, y, v1, v2) == (0.125, 0.125, 0.125, -0.125)
