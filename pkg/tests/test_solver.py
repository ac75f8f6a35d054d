"""Tests for meshing, the MoM solver, interface fields and the edge problem."""

import numpy as np
import pytest
import shapely
from scipy.constants import epsilon_0
from shapely.geometry import Polygon, box

from src.core.config import EdgeSettings, SolverSettings, settings
from src.core.errors import ConfigError, MeshingError, SolverError, UsageError
from src.geometry.baselines import straight_wire
from src.geometry.polygon import circle, mirror_y
from src.solver import (
    HalfSpaceDielectric,
    MomSystem,
    SampleRegion,
    capacitance_matrix,
    centerline_field,
    dump_mesh,
    in_plane_field,
    interface_fields,
    load_mesh,
    mesh_conductors,
    mesh_layout,
    solve_edge_problem,
)
from src.solver.mesh import MAX_ASPECT, _aspect_ratios, level_sizes

PAD = box(-10, 5, 10, 25)


@pytest.fixture(scope="module")
def pad_pair():
    """Two 20 x 20 µm pads mirrored across y = 0, every pair integrated exactly."""
    mesh = mesh_conductors(
        [("pad1", PAD), ("pad2", mirror_y(PAD))],
        target_panel_size=2,
        edge_band_size=0.5,
        mirror_pairs={"pad2": "pad1"},
    )
    return MomSystem(mesh, HalfSpaceDielectric(11.7), near_factor=1e6)


# ==================== Meshing ====================


def test_square_without_grading_is_a_grid():
    mesh = mesh_conductors([("sq", box(0, 0, 10, 10))], target_panel_size=1)
    assert mesh.n_panels == 100
    assert mesh.conductor_area("sq") == pytest.approx(100.0)
    assert np.all(mesh.ring == -1)


def test_edge_rings_hug_the_boundary():
    square = box(0, 0, 10, 10)
    mesh = mesh_conductors([("sq", square)], target_panel_size=1, edge_band_size=0.25)
    inner = square.buffer(-0.25, join_style="mitre")

    outer_ring = mesh.panels[mesh.ring == 0]
    assert len(outer_ring) > 0
    assert np.all(shapely.area(shapely.intersection(outer_ring, inner)) < 1e-9)
    assert mesh.areas.sum() == pytest.approx(100.0)
    assert np.all(mesh.d_lo[mesh.ring == 0] == 0.0)
    assert np.all(mesh.d_hi[mesh.ring == 0] == 0.25)
    assert np.all(np.isinf(mesh.d_hi[mesh.ring == -1]))


def test_mirror_pair_reflects_the_mesh():
    mesh = mesh_conductors(
        [("pad1", PAD), ("pad2", mirror_y(PAD))],
        target_panel_size=2,
        edge_band_size=0.5,
        mirror_pairs={"pad2": "pad1"},
    )
    upper = mesh.centroids[mesh.mask("pad1")]
    lower = mesh.centroids[mesh.mask("pad2")]
    np.testing.assert_allclose(lower, upper * [1.0, -1.0], atol=1e-12)


def test_degenerate_conductor():
    with pytest.raises(MeshingError):
        mesh_conductors([("flat", Polygon([(0, 0), (1, 0), (2, 0)]))], target_panel_size=1)


def test_invalid_mesh_sizes():
    with pytest.raises(MeshingError):
        mesh_conductors([("sq", box(0, 0, 1, 1))], target_panel_size=0)


def test_unknown_conductor_in_mesh():
    mesh = mesh_conductors([("sq", box(0, 0, 2, 2))], target_panel_size=1)
    with pytest.raises(ConfigError):
        mesh.mask("other")


def test_level_sizes_halve():
    config = SolverSettings(target_panel_size=40, edge_band_size=4)
    assert level_sizes(config, 0) == (40, 4)
    assert level_sizes(config, 2) == (10, 1)
    with pytest.raises(ConfigError):
        level_sizes(config, -1)


def test_mesh_layout_grades_ground_along_its_inner_edge(small_layout, small_solver):
    mesh = mesh_layout(small_layout, small_solver, level=0)
    assert mesh.conductor_names == ("pad1", "pad2", "ground")
    assert mesh.summary()["conductors"]["pad1"] == mesh.summary()["conductors"]["pad2"]
    edge = mesh.mask("ground") & (mesh.ring == 0)
    assert mesh.d_hi[edge].max() == pytest.approx(small_solver.edge_band_size)
    assert not shapely.intersects(mesh.panels[edge], small_layout.ground.exterior).any()


def test_default_mesh_resolves_the_accurate_band(small_layout):
    config = SolverSettings()
    x0 = settings.participation.x0
    assert level_sizes(config, 0)[1] <= min(0.25, x0 / 4)

    mesh = mesh_layout(small_layout, config, level=0)
    assert mesh.band <= min(0.25, x0 / 4)
    for name in ("pad1", "pad2"):
        edge = mesh.mask(name) & (mesh.ring == 0)
        assert edge.any()
        assert np.all(mesh.d_lo[edge] == 0.0)
        assert np.all(mesh.d_hi[edge] <= 0.25)
        polygon = getattr(small_layout, name)
        inner = polygon.buffer(-mesh.band, join_style="mitre")
        assert np.all(shapely.area(shapely.intersection(mesh.panels[edge], inner)) < 1e-9)


@pytest.mark.parametrize("level", [0, 1])
def test_layout_mesh_tiles_conductors_with_bounded_aspect(small_layout, small_solver, level):
    mesh = mesh_layout(small_layout, small_solver, level=level)
    for name, polygon in small_layout.conductors():
        panels = mesh.panels[mesh.mask(name)]
        assert mesh.conductor_area(name) == pytest.approx(polygon.area, rel=1e-3)
        assert shapely.union_all(panels).symmetric_difference(polygon).area < 1e-3 * polygon.area
    assert _aspect_ratios(mesh.panels).max() <= MAX_ASPECT + 1e-9


def test_isolated_elongated_piece_is_split():
    strip = box(0.1, 0.0, 0.2, 0.9)
    mesh = mesh_conductors([("strip", strip)], target_panel_size=1)
    assert mesh.n_panels > 1
    assert _aspect_ratios(mesh.panels).max() <= MAX_ASPECT
    assert mesh.conductor_area("strip") == pytest.approx(strip.area)


def test_mesh_dump_and_load(tmp_path):
    mesh = mesh_conductors([("sq", box(0, 0, 4, 4))], target_panel_size=1, edge_band_size=0.25)
    loaded = load_mesh(dump_mesh(mesh, tmp_path / "mesh.json"))
    assert loaded.n_panels == mesh.n_panels
    assert loaded.conductor_names == ("sq",)
    np.testing.assert_allclose(loaded.areas, mesh.areas)
    np.testing.assert_allclose(loaded.centroids, mesh.centroids)
    assert np.array_equal(np.isinf(loaded.d_hi), np.isinf(mesh.d_hi))


# ==================== Method of moments ====================


def test_dielectric_validation():
    with pytest.raises(ConfigError):
        HalfSpaceDielectric(0.5)
    diel = HalfSpaceDielectric(11.7)
    assert diel.eps_eff == pytest.approx(6.35)
    assert diel.normal_field(np.array([-1.0]))[0] == pytest.approx(1.0 / (epsilon_0 * 12.7))


def test_isolated_disk_capacitance():
    mesh = mesh_conductors([("disk", circle(10, 0.01))], target_panel_size=1, edge_band_size=0.25)
    C = MomSystem(mesh, HalfSpaceDielectric(1.0), near_factor=4).capacitance().C[0, 0]
    assert C == pytest.approx(8 * epsilon_0 * 10e-6, rel=0.03)


def test_capacitance_scales_with_size():
    def disk_capacitance(radius, size, band):
        mesh = mesh_conductors(
            [("disk", circle(radius, radius / 1000))], target_panel_size=size, edge_band_size=band
        )
        return MomSystem(mesh, HalfSpaceDielectric(11.7)).capacitance().C[0, 0]

    assert disk_capacitance(20, 2, 0.5) == pytest.approx(2 * disk_capacitance(10, 1, 0.25), rel=1e-3)


def test_antisymmetric_drive_gives_antisymmetric_charge(pad_pair):
    solution = pad_pair.solve({"pad1": 1.0, "pad2": -1.0})
    upper = solution.sigma[pad_pair.mesh.mask("pad1")]
    lower = solution.sigma[pad_pair.mesh.mask("pad2")]
    np.testing.assert_allclose(lower, -upper, atol=1e-6 * np.abs(upper).max())
    assert solution.charges[0] > 0 > solution.charges[1]


def test_superposition(pad_pair):
    a = pad_pair.solve([1.0, 0.0])
    b = pad_pair.solve([0.0, 1.0])
    both = pad_pair.solve([1.0, -1.0])
    np.testing.assert_allclose(a.sigma - b.sigma, both.sigma, atol=1e-9 * np.abs(both.sigma).max())


def test_energy_matches_capacitance_matrix(pad_pair):
    cap = pad_pair.capacitance()
    solution = pad_pair.solve({"pad1": 1.0, "pad2": -1.0})
    assert solution.total_energy == pytest.approx(cap.energy([1.0, -1.0]), rel=1e-9)
    assert cap.C[0, 0] == pytest.approx(cap.C[1, 1], rel=1e-9)
    assert cap.C[0, 1] < 0
    assert cap.index("pad2") == 1


def test_field_is_minus_potential_gradient(pad_pair):
    solution = pad_pair.solve({"pad1": 1.0, "pad2": -1.0})
    h = 0.01
    v = solution.potential_at(np.array([[3.0, h], [3.0, -h]]))
    ey_numeric = -(v[0] - v[1]) / (2 * h * 1e-6)

    field = in_plane_field(solution, np.array([[3.0, 0.0]]))[0]
    assert field[1] == pytest.approx(ey_numeric, rel=1e-5)
    assert abs(field[0]) < 1e-6 * abs(field[1])


def test_unknown_potential_name(pad_pair):
    with pytest.raises(UsageError):
        pad_pair.solve({"pad3": 1.0})
    with pytest.raises(UsageError):
        pad_pair.solve([1.0, 2.0, 3.0])


def test_maxwell_matrix_of_a_layout(small_layout, small_solver):
    mesh = mesh_layout(small_layout, small_solver)
    cap = MomSystem(mesh, HalfSpaceDielectric(11.7)).capacitance()
    C = cap.C
    off_diagonal = C[~np.eye(3, dtype=bool)]
    assert np.all(off_diagonal <= 0)
    assert np.all(C.sum(axis=1) >= -1e-3 * np.diag(C))
    assert cap.asymmetry < 0.02


def test_capacitance_subset(small_layout, small_solver):
    mesh = mesh_layout(small_layout, small_solver)
    cap = capacitance_matrix(mesh, HalfSpaceDielectric(11.7), ["pad2", "pad1"])
    assert cap.conductor_names == ("pad2", "pad1")
    assert cap.C.shape == (2, 2)


def test_duplicate_panels_are_rejected():
    square = box(0, 0, 2, 2)
    mesh = mesh_conductors([("a", square), ("b", square)], target_panel_size=1)
    with pytest.raises(SolverError, match="duplicate"):
        MomSystem(mesh, HalfSpaceDielectric(11.7))


def test_mean_gap_field_is_v_over_d():
    gap, depth = 10.0, 0.025
    top = box(-40, gap / 2, 40, gap / 2 + 40)
    mesh = mesh_conductors(
        [("top", top), ("bottom", mirror_y(top))], target_panel_size=4, edge_band_size=0.1
    )
    solution = MomSystem(mesh, HalfSpaceDielectric(11.7)).solve({"top": 0.5, "bottom": -0.5})

    # Line integral of E across the gap at the plate center.
    half = gap / 2 + depth
    v = solution.potential_at(np.array([[0.0, half], [0.0, -half]]))
    distance = 2 * half * 1e-6
    mean_field = (v[0] - v[1]) / distance
    assert mean_field == pytest.approx(1.0 / distance, rel=0.02)


@pytest.mark.slow
@pytest.mark.parametrize(
    "conductors, potentials",
    [
        ([("plate", box(0, 0, 20, 20))], {"plate": 1.0}),
        ([("pad1", PAD), ("pad2", mirror_y(PAD))], {"pad1": 0.5, "pad2": -0.5}),
    ],
    ids=["plate", "pad_pair"],
)
def test_capacitance_converges_under_refinement(conductors, potentials):
    energies = []
    for target, band in [(2, 0.25), (1, 0.125), (0.5, 0.0625)]:
        mesh = mesh_conductors(conductors, target_panel_size=target, edge_band_size=band)
        energies.append(MomSystem(mesh, HalfSpaceDielectric(1.0)).solve(potentials).total_energy)

    coarse, middle, fine = energies
    assert abs(fine - middle) < abs(middle - coarse)
    assert fine == pytest.approx(middle, rel=0.01)


# ==================== Interface fields ====================


def test_metal_region_reads_the_charge_density(pad_pair):
    solution = pad_pair.solve({"pad1": 1.0, "pad2": -1.0})
    index = np.arange(5)
    region = SampleRegion("MS", solution.mesh.centroids[index], np.ones(5), "metal", panel_index=index)
    samples = interface_fields(solution, [region])["MS"]
    np.testing.assert_allclose(samples.e_normal, solution.dielectric.normal_field(solution.sigma[index]))
    assert np.all(samples.e_tangential == 0)


def test_plane_region_sums_all_panels(pad_pair):
    solution = pad_pair.solve({"pad1": 1.0, "pad2": -1.0})
    points = np.array([[0.0, 0.0], [15.0, 0.0]])
    region = SampleRegion("SA", points, np.ones(2), "plane")
    samples = interface_fields(solution, [region])["SA"]
    expected = np.linalg.norm(in_plane_field(solution, points), axis=1)
    np.testing.assert_allclose(samples.e_tangential, expected)
    assert samples.e_tangential[0] > samples.e_tangential[1]


def test_centerline_field_ignores_drive_sign():
    profile = straight_wire(1.0, 20.0)
    diel = HalfSpaceDielectric(11.7)
    forward = centerline_field(profile, diel, n_samples=21)
    reverse = centerline_field(profile, diel, n_samples=21, potentials=(-0.5, 0.5))
    np.testing.assert_allclose(forward.e, reverse.e, rtol=1e-12)
    assert forward.y[0] == pytest.approx(0.1)
    assert forward.y[-1] == pytest.approx(20.0)


def test_wider_wire_has_lower_midspan_field():
    diel = HalfSpaceDielectric(11.7)
    narrow = centerline_field(straight_wire(1.0, 20.0), diel, n_samples=21)
    wide = centerline_field(straight_wire(3.0, 20.0), diel, n_samples=21)
    assert wide.e[10] < narrow.e[10]


@pytest.mark.slow
def test_straight_wire_field_is_flat_mid_span():
    field = centerline_field(straight_wire(1.0, 81.0), HalfSpaceDielectric(11.7), n_samples=81)
    span = field.y[-1] - field.y[0]
    middle = (field.y >= field.y[0] + 0.2 * span) & (field.y <= field.y[-1] - 0.2 * span)
    e = field.e[middle]
    assert np.ptp(e) / e.mean() < 0.2


# ==================== Edge problem ====================


def test_edge_factors_exceed_one(simplified):
    solution = solve_edge_problem(0.1, 1.0, simplified, EdgeSettings())
    assert set(solution.factors) == {"MS", "MA", "SA"}
    assert all(f > 1 for f in solution.factors.values())
    assert solution.factor("MS") == solution.energy_diverging["MS"] / solution.energy_accurate["MS"]


def test_edge_factor_grows_with_x0(simplified):
    near = solve_edge_problem(0.1, 1.0, simplified, EdgeSettings())
    far = solve_edge_problem(0.1, 2.0, simplified, EdgeSettings())
    assert far.factor("MS") > near.factor("MS")


def test_mirrored_edge_problem_agrees(simplified):
    left = solve_edge_problem(0.1, 1.0, simplified, EdgeSettings())
    right = solve_edge_problem(0.1, 1.0, simplified, EdgeSettings(), mirrored=True)
    for layer in ("MS", "MA", "SA"):
        assert right.factor(layer) == pytest.approx(left.factor(layer), rel=1e-6)


def test_edge_grid_must_resolve_thinnest_layer(simplified):
    with pytest.raises(ConfigError, match="cannot resolve"):
        solve_edge_problem(0.1, 1.0, simplified, EdgeSettings(min_spacing=0.01))


def test_edge_problem_rejects_bad_sizes(simplified):
    with pytest.raises(ConfigError):
        solve_edge_problem(0.1, 0.0, simplified, EdgeSettings())
    with pytest.raises(ConfigError, match="too small"):
        solve_edge_problem(0.1, 20.0, simplified, EdgeSettings())


@pytest.mark.slow
def test_edge_factors_are_grid_stable(simplified):
    default = solve_edge_problem(0.1, 1.0, simplified, EdgeSettings())
    fine = solve_edge_problem(0.1, 1.0, simplified, EdgeSettings(min_spacing=0.00025, growth=1.1))
    for layer in ("MS", "MA", "SA"):
        assert fine.factor(layer) == pytest.approx(default.factor(layer), rel=0.05)
