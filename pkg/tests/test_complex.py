import numpy as np
import pytest

from app.core.errors import (
    CompositionError,
    ConnectivityError,
    InvalidComplexError,
    InvalidParameterError,
    InvalidPathError,
    NotALoopError,
)
from app.models.schemas_complex import CWComplex
from app.services import complex_model
from app.services.homology_engine import describe_group, first_homology
from app.services.tools_io import InputLoader

loader = InputLoader()


def ring(n):
    return CWComplex(n_vertices=n, edges=[(i, (i + 1) % n) for i in range(n)])


TORUS = CWComplex(n_vertices=1, edges=[(0, 0), (0, 0)], faces=[[(0, 1), (1, 1), (0, -1), (1, -1)]])
KLEIN = CWComplex(n_vertices=1, edges=[(0, 0), (0, 0)], faces=[[(0, 1), (1, 1), (0, 1), (1, -1)]])


def group_of(c):
    return describe_group(first_homology(complex_model.fundamental_presentation(c).presentation))


def test_validate_reports_defects():
    """Structural defects are reported by name, not raised"""
    assert complex_model.validate_complex(ring(4)).ok
    bad_endpoint = CWComplex(n_vertices=2, edges=[(0, 2)])
    assert complex_model.validate_complex(bad_endpoint).defect == "bad endpoint"
    open_face = CWComplex(n_vertices=3, edges=[(0, 1), (1, 2)], faces=[[(0, 1), (1, 1)]])
    assert complex_model.validate_complex(open_face).defect == "open face boundary"
    split = CWComplex(n_vertices=4, edges=[(0, 1), (2, 3)])
    assert complex_model.validate_complex(split).defect == "disconnected complex"


def test_ensure_valid_raises():
    with pytest.raises(ConnectivityError):
        complex_model.ensure_valid(CWComplex(n_vertices=4, edges=[(0, 1), (2, 3)]))
    with pytest.raises(InvalidComplexError):
        complex_model.ensure_valid(CWComplex(n_vertices=2, edges=[(0, 1)], faces=[[(5, 1)]]))


def test_spanning_tree_of_hexagon():
    """Breadth-first tree from vertex 0 leaves edge 3 (vertex 3 -> 4) as the generator"""
    c = ring(6)
    tree = complex_model.spanning_tree(c)
    assert tree == frozenset({0, 1, 2, 4, 5})
    assert complex_model.generator_edges(c, tree) == (3,)


@pytest.mark.parametrize("c, name", [
    (ring(6), "Z^1"),
    (TORUS, "Z^2"),
    (KLEIN, "Z^1 + Z/2"),
])
def test_fundamental_group_of_built_complexes(c, name):
    assert group_of(c) == name


@pytest.mark.parametrize("fixture, name", [
    ("annulus", "Z^1"),
    ("disc", "0"),
    ("wedge", "Z^2"),
    ("rp2", "Z/2"),
    ("cube_integral", "0"),
    ("two_particle", "Z^1"),
])
def test_fundamental_group_of_fixtures(fixture, name):
    assert group_of(loader.fixture(fixture).complex) == name


def test_generator_loops_are_unit_classes():
    """The loop through each generator edge has homology class e_i"""
    c = loader.fixture("wedge").complex
    group = complex_model.fundamental_presentation(c)
    for index, edge in enumerate(group.generator_edges):
        loop = complex_model.generator_loop(c, group.tree, edge)
        assert loop.start == loop.end == 0
        expected = tuple(int(i == index) for i in range(len(group.generator_edges)))
        assert complex_model.homology_class(c, group.tree, loop) == expected


def test_homology_class_of_winding_loops():
    c = ring(6)
    tree = complex_model.spanning_tree(c)
    around = complex_model.make_path(c, 0, [(e, 1) for e in range(6)])
    assert complex_model.homology_class(c, tree, around) == (1,)
    assert complex_model.homology_class(c, tree, complex_model.reverse(around)) == (-1,)
    twice = complex_model.compose(around, around)
    assert complex_model.homology_class(c, tree, twice) == (2,)
    back_and_forth = complex_model.make_path(c, 3, [(3, 1), (3, -1)])
    assert complex_model.homology_class(c, tree, back_and_forth) == (0,)


def test_face_loops_are_null_homologous():
    """Face boundaries die in H_1"""
    c = KLEIN
    group = complex_model.fundamental_presentation(c)
    h = first_homology(group.presentation)
    loop = complex_model.face_loop(c, group.tree, 0)
    counts = complex_model.homology_class(c, group.tree, loop)
    assert counts == (2, 0)
    assert h.torsion == (2,)


def test_path_construction_errors():
    c = ring(4)
    with pytest.raises(InvalidPathError):
        complex_model.make_path(c, 0, [(1, 1)])
    with pytest.raises(InvalidPathError):
        complex_model.make_path(c, 7, [])
    p = complex_model.make_path(c, 0, [(0, 1)])
    with pytest.raises(CompositionError):
        complex_model.compose(p, p)
    with pytest.raises(NotALoopError):
        complex_model.as_loop(p)
    with pytest.raises(NotALoopError):
        complex_model.homology_class(c, complex_model.spanning_tree(c), p)


def test_path_vertices_and_reverse():
    c = ring(4)
    p = complex_model.make_path(c, 1, [(1, 1), (2, 1), (3, 1)])
    assert complex_model.path_vertices(c, p) == [1, 2, 3, 0]
    r = complex_model.reverse(p)
    assert (r.start, r.end) == (0, 1)
    assert complex_model.path_vertices(c, r) == [0, 3, 2, 1]


def test_cube_two_cycle_and_betti():
    """The cube surface is a sphere: one 2-cycle using every face once"""
    c = loader.fixture("cube_integral").complex
    assert complex_model.two_cycle_basis(c) == [(1, 1, 1, 1, 1, 1)]
    assert complex_model.simplicial_betti(c) == (1, 0, 1)
    assert complex_model.euler_characteristic(c) == 2


def test_betti_numbers():
    assert complex_model.simplicial_betti(TORUS) == (1, 2, 1)
    assert complex_model.simplicial_betti(loader.fixture("rp2").complex) == (1, 0, 0)
    assert complex_model.two_cycle_basis(loader.fixture("rp2").complex) == []
    assert complex_model.two_cycle_basis(ring(5)) == []


def random_walk(c, rng, start, length):
    """Steps of a random edge walk; stops early at a vertex without edges"""
    steps, vertex = [], start
    for _ in range(length):
        moves = [(e, 1) for e, (tail, _) in enumerate(c.edges) if tail == vertex]
        moves += [(e, -1) for e, (_, head) in enumerate(c.edges) if head == vertex]
        if not moves:
            break
        edge, direction = moves[int(rng.integers(len(moves)))]
        steps.append((edge, direction))
        vertex = complex_model.step_endpoints(c, edge, direction)[1]
    return steps, vertex


def random_loop(c, rng, tree, basepoint, length):
    steps, vertex = random_walk(c, rng, basepoint, length)
    closing = complex_model.tree_path(c, tree, vertex, basepoint)
    return complex_model.as_loop(complex_model.make_path(c, basepoint, steps + list(closing.steps)))


def random_complex(rng):
    """Connected complex on at most 8 vertices whose faces are random closed walks"""
    n = int(rng.integers(1, 9))
    edges = []
    for v in range(1, n):
        u = int(rng.integers(v))
        edges.append((u, v) if rng.random() < 0.5 else (v, u))
    for _ in range(int(rng.integers(0, 6))):
        edges.append((int(rng.integers(n)), int(rng.integers(n))))
    skeleton = CWComplex(n_vertices=n, edges=edges)
    if not edges:
        return skeleton
    tree = complex_model.spanning_tree(skeleton)
    faces = []
    for _ in range(int(rng.integers(0, 4))):
        start = int(rng.integers(n))
        loop = random_loop(skeleton, rng, tree, start, int(rng.integers(1, 7)))
        if loop.steps:
            faces.append(loop.steps)
    return CWComplex(n_vertices=n, edges=edges, faces=faces)


def rank(matrix):
    return int(np.linalg.matrix_rank(matrix)) if matrix.size else 0


def test_betti_number_matches_rank_oracle():
    """b_1 of the edge-path presentation equals E - rank d1 - rank d2 over the rationals"""
    rng = np.random.default_rng(17)
    for _ in range(200):
        c = random_complex(rng)
        d1 = np.zeros((c.n_vertices, c.n_edges))
        for e, (tail, head) in enumerate(c.edges):
            d1[head, e] += 1
            d1[tail, e] -= 1
        d2 = np.zeros((c.n_edges, c.n_faces))
        for f, boundary in enumerate(c.faces):
            for e, direction in boundary:
                d2[e, f] += direction
        expected = c.n_edges - rank(d1) - rank(d2)

        h = first_homology(complex_model.fundamental_presentation(c).presentation)
        assert h.betti == expected
        assert complex_model.simplicial_betti(c)[1] == expected


def test_homology_class_is_additive_under_composition():
    rng = np.random.default_rng(23)
    for _ in range(50):
        c = random_complex(rng)
        if not c.edges:
            continue
        tree = complex_model.spanning_tree(c)
        p = random_loop(c, rng, tree, 0, 8)
        q = random_loop(c, rng, tree, 0, 8)
        combined = complex_model.homology_class(c, tree, complex_model.compose(p, q))
        separate = np.add(complex_model.homology_class(c, tree, p), complex_model.homology_class(c, tree, q))
        assert combined == tuple(int(x) for x in separate)
        inverse = complex_model.homology_class(c, tree, complex_model.reverse(p))
        assert inverse == tuple(-x for x in complex_model.homology_class(c, tree, p))


def test_out_of_range_basepoint():
    c = ring(6)
    with pytest.raises(InvalidParameterError):
        complex_model.spanning_tree(c, root=9)
    with pytest.raises(InvalidParameterError):
        complex_model.fundamental_presentation(c, basepoint=9)
    with pytest.raises(InvalidParameterError):
        complex_model.generator_loop(c, complex_model.spanning_tree(c), 3, basepoint=-1)
