"""
Configuration spaces as 2-dimensional CW complexes.

Supplies the homology_engine with presentations of pi_1 (one generator per
edge off a breadth-first spanning tree, one relator per face), homology
classes of loops and the integer 2-cycles used by the Weil check.
"""
from typing import Dict, FrozenSet, Iterable, List, Sequence, Tuple

import networkx as nx

from app.core.errors import (
    CompositionError,
    ConnectivityError,
    InvalidComplexError,
    InvalidParameterError,
    InvalidPathError,
    NotALoopError,
)
from app.core.logger import log
from app.models.schemas_complex import (
    ComplexDiagnostic,
    CWComplex,
    EdgePath,
    EdgePathGroup,
    Loop,
    SignedEdge,
)
from app.models.schemas_topology import FinitePresentation, GroupWord, IntegerMatrix
from app.services.homology_engine import smith_normal_form


def step_endpoints(c: CWComplex, edge: int, direction: int) -> Tuple[int, int]:
    """(from, to) vertices of a signed edge"""
    tail, head = c.edges[edge]
    return (tail, head) if direction == 1 else (head, tail)


def complex_graph(c: CWComplex) -> nx.MultiGraph:
    """1-skeleton as a multigraph keyed by edge index"""
    graph = nx.MultiGraph()
    graph.add_nodes_from(range(c.n_vertices))
    for index, (tail, head) in enumerate(c.edges):
        graph.add_edge(tail, head, key=index)
    return graph


def validate_complex(c: CWComplex) -> ComplexDiagnostic:
    """Check endpoints, closed face boundaries and connectedness; report the first defect"""
    for index, (tail, head) in enumerate(c.edges):
        if not (0 <= tail < c.n_vertices and 0 <= head < c.n_vertices):
            return ComplexDiagnostic(
                ok=False, defect="bad endpoint", index=index,
                message=f"edge {index} = ({tail}, {head}) references a vertex outside 0..{c.n_vertices - 1}",
            )

    for index, boundary in enumerate(c.faces):
        if not boundary:
            return ComplexDiagnostic(
                ok=False, defect="empty face boundary", index=index,
                message=f"face {index} has an empty boundary word",
            )
        for edge, direction in boundary:
            if not 0 <= edge < c.n_edges:
                return ComplexDiagnostic(
                    ok=False, defect="bad face edge", index=index,
                    message=f"face {index} references edge {edge}, complex has {c.n_edges}",
                )
            if direction not in (1, -1):
                return ComplexDiagnostic(
                    ok=False, defect="bad direction", index=index,
                    message=f"face {index} uses direction {direction}, expected +1 or -1",
                )
        for position, (edge, direction) in enumerate(boundary):
            following = boundary[(position + 1) % len(boundary)]
            if step_endpoints(c, edge, direction)[1] != step_endpoints(c, *following)[0]:
                return ComplexDiagnostic(
                    ok=False, defect="open face boundary", index=index,
                    message=f"face {index} boundary breaks after step {position}",
                )

    if not nx.is_connected(complex_graph(c)):
        n_components = nx.number_connected_components(complex_graph(c))
        return ComplexDiagnostic(
            ok=False, defect="disconnected complex",
            message=f"complex has {n_components} connected components",
        )

    return ComplexDiagnostic(ok=True)


def ensure_valid(c: CWComplex):
    """Raise unless validate_complex reports ok"""
    diagnostic = validate_complex(c)
    if diagnostic.ok:
        return
    if diagnostic.defect == "disconnected complex":
        raise ConnectivityError(diagnostic.message)
    raise InvalidComplexError(f"{diagnostic.defect}: {diagnostic.message}")


def spanning_tree(c: CWComplex, root: int = 0) -> FrozenSet[int]:
    """
    Breadth-first spanning tree from `root`, incident edges taken in index order

    Returns the set of tree edge indices (n_vertices - 1 of them).
    """
    ensure_valid(c)
    if not 0 <= root < c.n_vertices:
        raise InvalidParameterError(f"root vertex {root} outside 0..{c.n_vertices - 1}")
    graph = complex_graph(c)
    visited = {root}
    frontier = [root]
    tree = set()
    while frontier:
        next_frontier = []
        for vertex in frontier:
            # neighbours appear in order of their lowest connecting edge index
            for neighbour, keyed in graph.adj[vertex].items():
                if neighbour not in visited:
                    visited.add(neighbour)
                    tree.add(min(keyed))
                    next_frontier.append(neighbour)
        frontier = next_frontier
    if len(visited) != c.n_vertices:
        raise ConnectivityError(f"spanning tree from {root} reaches {len(visited)} of {c.n_vertices} vertices")
    return frozenset(tree)


def generator_edges(c: CWComplex, tree: Iterable[int]) -> Tuple[int, ...]:
    """Edges off the tree, in index order"""
    tree = set(tree)
    return tuple(e for e in range(c.n_edges) if e not in tree)


def make_path(c: CWComplex, start: int, steps: Sequence[SignedEdge]) -> EdgePath:
    """Build an EdgePath, checking that consecutive steps chain head to tail"""
    if not 0 <= start < c.n_vertices:
        raise InvalidPathError(f"start vertex {start} outside 0..{c.n_vertices - 1}")
    current = start
    for position, (edge, direction) in enumerate(steps):
        if not 0 <= edge < c.n_edges or direction not in (1, -1):
            raise InvalidPathError(f"step {position} = ({edge}, {direction}) is not a signed edge of the complex")
        source, target = step_endpoints(c, edge, direction)
        if source != current:
            raise InvalidPathError(f"step {position} leaves from {source} but the path is at {current}")
        current = target
    return EdgePath(start=start, steps=tuple(tuple(s) for s in steps), end=current)


def path_vertices(c: CWComplex, path: EdgePath) -> List[int]:
    """Visited vertices, start included (len(path) + 1 entries)"""
    vertices = [path.start]
    for edge, direction in path.steps:
        vertices.append(step_endpoints(c, edge, direction)[1])
    return vertices


def as_loop(path: EdgePath) -> Loop:
    if path.end != path.start:
        raise NotALoopError(f"path from {path.start} ends at {path.end}, not a loop")
    return Loop(start=path.start, steps=path.steps, end=path.end)


def compose(p: EdgePath, q: EdgePath) -> EdgePath:
    """p followed by q"""
    if p.end != q.start:
        raise CompositionError(f"cannot compose: first path ends at {p.end}, second starts at {q.start}")
    return EdgePath(start=p.start, steps=p.steps + q.steps, end=q.end)


def reverse(p: EdgePath) -> EdgePath:
    """Same edges walked backwards"""
    cls = Loop if isinstance(p, Loop) else EdgePath
    return cls(start=p.end, steps=tuple((e, -d) for e, d in reversed(p.steps)), end=p.start)


def tree_path(c: CWComplex, tree: Iterable[int], source: int, target: int) -> EdgePath:
    """Unique path from source to target inside the spanning tree"""
    for vertex in (source, target):
        if not 0 <= vertex < c.n_vertices:
            raise InvalidParameterError(f"vertex {vertex} outside 0..{c.n_vertices - 1}")
    signed: Dict[Tuple[int, int], SignedEdge] = {}
    graph = nx.Graph()
    graph.add_nodes_from(range(c.n_vertices))
    for edge in tree:
        tail, head = c.edges[edge]
        graph.add_edge(tail, head)
        signed[(tail, head)] = (edge, 1)
        signed[(head, tail)] = (edge, -1)
    try:
        vertices = nx.shortest_path(graph, source, target)
    except nx.NetworkXNoPath as e:
        raise ConnectivityError(f"no tree path from {source} to {target}") from e
    steps = tuple(signed[(u, v)] for u, v in zip(vertices, vertices[1:]))
    return EdgePath(start=source, steps=steps, end=target)


def generator_loop(c: CWComplex, tree: Iterable[int], edge: int, basepoint: int = 0) -> Loop:
    """Basepoint -> tail through the tree, across `edge`, head -> basepoint through the tree"""
    tree = frozenset(tree)
    tail, head = c.edges[edge]
    path = compose(
        compose(tree_path(c, tree, basepoint, tail), EdgePath(start=tail, steps=((edge, 1),), end=head)),
        tree_path(c, tree, head, basepoint),
    )
    return as_loop(path)


def face_loop(c: CWComplex, tree: Iterable[int], face: int, basepoint: int = 0) -> Loop:
    """Face boundary conjugated to the basepoint through the tree"""
    boundary = c.faces[face]
    corner = step_endpoints(c, *boundary[0])[0]
    around = make_path(c, corner, boundary)
    approach = tree_path(c, tree, basepoint, corner)
    return as_loop(compose(compose(approach, around), reverse(approach)))


def fundamental_presentation(c: CWComplex, basepoint: int = 0) -> EdgePathGroup:
    """
    Edge-path group presentation of pi_1(c, basepoint)

    One generator per non-tree edge, one relator per face: the boundary
    word with tree edges dropped.
    """
    tree = spanning_tree(c, root=basepoint)
    generators = generator_edges(c, tree)
    position = {edge: index for index, edge in enumerate(generators)}
    relators = [
        GroupWord(letters=tuple((position[e], d) for e, d in boundary if e in position))
        for boundary in c.faces
    ]
    presentation = FinitePresentation(n_generators=len(generators), relators=tuple(relators))
    log.info(f"Edge-path presentation: {len(generators)} generators, {len(relators)} relators")
    return EdgePathGroup(
        presentation=presentation,
        generator_edges=generators,
        tree=tuple(sorted(tree)),
        basepoint=basepoint,
    )


def traversal_counts(c: CWComplex, tree: Iterable[int], path: EdgePath) -> Tuple[int, ...]:
    """Signed number of crossings of each non-tree edge (open paths allowed)"""
    generators = generator_edges(c, tree)
    position = {edge: index for index, edge in enumerate(generators)}
    counts = [0] * len(generators)
    for edge, direction in path.steps:
        if edge in position:
            counts[position[edge]] += direction
    return tuple(counts)


def homology_class(c: CWComplex, tree: Iterable[int], loop: EdgePath) -> Tuple[int, ...]:
    """Generator exponent vector of a loop: tree edges contribute nothing"""
    if loop.end != loop.start:
        raise NotALoopError(f"path from {loop.start} ends at {loop.end}, not a loop")
    return traversal_counts(c, tree, loop)


def boundary_matrices(c: CWComplex) -> Tuple[IntegerMatrix, IntegerMatrix]:
    """(d1: edges -> vertices, d2: faces -> edges) as integer matrices"""
    d1 = [[0] * c.n_edges for _ in range(c.n_vertices)]
    for index, (tail, head) in enumerate(c.edges):
        d1[head][index] += 1
        d1[tail][index] -= 1
    d2 = [[0] * c.n_faces for _ in range(c.n_edges)]
    for index, boundary in enumerate(c.faces):
        for edge, direction in boundary:
            d2[edge][index] += direction
    return (
        IntegerMatrix.from_rows(d1, cols=c.n_edges),
        IntegerMatrix.from_rows(d2, cols=c.n_faces),
    )


def two_cycle_basis(c: CWComplex) -> List[Tuple[int, ...]]:
    """Integer basis of ker d2, each vector signed so its first non-zero entry is positive"""
    ensure_valid(c)
    if not c.faces:
        return []
    _, d2 = boundary_matrices(c)
    snf = smith_normal_form(d2)
    basis = []
    for j in range(snf.rank, c.n_faces):
        vector = snf.V.column(j)
        leading = next(x for x in vector if x)
        basis.append(tuple(-x for x in vector) if leading < 0 else vector)
    return basis


def simplicial_betti(c: CWComplex) -> Tuple[int, int, int]:
    """(b0, b1, b2) from the ranks of the boundary maps"""
    d1, d2 = boundary_matrices(c)
    rank1 = smith_normal_form(d1).rank if c.n_edges else 0
    rank2 = smith_normal_form(d2).rank if c.n_faces else 0
    return (
        c.n_vertices - rank1,
        c.n_edges - rank1 - rank2,
        c.n_faces - rank2,
    )


def euler_characteristic(c: CWComplex) -> int:
    return c.n_vertices - c.n_edges + c.n_faces
