"""
Discrete prequantization geometry.

1-forms are edge cochains and 2-forms face cochains, both in action units.
A chart atlas carries one potential theta_j per chart and transition
angles phi_jk on overlaps, related by theta_j - theta_k = hbar * d(phi_jk).
Local wave functions satisfy psi_j = exp(i phi_jk) psi_k, so the Feynman
factors of a path x -> x' in two charts differ by

    F_j = C_jk * F_k,    C_jk = Z_jk(x') / Z_jk(x),    Z_jk = exp(i phi_jk).
"""
import cmath
import itertools
import math
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx

from app.core.config import get_settings
from app.core.errors import (
    AtlasConsistencyError,
    AtlasCoverageError,
    ChartEscapeError,
    CurvatureError,
    DimensionMismatchError,
    InvalidParameterError,
    NonExactFormError,
    NotALoopError,
)
from app.core.logger import log
from app.models.schemas_bundle import (
    AtlasReport,
    AtlasViolation,
    ChartAtlas,
    CycleFlux,
    DiscreteOneForm,
    DiscreteTwoForm,
    EquivalenceReport,
    GluedFactor,
    LiftedPath,
    Prequantization,
    WeilReport,
)
from app.models.schemas_complex import CWComplex, EdgePath, EdgePathGroup
from app.models.schemas_topology import TWO_PI, Character, FirstHomology
from app.services import complex_model
from app.services.homology_engine import angle_distance, characters_equivalent, first_homology

settings = get_settings()


def _check_hbar(hbar: float):
    if not hbar > 0:
        raise InvalidParameterError(f"hbar must be positive, got {hbar}")


def check_one_form(c: CWComplex, form: DiscreteOneForm):
    missing = [e for e in range(c.n_edges) if e not in form.values]
    if missing:
        raise DimensionMismatchError(f"1-form has no value on edges {missing}")


def check_two_form(c: CWComplex, form: DiscreteTwoForm):
    missing = [f for f in range(c.n_faces) if f not in form.values]
    if missing:
        raise DimensionMismatchError(f"2-form has no value on faces {missing}")


def line_integral(path: EdgePath, form: DiscreteOneForm) -> float:
    """Signed edge sum of `form` along `path`"""
    try:
        return math.fsum(direction * form[edge] for edge, direction in path.steps)
    except KeyError as e:
        raise DimensionMismatchError(f"1-form has no value on edge {e.args[0]}") from e


def exterior_derivative(c: CWComplex, form: DiscreteOneForm) -> DiscreteTwoForm:
    """d(form): signed boundary sum on every face"""
    check_one_form(c, form)
    return DiscreteTwoForm(values={
        index: math.fsum(direction * form[edge] for edge, direction in boundary)
        for index, boundary in enumerate(c.faces)
    })


def coboundary(c: CWComplex, potential: Sequence[float]) -> DiscreteOneForm:
    """df(e) = f(head) - f(tail) for a vertex function f"""
    if len(potential) != c.n_vertices:
        raise DimensionMismatchError(f"vertex function has {len(potential)} values, complex has {c.n_vertices} vertices")
    return DiscreteOneForm(values={
        index: potential[head] - potential[tail] for index, (tail, head) in enumerate(c.edges)
    })


def weil_check(
    c: CWComplex,
    sigma: DiscreteTwoForm,
    hbar: float,
    tol: Optional[float] = None
) -> WeilReport:
    """
    Weil integrality: (1/2 pi hbar) * flux through every basis 2-cycle is an integer

    Reports the value of each cycle; never raises on a non-integral flux.
    """
    _check_hbar(hbar)
    tol = settings.WEIL_TOL if tol is None else tol
    check_two_form(c, sigma)

    cycles = []
    for cycle in complex_model.two_cycle_basis(c):
        flux = math.fsum(coefficient * sigma[face] for face, coefficient in enumerate(cycle) if coefficient)
        value = flux / (TWO_PI * hbar)
        nearest = round(value)
        deviation = abs(value - nearest)
        cycles.append(CycleFlux(
            cycle=cycle,
            value=value,
            nearest_integer=nearest,
            deviation=deviation,
            integral=deviation <= tol,
        ))

    accepted = all(cycle.integral for cycle in cycles)
    log.info(f"Weil check over {len(cycles)} two-cycles: {'accept' if accepted else 'reject'}")
    return WeilReport(accepted=accepted, hbar=hbar, tol=tol, cycles=cycles)


def edge_in_chart(c: CWComplex, atlas: ChartAtlas, chart: int, edge: int) -> bool:
    """Both endpoints inside U_j and a potential value on the edge"""
    tail, head = c.edges[edge]
    U = atlas.charts[chart]
    return U.contains(tail) and U.contains(head) and edge in U.potential.values


def covering_charts(c: CWComplex, atlas: ChartAtlas, edge: int) -> List[int]:
    return [j for j in range(len(atlas.charts)) if edge_in_chart(c, atlas, j, edge)]


def atlas_consistency(
    c: CWComplex,
    atlas: ChartAtlas,
    hbar: float,
    tol: Optional[float] = None
) -> AtlasReport:
    """
    Check a chart atlas against the complex

    Covering, connected charts, potentials on every inner edge, transition
    angles on every overlap vertex, compatibility
    theta_j(e) - theta_k(e) = hbar (phi_jk(b) - phi_jk(a)) mod 2 pi hbar on
    every overlap edge e = a -> b, and the cocycle condition
    phi_jk + phi_kl = phi_jl mod 2 pi on triple overlaps. Violations are
    collected, not raised.
    """
    _check_hbar(hbar)
    tol = settings.ATLAS_TOL if tol is None else tol
    violations: List[AtlasViolation] = []
    graph = complex_model.complex_graph(c)
    n_charts = len(atlas.charts)

    covered = set()
    for j, chart in enumerate(atlas.charts):
        outside = [v for v in chart.vertices if not 0 <= v < c.n_vertices]
        if outside:
            violations.append(AtlasViolation(
                kind="bad vertex", charts=(j,), vertex=outside[0],
                message=f"chart {j} lists vertex {outside[0]} outside the complex",
            ))
            continue
        covered.update(chart.vertices)
        if not nx.is_connected(graph.subgraph(chart.vertices)):
            violations.append(AtlasViolation(
                kind="disconnected chart", charts=(j,),
                message=f"chart {j} does not induce a connected subcomplex",
            ))
        for edge, (tail, head) in enumerate(c.edges):
            if chart.contains(tail) and chart.contains(head) and edge not in chart.potential.values:
                violations.append(AtlasViolation(
                    kind="missing potential", charts=(j,), edge=edge,
                    message=f"chart {j} has no potential on inner edge {edge}",
                ))

    for v in range(c.n_vertices):
        if v not in covered:
            violations.append(AtlasViolation(
                kind="coverage", vertex=v, message=f"vertex {v} lies in no chart",
            ))

    tables: Dict[Tuple[int, int], Dict[int, float]] = {}
    for j, k in itertools.combinations(range(n_charts), 2):
        overlap = atlas.overlap(j, k)
        if not overlap:
            continue
        table = atlas.transition_table(j, k) or {}
        reverse_table = atlas.transition_table(k, j) or {}
        missing = [v for v in overlap if v not in table]
        if missing:
            violations.append(AtlasViolation(
                kind="missing transition", charts=(j, k), vertex=missing[0],
                message=f"phi_{j}{k} undefined at overlap vertices {missing}",
            ))
            continue
        for v in overlap:
            if v in reverse_table:
                residual = angle_distance(table[v] + reverse_table[v], 0.0)
                if residual > tol:
                    violations.append(AtlasViolation(
                        kind="cocycle", charts=(j, k), vertex=v, residual=residual,
                        message=f"phi_{j}{k} + phi_{k}{j} = {table[v] + reverse_table[v]:.6g} at vertex {v}",
                    ))
        tables[(j, k)] = table

        for edge, (tail, head) in enumerate(c.edges):
            if tail not in overlap or head not in overlap:
                continue
            potentials = (atlas.charts[j].potential.values, atlas.charts[k].potential.values)
            if edge not in potentials[0] or edge not in potentials[1]:
                continue
            jump = (potentials[0][edge] - potentials[1][edge]) / hbar
            residual = angle_distance(jump - (table[head] - table[tail]), 0.0)
            if residual > tol:
                violations.append(AtlasViolation(
                    kind="compatibility", charts=(j, k), edge=edge, residual=residual,
                    message=(
                        f"theta_{j} - theta_{k} = {jump * hbar:.6g} on edge {edge}, "
                        f"hbar * d(phi_{j}{k}) = {(table[head] - table[tail]) * hbar:.6g}"
                    ),
                ))

    for j, k, l in itertools.combinations(range(n_charts), 3):
        if (j, k) not in tables or (k, l) not in tables or (j, l) not in tables:
            continue
        for v in atlas.overlap(j, k, l):
            defect = tables[(j, k)][v] + tables[(k, l)][v] - tables[(j, l)][v]
            residual = angle_distance(defect, 0.0)
            if residual > tol:
                violations.append(AtlasViolation(
                    kind="cocycle", charts=(j, k, l), vertex=v, residual=residual,
                    message=f"phi_{j}{k} + phi_{k}{l} - phi_{j}{l} = {defect:.6g} at vertex {v}",
                ))

    if violations:
        log.warning(f"Atlas check found {len(violations)} violations")
    return AtlasReport(ok=not violations, violations=violations)


def ensure_consistent(c: CWComplex, atlas: ChartAtlas, hbar: float, tol: Optional[float] = None):
    report = atlas_consistency(c, atlas, hbar, tol)
    if not report.ok:
        raise AtlasConsistencyError(
            f"atlas is inconsistent ({len(report.violations)} violations): {report.violations[0].message}"
        )


def _check_inside(c: CWComplex, path: EdgePath, chart: int, atlas: ChartAtlas):
    if not 0 <= chart < len(atlas.charts):
        raise ChartEscapeError(f"chart {chart} does not exist, atlas has {len(atlas.charts)}")
    if not atlas.charts[chart].contains(path.start):
        raise ChartEscapeError(f"path starts at vertex {path.start} outside chart {chart}")
    for position, (edge, _) in enumerate(path.steps):
        if not edge_in_chart(c, atlas, chart, edge):
            raise ChartEscapeError(f"step {position} (edge {edge}) leaves chart {chart}; use the glued factor")


def horizontal_lift(
    c: CWComplex,
    path: EdgePath,
    chart: int,
    atlas: ChartAtlas,
    hbar: float,
    initial_angle: float = 0.0
) -> LiftedPath:
    """Fiber angles along the horizontal lift: each step subtracts theta_j / hbar"""
    _check_hbar(hbar)
    _check_inside(c, path, chart, atlas)
    potential = atlas.charts[chart].potential
    angles = [initial_angle]
    for edge, direction in path.steps:
        angles.append(angles[-1] - direction * potential[edge] / hbar)
    return LiftedPath(base=path, fiber_angles=tuple(angles), chart=chart)


def feynman_factor_chart(
    c: CWComplex,
    path: EdgePath,
    chart: int,
    atlas: ChartAtlas,
    hbar: float
) -> complex:
    """exp((i / hbar) * integral of theta_j along a path inside chart j"""
    _check_hbar(hbar)
    _check_inside(c, path, chart, atlas)
    return cmath.exp(1j * line_integral(path, atlas.charts[chart].potential) / hbar)


def resolve_schedule(
    c: CWComplex,
    path: EdgePath,
    atlas: ChartAtlas,
    chart_schedule: Optional[Sequence[int]] = None,
    start_chart: Optional[int] = None
) -> Tuple[int, ...]:
    """
    Chart used for each step of the path

    A supplied schedule is checked edge by edge. Otherwise the greedy
    schedule stays in the current chart while it contains the next edge and
    switches to the lowest-index chart that does.
    """
    for position, (edge, _) in enumerate(path.steps):
        if not covering_charts(c, atlas, edge):
            raise AtlasCoverageError(f"edge {edge} (step {position}) lies in no chart")

    if chart_schedule is not None:
        schedule = tuple(chart_schedule)
        if len(schedule) != len(path):
            raise DimensionMismatchError(f"schedule has {len(schedule)} charts for {len(path)} steps")
        for position, ((edge, _), chart) in enumerate(zip(path.steps, schedule)):
            if not 0 <= chart < len(atlas.charts) or not edge_in_chart(c, atlas, chart, edge):
                raise ChartEscapeError(f"step {position} (edge {edge}) is not inside scheduled chart {chart}")
        return schedule

    schedule = []
    current = start_chart
    for edge, _ in path.steps:
        if current is None or not edge_in_chart(c, atlas, current, edge):
            current = covering_charts(c, atlas, edge)[0]
        schedule.append(current)
    return tuple(schedule)


def feynman_factor_glued(
    c: CWComplex,
    path: EdgePath,
    atlas: ChartAtlas,
    hbar: float,
    chart_schedule: Optional[Sequence[int]] = None,
    start_chart: Optional[int] = None,
    end_chart: Optional[int] = None,
    tol: Optional[float] = None
) -> GluedFactor:
    """
    Feynman factor of an arbitrary path, lifted chart by chart

    Switching from chart j to chart j' at vertex v multiplies the factor by
    exp(i phi_j'j(v)). The result does not depend on interior chart choices;
    replacing both endpoint charts j by k divides it by C_jk
    (see endpoint_transition_ratio).
    """
    _check_hbar(hbar)
    ensure_consistent(c, atlas, hbar, tol)
    schedule = resolve_schedule(c, path, atlas, chart_schedule, start_chart)
    vertices = complex_model.path_vertices(c, path)

    if start_chart is None:
        if schedule:
            start_chart = schedule[0]
        else:
            holders = [j for j, chart in enumerate(atlas.charts) if chart.contains(path.start)]
            if not holders:
                raise AtlasCoverageError(f"vertex {path.start} lies in no chart")
            start_chart = holders[0]
    if not 0 <= start_chart < len(atlas.charts) or not atlas.charts[start_chart].contains(path.start):
        raise ChartEscapeError(f"start vertex {path.start} is not in chart {start_chart}")

    phase = 0.0
    current = start_chart
    for position, ((edge, direction), chart) in enumerate(zip(path.steps, schedule)):
        if chart != current:
            phase += atlas.transition_angle(chart, current, vertices[position])
            current = chart
        phase += direction * atlas.charts[chart].potential[edge] / hbar

    last_chart = current if end_chart is None else end_chart
    if not 0 <= last_chart < len(atlas.charts) or not atlas.charts[last_chart].contains(path.end):
        raise ChartEscapeError(f"end vertex {path.end} is not in chart {last_chart}")
    phase += atlas.transition_angle(last_chart, current, path.end)

    return GluedFactor(
        value=cmath.exp(1j * phase),
        first_chart=start_chart,
        last_chart=last_chart,
        schedule=schedule,
    )


def endpoint_transition_ratio(atlas: ChartAtlas, j: int, k: int, start: int, end: int) -> complex:
    """C_jk = Z_jk(end) / Z_jk(start), so that F_j = C_jk * F_k for a path start -> end"""
    return cmath.exp(1j * (atlas.transition_angle(j, k, end) - atlas.transition_angle(j, k, start)))


def holonomy(loop: EdgePath, conn: DiscreteOneForm, hbar: float) -> complex:
    """exp((i / hbar) * circulation of conn around the loop)"""
    _check_hbar(hbar)
    if loop.end != loop.start:
        raise NotALoopError(f"path from {loop.start} ends at {loop.end}, not a loop")
    return cmath.exp(1j * line_integral(loop, conn) / hbar)


def check_flat(c: CWComplex, conn: DiscreteOneForm, hbar: float, tol: Optional[float] = None):
    """Raise CurvatureError naming the worst face when some face sum exceeds tol * hbar"""
    tol = settings.FLATNESS_TOL if tol is None else tol
    curvature = exterior_derivative(c, conn)
    if not curvature.values:
        return
    worst = max(curvature.values, key=lambda f: abs(curvature[f]))
    if abs(curvature[worst]) > tol * hbar:
        raise CurvatureError(
            f"connection is not flat: face {worst} carries curvature {curvature[worst]:.6g}",
            face=worst,
            curvature=curvature[worst],
        )


def generator_periods(
    c: CWComplex,
    conn: DiscreteOneForm,
    hbar: float,
    basepoint: int = 0
) -> Tuple[EdgePathGroup, Tuple[float, ...]]:
    """Circulation / hbar around each generator loop, unreduced"""
    _check_hbar(hbar)
    check_one_form(c, conn)
    group = complex_model.fundamental_presentation(c, basepoint)
    values = tuple(
        line_integral(complex_model.generator_loop(c, group.tree, edge, basepoint), conn) / hbar
        for edge in group.generator_edges
    )
    return group, values


def periods(c: CWComplex, conn: DiscreteOneForm, hbar: float) -> Tuple[float, ...]:
    """Flux around each generator loop in units of 2 pi hbar"""
    _, values = generator_periods(c, conn, hbar)
    return tuple(v / TWO_PI for v in values)


def exact_potential(
    c: CWComplex,
    conn: DiscreteOneForm,
    hbar: float,
    tol: Optional[float] = None
) -> Tuple[float, ...]:
    """
    Vertex function f with df = conn, f(0) = 0

    Exists exactly when every generator period vanishes; otherwise raises
    NonExactFormError. On a complex with finite H_1 every flat connection
    qualifies.
    """
    tol = settings.FLATNESS_TOL if tol is None else tol
    check_flat(c, conn, hbar, tol)
    group, values = generator_periods(c, conn, hbar)
    for edge, value in zip(group.generator_edges, values):
        if abs(value) > tol:
            raise NonExactFormError(f"connection has period {value * hbar:.6g} around the loop through edge {edge}")
    return tuple(
        line_integral(complex_model.tree_path(c, group.tree, group.basepoint, v), conn)
        for v in range(c.n_vertices)
    )


def classify_connection(
    c: CWComplex,
    conn: DiscreteOneForm,
    torsion_label: Sequence[int] = (),
    hbar: Optional[float] = None,
    tol: Optional[float] = None
) -> Character:
    """
    Character of a flat connection twisted by a torsion label

    Generator-loop holonomies phi are carried to homology coordinates by
    the inverse basis change; the free coordinates become the free angles.
    A real flat connection is invisible on torsion, so the component is the
    supplied label.
    """
    hbar = settings.HBAR if hbar is None else hbar
    _check_hbar(hbar)
    check_one_form(c, conn)
    check_flat(c, conn, hbar, tol)

    group, phi = generator_periods(c, conn, hbar)
    h = first_homology(group.presentation)
    label = tuple(torsion_label)
    if len(label) != len(h.torsion):
        raise DimensionMismatchError(f"torsion label {label} does not match torsion invariants {h.torsion}")

    inverse = h.basis_inverse.entries
    psi = [math.fsum(inverse[i][g] * phi[g] for g in range(h.n_generators)) for i in range(h.n_generators)]
    character = Character(
        free_angles=tuple(psi[j] for j in h.free_columns),
        torsion_labels=tuple(k % d for k, d in zip(label, h.torsion)),
    )
    log.info(f"Classified connection: free angles {character.free_angles}, component {character.torsion_labels}")
    return character


def build_prequantization(
    c: CWComplex,
    conn: DiscreteOneForm,
    torsion_label: Sequence[int] = (),
    hbar: Optional[float] = None,
    tol: Optional[float] = None
) -> Prequantization:
    hbar = settings.HBAR if hbar is None else hbar
    character = classify_connection(c, conn, torsion_label, hbar, tol)
    h = first_homology(complex_model.fundamental_presentation(c).presentation)
    return Prequantization(connection=conn, character=character, homology=h, hbar=hbar)


def _same_homology(h1: FirstHomology, h2: FirstHomology) -> bool:
    return h1.betti == h2.betti and tuple(h1.torsion) == tuple(h2.torsion)


def prequantizations_equivalent(
    p1: Prequantization,
    p2: Prequantization,
    tol: Optional[float] = None
) -> EquivalenceReport:
    """Same bundle iff same component; same connection iff also congruent flux angles"""
    if not _same_homology(p1.homology, p2.homology):
        raise DimensionMismatchError("prequantizations live on spaces with different first homology")
    same_bundle = tuple(p1.character.torsion_labels) == tuple(p2.character.torsion_labels)
    same_connection = same_bundle and characters_equivalent(p1.character, p2.character, tol)
    return EquivalenceReport(same_bundle=same_bundle, same_connection=same_connection)
