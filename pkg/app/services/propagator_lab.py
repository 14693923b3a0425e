"""
Path-integral laboratory on finite complexes.

A step rule assigns an amplitude to each move of one time step (stay, or
traverse an edge in either direction). Paths are sorted by the generator
exponent vector of their closure through fixed reference paths, which is
the discrete version of sorting lifts to the covering space by deck
transformation. Character-weighted sums over sectors give the propagators
of the inequivalent quantizations.

Two engines compute the sectors: a transfer matrix on the truncated
abelian cover (polynomial) and exhaustive path enumeration (exponential,
used as an oracle and capped by MAX_ENUMERATED_PATHS).
"""
import itertools
from collections import defaultdict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from app.core.config import get_settings
from app.core.errors import (
    ChartEscapeError,
    DimensionMismatchError,
    InvalidComplexError,
    InvalidParameterError,
    InvalidPathError,
    OverlapError,
    PathBudgetError,
    TopologyError,
)
from app.core.logger import log
from app.models.schemas_bundle import ChartAtlas
from app.models.schemas_complex import CWComplex, EdgePath
from app.models.schemas_propagator import (
    ExchangeReport,
    LiftInvarianceReport,
    Sector,
    SectorPropagator,
    StepRule,
    WaveFunction,
)
from app.models.schemas_topology import TWO_PI, Character, FinitePresentation, FirstHomology
from app.services import complex_model, prequant_bundle
from app.services.homology_engine import evaluate_character, first_homology

settings = get_settings()

ENGINES = ("cover", "enumerate")


def vertex_degrees(c: CWComplex) -> List[int]:
    """Edge ends at each vertex (a loop edge counts twice)"""
    degrees = [0] * c.n_vertices
    for tail, head in c.edges:
        degrees[tail] += 1
        degrees[head] += 1
    return degrees


def default_step_rule(c: CWComplex, hopping: Optional[float] = None) -> StepRule:
    """Edge amplitude i*lambda each way, stay amplitude 1 - degree * i*lambda"""
    hopping = settings.DEFAULT_HOPPING if hopping is None else hopping
    hop = 1j * hopping
    return StepRule(
        forward=(hop,) * c.n_edges,
        backward=(hop,) * c.n_edges,
        stay=tuple(1 - d * hop for d in vertex_degrees(c)),
    )


def _check_rule(c: CWComplex, rule: StepRule):
    if len(rule.forward) != c.n_edges or len(rule.stay) != c.n_vertices:
        raise DimensionMismatchError(
            f"step rule has {len(rule.forward)} edge and {len(rule.stay)} stay amplitudes "
            f"for a complex with {c.n_edges} edges and {c.n_vertices} vertices"
        )


def _check_steps(n_steps: int):
    if n_steps < 0:
        raise InvalidParameterError(f"number of steps must be non-negative, got {n_steps}")


def transfer_matrix(c: CWComplex, rule: StepRule) -> np.ndarray:
    """One-step matrix T[x', x]"""
    _check_rule(c, rule)
    T = np.diag(np.array(rule.stay, dtype=complex))
    for edge, (tail, head) in enumerate(c.edges):
        T[head, tail] += rule.forward[edge]
        T[tail, head] += rule.backward[edge]
    return T


def plain_propagator(c: CWComplex, rule: StepRule, n_steps: int) -> np.ndarray:
    """T^n, the propagator that ignores sectors"""
    _check_steps(n_steps)
    return np.linalg.matrix_power(transfer_matrix(c, rule), n_steps)


def _reference_offsets(
    c: CWComplex,
    tree: Sequence[int],
    basepoint: int,
    reference_paths: Optional[Sequence[EdgePath]]
) -> Tuple[List[Sector], str]:
    """Generator counts of each vertex's reference path v -> basepoint"""
    n_generators = len(complex_model.generator_edges(c, tree))
    if reference_paths is None:
        # tree geodesics cross no generator edge
        return [(0,) * n_generators] * c.n_vertices, f"tree geodesics to vertex {basepoint}"
    if len(reference_paths) != c.n_vertices:
        raise DimensionMismatchError(f"{len(reference_paths)} reference paths for {c.n_vertices} vertices")
    offsets = []
    for v, path in enumerate(reference_paths):
        path = complex_model.make_path(c, path.start, path.steps)
        if path.start != v or path.end != basepoint:
            raise InvalidPathError(f"reference path {v} must run from {v} to {basepoint}")
        offsets.append(complex_model.traversal_counts(c, tree, path))
    return offsets, f"supplied reference paths to vertex {basepoint}"


def _moves(c: CWComplex, rule: StepRule, tree: Sequence[int]):
    """Per vertex: (target, amplitude, generator index or -1, sign)"""
    position = {edge: g for g, edge in enumerate(complex_model.generator_edges(c, tree))}
    moves = [[(v, rule.stay[v], -1, 0)] for v in range(c.n_vertices)]
    for edge, (tail, head) in enumerate(c.edges):
        g = position.get(edge, -1)
        moves[tail].append((head, rule.forward[edge], g, 1))
        moves[head].append((tail, rule.backward[edge], g, -1))
    return moves


def count_paths(c: CWComplex, n_steps: int) -> int:
    """Number of n-step move sequences over all start vertices (exact integers)"""
    counts = [1] * c.n_vertices
    for _ in range(n_steps):
        following = [0] * c.n_vertices
        for v, count in enumerate(counts):
            following[v] += count
        for tail, head in c.edges:
            following[head] += counts[tail]
            following[tail] += counts[head]
        counts = following
    return sum(counts)


def _shift(sector: Sector, g: int, sign: int) -> Sector:
    return sector[:g] + (sector[g] + sign,) + sector[g + 1:]


def _cover_sectors(c: CWComplex, rule: StepRule, tree: Sequence[int], n_steps: int) -> Dict[Sector, np.ndarray]:
    """Transfer matrix on the abelian cover, truncated to the sectors reachable in n steps"""
    n = c.n_vertices
    generators = complex_model.generator_edges(c, tree)
    position = {edge: g for g, edge in enumerate(generators)}

    local = np.diag(np.array(rule.stay, dtype=complex))
    for edge in tree:
        tail, head = c.edges[edge]
        local[head, tail] += rule.forward[edge]
        local[tail, head] += rule.backward[edge]

    state: Dict[Sector, np.ndarray] = {(0,) * len(generators): np.eye(n, dtype=complex)}
    for step in range(n_steps):
        following: Dict[Sector, np.ndarray] = defaultdict(lambda: np.zeros((n, n), dtype=complex))
        for sector, K in state.items():
            following[sector] += local @ K
            for edge, g in position.items():
                tail, head = c.edges[edge]
                # only open a neighbouring sector once some path can reach it
                if K[tail, :].any():
                    following[_shift(sector, g, 1)][head, :] += rule.forward[edge] * K[tail, :]
                if K[head, :].any():
                    following[_shift(sector, g, -1)][tail, :] += rule.backward[edge] * K[head, :]
        state = dict(following)
        if len(state) > settings.MAX_COVER_SECTORS:
            raise PathBudgetError(
                f"cover evolution reached {len(state)} sectors after {step + 1} steps "
                f"(limit {settings.MAX_COVER_SECTORS})",
                count=len(state),
            )
    return state


def enumerate_sector_propagators(
    c: CWComplex,
    rule: StepRule,
    tree: Sequence[int],
    n_steps: int
) -> Dict[Sector, np.ndarray]:
    """Walk every n-step path and file its amplitude under its generator counts"""
    total = count_paths(c, n_steps)
    if total > settings.MAX_ENUMERATED_PATHS:
        raise PathBudgetError(
            f"{total} paths of {n_steps} steps exceed the enumeration limit {settings.MAX_ENUMERATED_PATHS}",
            count=total,
        )
    log.debug(f"Enumerating {total} paths of {n_steps} steps")

    n = c.n_vertices
    moves = _moves(c, rule, tree)
    counts = [0] * len(complex_model.generator_edges(c, tree))
    sectors: Dict[Sector, np.ndarray] = {}

    def walk(source: int, vertex: int, amplitude: complex, remaining: int):
        if remaining == 0:
            key = tuple(counts)
            if key not in sectors:
                sectors[key] = np.zeros((n, n), dtype=complex)
            sectors[key][vertex, source] += amplitude
            return
        for target, step_amplitude, g, sign in moves[vertex]:
            if g >= 0:
                counts[g] += sign
            walk(source, target, amplitude * step_amplitude, remaining - 1)
            if g >= 0:
                counts[g] -= sign

    for source in range(n):
        walk(source, source, 1 + 0j, n_steps)
    return sectors


def _apply_offsets(raw: Dict[Sector, np.ndarray], offsets: List[Sector]) -> Dict[Sector, np.ndarray]:
    """Move entry (x', x) of raw sector m to sector m + off(x') - off(x)"""
    if all(not any(o) for o in offsets):
        return raw
    n = len(offsets)
    shifted: Dict[Sector, np.ndarray] = {}
    for sector, K in raw.items():
        for x_end, x in itertools.product(range(n), repeat=2):
            if K[x_end, x] == 0:
                continue
            key = tuple(m + a - b for m, a, b in zip(sector, offsets[x_end], offsets[x]))
            if key not in shifted:
                shifted[key] = np.zeros((n, n), dtype=complex)
            shifted[key][x_end, x] += K[x_end, x]
    return shifted


def sector_propagators(
    c: CWComplex,
    rule: StepRule,
    n_steps: int,
    reference_paths: Optional[Sequence[EdgePath]] = None,
    engine: str = "cover",
    basepoint: int = 0
) -> SectorPropagator:
    """
    Propagator split by homology sector

    Entry [m](x', x) sums the amplitudes of n-step paths x -> x' whose closure
    ref(x)^-1 . path . ref(x') has generator exponent vector m. Reference
    paths run from each vertex to the basepoint; by default they are tree
    geodesics, which cross no generator.
    """
    _check_steps(n_steps)
    _check_rule(c, rule)
    if engine not in ENGINES:
        raise InvalidParameterError(f"unknown engine {engine!r}, expected one of {ENGINES}")

    tree = complex_model.spanning_tree(c, root=basepoint)
    offsets, convention = _reference_offsets(c, tree, basepoint, reference_paths)
    if engine == "cover":
        raw = _cover_sectors(c, rule, tree, n_steps)
    else:
        raw = enumerate_sector_propagators(c, rule, tree, n_steps)

    sectors = _apply_offsets(raw, offsets)
    log.info(f"Sector propagator ({engine}): {n_steps} steps, {len(sectors)} sectors")
    return SectorPropagator(
        sectors=sectors,
        n_steps=n_steps,
        n_vertices=c.n_vertices,
        generator_edges=complex_model.generator_edges(c, tree),
        basepath_convention=convention,
        engine=engine,
    )


def sector_deviation(a: SectorPropagator, b: SectorPropagator) -> float:
    """Largest entrywise difference over the union of sectors"""
    keys = set(a.sectors) | set(b.sectors)
    return max((float(np.max(np.abs(a.sector(k) - b.sector(k)))) for k in keys), default=0.0)


def weighted_propagator(sp: SectorPropagator, chi: Character, h: FirstHomology) -> np.ndarray:
    """K_chi = sum over sectors m of chi(m) * K_m"""
    if h.n_generators != len(sp.generator_edges):
        raise DimensionMismatchError(
            f"homology has {h.n_generators} generators, propagator sectors have {len(sp.generator_edges)}"
        )
    weighted = np.zeros((sp.n_vertices, sp.n_vertices), dtype=complex)
    for sector, K in sp.sectors.items():
        weighted = weighted + evaluate_character(chi, h, sector) * K
    return weighted


def ab_interference_scan(
    annulus: CWComplex,
    rule: Optional[StepRule] = None,
    n_steps: int = 6,
    source: int = 0,
    detector: int = 3,
    flux_grid: Sequence[float] = (),
    hbar: Optional[float] = None,
    engine: str = "cover"
) -> pd.DataFrame:
    """
    Aharonov-Bohm scan: detector intensity as a function of enclosed flux

    One row per flux value with columns flux, intensity, re_amplitude,
    im_amplitude. The flux enters only through the angle flux/hbar mod 2 pi,
    so the intensity is 2 pi hbar periodic.
    """
    hbar = settings.HBAR if hbar is None else hbar
    if not hbar > 0:
        raise InvalidParameterError(f"hbar must be positive, got {hbar}")
    group = complex_model.fundamental_presentation(annulus)
    h = first_homology(group.presentation)
    if h.betti != 1:
        raise TopologyError(f"Aharonov-Bohm scan needs first Betti number 1, got {h.betti}")
    for vertex in (source, detector):
        if not 0 <= vertex < annulus.n_vertices:
            raise InvalidParameterError(f"vertex {vertex} outside 0..{annulus.n_vertices - 1}")

    rule = default_step_rule(annulus) if rule is None else rule
    sp = sector_propagators(annulus, rule, n_steps, engine=engine)

    rows = []
    for flux in flux_grid:
        chi = Character(free_angles=(flux / hbar,), torsion_labels=(0,) * len(h.torsion))
        amplitude = weighted_propagator(sp, chi, h)[detector, source]
        rows.append({
            "flux": float(flux),
            "intensity": float(abs(amplitude) ** 2),
            "re_amplitude": float(amplitude.real),
            "im_amplitude": float(amplitude.imag),
        })
    log.info(f"Aharonov-Bohm scan: {len(rows)} flux values, {n_steps} steps, {source} -> {detector}")
    return pd.DataFrame(rows, columns=["flux", "intensity", "re_amplitude", "im_amplitude"])


def linear_flux_grid(start: float, stop: float, count: int) -> List[float]:
    """count evenly spaced values from start to stop inclusive"""
    if count < 1:
        raise InvalidParameterError(f"flux grid needs at least one point, got {count}")
    return [float(x) for x in np.linspace(start, stop, count)]


def two_particle_complex(base: CWComplex) -> Tuple[CWComplex, Tuple[Tuple[int, int], ...], Tuple[int, ...], Tuple[Tuple[int, int, int], ...]]:
    """
    Configuration graph of two distinguishable particles on distinct vertices

    Returns the ordered-pair graph, its vertex labels (u, v), the swap
    permutation (u, v) -> (v, u), and for each pair edge the
    (base edge, moving particle, spectator vertex) it comes from.
    """
    if base.n_vertices < 2:
        raise InvalidComplexError(f"two particles need at least 2 vertices, base graph has {base.n_vertices}")
    labels = tuple((u, v) for u, v in itertools.permutations(range(base.n_vertices), 2))
    index = {pair: i for i, pair in enumerate(labels)}

    edges = []
    origins = []
    for edge, (tail, head) in enumerate(base.edges):
        for w in range(base.n_vertices):
            if w in (tail, head):
                continue
            edges.append((index[(tail, w)], index[(head, w)]))
            origins.append((edge, 0, w))
            edges.append((index[(w, tail)], index[(w, head)]))
            origins.append((edge, 1, w))

    swap = tuple(index[(v, u)] for u, v in labels)
    pair_complex = CWComplex(n_vertices=len(labels), edges=tuple(edges))
    return pair_complex, labels, swap, tuple(origins)


def pair_step_rule(base: CWComplex, rule: StepRule) -> StepRule:
    """Hops inherit the base amplitude; stay(u, v) = stay(u) + stay(v) - 1"""
    _check_rule(base, rule)
    _, labels, _, origins = two_particle_complex(base)
    return StepRule(
        forward=tuple(rule.forward[edge] for edge, _, _ in origins),
        backward=tuple(rule.backward[edge] for edge, _, _ in origins),
        stay=tuple(rule.stay[u] + rule.stay[v] - 1 for u, v in labels),
    )


def quotient_propagator(
    base: CWComplex,
    rule: StepRule,
    n_steps: int
) -> Tuple[np.ndarray, Tuple[Tuple[int, int], ...]]:
    """Propagator on unordered pairs {u < v}, built directly on the quotient graph"""
    _check_rule(base, rule)
    _check_steps(n_steps)
    labels = tuple(itertools.combinations(range(base.n_vertices), 2))
    index = {pair: i for i, pair in enumerate(labels)}
    T = np.diag(np.array([rule.stay[u] + rule.stay[v] - 1 for u, v in labels], dtype=complex))
    for edge, (tail, head) in enumerate(base.edges):
        for w in range(base.n_vertices):
            if w in (tail, head):
                continue
            a = index[tuple(sorted((tail, w)))]
            b = index[tuple(sorted((head, w)))]
            T[b, a] += rule.forward[edge]
            T[a, b] += rule.backward[edge]
    return np.linalg.matrix_power(T, n_steps), labels


EXCHANGE_PRESENTATION = FinitePresentation(n_generators=1, relators=[[[0, 2]]])


def exchange_statistics_demo(
    base: CWComplex,
    n_steps: int,
    rule: Optional[StepRule] = None
) -> ExchangeReport:
    """
    Bosons and fermions as the two characters of the exchange group Z/2

    Paths of the ordered pair from x to x' form the direct sector; paths to
    swap(x') form the exchange sector. Boson = direct + exchange,
    fermion = direct - exchange.
    """
    _check_steps(n_steps)
    rule = default_step_rule(base) if rule is None else rule
    pair_complex, labels, swap, _ = two_particle_complex(base)
    direct = plain_propagator(pair_complex, pair_step_rule(base, rule), n_steps)
    exchange = direct[list(swap), :]

    sp = SectorPropagator(
        sectors={(0,): direct, (1,): exchange},
        n_steps=n_steps,
        n_vertices=pair_complex.n_vertices,
        generator_edges=(0,),
        basepath_convention="direct sector ends at x', exchange sector at swap(x')",
        engine="cover",
    )
    h = first_homology(EXCHANGE_PRESENTATION)
    boson = weighted_propagator(sp, Character(torsion_labels=(0,)), h)
    fermion = weighted_propagator(sp, Character(torsion_labels=(1,)), h)

    swapped = list(swap)
    quotient, unordered = quotient_propagator(base, rule, n_steps)
    ordered = [labels.index(pair) for pair in unordered]
    report = ExchangeReport(
        pair_labels=labels,
        n_steps=n_steps,
        direct=direct,
        exchange=exchange,
        boson=boson,
        fermion=fermion,
        boson_symmetry_residual=float(np.max(np.abs(boson[swapped, :] - boson))),
        fermion_antisymmetry_residual=float(np.max(np.abs(fermion[swapped, :] + fermion))),
        sector_sum_residual=float(np.max(np.abs(boson + fermion - 2 * direct))),
        quotient_residual=float(np.max(np.abs(boson[np.ix_(ordered, ordered)] - quotient), initial=0.0)),
    )
    log.info(
        f"Exchange demo on {base.n_vertices}-vertex graph, {n_steps} steps: "
        f"symmetry residuals {report.boson_symmetry_residual:.3g} / {report.fermion_antisymmetry_residual:.3g}, "
        f"boson vs quotient {report.quotient_residual:.3g}"
    )
    return report


def lift_factor(
    c: CWComplex,
    path: EdgePath,
    atlas: ChartAtlas,
    hbar: float,
    fiber_angles: Sequence[float],
    chart_schedule: Sequence[int],
    start_chart: int,
    end_chart: int
) -> complex:
    """
    Factor of an arbitrary (non-horizontal) lift

    fiber_angles[m] is the fiber coordinate at vertex m in the chart of the
    step leaving it (end_chart for the last vertex). Summing theta plus
    hbar times the fiber increments, then dividing out the endpoint fiber
    values, gives the glued Feynman factor for every choice of angles.
    """
    vertices = complex_model.path_vertices(c, path)
    if len(fiber_angles) != len(vertices):
        raise DimensionMismatchError(f"{len(fiber_angles)} fiber angles for {len(vertices)} vertices")
    incoming = (start_chart,) + tuple(chart_schedule)
    outgoing = tuple(chart_schedule) + (end_chart,)
    arriving = [
        angle - atlas.transition_angle(before, after, v)
        for angle, before, after, v in zip(fiber_angles, incoming, outgoing, vertices)
    ]

    action = 0.0
    for m, ((edge, direction), chart) in enumerate(zip(path.steps, chart_schedule)):
        action += direction * atlas.charts[chart].potential[edge] + hbar * (arriving[m + 1] - fiber_angles[m])
    return complex(np.exp(1j * action / hbar) * np.exp(1j * (arriving[0] - fiber_angles[-1])))


def lift_invariance_check(
    c: CWComplex,
    path: EdgePath,
    atlas: ChartAtlas,
    hbar: float,
    n_random_lifts: int = 10,
    seed: Optional[int] = None,
    chart_schedule: Optional[Sequence[int]] = None
) -> LiftInvarianceReport:
    """Evaluate random lifts against the glued factor; report the largest pairwise deviation"""
    seed = settings.SEED if seed is None else seed
    glued = prequant_bundle.feynman_factor_glued(c, path, atlas, hbar, chart_schedule=chart_schedule)
    rng = np.random.default_rng(seed)

    values = [glued.value]
    for _ in range(n_random_lifts):
        angles = rng.uniform(0.0, TWO_PI, size=len(path) + 1)
        values.append(lift_factor(
            c, path, atlas, hbar, angles,
            glued.schedule, glued.first_chart, glued.last_chart,
        ))

    deviation = max((abs(a - b) for a, b in itertools.combinations(values, 2)), default=0.0)
    return LiftInvarianceReport(
        reference=glued.value,
        values=tuple(values[1:]),
        max_deviation=float(deviation),
        n_lifts=n_random_lifts,
        seed=seed,
    )


def regauge_wavefunction(psi: WaveFunction, from_chart: int, to_chart: int, atlas: ChartAtlas) -> WaveFunction:
    """psi_k(v) = exp(-i phi_jk(v)) psi_j(v) on the overlap of charts j and k"""
    if psi.chart != from_chart:
        raise ChartEscapeError(f"wave function is given in chart {psi.chart}, not {from_chart}")
    overlap = set(atlas.overlap(from_chart, to_chart))
    outside = sorted(v for v in psi.amplitudes if v not in overlap)
    if outside:
        raise OverlapError(f"vertices {outside} lie outside the overlap of charts {from_chart} and {to_chart}")
    return WaveFunction(
        chart=to_chart,
        amplitudes={
            v: complex(np.exp(-1j * atlas.transition_angle(from_chart, to_chart, v)) * value)
            for v, value in psi.amplitudes.items()
        },
    )
