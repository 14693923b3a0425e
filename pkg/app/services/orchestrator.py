import cmath
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from app.core.config import get_settings
from app.core.errors import InputParseError
from app.core.logger import log
from app.models.schemas_api import Command, CommandResult, InputDocument, RunConfig
from app.services import complex_model, prequant_bundle, propagator_lab
from app.services.homology_engine import (
    character_group,
    describe_group,
    enumerate_characters,
    first_homology,
)
from app.services.tools_io import InputLoader, parse_flux_grid
from app.services.tools_report import (
    ReportGenerator,
    character_dict,
    complex_pair,
    format_character,
    format_complex,
    format_float,
    matrix_payload,
)

settings = get_settings()

DEFAULT_FIXTURES = {
    Command.DEMO_AB: "annulus",
    Command.DEMO_EXCHANGE: "two_particle",
}

DEFAULT_FLUX_GRID = "0:4pi:25"


class QuantizationOrchestrator:
    """
    Dispatches one batch command over the engines and assembles its result
    """

    def __init__(self):
        self.loader = InputLoader()
        self.reports = ReportGenerator()
        self.handlers: Dict[Command, Callable[[RunConfig, InputDocument], CommandResult]] = {
            Command.CLASSIFY: self.classify,
            Command.CHECK_WEIL: self.check_weil,
            Command.HOLONOMY: self.holonomy,
            Command.PROPAGATE: self.propagate,
            Command.DEMO_AB: self.demo_ab,
            Command.DEMO_EXCHANGE: self.demo_exchange,
            Command.CHECK_ATLAS: self.check_atlas,
        }

    def run(self, config: RunConfig, document: Optional[InputDocument] = None) -> CommandResult:
        """Load the input (or the command's default fixture) and execute"""
        if document is None:
            if config.input is not None:
                document = self.loader.load(config.input)
            elif config.command in DEFAULT_FIXTURES:
                document = self.loader.fixture(DEFAULT_FIXTURES[config.command])
            else:
                raise InputParseError(f"command '{config.command.value}' needs --input")
        log.info(f"Running {config.command.value}")
        return self.handlers[config.command](config, document)

    def resolve_hbar(self, config: RunConfig, document: InputDocument) -> float:
        if document.hbar is not None:
            return document.hbar
        if config.hbar is not None:
            return config.hbar
        return settings.HBAR

    def _require(self, document: InputDocument, *fields: str):
        missing = [f for f in fields if getattr(document, f) is None]
        if missing:
            raise InputParseError(f"input is missing required sections: {', '.join(missing)}")

    def classify(self, config: RunConfig, document: InputDocument) -> CommandResult:
        """Characters of pi_1: bundle classes and connection moduli"""
        hbar = self.resolve_hbar(config, document)
        payload: Dict = {}
        extra: List[str] = []

        if document.presentation is not None:
            presentation = document.presentation
        elif document.complex is not None:
            c = document.complex
            group_data = complex_model.fundamental_presentation(c)
            presentation = group_data.presentation
            b0, b1, b2 = complex_model.simplicial_betti(c)
            payload["complex"] = {
                "vertices": c.n_vertices,
                "edges": c.n_edges,
                "faces": c.n_faces,
                "euler_characteristic": complex_model.euler_characteristic(c),
                "simplicial_betti": [b0, b1, b2],
                "generator_edges": list(group_data.generator_edges),
            }
            extra = [
                "",
                f"complex          : {c.n_vertices} vertices, {c.n_edges} edges, {c.n_faces} faces",
                f"euler char       : {complex_model.euler_characteristic(c)}",
                f"simplicial betti : {[b0, b1, b2]}",
                f"generator edges  : {list(group_data.generator_edges)}",
            ]
        else:
            raise InputParseError("classify needs a presentation or a complex")

        h = first_homology(presentation)
        group = character_group(h)
        grid = parse_flux_grid(config.flux_grid, hbar)
        if grid is not None and h.betti:
            angles = [flux / hbar for flux in propagator_lab.linear_flux_grid(*grid)]
            characters = enumerate_characters(h, [angles])
        else:
            if grid is not None:
                log.warning("flux grid ignored: the group has no free part")
            characters = list(group.component_representatives)

        lines = self.reports.classification_lines(describe_group(h), h, group, characters) + extra
        payload.update({
            "group": describe_group(h),
            "betti": h.betti,
            "torsion": list(h.torsion),
            "n_bundle_classes": group.n_components,
            "moduli_dimension": group.identity_component_dim,
            "verdict": self.reports.classification_summary(h, group),
            "characters": [character_dict(chi) for chi in characters],
        })

        if document.complex is not None and document.connection is not None:
            label = document.torsion_label or (0,) * len(h.torsion)
            chi = prequant_bundle.classify_connection(document.complex, document.connection, label, hbar, config.tol)
            lines += ["", f"connection       : {format_character(chi)}"]
            payload["connection_character"] = character_dict(chi)

        return CommandResult(
            command=Command.CLASSIFY,
            title="Prequantization classification",
            lines=lines,
            payload=payload,
            table=self.reports.characters_table(characters),
        )

    def check_weil(self, config: RunConfig, document: InputDocument) -> CommandResult:
        self._require(document, "complex", "two_form")
        hbar = self.resolve_hbar(config, document)
        report = prequant_bundle.weil_check(document.complex, document.two_form, hbar, config.tol)
        rejection = None
        if not report.accepted:
            worst = max(report.violations, key=lambda cycle: cycle.deviation)
            rejection = f"flux / 2 pi hbar = {format_float(worst.value)} through cycle {list(worst.cycle)}"
        return CommandResult(
            command=Command.CHECK_WEIL,
            title="Weil integrality check",
            lines=self.reports.weil_lines(report),
            payload=report.model_dump(),
            table=self.reports.weil_table(report),
            accepted=report.accepted,
            rejection=rejection,
        )

    def holonomy(self, config: RunConfig, document: InputDocument) -> CommandResult:
        """Holonomy of the connection around each listed loop"""
        self._require(document, "complex", "connection")
        c = document.complex
        hbar = self.resolve_hbar(config, document)
        loops = [complex_model.as_loop(p) for p in self.loader.paths(c, document.loops)]
        if not loops:
            raise InputParseError("holonomy needs at least one entry under 'loops'")
        tree = complex_model.spanning_tree(c)

        rows, lines, entries = [], [f"hbar = {format_float(hbar)}"], []
        for i, loop in enumerate(loops):
            value = prequant_bundle.holonomy(loop, document.connection, hbar)
            homology = complex_model.homology_class(c, tree, loop)
            phase = cmath.phase(value)
            rows.append({"loop": i, "homology_class": " ".join(map(str, homology)),
                         "re": value.real, "im": value.imag, "phase": phase})
            entries.append({"homology_class": list(homology), "holonomy": complex_pair(value), "phase": phase})
            lines.append(f"loop {i} class {list(homology)}: {format_complex(value)} (phase {format_float(phase)})")

        return CommandResult(
            command=Command.HOLONOMY,
            title="Loop holonomies",
            lines=lines,
            payload={"hbar": hbar, "loops": entries},
            table=pd.DataFrame(rows, columns=["loop", "homology_class", "re", "im", "phase"]),
        )

    def propagate(self, config: RunConfig, document: InputDocument) -> CommandResult:
        self._require(document, "complex")
        c = document.complex
        steps = 4 if config.steps is None else config.steps
        rule = propagator_lab.default_step_rule(c, config.hopping)
        sp = propagator_lab.sector_propagators(c, rule, steps, engine=config.engine.value)
        residual = float(np.max(np.abs(sp.total() - propagator_lab.plain_propagator(c, rule, steps))))
        return CommandResult(
            command=Command.PROPAGATE,
            title="Homology-sector propagator",
            lines=self.reports.sector_lines(sp, residual),
            payload={
                "steps": steps,
                "engine": sp.engine,
                "generator_edges": list(sp.generator_edges),
                "reference_paths": sp.basepath_convention,
                "plain_residual": residual,
                "sectors": [
                    {"sector": list(key), "matrix": matrix_payload(sp.sectors[key])}
                    for key in sorted(sp.sectors)
                ],
            },
            table=self.reports.sector_table(sp),
        )

    def demo_ab(self, config: RunConfig, document: InputDocument) -> CommandResult:
        """Aharonov-Bohm flux scan on an annulus"""
        self._require(document, "complex")
        hbar = self.resolve_hbar(config, document)
        grid = parse_flux_grid(config.flux_grid or DEFAULT_FLUX_GRID, hbar)
        scan = propagator_lab.ab_interference_scan(
            document.complex,
            rule=propagator_lab.default_step_rule(document.complex, config.hopping),
            n_steps=6 if config.steps is None else config.steps,
            source=0 if config.source is None else config.source,
            detector=3 if config.detector is None else config.detector,
            flux_grid=propagator_lab.linear_flux_grid(*grid),
            hbar=hbar,
            engine=config.engine.value,
        )
        return CommandResult(
            command=Command.DEMO_AB,
            title="Aharonov-Bohm interference scan",
            lines=self.reports.scan_lines(scan, hbar),
            payload={"hbar": hbar, "scan": scan.to_dict(orient="records")},
            table=scan,
        )

    def demo_exchange(self, config: RunConfig, document: InputDocument) -> CommandResult:
        """Boson and fermion propagators of two identical particles"""
        self._require(document, "complex")
        base = document.complex
        steps = 4 if config.steps is None else config.steps
        report = propagator_lab.exchange_statistics_demo(
            base, steps, propagator_lab.default_step_rule(base, config.hopping)
        )
        return CommandResult(
            command=Command.DEMO_EXCHANGE,
            title="Exchange statistics",
            lines=self.reports.exchange_lines(report),
            payload={
                "steps": steps,
                "pair_labels": [list(pair) for pair in report.pair_labels],
                "boson_symmetry_residual": report.boson_symmetry_residual,
                "fermion_antisymmetry_residual": report.fermion_antisymmetry_residual,
                "sector_sum_residual": report.sector_sum_residual,
                "quotient_residual": report.quotient_residual,
                "boson": matrix_payload(report.boson),
                "fermion": matrix_payload(report.fermion),
            },
            table=self.reports.exchange_table(report),
        )

    def check_atlas(self, config: RunConfig, document: InputDocument) -> CommandResult:
        """Atlas consistency, then glued factors and lift invariance for listed paths"""
        self._require(document, "complex", "atlas")
        c, atlas = document.complex, document.atlas
        hbar = self.resolve_hbar(config, document)
        report = prequant_bundle.atlas_consistency(c, atlas, hbar, config.tol)
        lines = self.reports.atlas_lines(report)
        payload: Dict = {"hbar": hbar, "ok": report.ok, "violations": [v.model_dump() for v in report.violations]}

        if not report.ok:
            return CommandResult(
                command=Command.CHECK_ATLAS,
                title="Chart atlas check",
                lines=lines,
                payload=payload,
                table=self.reports.atlas_table(report),
                accepted=False,
                rejection=f"{len(report.violations)} atlas violations, first: {report.violations[0].message}",
            )

        rows, entries = [], []
        seed = settings.SEED if config.seed is None else config.seed
        for i, path in enumerate(self.loader.paths(c, document.paths)):
            glued = prequant_bundle.feynman_factor_glued(c, path, atlas, hbar, tol=config.tol)
            lifts = propagator_lab.lift_invariance_check(c, path, atlas, hbar, config.lifts, seed=seed)
            rows.append({
                "path": i,
                "first_chart": glued.first_chart,
                "last_chart": glued.last_chart,
                "re": glued.value.real,
                "im": glued.value.imag,
                "lift_deviation": lifts.max_deviation,
            })
            entries.append({
                "factor": complex_pair(glued.value),
                "schedule": list(glued.schedule),
                "lift_deviation": lifts.max_deviation,
            })
            lines.append(
                f"path {i}: factor {format_complex(glued.value)} charts {glued.first_chart}->{glued.last_chart}, "
                f"{config.lifts} random lifts deviate by {lifts.max_deviation:.3e}"
            )
        payload["paths"] = entries
        payload["seed"] = seed
        return CommandResult(
            command=Command.CHECK_ATLAS,
            title="Chart atlas check",
            lines=lines,
            payload=payload,
            table=pd.DataFrame(rows, columns=["path", "first_chart", "last_chart", "re", "im", "lift_deviation"]),
        )
