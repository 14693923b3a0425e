import json
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from app.core.errors import OutputWriteError
from app.core.logger import log
from app.models.schemas_api import CommandResult, CommandResponse, OutputFormat
from app.models.schemas_bundle import AtlasReport, WeilReport
from app.models.schemas_propagator import ExchangeReport, SectorPropagator
from app.models.schemas_topology import Character, CharacterGroupSummary, FirstHomology


def format_float(x: float) -> str:
    return f"{x:.12g}"


def format_complex(z: complex) -> str:
    return f"{z.real:.12g}{z.imag:+.12g}j"


def complex_pair(z: complex) -> List[float]:
    return [float(z.real), float(z.imag)]


def character_dict(chi: Character) -> Dict[str, Any]:
    return {"free_angles": list(chi.free_angles), "torsion_labels": list(chi.torsion_labels)}


def format_character(chi: Character) -> str:
    angles = ", ".join(format_float(a) for a in chi.free_angles)
    labels = ", ".join(str(k) for k in chi.torsion_labels)
    return f"free angles [{angles}]  torsion labels [{labels}]"


def matrix_payload(matrix: np.ndarray) -> List[List[List[float]]]:
    return [[complex_pair(z) for z in row] for row in matrix]


class ReportGenerator:
    """Renders command results as plain text, JSON or CSV"""

    def render(self, result: CommandResult, fmt: OutputFormat = OutputFormat.TEXT) -> str:
        fmt = OutputFormat(fmt)
        if fmt == OutputFormat.JSON:
            document = {
                "command": result.command.value,
                "accepted": result.accepted,
                "rejection": result.rejection,
                **result.payload,
            }
            return json.dumps(document, indent=2) + "\n"
        if fmt == OutputFormat.CSV:
            table = result.table if result.table is not None else pd.DataFrame()
            return table.to_csv(index=False, float_format="%.12g")
        return self.render_text(result)

    def render_text(self, result: CommandResult) -> str:
        lines = [result.title, "=" * len(result.title)]
        lines.extend(result.lines)
        if result.rejection:
            lines.append("")
            lines.append(f"REJECTED: {result.rejection}")
        return "\n".join(lines) + "\n"

    def to_response(self, result: CommandResult) -> CommandResponse:
        return CommandResponse(
            command=result.command.value,
            title=result.title,
            accepted=result.accepted,
            rejection=result.rejection,
            summary=result.lines,
            payload=result.payload,
        )

    def classification_summary(self, h: FirstHomology, group: CharacterGroupSummary) -> str:
        """One-line verdict on the prequantizations"""
        if group.n_components == 1 and group.identity_component_dim == 0:
            return "unique prequantization"
        classes = "1 bundle class" if group.n_components == 1 else f"{group.n_components} bundle classes"
        moduli = f"{group.identity_component_dim}-dimensional connection moduli"
        if group.identity_component_dim:
            moduli += " (flux mod 2*pi*hbar)"
        return f"{classes}, {moduli}"

    def classification_lines(
        self,
        group_name: str,
        h: FirstHomology,
        group: CharacterGroupSummary,
        characters: Sequence[Character]
    ) -> List[str]:
        lines = [
            f"H1               : {group_name}",
            f"betti number     : {h.betti}",
            f"torsion          : {list(h.torsion)}",
            f"bundle classes   : {group.n_components}",
            f"moduli dimension : {group.identity_component_dim}",
            f"verdict          : {self.classification_summary(h, group)}",
            "",
            f"characters ({len(characters)}):",
        ]
        lines.extend(f"  [{i}] {format_character(chi)}" for i, chi in enumerate(characters))
        return lines

    def characters_table(self, characters: Sequence[Character]) -> pd.DataFrame:
        rows = [
            {
                "index": i,
                "free_angles": " ".join(format_float(a) for a in chi.free_angles),
                "torsion_labels": " ".join(str(k) for k in chi.torsion_labels),
            }
            for i, chi in enumerate(characters)
        ]
        return pd.DataFrame(rows, columns=["index", "free_angles", "torsion_labels"])

    def weil_lines(self, report: WeilReport) -> List[str]:
        lines = [f"hbar = {format_float(report.hbar)}, tolerance = {report.tol:g}"]
        if not report.cycles:
            lines.append("no closed 2-cycles: condition holds vacuously")
        for i, cycle in enumerate(report.cycles):
            status = "integral" if cycle.integral else "NOT integral"
            lines.append(
                f"cycle {i} {list(cycle.cycle)}: flux / 2 pi hbar = {format_float(cycle.value)} ({status})"
            )
        lines.append(f"verdict: {'accept' if report.accepted else 'reject'}")
        return lines

    def weil_table(self, report: WeilReport) -> pd.DataFrame:
        rows = [
            {
                "cycle": " ".join(str(x) for x in cycle.cycle),
                "value": cycle.value,
                "nearest_integer": cycle.nearest_integer,
                "deviation": cycle.deviation,
                "integral": cycle.integral,
            }
            for cycle in report.cycles
        ]
        return pd.DataFrame(rows, columns=["cycle", "value", "nearest_integer", "deviation", "integral"])

    def atlas_lines(self, report: AtlasReport) -> List[str]:
        if report.ok:
            return ["atlas is consistent"]
        lines = [f"{len(report.violations)} violations:"]
        lines.extend(f"  {v.kind}: {v.message}" for v in report.violations)
        return lines

    def atlas_table(self, report: AtlasReport) -> pd.DataFrame:
        rows = [
            {
                "kind": v.kind,
                "charts": " ".join(str(j) for j in v.charts),
                "edge": v.edge,
                "vertex": v.vertex,
                "residual": v.residual,
            }
            for v in report.violations
        ]
        return pd.DataFrame(rows, columns=["kind", "charts", "edge", "vertex", "residual"])

    def sector_lines(self, sp: SectorPropagator, plain_residual: float) -> List[str]:
        lines = [
            f"engine            : {sp.engine}",
            f"steps             : {sp.n_steps}",
            f"generator edges   : {list(sp.generator_edges)}",
            f"reference paths   : {sp.basepath_convention}",
            f"sectors           : {len(sp.sectors)}",
            f"sum vs T^n        : {plain_residual:.3e}",
            "",
        ]
        for key in sorted(sp.sectors):
            matrix = sp.sectors[key]
            lines.append(
                f"sector {list(key)}: {int(np.count_nonzero(matrix))} entries, "
                f"Frobenius norm {format_float(float(np.linalg.norm(matrix)))}"
            )
        return lines

    def sector_table(self, sp: SectorPropagator) -> pd.DataFrame:
        rows = []
        for key in sorted(sp.sectors):
            matrix = sp.sectors[key]
            for target, source in zip(*np.nonzero(matrix)):
                z = matrix[target, source]
                rows.append({
                    "sector": " ".join(str(x) for x in key),
                    "target": int(target),
                    "source": int(source),
                    "re": float(z.real),
                    "im": float(z.imag),
                })
        return pd.DataFrame(rows, columns=["sector", "target", "source", "re", "im"])

    def matrix_lines(self, name: str, matrix: np.ndarray, labels: Sequence[Any]) -> List[str]:
        lines = [f"{name}:"]
        for label, row in zip(labels, matrix):
            lines.append(f"  {str(label):>8}  " + "  ".join(format_complex(z) for z in row))
        return lines

    def exchange_lines(self, report: ExchangeReport) -> List[str]:
        labels = [f"({u},{v})" for u, v in report.pair_labels]
        lines = [
            f"ordered pairs            : {len(report.pair_labels)}",
            f"steps                    : {report.n_steps}",
            f"boson symmetry residual  : {report.boson_symmetry_residual:.3e}",
            f"fermion antisym residual : {report.fermion_antisymmetry_residual:.3e}",
            f"boson+fermion-2*direct   : {report.sector_sum_residual:.3e}",
            f"boson vs quotient graph  : {report.quotient_residual:.3e}",
            "",
        ]
        lines.extend(self.matrix_lines("boson", report.boson, labels))
        lines.append("")
        lines.extend(self.matrix_lines("fermion", report.fermion, labels))
        return lines

    def exchange_table(self, report: ExchangeReport) -> pd.DataFrame:
        rows = []
        n = len(report.pair_labels)
        for target in range(n):
            for source in range(n):
                rows.append({
                    "target": "%d-%d" % report.pair_labels[target],
                    "source": "%d-%d" % report.pair_labels[source],
                    "boson_re": float(report.boson[target, source].real),
                    "boson_im": float(report.boson[target, source].imag),
                    "fermion_re": float(report.fermion[target, source].real),
                    "fermion_im": float(report.fermion[target, source].imag),
                })
        return pd.DataFrame(rows, columns=["target", "source", "boson_re", "boson_im", "fermion_re", "fermion_im"])

    def scan_lines(self, scan: pd.DataFrame, hbar: float) -> List[str]:
        if scan.empty:
            return ["empty flux grid"]
        lines = [
            f"hbar = {format_float(hbar)}, {len(scan)} flux values",
            f"intensity range  : {format_float(float(scan['intensity'].min()))} .. "
            f"{format_float(float(scan['intensity'].max()))}",
            "",
        ]
        lines.extend(scan.to_string(index=False, float_format=format_float).splitlines())
        return lines

    def save(self, text: str, path: Optional[str]) -> None:
        """Write rendered output to a file"""
        try:
            with open(path, "w", encoding="utf-8", newline="") as f:
                f.write(text)
            log.info(f"Report written to {path}")
        except OSError as e:
            log.error(f"Error writing report: {e}")
            raise OutputWriteError(f"cannot write {path}: {e.strerror or e}") from e
