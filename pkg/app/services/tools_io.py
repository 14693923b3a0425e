import json
import math
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import ValidationError

from app.core.errors import InputParseError
from app.core.logger import log
from app.models.schemas_api import InputDocument, RawPath
from app.models.schemas_complex import CWComplex, EdgePath
from app.services import complex_model

FIXTURES_DIR = Path(__file__).resolve().parent.parent / "fixtures"

_PI_TOKEN = re.compile(r"^([+-]?(?:\d+(?:\.\d*)?|\.\d+)?)\*?pi$")


def _form_values(raw: Any) -> Dict[str, Any]:
    """Accept {"edges": {...}}, {"faces": {...}}, {"values": {...}}, a bare map or a list"""
    if isinstance(raw, list):
        return {"values": {i: v for i, v in enumerate(raw)}}
    if isinstance(raw, dict):
        for key in ("values", "edges", "faces"):
            if key in raw:
                return _form_values(raw[key]) if key != "values" else {"values": raw[key]}
        return {"values": raw}
    return {"values": raw}


def _complex_payload(raw: Dict[str, Any]) -> Dict[str, Any]:
    payload = dict(raw)
    if "vertices" in payload:
        payload["n_vertices"] = payload.pop("vertices")
    return payload


def _atlas_payload(raw: Dict[str, Any]) -> Dict[str, Any]:
    charts = []
    for chart in raw.get("charts", []):
        chart = dict(chart)
        if "potential" in chart:
            chart["potential"] = _form_values(chart["potential"])
        charts.append(chart)
    return {"charts": charts, "transitions": raw.get("transitions", [])}


class InputLoader:
    """Reads structured input files into an InputDocument"""

    def normalize(self, data: Dict[str, Any]) -> Dict[str, Any]:
        """
        Map the accepted file layouts onto InputDocument fields

        A complex may sit at top level ({"vertices", "edges", "faces"}) or
        under "complex"; a presentation at top level ({"generators",
        "relators"}) or under "presentation". A "form" section may carry
        both edge values (the connection) and face values (the 2-form).
        """
        doc: Dict[str, Any] = {}
        for key in ("name", "description", "hbar", "torsion_label", "loops", "paths"):
            if key in data:
                doc[key] = data[key]

        if "vertices" in data:
            doc["complex"] = _complex_payload({k: data[k] for k in ("vertices", "edges", "faces") if k in data})
        elif "complex" in data:
            doc["complex"] = _complex_payload(data["complex"])

        if "generators" in data:
            doc["presentation"] = {"n_generators": data["generators"], "relators": data.get("relators", [])}
        elif "presentation" in data:
            raw = data["presentation"]
            doc["presentation"] = {
                "n_generators": raw.get("generators", raw.get("n_generators")),
                "relators": raw.get("relators", []),
            }

        form = data.get("form") or {}
        if isinstance(form, dict) and "edges" in form:
            doc["connection"] = _form_values(form["edges"])
        if isinstance(form, dict) and "faces" in form:
            doc["two_form"] = _form_values(form["faces"])
        if "connection" in data:
            doc["connection"] = _form_values(data["connection"])
        if "two_form" in data:
            doc["two_form"] = _form_values(data["two_form"])
        if "atlas" in data:
            doc["atlas"] = _atlas_payload(data["atlas"])
        return doc

    def parse_data(self, data: Any, source: str = "input") -> InputDocument:
        if not isinstance(data, dict):
            raise InputParseError(f"{source}: expected a JSON object at top level")
        try:
            return InputDocument.model_validate(self.normalize(data))
        except ValidationError as e:
            first = e.errors()[0]
            location = ".".join(str(part) for part in first["loc"])
            raise InputParseError(f"{source}: invalid field '{location}': {first['msg']}") from e
        except (TypeError, AttributeError) as e:
            raise InputParseError(f"{source}: malformed section: {e}") from e

    def parse_text(self, text: str, source: str = "input") -> InputDocument:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise InputParseError(f"{source}: {e.msg}", line=e.lineno, column=e.colno) from e
        return self.parse_data(data, source)

    def load(self, path: Union[str, Path]) -> InputDocument:
        """Read and validate one input file"""
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            log.error(f"Cannot read input {path}: {e}")
            raise InputParseError(f"cannot read {path}: {e.strerror or e}") from e
        document = self.parse_text(text, source=str(path))
        log.info(f"Loaded input {path.name}")
        return document

    def fixture(self, name: str) -> InputDocument:
        """Bundled fixture by stem, e.g. 'annulus'"""
        return self.load(FIXTURES_DIR / f"{name}.json")

    def fixture_names(self) -> List[str]:
        return sorted(p.stem for p in FIXTURES_DIR.glob("*.json"))

    def paths(self, c: CWComplex, raw_paths: Tuple[RawPath, ...]) -> List[EdgePath]:
        """Chain raw paths against the complex"""
        return [complex_model.make_path(c, raw.start, raw.steps) for raw in raw_paths]


def parse_angle_token(token: str, hbar: float = 1.0) -> float:
    """'1.5', 'pi', '-2pi', '0.5*pi'; pi multiples are scaled by hbar"""
    token = token.strip().lower()
    match = _PI_TOKEN.match(token)
    if match:
        coefficient = match.group(1)
        if coefficient in ("", "+"):
            factor = 1.0
        elif coefficient == "-":
            factor = -1.0
        else:
            factor = float(coefficient)
        return factor * math.pi * hbar
    try:
        value = float(token)
    except ValueError as e:
        raise InputParseError(f"cannot read flux value '{token}'") from e
    if not math.isfinite(value):
        raise InputParseError(f"flux value '{token}' is not finite")
    return value


def parse_flux_grid(text: Optional[str], hbar: float = 1.0) -> Optional[Tuple[float, float, int]]:
    """'start:stop:count' -> (start, stop, count)"""
    if text is None:
        return None
    parts = text.split(":")
    if len(parts) != 3:
        raise InputParseError(f"flux grid '{text}' must have the form start:stop:count")
    try:
        count = int(parts[2])
    except ValueError as e:
        raise InputParseError(f"flux grid count '{parts[2]}' is not an integer") from e
    if count < 1:
        raise InputParseError(f"flux grid needs at least one point, got {count}")
    return parse_angle_token(parts[0], hbar), parse_angle_token(parts[1], hbar), count
