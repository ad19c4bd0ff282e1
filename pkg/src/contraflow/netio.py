"""File formats: TNTP networks and trip tables, lane tables, machine-readable results.

Networks arrive as TNTP arc tables (`~` comments, `<KEY> value` metadata
headers, whitespace-separated columns); demand arrives in the TNTP trips
format.  Lane counts come from an optional `init,term,lanes` CSV; without
one, lanes are derived from each arc's total capacity and a configured
per-lane capacity.  Result tables and JSON documents are written
atomically with a deterministic field order and 12-significant-digit
floats so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .model import BPR_ALPHA, BPR_POWER, Arc, ArcPair, Network, ODMatrix

log = logging.getLogger(__name__)

FLOAT_DIGITS = 12


class ParseError(ValueError):
    """Malformed input file; carries the file and line of the offending row."""

    def __init__(self, path, line: int | None, message: str):
        loc = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{loc}: {message}")
        self.path = str(path)
        self.line = line


@dataclass(frozen=True)
class RunConfig:
    """Tool-wide settings, loadable from a JSON file."""

    bpr_alpha: float = BPR_ALPHA
    bpr_power: float = BPR_POWER
    per_lane_capacity: float = 1000.0
    min_lanes: int = 1
    fw_rel_gap: float = 1e-4
    fw_max_iters: int = 1000
    fw_line_search_tol: float = 1e-10
    lb_xi: float = 1e-6
    lb_step: float = 0.25
    lb_max_sweeps: int = 20000
    seed: int = 0
    use_file_bpr: bool = False
    strict_connectivity: bool = False

    def __post_init__(self) -> None:
        if self.per_lane_capacity <= 0:
            raise ValueError("per_lane_capacity must be positive")
        if self.min_lanes < 0:
            raise ValueError("min_lanes must be >= 0")

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ParseError(path, None, "config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ParseError(path, None, f"unknown config keys: {', '.join(unknown)}")
        return cls(**raw)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class NetworkFileRecord:
    """One arc row of a TNTP network file; capacity is the arc total."""

    init: int
    term: int
    capacity: float
    length: float
    free_flow_time: float
    b: float
    power: float
    speed: float
    toll: float
    link_type: int
    line: int = 0


@dataclass(frozen=True)
class LaneTableRecord:
    init: int
    term: int
    lanes: int
    line: int = 0


def _strip_comment(line: str) -> str:
    return line.split("~", 1)[0].strip()


def _split_metadata(lines: list[str], path) -> tuple[dict[str, str], list[tuple[int, str]]]:
    meta: dict[str, str] = {}
    body: list[tuple[int, str]] = []
    in_meta = True
    for lineno, raw in enumerate(lines, start=1):
        text = _strip_comment(raw)
        if not text:
            continue
        if in_meta and text.startswith("<"):
            if text.upper().startswith("<END OF METADATA>"):
                in_meta = False
                continue
            close = text.find(">")
            if close < 0:
                raise ParseError(path, lineno, "unterminated metadata tag")
            meta[text[1:close].strip().upper()] = text[close + 1 :].strip()
            continue
        in_meta = False
        body.append((lineno, text))
    return meta, body


def parse_network_records(path) -> list[NetworkFileRecord]:
    """Read the raw arc rows of a TNTP network file."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    meta, body = _split_metadata(lines, path)
    records = []
    for lineno, text in body:
        cells = text.rstrip(";").split()
        if len(cells) != 10:
            raise ParseError(path, lineno, f"expected 10 columns, found {len(cells)}")
        try:
            rec = NetworkFileRecord(
                init=int(cells[0]),
                term=int(cells[1]),
                capacity=float(cells[2]),
                length=float(cells[3]),
                free_flow_time=float(cells[4]),
                b=float(cells[5]),
                power=float(cells[6]),
                speed=float(cells[7]),
                toll=float(cells[8]),
                link_type=int(float(cells[9])),
                line=lineno,
            )
        except ValueError as exc:
            raise ParseError(path, lineno, f"bad arc row: {exc}") from None
        if rec.init == rec.term:
            raise ParseError(path, lineno, "arc endpoints must differ")
        if not math.isfinite(rec.capacity) or rec.capacity <= 0:
            raise ParseError(path, lineno, "arc capacity must be finite and positive")
        if not math.isfinite(rec.free_flow_time) or rec.free_flow_time <= 0:
            raise ParseError(path, lineno, "free-flow time must be finite and positive")
        records.append(rec)
    declared = meta.get("NUMBER OF LINKS")
    if declared is not None and int(declared) != len(records):
        log.warning("%s: header declares %s links, file has %d", path, declared, len(records))
    return records


def parse_lane_table(path) -> dict[tuple[int, int], LaneTableRecord]:
    """Read an `init,term,lanes` CSV into a lookup keyed by endpoints."""
    out: dict[tuple[int, int], LaneTableRecord] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            cells = [c.strip() for c in row if c.strip()]
            if not cells:
                continue
            if lineno == 1 and not cells[0].lstrip("-").isdigit():
                continue  # header row
            if len(cells) != 3:
                raise ParseError(path, lineno, f"expected 3 columns, found {len(cells)}")
            try:
                rec = LaneTableRecord(int(cells[0]), int(cells[1]), int(cells[2]), lineno)
            except ValueError as exc:
                raise ParseError(path, lineno, f"bad lane row: {exc}") from None
            if rec.lanes < 0:
                raise ParseError(path, lineno, "lane count must be >= 0")
            key = (rec.init, rec.term)
            if key in out:
                raise ParseError(path, lineno, f"duplicate lane row for arc {key}")
            out[key] = rec
    return out


def _derive_lanes(total_capacity: float, per_lane_capacity: float) -> int:
    return max(1, math.floor(total_capacity / per_lane_capacity + 0.5))


def parse_network(net_path, lanes_path=None, config: RunConfig | None = None) -> Network:
    """Build a Network from a TNTP arc table plus an optional lane table.

    Lanes default to ``max(1, round(total_capacity / per_lane_capacity))``
    and the per-lane capacity is the arc total divided by the lane count.
    Opposite-direction arcs form reversible pairs.  Arcs are sorted by
    endpoints, so the result does not depend on file row order.
    """
    cfg = config or RunConfig()
    records = sorted(parse_network_records(net_path), key=lambda r: (r.init, r.term))
    seen: dict[tuple[int, int], NetworkFileRecord] = {}
    for rec in records:
        key = (rec.init, rec.term)
        if key in seen:
            raise ParseError(net_path, rec.line, f"duplicate arc {key}")
        seen[key] = rec

    lane_map = parse_lane_table(lanes_path) if lanes_path is not None else {}
    for key, lane_rec in lane_map.items():
        if key not in seen:
            raise ParseError(lanes_path, lane_rec.line, f"lane row for unknown arc {key}")

    arcs = []
    index: dict[tuple[int, int], int] = {}
    for i, rec in enumerate(records):
        key = (rec.init, rec.term)
        lane_rec = lane_map.get(key)
        if lane_rec is not None:
            z0 = lane_rec.lanes
            per_lane = rec.capacity / z0 if z0 > 0 else cfg.per_lane_capacity
        else:
            z0 = _derive_lanes(rec.capacity, cfg.per_lane_capacity)
            per_lane = rec.capacity / z0
        index[key] = i
        arcs.append((rec, z0, per_lane))

    built = []
    for i, (rec, z0, per_lane) in enumerate(arcs):
        built.append(
            Arc(
                id=i,
                tail=rec.init,
                head=rec.term,
                capacity=per_lane,
                free_flow_time=rec.free_flow_time,
                lanes_nominal=z0,
                reversible=(rec.term, rec.init) in index,
                alpha=rec.b if cfg.use_file_bpr else cfg.bpr_alpha,
                power=rec.power if cfg.use_file_bpr else cfg.bpr_power,
            )
        )

    pairs = []
    for arc in built:
        back = index.get((arc.head, arc.tail))
        if back is not None and (arc.tail, arc.head) < (arc.head, arc.tail):
            total = arc.lanes_nominal + built[back].lanes_nominal
            if total < 1:
                raise ParseError(net_path, None, f"pair {arc.tail}<->{arc.head} has no lanes")
            pairs.append(ArcPair(arc.id, back, total, cfg.min_lanes))

    nodes = sorted({r.init for r, _, _ in arcs} | {r.term for r, _, _ in arcs})
    try:
        network = Network(tuple(nodes), tuple(built), tuple(pairs))
    except ValueError as exc:
        raise ParseError(net_path, None, str(exc)) from None

    if not network.is_strongly_connected():
        message = "network is not strongly connected over arcs with open lanes"
        if cfg.strict_connectivity:
            raise ParseError(net_path, None, message)
        log.warning("%s: %s", net_path, message)
    return network


def parse_demand(trips_path, multiplier: float = 1.0, network: Network | None = None) -> ODMatrix:
    """Read a TNTP trips file into an ODMatrix scaled by ``multiplier``.

    Zero-demand entries and intrazonal (origin == destination) entries are
    dropped; duplicated pairs are summed.
    """
    if multiplier <= 0:
        raise ValueError(f"demand multiplier must be positive (got {multiplier})")
    with open(trips_path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    _, body = _split_metadata(lines, trips_path)
    demands: dict[tuple[int, int], float] = {}
    origin: int | None = None
    for lineno, text in body:
        if text.lower().startswith("origin"):
            try:
                origin = int(text.split()[1])
            except (IndexError, ValueError):
                raise ParseError(trips_path, lineno, "bad origin header") from None
            continue
        if origin is None:
            raise ParseError(trips_path, lineno, "trip entry before any origin header")
        for chunk in text.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            if ":" not in chunk:
                raise ParseError(trips_path, lineno, f"expected 'dest : demand', got {chunk!r}")
            dest_text, value_text = chunk.split(":", 1)
            try:
                dest = int(dest_text)
                value = float(value_text)
            except ValueError:
                raise ParseError(trips_path, lineno, f"bad trip entry {chunk!r}") from None
            if not math.isfinite(value) or value < 0:
                raise ParseError(trips_path, lineno, "demand must be finite and >= 0")
            if value == 0 or dest == origin:
                continue
            demands[(origin, dest)] = demands.get((origin, dest), 0.0) + value

    od = ODMatrix(tuple((o, d, v) for (o, d), v in sorted(demands.items())), multiplier)
    if network is not None:
        try:
            od.validate_against(network)
        except ValueError as exc:
            raise ParseError(trips_path, None, str(exc)) from None
    return od


def format_float(x: float) -> str:
    return f"{x:.{FLOAT_DIGITS}g}"


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def _round_floats(obj):
    if isinstance(obj, float):
        return float(format_float(obj)) if math.isfinite(obj) else obj
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def _atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_result(result, path, fmt: str = "csv") -> None:
    """Write a result object to ``path`` as CSV or JSON, atomically.

    The object must expose ``to_table()`` for CSV or ``to_json_payload()``
    (falling back to the table) for JSON; a bare ``(header, rows)`` tuple
    also works.  Floats are serialized with 12 significant digits in a
    deterministic field order.
    """
    if fmt == "csv":
        header, rows = result if isinstance(result, tuple) else result.to_table()
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])
        _atomic_write_text(path, buf.getvalue())
    elif fmt == "json":
        if isinstance(result, tuple):
            header, rows = result
            payload = {"header": list(header), "rows": rows}
        elif hasattr(result, "to_json_payload"):
            payload = result.to_json_payload()
        else:
            header, rows = result.to_table()
            payload = {"header": list(header), "rows": rows}
        text = json.dumps(_round_floats(payload), indent=2) + "\n"
        _atomic_write_text(path, text)
    else:
        raise ValueError(f"format must be 'csv' or 'json' (got {fmt!r})")


def read_table(path) -> tuple[list[str], list[list[str]]]:
    """Read back a CSV written by :func:`write_result`."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader]
    if not rows:
        return [], []
    return rows[0], rows[1:]


def read_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_network(network: Network, net_path, lanes_path=None) -> None:
    """Emit a Network as a TNTP arc table (plus optional lane table).

    Full-precision floats are used so parsing the emitted files recovers
    the same Network; mainly for fixtures and experiment reproduction.
    """
    lines = [
        f"<NUMBER OF ZONES> {network.num_nodes}",
        f"<NUMBER OF NODES> {network.num_nodes}",
        "<FIRST THRU NODE> 1",
        f"<NUMBER OF LINKS> {network.num_arcs}",
        "<END OF METADATA>",
        "~ init term capacity length free_flow_time b power speed toll type ;",
    ]
    for arc in network.arcs:
        total_capacity = arc.capacity * arc.lanes_nominal if arc.lanes_nominal else arc.capacity
        lines.append(
            "\t".join(
                [
                    str(arc.tail),
                    str(arc.head),
                    repr(float(total_capacity)),
                    "0",
                    repr(float(arc.free_flow_time)),
                    repr(float(arc.alpha)),
                    repr(float(arc.power)),
                    "0",
                    "0",
                    "1",
                ]
            )
            + "\t;"
        )
    _atomic_write_text(net_path, "\n".join(lines) + "\n")
    if lanes_path is not None:
        write_lane_table(network, lanes_path)


def write_lane_table(network: Network, path) -> None:
    rows = ["init,term,lanes"]
    for arc in network.arcs:
        rows.append(f"{arc.tail},{arc.head},{arc.lanes_nominal}")
    _atomic_write_text(path, "\n".join(rows) + "\n")


def write_demand(od: ODMatrix, path) -> None:
    """Emit an ODMatrix (with its multiplier applied) in TNTP trips format."""
    by_origin: dict[int, list[tuple[int, float]]] = {}
    for o, d, v in od.scaled():
        by_origin.setdefault(o, []).append((d, v))
    lines = [
        f"<NUMBER OF ZONES> {len(by_origin)}",
        f"<TOTAL OD FLOW> {repr(float(od.total_demand))}",
        "<END OF METADATA>",
    ]
    for origin in sorted(by_origin):
        lines.append(f"Origin {origin}")
        for dest, value in sorted(by_origin[origin]):
            lines.append(f"    {dest} : {repr(float(value))};")
    _atomic_write_text(path, "\n".join(lines) + "\n")
