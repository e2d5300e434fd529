"""GML parsing, the Karate and Polbooks datasets, result tables and experiment configs."""
from __future__ import annotations

import csv
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DATA_DIR = Path(__file__).with_name("data")


class GmlError(ValueError):
    pass


class ConfigError(ValueError):
    pass


@dataclass
class GmlNode:
    id: int
    attrs: dict[str, object] = field(default_factory=dict)


@dataclass
class GmlEdge:
    source: int
    target: int
    attrs: dict[str, object] = field(default_factory=dict)


@dataclass
class GmlGraph:
    nodes: list[GmlNode]
    edges: list[GmlEdge]
    directed: bool = False
    attrs: dict[str, object] = field(default_factory=dict)

    def node_ids(self) -> list[int]:
        return [node.id for node in self.nodes]


_TOKEN = re.compile(r'\s+|#[^\n]*|(?P<open>\[)|(?P<close>\])|"(?P<str>[^"]*)"|(?P<atom>[^\s\[\]"]+)')
_KEY = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")


def _tokens(text: str):
    pos, line = 0, 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise GmlError(f"line {line}: unexpected character {text[pos]!r}")
        if m.group("open"):
            yield "[", None, line
        elif m.group("close"):
            yield "]", None, line
        elif m.group("str") is not None:
            yield "str", m.group("str"), line
        elif m.group("atom"):
            yield "atom", m.group("atom"), line
        line += m.group(0).count("\n")
        pos = m.end()


def _number(s: str):
    try:
        return int(s)
    except ValueError:
        return float(s)


def _parse_list(toks, depth: int, line: int):
    items = []
    for kind, val, ln in toks:
        if kind == "]":
            if depth == 0:
                raise GmlError(f"line {ln}: unmatched ']'")
            return items
        if kind != "atom" or not _KEY.match(val):
            raise GmlError(f"line {ln}: expected a key, got {val if val is not None else kind!r}")
        key = val
        try:
            kind2, val2, ln2 = next(toks)
        except StopIteration:
            raise GmlError(f"line {ln}: key {key!r} has no value") from None
        if kind2 == "[":
            items.append((key, _parse_list(toks, depth + 1, ln2)))
        elif kind2 == "str":
            items.append((key, val2))
        elif kind2 == "atom":
            try:
                items.append((key, _number(val2)))
            except ValueError:
                raise GmlError(f"line {ln2}: bad value {val2!r} for key {key!r}") from None
        else:
            raise GmlError(f"line {ln2}: unexpected ']' after key {key!r}")
        line = ln2
    if depth > 0:
        raise GmlError(f"line {line}: missing closing ']'")
    return items


def parse_gml(text: str) -> GmlGraph:
    """Parse the ``graph [ node [...] edge [...] ]`` subset of GML.

    Attributes other than ids and endpoints are kept as-is on the nodes and
    edges. Raises :class:`GmlError` with a line number on malformed input.
    """
    items = _parse_list(iter(_tokens(text)), 0, 1)
    graphs = [v for k, v in items if k == "graph"]
    if len(graphs) != 1 or not isinstance(graphs[0], list):
        raise GmlError("expected exactly one 'graph [ ... ]' block")
    nodes, edges, attrs = [], [], {}
    directed = False
    seen = set()
    for key, val in graphs[0]:
        if key == "node":
            d = dict(val)
            if "id" not in d or not isinstance(d["id"], int):
                raise GmlError("node without integer id")
            nid = d.pop("id")
            if nid in seen:
                raise GmlError(f"duplicate node id {nid}")
            seen.add(nid)
            nodes.append(GmlNode(nid, d))
        elif key == "edge":
            d = dict(val)
            try:
                s, t = d.pop("source"), d.pop("target")
            except KeyError:
                raise GmlError("edge without source/target") from None
            edges.append(GmlEdge(int(s), int(t), d))
        elif key == "directed":
            directed = bool(val)
        else:
            attrs[key] = val
    for e in edges:
        for end in (e.source, e.target):
            if end not in seen:
                raise GmlError(f"edge ({e.source}, {e.target}) references undeclared node {end}")
    return GmlGraph(nodes, edges, directed, attrs)


def _fmt_value(v) -> str:
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, list):
        inner = " ".join(f"{k} {_fmt_value(x)}" for k, x in v)
        return f"[ {inner} ]"
    return repr(v)


def serialize_gml(graph: GmlGraph) -> str:
    out = ["graph", "["]
    out.append(f"  directed {int(graph.directed)}")
    for k, v in graph.attrs.items():
        out.append(f"  {k} {_fmt_value(v)}")
    for node in graph.nodes:
        out.append("  node")
        out.append("  [")
        out.append(f"    id {node.id}")
        out.extend(f"    {k} {_fmt_value(v)}" for k, v in node.attrs.items())
        out.append("  ]")
    for e in graph.edges:
        out.append("  edge")
        out.append("  [")
        out.append(f"    source {e.source}")
        out.append(f"    target {e.target}")
        out.extend(f"    {k} {_fmt_value(v)}" for k, v in e.attrs.items())
        out.append("  ]")
    out.append("]")
    return "\n".join(out) + "\n"


def adjacency_matrix(graph: GmlGraph, node_ids=None) -> np.ndarray:
    """Symmetric 0/1 adjacency over ``node_ids`` (default: declaration order).

    Edges touching nodes outside ``node_ids`` are dropped, as are self-loops;
    parallel edges collapse to a single entry.
    """
    ids = graph.node_ids() if node_ids is None else list(node_ids)
    index = {nid: i for i, nid in enumerate(ids)}
    A = np.zeros((len(ids), len(ids)))
    for e in graph.edges:
        i, j = index.get(e.source), index.get(e.target)
        if i is None or j is None or i == j:
            continue
        A[i, j] = A[j, i] = 1.0
    return A


@dataclass(frozen=True)
class Dataset:
    """A real network with ground truth; ``truth`` holds 0-based labels."""

    name: str
    A: np.ndarray
    truth: np.ndarray
    K: int
    node_ids: tuple[int, ...] = ()

    @property
    def n(self) -> int:
        return self.A.shape[0]


def read_labels(path) -> dict[int, int]:
    """Read ``node_id label`` lines; labels stay 1-based as written."""
    labels = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'node_id label'")
        labels[int(parts[0])] = int(parts[1])
    return labels


def load_karate(graph: GmlGraph | None = None, labels=None) -> Dataset:
    """Zachary's karate club with the two-faction split as ground truth.

    ``labels`` is a mapping node id -> 1-based faction or a path to a labels
    file; both default to the bundled fixtures.
    """
    if graph is None:
        graph = parse_gml((DATA_DIR / "karate.gml").read_text(encoding="utf-8"))
    if labels is None:
        labels = DATA_DIR / "karate_labels.txt"
    if not isinstance(labels, dict):
        if not Path(labels).exists():
            raise FileNotFoundError(f"karate label fixture not found: {labels}")
        labels = read_labels(labels)
    ids = graph.node_ids()
    if len(ids) != 34:
        raise ValueError(f"karate graph should have 34 nodes, found {len(ids)}")
    missing = [i for i in ids if i not in labels]
    if missing:
        raise ValueError(f"no faction label for nodes {missing}")
    truth = np.array([labels[i] for i in ids]) - 1
    return Dataset("karate", adjacency_matrix(graph, ids), truth, 2, tuple(ids))


POLBOOKS_CLASSES = {"c": 0, "l": 1, "n": None}


def load_polbooks(graph: GmlGraph) -> Dataset:
    """Political books network with the Neutral books removed."""
    keep, truth = [], []
    for node in graph.nodes:
        if "value" not in node.attrs:
            raise ValueError(f"polbooks node {node.id} has no 'value' attribute")
        v = str(node.attrs["value"]).strip().lower()
        if v not in POLBOOKS_CLASSES:
            raise ValueError(f"polbooks node {node.id}: unknown label {v!r}")
        if POLBOOKS_CLASSES[v] is not None:
            keep.append(node.id)
            truth.append(POLBOOKS_CLASSES[v])
    return Dataset("polbooks", adjacency_matrix(graph, keep), np.array(truth, dtype=int), 2, tuple(keep))


def find_data_file(name: str) -> Path:
    """Locate a fixture in $DFM_DATA_DIR, then in the bundled data directory."""
    candidates = []
    if os.environ.get("DFM_DATA_DIR"):
        candidates.append(Path(os.environ["DFM_DATA_DIR"]) / name)
    candidates.append(DATA_DIR / name)
    for c in candidates:
        if c.exists():
            return c
    raise FileNotFoundError(
        f"{name} not found (looked in {', '.join(str(c.parent) for c in candidates)}); "
        "download it from the netdata collection and set DFM_DATA_DIR")


def load_dataset(name: str, gml_path=None, labels_path=None) -> Dataset:
    if name == "karate":
        graph = parse_gml(Path(gml_path).read_text(encoding="utf-8")) if gml_path else None
        return load_karate(graph, labels_path)
    if name == "polbooks":
        path = Path(gml_path) if gml_path else find_data_file("polbooks.gml")
        return load_polbooks(parse_gml(path.read_text(encoding="utf-8")))
    raise ValueError(f"unknown dataset {name!r}")


CSV_COLUMNS = (
    "experiment", "distribution", "n", "K", "K0", "rho", "sigma2A", "m", "sigma2W",
    "seed", "rep", "hamming", "hamming_raw_l0", "fhat", "spectral_deviation", "delta",
    "elapsed_ms",
)


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else repr(float(v))
    return str(v)


def write_results_csv(rows, path) -> None:
    """Write result records (mappings keyed by :data:`CSV_COLUMNS`)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow([_cell(row.get(c)) for c in CSV_COLUMNS])


_INT_COLUMNS = {"n", "K", "K0", "seed"}
_TEXT_COLUMNS = {"experiment", "distribution", "rep"}


def read_results_csv(path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for rec in csv.DictReader(fh):
            row = {}
            for k, v in rec.items():
                if v == "":
                    row[k] = None
                elif k in _TEXT_COLUMNS:
                    row[k] = int(v) if k == "rep" and v.isdigit() else v
                elif k in _INT_COLUMNS:
                    row[k] = int(v)
                else:
                    row[k] = float(v)
            out.append(row)
    return out


def parse_grid(text: str) -> tuple[float, ...]:
    """``start:step:end`` (end inclusive) or a comma separated list."""
    text = text.strip().strip("{}")
    if ":" in text:
        try:
            start, step, end = (float(x) for x in text.split(":"))
        except ValueError:
            raise ConfigError(f"bad grid {text!r}; expected start:step:end") from None
        if not step > 0:
            raise ConfigError(f"grid step must be positive, got {step}")
        if end < start:
            raise ConfigError(f"grid end {end} is below start {start}")
        count = int(math.floor((end - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 12) for i in range(count))
    try:
        values = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"bad grid {text!r}") from None
    if not values:
        raise ConfigError("empty grid")
    return values


def parse_experiment_config(text: str):
    """Parse a line-oriented ``key = value`` experiment config.

    ``experiment = 1a`` (or any built-in id) pre-fills the built-in protocol;
    other keys override it.
    """
    from .experiments import SWEEPABLE, ExperimentSpec, builtin_spec

    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = val

    known = {"experiment", "n", "K", "K0", "P", "distribution", "reps", "seed",
             "resample_labels"} | set(SWEEPABLE) | {f"{v}_grid" for v in SWEEPABLE}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")

    exp_id = raw.get("experiment", "custom")
    try:
        base = builtin_spec(exp_id) if exp_id != "custom" else None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    values: dict[str, object] = base.as_dict() if base else {"experiment": exp_id}
    grids = [v for v in SWEEPABLE if f"{v}_grid" in raw]
    if len(grids) > 1:
        raise ConfigError(f"exactly one sweep variable allowed, got {', '.join(grids)}")
    if grids:
        var = grids[0]
        values["sweep_var"] = var
        values["grid"] = parse_grid(raw[f"{var}_grid"])
        values.pop(var, None)

    def num(key, cast=float):
        try:
            return cast(raw[key])
        except ValueError:
            raise ConfigError(f"bad value for {key}: {raw[key]!r}") from None

    for key in ("n", "K", "K0", "reps", "seed"):
        if key in raw:
            values[key] = num(key, int)
    for key in ("rho", "sigma2A", "sigma2W", "b", "a"):
        if key in raw:
            values[key] = num(key)
    if "m" in raw:
        values["m"] = num("m", int)
    if "distribution" in raw:
        values["distribution"] = raw["distribution"].lower()
    if "resample_labels" in raw:
        values["resample_labels"] = raw["resample_labels"].lower() in ("1", "true", "yes")
    if "P" in raw:
        try:
            flat = [float(x) for x in raw["P"].replace(";", ",").split(",") if x.strip()]
        except ValueError:
            raise ConfigError("P must be a comma separated list of numbers") from None
        K = int(round(math.sqrt(len(flat))))
        if K * K != len(flat):
            raise ConfigError(f"P has {len(flat)} entries, not a square count")
        values["P"] = np.array(flat).reshape(K, K)
    if values.get("sweep_var") is not None and values["sweep_var"] in raw:
        raise ConfigError(f"{values['sweep_var']} is both fixed and swept")

    missing = [k for k in ("n", "P", "distribution", "sweep_var") if values.get(k) is None]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    if "K" not in values:
        values["K"] = values["P"].shape[0]
    values.setdefault("K0", values["K"])
    try:
        return ExperimentSpec(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
