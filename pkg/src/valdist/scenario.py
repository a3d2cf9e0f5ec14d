"""Scenario documents: parsing, validation, normalisation and hashing.

A scenario is an INI document.  The ``[scenario]`` section names the
equation; every further section requests one analysis (the section name is
the analysis type, optionally followed by ``:label`` so the same analysis
can run twice).  ``[check:label]`` sections add user-defined checks on the
emitted CSV files.  Full schema with defaults::

    [scenario]
    name         = (required) identifier, also the default output folder
    description  =
    domain       = plane            ; plane | disc
    operator     = derivative       ; derivative | delta | qdelta
    q            = 2                ; only used by qdelta
    coefficients =                  ; A_0; A_1; ... (";"-separated), or from_base
    solutions    =                  ; f_1; f_2; ... closed-form candidates
    grid         = linear:1:10:10   ; default radius grid (see parse_grid)
    tol          = 1e-08            ; quadrature tolerance
    residual_tol = 1e-08            ; hard threshold for residual checks
    trim         = 0.1              ; tail trimming fraction
    seed         = 42               ; residual sample seed
    out          =                  ; output directory (default out/<name>)

    [residual]                      ; equation residual of every candidate
    [growth]      functions = A0, f1 ; grid ; admissibility ; zero_counts
    [dominance]   kinds = characteristic ; grid ; expect_p
    [reduce]      p = all ; base = solutions | numeric ; lattice
    [deficiency]  function ; values = 0, 1 ; grid
    [curve]       p = 0 ; eta = 2 ; grid
    [conclusion]  solution = f1 ; reference = A0 ; kind ; lower | window ; grid
    [solve]       ic ; grid ; compare ; dump_rays      (derivative operator)
                  z0 ; steps ; seeds | seeds_from    (difference operators)
    [qratio]      function ; q = 2 ; grid ; max = 0.2
    [check:NAME]  file ; where ; expr ; stat ; trim ; op ; threshold ; hard

Function references (``A0``, ``f1``) name coefficients and candidates;
any other value is parsed as an expression in the scenario's domain.
"""
import configparser
import hashlib
import re
from dataclasses import dataclass, field

import numpy as np

from .dominance import CONDITION_KINDS
from .nevanlinna import disc_grid, plane_grid
from .parser import ExprSyntaxError, parse

__all__ = [
    "ANALYSES",
    "DEFAULTS",
    "Scenario",
    "ScenarioError",
    "load_scenario",
    "parse_grid",
]

ANALYSES = ("residual", "growth", "dominance", "reduce", "deficiency", "curve",
            "conclusion", "solve", "qratio", "check")

DEFAULTS = {
    "description": "",
    "domain": "plane",
    "operator": "derivative",
    "q": "2",
    "coefficients": "",
    "solutions": "",
    "grid": "linear:1:10:10",
    "tol": "1e-08",
    "residual_tol": "1e-08",
    "trim": "0.1",
    "seed": "42",
    "out": "",
}

SECTION_DEFAULTS = {
    "residual": {},
    "growth": {"functions": "", "grid": "", "admissibility": "auto", "zero_counts": "no"},
    "dominance": {"kinds": "characteristic", "grid": "", "expect_p": ""},
    "reduce": {"p": "all", "base": "solutions", "lattice": ""},
    "deficiency": {"function": "", "values": "0", "grid": ""},
    "curve": {"p": "0", "eta": "", "grid": ""},
    "conclusion": {"solution": "f1", "reference": "A0", "kind": "characteristic",
                   "lower": "", "window": "0.2, 5", "grid": ""},
    "solve": {"ic": "", "grid": "", "compare": "", "dump_rays": "no",
              "z0": "1", "steps": "20", "seeds": "", "seeds_from": ""},
    "qratio": {"function": "", "q": "2", "grid": "", "max": "0.2"},
    "check": {"file": "", "where": "", "expr": "", "stat": "max", "trim": "0",
              "op": "<", "threshold": "0", "hard": "no"},
}

STATS = ("max", "min", "tail_max", "tail_min", "tail_increasing", "decile_max",
         "select_p", "count")
OPS = ("<", "<=", ">", ">=", "==", "info")


class ScenarioError(ValueError):
    """Validation failure; ``path`` is ``section.key`` of the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


def parse_grid(text, domain="plane"):
    """Radius grid from its text form.

    ``linear:a:b:n``, ``geom:r0:ratio:count``, ``disc:k0:k1:step`` (radii
    1 - 2^(-step k)) or an explicit comma-separated list.
    """
    text = text.strip()
    if not text:
        raise ValueError("empty grid")
    kind, _, rest = text.partition(":")
    try:
        if kind == "linear":
            a, b, n = rest.split(":")
            grid = np.linspace(float(a), float(b), int(n))
        elif kind == "geom":
            r0, ratio, count = rest.split(":")
            grid = plane_grid(float(r0), int(count), float(ratio))
        elif kind == "disc":
            k0, k1, step = rest.split(":")
            grid = disc_grid(int(k0), int(k1), float(step))
        else:
            grid = np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise ValueError(f"bad grid {text!r}: {exc}") from None
    if grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError(f"grid {text!r} must be positive and increasing")
    if domain == "disc" and np.any(grid >= 1):
        raise ValueError(f"disc grid {text!r} must stay below 1")
    return grid


def _split(value, sep=";"):
    """Split on ``sep`` outside parentheses, dropping empty parts."""
    parts, depth, cur = [], 0, []
    for ch in value:
        depth += (ch == "(") - (ch == ")")
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [v.strip() for v in parts if v.strip()]


@dataclass
class Scenario:
    """A validated scenario; ``sections`` keeps analysis order."""

    name: str
    settings: dict
    sections: list = field(default_factory=list)

    # -- accessors ---------------------------------------------------------
    @property
    def domain(self):
        return self.settings["domain"]

    @property
    def operator(self):
        return self.settings["operator"]

    @property
    def q(self):
        return complex(self.settings["q"].replace("i", "j")) if self.operator == "qdelta" else None

    def number(self, key):
        return float(self.settings[key])

    @property
    def coefficient_texts(self):
        return _split(self.settings["coefficients"])

    @property
    def solution_texts(self):
        return _split(self.settings["solutions"])

    @property
    def labels(self):
        n = len(self.solution_texts) if self.from_base else len(self.coefficient_texts)
        return [f"A{j}" for j in range(n)] + [f"f{k + 1}" for k in range(len(self.solution_texts))]

    @property
    def from_base(self):
        return self.settings["coefficients"].strip() == "from_base"

    def grid(self, section=None):
        text = section[1].get("grid", "") if section else ""
        return parse_grid(text or self.settings["grid"], self.domain)

    # -- serialisation -----------------------------------------------------
    def to_ini(self):
        """Normalised text with every default spelled out."""
        lines = ["[scenario]", f"name = {self.name}"]
        lines += [f"{k} = {self.settings[k]}" for k in DEFAULTS]
        for sid, opts in self.sections:
            lines += ["", f"[{sid}]"]
            lines += [f"{k} = {v}" for k, v in opts.items()]
        return "\n".join(lines) + "\n"

    @property
    def hash(self):
        return hashlib.sha256(self.to_ini().encode()).hexdigest()[:16]

    def with_overrides(self, tol=None, grid=None, trim=None, seed=None, out=None):
        settings = dict(self.settings)
        sections = [(sid, dict(opts)) for sid, opts in self.sections]
        if tol is not None:
            settings["tol"] = repr(float(tol))
        if trim is not None:
            settings["trim"] = repr(float(trim))
        if seed is not None:
            settings["seed"] = str(int(seed))
        if out is not None:
            settings["out"] = str(out)
        if grid is not None:
            settings["grid"] = grid
            for _, opts in sections:
                if "grid" in opts:
                    opts["grid"] = ""
        sc = Scenario(self.name, settings, sections)
        sc.validate()
        return sc

    # -- validation --------------------------------------------------------
    def resolve(self, ref, path):
        """Parse a function reference or expression (validation aid)."""
        if ref in self.labels:
            return ref
        try:
            parse(ref, self.domain)
        except (ExprSyntaxError, ValueError) as exc:
            raise ScenarioError(path, f"not a label or expression: {exc}") from None
        return ref

    def validate(self):
        s = self.settings
        if not re.fullmatch(r"[A-Za-z0-9_.-]+", self.name or ""):
            raise ScenarioError("scenario.name", "required; letters, digits, '_', '-', '.'")
        if s["domain"] not in ("plane", "disc"):
            raise ScenarioError("scenario.domain", f"unknown domain {s['domain']!r}")
        if s["operator"] not in ("derivative", "delta", "qdelta"):
            raise ScenarioError("scenario.operator", f"unknown operator {s['operator']!r}")
        if s["operator"] != "derivative" and s["domain"] == "disc":
            raise ScenarioError("scenario.operator", "difference operators need the plane")
        if s["operator"] == "qdelta":
            try:
                q = complex(s["q"].replace("i", "j"))
            except ValueError:
                raise ScenarioError("scenario.q", f"not a number: {s['q']!r}") from None
            if q == 0 or q == 1:
                raise ScenarioError("scenario.q", "q must differ from 0 and 1")
        for key in ("tol", "residual_tol", "trim"):
            try:
                v = float(s[key])
            except ValueError:
                raise ScenarioError(f"scenario.{key}", f"not a number: {s[key]!r}") from None
            if not (v >= 0 if key == "trim" else v > 0) or (key == "trim" and v >= 0.5):
                raise ScenarioError(f"scenario.{key}", f"out of range: {v}")
        try:
            int(s["seed"])
        except ValueError:
            raise ScenarioError("scenario.seed", f"not an integer: {s['seed']!r}") from None
        try:
            parse_grid(s["grid"], s["domain"])
        except ValueError as exc:
            raise ScenarioError("scenario.grid", str(exc)) from None
        if self.from_base and not self.solution_texts:
            raise ScenarioError("scenario.coefficients", "from_base needs solutions")
        if not self.from_base:
            for j, t in enumerate(self.coefficient_texts):
                self.resolve(t, f"scenario.coefficients[{j}]")
        for k, t in enumerate(self.solution_texts):
            self.resolve(t, f"scenario.solutions[{k}]")
        analyses = [sid for sid, _ in self.sections if not sid.startswith("check")]
        if not analyses:
            raise ScenarioError("scenario", "no analyses requested")
        for sid, opts in self.sections:
            self._validate_section(sid, opts)

    def _need(self, path, cond, message):
        if not cond:
            raise ScenarioError(path, message)

    def _validate_section(self, sid, opts):
        kind = sid.split(":")[0]
        n = len(self.labels) - len(self.solution_texts)
        has_eq = n > 0
        if opts.get("grid"):
            try:
                parse_grid(opts["grid"], self.domain)
            except ValueError as exc:
                raise ScenarioError(f"{sid}.grid", str(exc)) from None
        if kind == "residual":
            self._need(sid, has_eq, "needs coefficients")
            self._need(sid, self.solution_texts, "needs candidate solutions")
        elif kind == "growth":
            refs = _split(opts["functions"], ",")
            self._need(f"{sid}.functions", refs, "at least one function required")
            for r in refs:
                self.resolve(r, f"{sid}.functions")
            self._need(f"{sid}.zero_counts", opts["zero_counts"] in ("yes", "no"), "yes or no")
            self._need(f"{sid}.admissibility", opts["admissibility"] in ("auto", "yes", "no"),
                       "auto, yes or no")
        elif kind == "dominance":
            self._need(sid, has_eq, "needs coefficients")
            for k in _split(opts["kinds"], ","):
                self._need(f"{sid}.kinds", k in CONDITION_KINDS, f"unknown kind {k!r}")
            if opts["expect_p"]:
                self._need(f"{sid}.expect_p", opts["expect_p"].isdigit(), "integer expected")
        elif kind == "reduce":
            self._need(sid, has_eq, "needs coefficients")
            self._need(f"{sid}.base", opts["base"] in ("solutions", "numeric"),
                       "solutions or numeric")
            if opts["base"] == "solutions":
                self._need(f"{sid}.base", len(self.solution_texts) >= n,
                           f"needs {n} candidate solutions")
            else:
                self._need(f"{sid}.base", self.operator == "derivative",
                           "numeric bases need the derivative operator")
            if opts["p"] != "all":
                for p in _split(opts["p"], ","):
                    self._need(f"{sid}.p", p.isdigit() and int(p) < n, f"bad index {p!r}")
        elif kind == "deficiency":
            self._need(f"{sid}.function", opts["function"], "required")
            self.resolve(opts["function"], f"{sid}.function")
            for v in _split(opts["values"], ","):
                try:
                    complex(v.replace("i", "j")) if v != "inf" else None
                except ValueError:
                    raise ScenarioError(f"{sid}.values", f"not a number: {v!r}") from None
        elif kind == "curve":
            self._need(sid, has_eq, "needs coefficients")
            self._need(f"{sid}.p", opts["p"].isdigit() and int(opts["p"]) < n, "bad index")
            if opts["eta"]:
                etas = _split(opts["eta"], ",")
                self._need(f"{sid}.eta", len(etas) == n - int(opts["p"]) - 1,
                           f"need {n - int(opts['p']) - 1} exponents")
                self._need(f"{sid}.eta", all(float(e) > 1 for e in etas), "exponents must exceed 1")
        elif kind == "conclusion":
            self.resolve(opts["solution"], f"{sid}.solution")
            self.resolve(opts["reference"], f"{sid}.reference")
            self._need(f"{sid}.kind", opts["kind"] in ("characteristic", "max_modulus"),
                       "characteristic or max_modulus")
            self._need(f"{sid}.window", len(_split(opts["window"], ",")) == 2, "two numbers")
        elif kind == "solve":
            self._need(sid, has_eq, "needs coefficients")
            if self.operator == "derivative":
                ic = _split(opts["ic"], ",")
                self._need(f"{sid}.ic", len(ic) == n, f"need {n} initial values")
                if opts["compare"]:
                    self.resolve(opts["compare"], f"{sid}.compare")
            else:
                seeds = _split(opts["seeds"], ",")
                self._need(f"{sid}.seeds", bool(seeds) != bool(opts["seeds_from"]),
                           "give exactly one of seeds and seeds_from")
                if seeds:
                    self._need(f"{sid}.seeds", len(seeds) == n, f"need {n} seeds")
                else:
                    self.resolve(opts["seeds_from"], f"{sid}.seeds_from")
                self._need(f"{sid}.steps", opts["steps"].isdigit(), "integer expected")
        elif kind == "qratio":
            self._need(f"{sid}.function", opts["function"], "required")
            self.resolve(opts["function"], f"{sid}.function")
        elif kind == "check":
            self._need(f"{sid}.file", opts["file"], "required")
            self._need(f"{sid}.expr", opts["expr"], "required")
            self._need(f"{sid}.stat", opts["stat"] in STATS, f"one of {', '.join(STATS)}")
            self._need(f"{sid}.op", opts["op"] in OPS, f"one of {' '.join(OPS)}")


def load_scenario(source):
    """Parse and validate scenario text (or a path to it)."""
    text = source
    if "\n" not in source and "[" not in source:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";;", "#"),
                                   default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError("scenario", f"unreadable document: {exc}") from None
    if "scenario" not in cp:
        raise ScenarioError("scenario", "missing [scenario] section")
    raw = dict(cp["scenario"])
    unknown = set(raw) - set(DEFAULTS) - {"name"}
    if unknown:
        raise ScenarioError(f"scenario.{sorted(unknown)[0]}", "unknown key")
    settings = {k: raw.get(k, v).strip() for k, v in DEFAULTS.items()}
    sections = []
    for sid in cp.sections():
        if sid == "scenario":
            continue
        kind = sid.split(":")[0]
        if kind not in ANALYSES:
            raise ScenarioError(sid, f"unknown analysis {kind!r}")
        opts = dict(cp[sid])
        unknown = set(opts) - set(SECTION_DEFAULTS[kind])
        if unknown:
            raise ScenarioError(f"{sid}.{sorted(unknown)[0]}", "unknown key")
        sections.append((sid, {k: opts.get(k, v).strip() for k, v in SECTION_DEFAULTS[kind].items()}))
    sc = Scenario(raw.get("name", "").strip(), settings, sections)
    sc.validate()
    return sc
