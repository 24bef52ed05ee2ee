"""Network case model: buses, branches, generators and the bus admittance matrix.

Case files use the MATPOWER matrix-literal subset::

    function mpc = case2
    mpc.baseMVA = 100;
    mpc.bus = [ 1 3 0 0 0 0 1 1 0 0 1 1.1 0.9; ... ];
    mpc.gen = [ ... ];
    mpc.branch = [ ... ];
    mpc.gencost = [ 2 0 0 3 a b c; ... ];

Only polynomial costs of degree <= 2 are accepted.
"""

from __future__ import annotations

import dataclasses
import enum
import math
import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


class CaseError(ValueError):
    """Base class for case-file problems.

    ``line`` and ``column`` are 1-based positions in the source text when the
    problem can be traced back to it.
    """

    def __init__(self, message: str, line: int | None = None, column: int | None = None,
                 where: tuple[str, int] | None = None):
        self.message = message
        self.line = line
        self.column = column
        # (section, row index) of the offending record, used to recover a position
        self.where = where
        super().__init__(str(self))

    def __str__(self) -> str:
        if self.line is None:
            return self.message
        return f"line {self.line}, column {self.column}: {self.message}"

    def at(self, line: int, column: int) -> "CaseError":
        err = type(self)(self.message, line, column, self.where)
        err.__cause__ = self.__cause__
        return err


class CaseSyntaxError(CaseError):
    pass


class CaseValidationError(CaseError):
    pass


class UnknownBusError(CaseValidationError):
    pass


class DuplicateBusError(CaseValidationError):
    pass


class NoSlackBusError(CaseValidationError):
    pass


class SingularBranchError(CaseValidationError):
    pass


class UnsupportedFeatureError(CaseError):
    pass


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


class BusKind(enum.Enum):
    PQ = 1
    PV = 2
    SLACK = 3


def _finite(where: tuple[str, int] | None, **values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise CaseValidationError(f"{name} must be finite, got {value!r}", where=where)


@dataclass(frozen=True)
class Bus:
    """A network node. Loads in MW/MVAr, shunts in MW/MVAr at 1.0 p.u."""

    id: int
    kind: BusKind
    base_pd: float = 0.0
    base_qd: float = 0.0
    vmin: float = 0.9
    vmax: float = 1.1
    shunt_gs: float = 0.0
    shunt_bs: float = 0.0
    vm0: float = 1.0
    va0: float = 0.0  # degrees, as in the case file
    base_kv: float = 0.0
    area: int = 1
    zone: int = 1

    def __post_init__(self):
        where = ("bus", self.id)
        _finite(where, base_pd=self.base_pd, base_qd=self.base_qd, vmin=self.vmin,
                vmax=self.vmax, shunt_gs=self.shunt_gs, shunt_bs=self.shunt_bs,
                vm0=self.vm0, va0=self.va0, base_kv=self.base_kv)
        if self.id <= 0:
            raise CaseValidationError(f"bus id must be positive, got {self.id}", where=where)
        if self.vmin <= 0:
            raise CaseValidationError(f"bus {self.id}: vmin must be > 0", where=where)
        if self.vmin > self.vmax:
            raise CaseValidationError(f"bus {self.id}: vmin {self.vmin} > vmax {self.vmax}",
                                      where=where)


@dataclass(frozen=True)
class Branch:
    """A line or transformer between two buses, impedances in p.u.

    ``b_charging`` is the total line-charging susceptance; half of it sits at
    each end. ``s_max`` is the MVA rating, 0 meaning unlimited.
    """

    from_bus: int
    to_bus: int
    r: float
    x: float
    b_charging: float = 0.0
    s_max: float = 0.0
    tap_ratio: float = 1.0
    in_service: bool = True
    angmin: float = -360.0
    angmax: float = 360.0

    def __post_init__(self):
        where = ("branch", None)
        _finite(where, r=self.r, x=self.x, b_charging=self.b_charging, s_max=self.s_max,
                tap_ratio=self.tap_ratio, angmin=self.angmin, angmax=self.angmax)
        if self.from_bus == self.to_bus:
            raise CaseValidationError(f"branch {self.from_bus}-{self.to_bus} is a self-loop",
                                      where=where)
        if self.r == 0 and self.x == 0:
            raise SingularBranchError(
                f"branch {self.from_bus}-{self.to_bus} has zero impedance", where=where)
        if self.s_max < 0:
            raise CaseValidationError(f"branch {self.from_bus}-{self.to_bus}: s_max < 0",
                                      where=where)
        if self.tap_ratio <= 0:
            raise CaseValidationError(
                f"branch {self.from_bus}-{self.to_bus}: tap ratio must be > 0", where=where)


@dataclass(frozen=True)
class Generator:
    """A dispatchable unit with quadratic cost a*P^2 + b*P + c (P in MW, cost in $/h)."""

    bus: int
    pmin: float
    pmax: float
    qmin: float
    qmax: float
    cost_a: float = 0.0
    cost_b: float = 0.0
    cost_c: float = 0.0
    pg0: float = 0.0
    qg0: float = 0.0
    vg: float = 1.0
    mbase: float = 100.0
    in_service: bool = True

    def __post_init__(self):
        where = ("gen", None)
        _finite(where, pmin=self.pmin, pmax=self.pmax, qmin=self.qmin, qmax=self.qmax,
                cost_a=self.cost_a, cost_b=self.cost_b, cost_c=self.cost_c,
                pg0=self.pg0, qg0=self.qg0, vg=self.vg, mbase=self.mbase)
        if self.pmin > self.pmax:
            raise CaseValidationError(f"generator at bus {self.bus}: pmin > pmax", where=where)
        if self.qmin > self.qmax:
            raise CaseValidationError(f"generator at bus {self.bus}: qmin > qmax", where=where)
        if self.cost_a < 0:
            raise CaseValidationError(
                f"generator at bus {self.bus}: quadratic cost coefficient must be >= 0",
                where=where)

    def cost(self, pg_mw: float) -> float:
        return self.cost_a * pg_mw * pg_mw + self.cost_b * pg_mw + self.cost_c


@dataclass(frozen=True)
class NetworkCase:
    base_mva: float
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...] = ()
    generators: tuple[Generator, ...] = ()
    name: str = field(default="case", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "generators", tuple(self.generators))
        if not (math.isfinite(self.base_mva) and self.base_mva > 0):
            raise CaseValidationError(f"baseMVA must be positive, got {self.base_mva}",
                                      where=("baseMVA", 0))
        if not self.buses:
            raise CaseValidationError("case has no buses", where=("bus", 0))
        seen: set[int] = set()
        for k, bus in enumerate(self.buses):
            if bus.id in seen:
                raise DuplicateBusError(f"duplicate bus id {bus.id}", where=("bus", k))
            seen.add(bus.id)
        slacks = [k for k, b in enumerate(self.buses) if b.kind is BusKind.SLACK]
        if not slacks:
            raise NoSlackBusError("case has no slack bus", where=("bus", 0))
        if len(slacks) > 1:
            raise CaseValidationError("case has more than one slack bus",
                                      where=("bus", slacks[1]))
        for k, br in enumerate(self.branches):
            for end in (br.from_bus, br.to_bus):
                if end not in seen:
                    raise UnknownBusError(f"branch {k + 1} references unknown bus {end}",
                                          where=("branch", k))
        for k, gen in enumerate(self.generators):
            if gen.bus not in seen:
                raise UnknownBusError(f"generator {k + 1} references unknown bus {gen.bus}",
                                      where=("gen", k))
        slack_id = self.buses[slacks[0]].id
        if not any(g.in_service and g.bus == slack_id for g in self.generators):
            raise CaseValidationError(f"slack bus {slack_id} has no in-service generator",
                                      where=("gen", 0))
        self._check_connected()

    def _check_connected(self) -> None:
        adjacency: dict[int, list[int]] = {b.id: [] for b in self.buses}
        for br in self.branches:
            if br.in_service:
                adjacency[br.from_bus].append(br.to_bus)
                adjacency[br.to_bus].append(br.from_bus)
        start = self.buses[0].id
        reached = {start}
        queue = deque([start])
        while queue:
            for nxt in adjacency[queue.popleft()]:
                if nxt not in reached:
                    reached.add(nxt)
                    queue.append(nxt)
        if len(reached) != len(self.buses):
            k, bus = next((k, b) for k, b in enumerate(self.buses) if b.id not in reached)
            raise CaseValidationError(
                f"network is not connected: bus {bus.id} is islanded", where=("bus", k))

    @cached_property
    def bus_index(self) -> dict[int, int]:
        return {b.id: k for k, b in enumerate(self.buses)}

    @property
    def slack_index(self) -> int:
        return next(k for k, b in enumerate(self.buses) if b.kind is BusKind.SLACK)

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    def active_generators(self) -> list[Generator]:
        return [g for g in self.generators if g.in_service]

    def base_loads(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-bus (P_d, Q_d) in MW/MVAr, in bus order."""
        pd = np.array([b.base_pd for b in self.buses], dtype=float)
        qd = np.array([b.base_qd for b in self.buses], dtype=float)
        return pd, qd

    def with_costs(self, table: Mapping[int, tuple[float, float, float]]) -> "NetworkCase":
        """Return a copy whose generators at the given buses use new (a, b, c) costs."""
        unknown = set(table) - {g.bus for g in self.generators}
        if unknown:
            raise UnknownBusError(f"no generator at bus(es) {sorted(unknown)}")
        gens = []
        for g in self.generators:
            if g.bus in table:
                a, b, c = table[g.bus]
                g = dataclasses.replace(g, cost_a=float(a), cost_b=float(b), cost_c=float(c))
            gens.append(g)
        return dataclasses.replace(self, generators=tuple(gens))

    def without_branch(self, index: int) -> "NetworkCase":
        branches = self.branches[:index] + self.branches[index + 1:]
        return dataclasses.replace(self, branches=branches)


# ---------------------------------------------------------------------------
# Tokenizer and parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<comment>%[^\n]*)
  | (?P<cont>\.\.\.[^\n]*\n)
  | (?P<nl>\n)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<str>'[^'\n]*')
  | (?P<punct>[\[\]{}()=;,.+\-])
""", re.VERBOSE)

_SPECIAL_NUMBERS = {"Inf": math.inf, "inf": math.inf, "NaN": math.nan, "nan": math.nan}


@dataclass
class _Tok:
    kind: str
    value: str
    line: int
    col: int


@dataclass
class _Cell:
    value: object
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise CaseSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        if kind in ("num", "id", "str", "punct"):
            toks.append(_Tok(kind, m.group(), line, col))
        elif kind == "nl":
            toks.append(_Tok("nl", "\n", line, col))
        if kind in ("nl", "cont"):
            line += 1
            line_start = m.end()
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        tok = self.toks[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def error(self, message: str, tok: _Tok | None = None) -> CaseSyntaxError:
        tok = tok or self.peek()
        return CaseSyntaxError(message, tok.line, tok.col)

    def expect(self, kind: str, value: str | None = None) -> _Tok:
        tok = self.peek()
        if tok.kind != kind or (value is not None and tok.value != value):
            want = value or kind
            got = tok.value if tok.kind != "eof" else "end of file"
            raise self.error(f"expected {want!r}, found {got!r}")
        return self.next()

    def skip_separators(self) -> None:
        while self.peek().kind == "nl" or (self.peek().kind == "punct"
                                           and self.peek().value in ";,"):
            self.next()

    def parse(self) -> dict[str, tuple[object, _Tok]]:
        fields: dict[str, tuple[object, _Tok]] = {}
        self.skip_separators()
        if self.peek().kind == "id" and self.peek().value == "function":
            while self.peek().kind not in ("nl", "eof"):
                self.next()
        while True:
            self.skip_separators()
            if self.peek().kind == "eof":
                return fields
            start = self.expect("id")
            name = start.value
            while self.peek().kind == "punct" and self.peek().value == ".":
                self.next()
                name = self.expect("id").value
            self.expect("punct", "=")
            value = self.parse_value()
            end = self.peek()
            if not (end.kind in ("nl", "eof") or (end.kind == "punct" and end.value == ";")):
                raise self.error(f"unexpected {end.value!r} after value of {name!r}")
            if name in fields:
                raise CaseSyntaxError(f"section {name!r} assigned twice", start.line, start.col)
            fields[name] = (value, start)

    def parse_scalar(self) -> _Cell | None:
        tok = self.peek()
        sign = 1.0
        if tok.kind == "punct" and tok.value in "+-":
            sign = -1.0 if tok.value == "-" else 1.0
            self.next()
            if self.peek().kind not in ("num", "id"):
                raise self.error("sign must be followed by a number")
        cur = self.peek()
        if cur.kind == "num":
            self.next()
            return _Cell(sign * float(cur.value), tok.line, tok.col)
        if cur.kind == "id" and cur.value in _SPECIAL_NUMBERS:
            self.next()
            return _Cell(sign * _SPECIAL_NUMBERS[cur.value], tok.line, tok.col)
        if cur.kind == "str" and sign == 1.0:
            self.next()
            return _Cell(cur.value[1:-1], tok.line, tok.col)
        if cur is not tok:
            raise self.error("sign must be followed by a number")
        return None

    def parse_value(self):
        tok = self.peek()
        if tok.kind == "punct" and tok.value in "[{":
            return self.parse_matrix(closing="]" if tok.value == "[" else "}")
        cell = self.parse_scalar()
        if cell is None:
            raise self.error(f"expected a value, found {tok.value or 'end of file'!r}")
        return cell

    def parse_matrix(self, closing: str) -> list[list[_Cell]]:
        self.next()
        rows: list[list[_Cell]] = []
        row: list[_Cell] = []
        while True:
            tok = self.peek()
            if tok.kind == "eof":
                raise self.error(f"unterminated matrix, expected {closing!r}")
            if tok.kind == "punct" and tok.value == closing:
                self.next()
                break
            if tok.kind == "nl" or (tok.kind == "punct" and tok.value == ";"):
                self.next()
                if row:
                    rows.append(row)
                    row = []
                continue
            if tok.kind == "punct" and tok.value == ",":
                self.next()
                continue
            cell = self.parse_scalar()
            if cell is None:
                raise self.error(f"unexpected {tok.value!r} inside matrix")
            row.append(cell)
        if row:
            rows.append(row)
        if rows:
            width = len(rows[0])
            for r in rows[1:]:
                if len(r) != width:
                    raise CaseSyntaxError(
                        f"row has {len(r)} columns, expected {width}", r[0].line, r[0].col)
        return rows


def _number(cell: _Cell) -> float:
    if isinstance(cell.value, str):
        raise CaseSyntaxError("expected a number, found a string", cell.line, cell.col)
    return cell.value


def _integer(cell: _Cell, what: str) -> int:
    v = _number(cell)
    if not math.isfinite(v) or v != int(v):
        raise CaseValidationError(f"{what} must be an integer, got {v!r}", cell.line, cell.col)
    return int(v)


def _flag(cell: _Cell, what: str) -> bool:
    v = _number(cell)
    if v not in (0.0, 1.0):
        raise CaseValidationError(f"{what} must be 0 or 1, got {v!r}", cell.line, cell.col)
    return v == 1.0


def _matrix(fields, name: str, min_cols: int, eof: _Tok) -> list[list[_Cell]]:
    if name not in fields:
        raise CaseSyntaxError(f"missing section mpc.{name}", eof.line, eof.col)
    value, start = fields[name]
    if not isinstance(value, list):
        raise CaseSyntaxError(f"mpc.{name} must be a matrix", start.line, start.col)
    for row in value:
        if len(row) < min_cols:
            raise CaseSyntaxError(
                f"mpc.{name} rows need at least {min_cols} columns, found {len(row)}",
                row[0].line, row[0].col)
    return value


def _positioned(err: CaseError, row: list[_Cell] | None, fallback: _Tok) -> CaseError:
    if err.line is not None:
        return err
    if row:
        return err.at(row[0].line, row[0].col)
    return err.at(fallback.line, fallback.col)


def parse_case(text: str, name: str = "case") -> NetworkCase:
    """Parse MATPOWER case text into a validated :class:`NetworkCase`.

    Raises a :class:`CaseError` subclass carrying line/column on any problem.
    """
    parser = _Parser(text)
    fields = parser.parse()
    eof = parser.toks[-1]

    if "baseMVA" not in fields:
        raise CaseSyntaxError("missing section mpc.baseMVA", eof.line, eof.col)
    base_cell, base_tok = fields["baseMVA"]
    if not isinstance(base_cell, _Cell):
        raise CaseSyntaxError("mpc.baseMVA must be a scalar", base_tok.line, base_tok.col)
    base_mva = _number(base_cell)

    bus_rows = _matrix(fields, "bus", 13, eof)
    gen_rows = _matrix(fields, "gen", 10, eof)
    branch_rows = _matrix(fields, "branch", 11, eof)
    cost_rows = _matrix(fields, "gencost", 4, eof)

    buses = []
    for row in bus_rows:
        kind_code = _integer(row[1], "bus type")
        if kind_code == 4:
            raise UnsupportedFeatureError("isolated buses (type 4) are not supported",
                                          row[1].line, row[1].col)
        if kind_code not in (1, 2, 3):
            raise CaseValidationError(f"unknown bus type {kind_code}", row[1].line, row[1].col)
        try:
            buses.append(Bus(
                id=_integer(row[0], "bus id"), kind=BusKind(kind_code),
                base_pd=_number(row[2]), base_qd=_number(row[3]),
                shunt_gs=_number(row[4]), shunt_bs=_number(row[5]),
                area=_integer(row[6], "area"), vm0=_number(row[7]), va0=_number(row[8]),
                base_kv=_number(row[9]), zone=_integer(row[10], "zone"),
                vmax=_number(row[11]), vmin=_number(row[12]),
            ))
        except CaseError as err:
            raise _positioned(err, row, eof) from None

    if len(cost_rows) == 2 * len(gen_rows) and gen_rows:
        row = cost_rows[len(gen_rows)]
        raise UnsupportedFeatureError("reactive power costs are not supported",
                                      row[0].line, row[0].col)
    if len(cost_rows) != len(gen_rows):
        tok = fields["gencost"][1]
        raise CaseValidationError(
            f"mpc.gencost has {len(cost_rows)} rows but mpc.gen has {len(gen_rows)}",
            tok.line, tok.col)

    generators = []
    for row, crow in zip(gen_rows, cost_rows):
        model = _integer(crow[0], "cost model")
        if model != 2:
            raise UnsupportedFeatureError(
                "only polynomial cost models (model 2) are supported", crow[0].line, crow[0].col)
        ncost = _integer(crow[3], "number of cost coefficients")
        if not 1 <= ncost <= 3:
            raise UnsupportedFeatureError(
                f"only polynomials of degree <= 2 are supported, got {ncost} coefficients",
                crow[3].line, crow[3].col)
        if len(crow) < 4 + ncost:
            raise CaseSyntaxError(f"gencost row needs {ncost} coefficients",
                                  crow[0].line, crow[0].col)
        coeffs = [0.0] * (3 - ncost) + [_number(c) for c in crow[4:4 + ncost]]
        try:
            generators.append(Generator(
                bus=_integer(row[0], "generator bus"), pg0=_number(row[1]), qg0=_number(row[2]),
                qmax=_number(row[3]), qmin=_number(row[4]), vg=_number(row[5]),
                mbase=_number(row[6]), in_service=_flag(row[7], "generator status"),
                pmax=_number(row[8]), pmin=_number(row[9]),
                cost_a=coeffs[0], cost_b=coeffs[1], cost_c=coeffs[2],
            ))
        except CaseError as err:
            raise _positioned(err, row, eof) from None

    branches = []
    for row in branch_rows:
        shift = _number(row[9])
        if shift != 0:
            raise UnsupportedFeatureError("phase-shifting transformers are not supported",
                                          row[9].line, row[9].col)
        ratio = _number(row[8])
        try:
            branches.append(Branch(
                from_bus=_integer(row[0], "from bus"), to_bus=_integer(row[1], "to bus"),
                r=_number(row[2]), x=_number(row[3]), b_charging=_number(row[4]),
                s_max=_number(row[5]), tap_ratio=1.0 if ratio == 0 else ratio,
                in_service=_flag(row[10], "branch status"),
                angmin=_number(row[11]) if len(row) > 12 else -360.0,
                angmax=_number(row[12]) if len(row) > 12 else 360.0,
            ))
        except CaseError as err:
            raise _positioned(err, row, eof) from None

    sections = {"bus": bus_rows, "gen": gen_rows, "branch": branch_rows}
    try:
        return NetworkCase(base_mva=base_mva, buses=tuple(buses), branches=tuple(branches),
                           generators=tuple(generators), name=name)
    except CaseError as err:
        row = None
        if err.where is not None:
            section, idx = err.where
            rows = sections.get(section)
            if rows and isinstance(idx, int) and idx < len(rows):
                row = rows[idx]
        fallback = base_tok if err.where and err.where[0] == "baseMVA" else eof
        if row is None and err.where and err.where[0] in fields:
            fallback = fields[err.where[0]][1]
        raise _positioned(err, row, fallback) from None


def load_case(path) -> NetworkCase:
    from pathlib import Path

    path = Path(path)
    return parse_case(path.read_text(), name=path.stem)


def _fmt(value: float) -> str:
    if float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def serialize_case(case: NetworkCase) -> str:
    """Render a case as MATPOWER text that :func:`parse_case` reads back identically."""
    lines = [f"function mpc = {case.name}", "mpc.version = '2';",
             f"mpc.baseMVA = {_fmt(case.base_mva)};", "",
             "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin",
             "mpc.bus = ["]
    for b in case.buses:
        vals = [b.id, b.kind.value, b.base_pd, b.base_qd, b.shunt_gs, b.shunt_bs, b.area,
                b.vm0, b.va0, b.base_kv, b.zone, b.vmax, b.vmin]
        lines.append("\t" + "\t".join(_fmt(v) for v in vals) + ";")
    lines += ["];", "", "%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin", "mpc.gen = ["]
    for g in case.generators:
        vals = [g.bus, g.pg0, g.qg0, g.qmax, g.qmin, g.vg, g.mbase, int(g.in_service),
                g.pmax, g.pmin]
        lines.append("\t" + "\t".join(_fmt(v) for v in vals) + ";")
    lines += ["];", "",
              "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax",
              "mpc.branch = ["]
    for br in case.branches:
        vals = [br.from_bus, br.to_bus, br.r, br.x, br.b_charging, br.s_max, 0, 0,
                br.tap_ratio, 0, int(br.in_service), br.angmin, br.angmax]
        lines.append("\t" + "\t".join(_fmt(v) for v in vals) + ";")
    lines += ["];", "", "mpc.gencost = ["]
    for g in case.generators:
        vals = [2, 0, 0, 3, g.cost_a, g.cost_b, g.cost_c]
        lines.append("\t" + "\t".join(_fmt(v) for v in vals) + ";")
    lines += ["];", ""]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Admittance matrix
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AdmittanceMatrix:
    """Bus admittance matrix plus the branch from/to admittance rows.

    ``yf @ V`` and ``yt @ V`` give the current entering each in-service branch
    at its from and to ends. ``branch_ids`` maps rows back to ``case.branches``.
    """

    ybus: np.ndarray
    yf: np.ndarray
    yt: np.ndarray
    f: np.ndarray
    t: np.ndarray
    branch_ids: np.ndarray
    bus_index: Mapping[int, int]

    def G(self, n: int, m: int) -> float:
        return float(self.ybus[self.bus_index[n], self.bus_index[m]].real)

    def B(self, n: int, m: int) -> float:
        return float(self.ybus[self.bus_index[n], self.bus_index[m]].imag)

    @property
    def shape(self) -> tuple[int, int]:
        return self.ybus.shape


def branch_admittances(branch: Branch) -> tuple[complex, complex, complex, complex]:
    """Return (Yff, Yft, Ytf, Ytt) of the branch pi-model with an off-nominal tap at the from end."""
    if branch.r == 0 and branch.x == 0:
        raise SingularBranchError(f"branch {branch.from_bus}-{branch.to_bus} has zero impedance")
    ys = 1.0 / complex(branch.r, branch.x)
    ytt = ys + 0.5j * branch.b_charging
    tap = branch.tap_ratio
    return ytt / (tap * tap), -ys / tap, -ys / tap, ytt


def build_admittance(case: NetworkCase) -> AdmittanceMatrix:
    nb = case.n_bus
    idx = case.bus_index
    active = [k for k, br in enumerate(case.branches) if br.in_service]
    nl = len(active)
    yf = np.zeros((nl, nb), dtype=complex)
    yt = np.zeros((nl, nb), dtype=complex)
    f = np.zeros(nl, dtype=int)
    t = np.zeros(nl, dtype=int)
    for row, k in enumerate(active):
        br = case.branches[k]
        yff, yft, ytf, ytt = branch_admittances(br)
        f[row], t[row] = idx[br.from_bus], idx[br.to_bus]
        yf[row, f[row]] += yff
        yf[row, t[row]] += yft
        yt[row, f[row]] += ytf
        yt[row, t[row]] += ytt
    ysh = np.array([complex(b.shunt_gs, b.shunt_bs) for b in case.buses]) / case.base_mva
    ybus = np.diag(ysh).astype(complex)
    np.add.at(ybus, f, yf)
    np.add.at(ybus, t, yt)
    for arr in (ybus, yf, yt, f, t):
        arr.setflags(write=False)
    branch_ids = np.array(active, dtype=int)
    branch_ids.setflags(write=False)
    return AdmittanceMatrix(ybus, yf, yt, f, t, branch_ids, dict(idx))

