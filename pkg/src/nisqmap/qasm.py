"""Parser and serializer for the supported assembly subset.

Supported: ``OPENQASM 2.0;`` header, ``include`` lines, one ``qreg``, any
number of ``creg``, ``cx`` plus any named one-qubit gate with optional
parameter expressions, ``measure`` and ``barrier``. Barriers are dropped.
"""

import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from lark import Lark, Token, Transformer, Tree, v_args
from lark.exceptions import UnexpectedInput, VisitError

from nisqmap.circuit import CNOT, MEASURE, Circuit, Gate
from nisqmap.errors import CircuitSyntaxError, UnsupportedGateError

logger = logging.getLogger(__name__)

_GRAMMAR = r"""
    start: header? statement*

    header: "OPENQASM" NUMBER ";" include*
    include: "include" ESCAPED_STRING ";"

    ?statement: qreg | creg | measure | barrier | gate_call

    qreg: "qreg" NAME "[" INT "]" ";"
    creg: "creg" NAME "[" INT "]" ";"
    measure: "measure" arg "->" arg ";"
    barrier: "barrier" args ";"
    gate_call: NAME params? args ";"

    params: "(" [expr ("," expr)*] ")"
    args: arg ("," arg)*
    arg: NAME ("[" INT "]")?

    ?expr: term
         | expr "+" term -> add
         | expr "-" term -> sub
    ?term: factor
         | term "*" factor -> mul
         | term "/" factor -> div
    ?factor: power
           | "-" factor -> neg
           | "+" factor
    ?power: atom
          | atom "^" factor -> pow
    ?atom: NUMBER -> number
         | "pi" -> pi
         | NAME "(" expr ")" -> call
         | "(" expr ")"

    NAME: /[a-zA-Z_][a-zA-Z0-9_]*/

    %import common.INT
    %import common.NUMBER
    %import common.ESCAPED_STRING
    %import common.WS
    %import common.CPP_COMMENT
    %ignore WS
    %ignore CPP_COMMENT
"""

_FUNCTIONS = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "ln": math.log,
    "sqrt": math.sqrt,
}


class _ExpressionEvaluator(Transformer):
    """Folds parameter expressions to floats; statements are left as trees."""

    @v_args(inline=True)
    def number(self, token: Token) -> float:
        return float(token)

    def pi(self, _children) -> float:
        return math.pi

    @v_args(inline=True)
    def neg(self, value: float) -> float:
        return -value

    @v_args(inline=True)
    def add(self, a: float, b: float) -> float:
        return a + b

    @v_args(inline=True)
    def sub(self, a: float, b: float) -> float:
        return a - b

    @v_args(inline=True)
    def mul(self, a: float, b: float) -> float:
        return a * b

    @v_args(inline=True)
    def div(self, a: float, b: float) -> float:
        return a / b

    @v_args(inline=True)
    def pow(self, a: float, b: float) -> float:
        return a**b

    @v_args(inline=True)
    def call(self, name: Token, value: float) -> float:
        if str(name) not in _FUNCTIONS:
            raise CircuitSyntaxError(f"unknown function '{name}'", name.line)
        return _FUNCTIONS[str(name)](value)

    def params(self, children) -> Tuple[float, ...]:
        return tuple(c for c in children if c is not None)


_parser = Lark(_GRAMMAR, parser="lalr", propagate_positions=True)


def _line(tree: Tree) -> Optional[int]:
    return getattr(tree.meta, "line", None)


class _CircuitBuilder:
    """Walks transformed statement trees and checks register semantics."""

    def __init__(self, name: str):
        self.name = name
        self.qreg: Optional[Tuple[str, int]] = None
        self.cregs: Dict[str, Tuple[int, int]] = {}
        self.n_clbits = 0
        self.gates: List[Gate] = []

    def build(self, tree: Tree) -> Circuit:
        for stmt in tree.children:
            if not isinstance(stmt, Tree) or stmt.data == "header":
                continue
            getattr(self, f"_{stmt.data}")(stmt)
        n_qubits = self.qreg[1] if self.qreg else 0
        return Circuit(self.name, n_qubits, tuple(self.gates), self.n_clbits)

    def _qreg(self, stmt: Tree) -> None:
        name, size = stmt.children
        if self.qreg is not None:
            raise CircuitSyntaxError("only one quantum register is supported", _line(stmt))
        self.qreg = (str(name), int(size))

    def _creg(self, stmt: Tree) -> None:
        name, size = stmt.children
        self.cregs[str(name)] = (self.n_clbits, int(size))
        self.n_clbits += int(size)

    def _qubits(self, arg: Tree, line: Optional[int]) -> List[int]:
        name = str(arg.children[0])
        if self.qreg is None or name != self.qreg[0]:
            raise CircuitSyntaxError(f"unknown register '{name}'", line)
        size = self.qreg[1]
        if len(arg.children) == 1:
            return list(range(size))
        index = int(arg.children[1])
        if index >= size:
            raise CircuitSyntaxError(f"qubit index {index} out of range for {name}[{size}]", line)
        return [index]

    def _clbits(self, arg: Tree, line: Optional[int]) -> List[int]:
        name = str(arg.children[0])
        if name not in self.cregs:
            raise CircuitSyntaxError(f"unknown register '{name}'", line)
        offset, size = self.cregs[name]
        if len(arg.children) == 1:
            return [offset + i for i in range(size)]
        index = int(arg.children[1])
        if index >= size:
            raise CircuitSyntaxError(f"bit index {index} out of range for {name}[{size}]", line)
        return [offset + index]

    def _append(self, kind: str, qubits: Tuple[int, ...], params: Tuple[float, ...] = (), clbit: Optional[int] = None) -> None:
        self.gates.append(Gate(len(self.gates), kind, qubits, params, clbit))

    def _barrier(self, stmt: Tree) -> None:
        for arg in stmt.children[0].children:
            self._qubits(arg, _line(stmt))

    def _measure(self, stmt: Tree) -> None:
        line = _line(stmt)
        qubits = self._qubits(stmt.children[0], line)
        clbits = self._clbits(stmt.children[1], line)
        if len(qubits) != len(clbits):
            raise CircuitSyntaxError("measure register sizes differ", line)
        for q, c in zip(qubits, clbits):
            self._append(MEASURE, (q,), (), c)

    def _gate_call(self, stmt: Tree) -> None:
        line = _line(stmt)
        name = str(stmt.children[0]).lower()
        params: Tuple[float, ...] = ()
        args = stmt.children[-1].children
        if len(stmt.children) == 3:
            params = stmt.children[1]
        if len(args) > 2:
            raise UnsupportedGateError(f"gate '{name}' acts on {len(args)} qubits; only one- and two-qubit gates are supported", line)
        operands = [self._qubits(a, line) for a in args]
        if len(args) == 2:
            if name != CNOT:
                raise UnsupportedGateError(f"two-qubit gate '{name}' is not supported; decompose it into cx", line)
            if any(len(o) != 1 for o in operands):
                raise CircuitSyntaxError("cx needs indexed qubit operands", line)
            control, target = operands[0][0], operands[1][0]
            if control == target:
                raise CircuitSyntaxError("cx control and target must differ", line)
            self._append(CNOT, (control, target))
            return
        if name == CNOT:
            raise CircuitSyntaxError("cx needs two operands", line)
        for q in operands[0]:
            self._append(name, (q,), params)


def parse_circuit(source: str, name: str = "circuit") -> Circuit:
    """Parse assembly text into a ``Circuit``.

    Raises:
        CircuitSyntaxError: malformed text, unknown register or index out of range.
        UnsupportedGateError: gates on three or more qubits, two-qubit gates other than cx.
    """
    try:
        tree = _parser.parse(source)
        tree = _ExpressionEvaluator().transform(tree)
    except UnexpectedInput as exc:
        raise CircuitSyntaxError(f"syntax error near column {exc.column}", exc.line) from exc
    except VisitError as exc:
        if isinstance(exc.orig_exc, CircuitSyntaxError):
            raise exc.orig_exc from exc
        raise CircuitSyntaxError(str(exc.orig_exc)) from exc
    circuit = _CircuitBuilder(name).build(tree)
    logger.debug("parsed %s: %d qubits, %d gates", name, circuit.n_qubits, len(circuit.gates))
    return circuit


def load_circuit(path: Union[str, Path]) -> Circuit:
    path = Path(path)
    return parse_circuit(path.read_text(encoding="utf-8"), name=path.stem)


def _format_param(value: float) -> str:
    return repr(float(value))


def to_qasm(circuit: Circuit) -> str:
    """Serialize a circuit; parsing the result yields an equal circuit."""
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{circuit.n_qubits}];"]
    if circuit.n_clbits:
        lines.append(f"creg c[{circuit.n_clbits}];")
    for gate in circuit.gates:
        if gate.is_measure:
            lines.append(f"measure q[{gate.qubits[0]}] -> c[{gate.clbit}];")
            continue
        head = gate.kind
        if gate.params:
            head += "(" + ",".join(_format_param(p) for p in gate.params) + ")"
        lines.append(f"{head} " + ",".join(f"q[{q}]" for q in gate.qubits) + ";")
    return "\n".join(lines) + "\n"
