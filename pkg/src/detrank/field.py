"""Exact scalar arithmetic over prime fields and an overflow-checked integer ring."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

INT_MIN = -(2**63)
INT_MAX = 2**63 - 1
MAX_MODULUS = 2**16


class FieldError(ValueError):
    """Raised for invalid field parameters or mismatched operands."""


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    f = 3
    while f * f <= p:
        if p % f == 0:
            return False
        f += 2
    return True


@dataclass(frozen=True)
class FieldSpec:
    """Coefficient domain: ``F_p`` (``kind="prime"``) or the integers (``kind="int"``).

    Values are plain Python ints. For prime fields the canonical
    representative lies in ``[0, p)``; integer-ring values are signed and
    must fit in a signed 64-bit word.
    """

    kind: Literal["prime", "int"]
    p: int = 0

    def __post_init__(self):
        if self.kind == "prime":
            if not (2 <= self.p <= MAX_MODULUS) or not is_prime(self.p):
                raise FieldError(f"modulus must be a prime in [2, {MAX_MODULUS}], got {self.p}")
        elif self.kind == "int":
            if self.p != 0:
                raise FieldError("integer ring takes no modulus")
        else:
            raise FieldError(f"unknown field kind {self.kind!r}")

    @property
    def is_prime_field(self) -> bool:
        return self.kind == "prime"

    @property
    def q(self) -> int:
        """Field size; only meaningful for prime fields."""
        if not self.is_prime_field:
            raise FieldError("the integer ring has no finite size")
        return self.p

    @property
    def modulus(self) -> int:
        """``p`` for prime fields, ``0`` for the integer ring (serialization convention)."""
        return self.p

    def __str__(self):
        return f"F_{self.p}" if self.is_prime_field else "Z"

    def reduce(self, v: int) -> int:
        if self.kind == "prime":
            return v % self.p
        if v < INT_MIN or v > INT_MAX:
            raise OverflowError(f"integer-ring value {v} exceeds 64-bit range")
        return v

    def add(self, a: int, b: int) -> int:
        return self.reduce(a + b)

    def sub(self, a: int, b: int) -> int:
        return self.reduce(a - b)

    def mul(self, a: int, b: int) -> int:
        return self.reduce(a * b)

    def neg(self, a: int) -> int:
        return self.reduce(-a)

    def inv(self, a: int) -> int:
        if self.kind != "prime":
            if a in (1, -1):
                return a
            raise FieldError(f"{a} is not invertible in the integer ring")
        a %= self.p
        if a == 0:
            raise ZeroDivisionError("inverse of zero")
        return pow(a, self.p - 2, self.p)

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def elements(self):
        """All field elements in canonical order (prime fields only)."""
        return range(self.q)


def make_field(p: int) -> FieldSpec:
    """Return ``F_p``; ``p`` must be prime and at most 2**16."""
    if not isinstance(p, int) or isinstance(p, bool):
        raise FieldError(f"modulus must be an integer, got {p!r}")
    return FieldSpec("prime", p)


INTEGERS = FieldSpec("int")


def integer_ring() -> FieldSpec:
    return INTEGERS


def parse_field(text: str | int) -> FieldSpec:
    """Parse ``"int"``/``"0"`` as the integer ring, anything else as a prime modulus."""
    if isinstance(text, int):
        return INTEGERS if text == 0 else make_field(text)
    t = str(text).strip().lower()
    if t in ("int", "z", "0", "integers"):
        return INTEGERS
    try:
        p = int(t)
    except ValueError:
        raise FieldError(f"cannot parse field {text!r}") from None
    return make_field(p)


@dataclass(frozen=True)
class Scalar:
    """A field element bundled with its domain."""

    spec: FieldSpec
    value: int

    def __post_init__(self):
        object.__setattr__(self, "value", self.spec.reduce(int(self.value)))

    def _check(self, other: Scalar) -> None:
        if not isinstance(other, Scalar) or other.spec != self.spec:
            raise FieldError("operands live in different fields")

    def __add__(self, other):
        self._check(other)
        return Scalar(self.spec, self.spec.add(self.value, other.value))

    def __sub__(self, other):
        self._check(other)
        return Scalar(self.spec, self.spec.sub(self.value, other.value))

    def __mul__(self, other):
        self._check(other)
        return Scalar(self.spec, self.spec.mul(self.value, other.value))

    def __neg__(self):
        return Scalar(self.spec, self.spec.neg(self.value))

    def inverse(self) -> Scalar:
        if not self.spec.is_prime_field:
            raise FieldError("inversion requires a prime field")
        return Scalar(self.spec, self.spec.inv(self.value))

    def __int__(self):
        return self.value


def arith(a: Scalar, b: Scalar | None, op: str) -> Scalar:
    """Apply ``op`` in ``{"add", "sub", "mul", "inv", "neg"}``; unary ops ignore ``b``."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "neg":
        return -a
    if op == "inv":
        return a.inverse()
    raise FieldError(f"unknown operation {op!r}")
