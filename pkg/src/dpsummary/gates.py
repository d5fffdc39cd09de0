"""Boolean gate evaluation over simulated encrypted bits.

Two backends share one gate interface:

* :class:`CleartextBackend` keeps the plaintext bit inside each ciphertext,
  tags it with the identity of the key that produced it and enforces the
  contract (same backend, same key, correct key on decryption).
* :class:`CountingBackend` evaluates the same circuits with the contract
  checks switched off. It is meant for gate-count benchmarks.

Both tally every gate in a :class:`GateStats` cell. A real FHE library would
plug in behind the same methods (``encrypt``, ``decrypt``, ``trivial`` and the
five gates).
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass

GATE_KINDS = ("AND", "OR", "XOR", "NOT", "MUX")

# Rough per-gate bootstrapping time of a CPU TFHE implementation, in seconds.
DEFAULT_GATE_SECONDS = 0.013


class BackendMismatch(ValueError):
    """Operands of one gate come from different backend instances."""


class KeyMismatch(ValueError):
    """A ciphertext was combined with, or decrypted under, a foreign key."""


@dataclass(frozen=True)
class SecretKey:
    material: bytes

    @property
    def key_id(self) -> str:
        return hashlib.sha256(b"key-id" + self.material).hexdigest()[:16]

    def __repr__(self) -> str:
        return f"SecretKey(id={self.key_id})"


def keygen(rng_seed: int) -> SecretKey:
    """Derive a symmetric key deterministically from ``rng_seed``."""
    material = hashlib.sha256(b"dpsummary-keygen:" + str(int(rng_seed)).encode()).digest()
    return SecretKey(material)


class EncBit:
    """One ciphertext bit. ``key_id`` is ``None`` for trivial (public) bits."""

    __slots__ = ("backend", "bit", "key_id")

    def __init__(self, backend: CleartextBackend, bit: int, key_id: str | None):
        self.backend = backend
        self.bit = bit
        self.key_id = key_id

    @property
    def provenance(self) -> str:
        return "trivial" if self.key_id is None else "encrypted"

    def __repr__(self) -> str:
        return f"EncBit({self.provenance})"


class GateStats:
    """Thread-safe per-kind gate tally with a linear cost model."""

    def __init__(self, unit_costs: dict[str, float] | None = None,
                 unit_cost: float = DEFAULT_GATE_SECONDS):
        self.unit_costs = {g: unit_cost for g in GATE_KINDS}
        if unit_costs:
            unknown = set(unit_costs) - set(GATE_KINDS)
            if unknown:
                raise ValueError(f"unknown gate kinds: {sorted(unknown)}")
            self.unit_costs.update(unit_costs)
        self._counts = dict.fromkeys(GATE_KINDS, 0)
        self._lock = threading.Lock()

    def record(self, kind: str, times: int = 1) -> None:
        with self._lock:
            self._counts[kind] += times

    def snapshot(self) -> dict[str, int]:
        with self._lock:
            return dict(self._counts)

    @property
    def total(self) -> int:
        return sum(self.snapshot().values())

    @property
    def cost_estimate(self) -> float:
        counts = self.snapshot()
        return sum(counts[g] * self.unit_costs[g] for g in GATE_KINDS)

    def reset(self) -> None:
        with self._lock:
            for g in GATE_KINDS:
                self._counts[g] = 0

    def __repr__(self) -> str:
        return f"GateStats({self.snapshot()})"


class CleartextBackend:
    """Reference simulator: plaintext bits tagged with key identity.

    ``check_overflow`` turns on the debug-mode arithmetic assertions performed
    by :mod:`dpsummary.enc_fixed`.
    """

    strict = True

    def __init__(self, unit_cost: float = DEFAULT_GATE_SECONDS,
                 unit_costs: dict[str, float] | None = None,
                 check_overflow: bool = False):
        self.stats = GateStats(unit_costs=unit_costs, unit_cost=unit_cost)
        self.check_overflow = check_overflow

    # -- keys and encodings -------------------------------------------------

    def encrypt(self, key: SecretKey, b: int) -> EncBit:
        if b not in (0, 1):
            raise ValueError(f"bit must be 0 or 1, got {b!r}")
        return EncBit(self, int(b), key.key_id)

    def decrypt(self, key: SecretKey, c: EncBit) -> int:
        if c.backend is not self:
            raise BackendMismatch("ciphertext belongs to another backend")
        if self.strict and c.key_id is not None and c.key_id != key.key_id:
            raise KeyMismatch(f"ciphertext under key {c.key_id}, decrypting with {key.key_id}")
        return c.bit

    def trivial(self, b: int) -> EncBit:
        if b not in (0, 1):
            raise ValueError(f"bit must be 0 or 1, got {b!r}")
        return EncBit(self, int(b), None)

    def peek(self, c: EncBit) -> int:
        """Read a bit without a key. Simulator-only; used by debug assertions."""
        return c.bit

    # -- gates ----------------------------------------------------------------

    def _key(self, a: EncBit, b: EncBit) -> str | None:
        if a.backend is not self or b.backend is not self:
            raise BackendMismatch("gate operands from different backends")
        ka, kb = a.key_id, b.key_id
        if ka is None:
            return kb
        if kb is not None and kb != ka and self.strict:
            raise KeyMismatch("gate operands encrypted under different keys")
        return ka

    def and_(self, a: EncBit, b: EncBit) -> EncBit:
        key = self._key(a, b)
        self.stats.record("AND")
        return EncBit(self, a.bit & b.bit, key)

    def or_(self, a: EncBit, b: EncBit) -> EncBit:
        key = self._key(a, b)
        self.stats.record("OR")
        return EncBit(self, a.bit | b.bit, key)

    def xor(self, a: EncBit, b: EncBit) -> EncBit:
        key = self._key(a, b)
        self.stats.record("XOR")
        return EncBit(self, a.bit ^ b.bit, key)

    def not_(self, a: EncBit) -> EncBit:
        if a.backend is not self:
            raise BackendMismatch("gate operand from a different backend")
        self.stats.record("NOT")
        return EncBit(self, a.bit ^ 1, a.key_id)

    def mux(self, sel: EncBit, a: EncBit, b: EncBit) -> EncBit:
        """``a`` if ``sel`` is 1, else ``b``."""
        key = self._key(sel, a)
        other = self._key(a, b)
        if key is None:
            key = other
        elif other is not None and other != key and self.strict:
            raise KeyMismatch("gate operands encrypted under different keys")
        self.stats.record("MUX")
        return EncBit(self, a.bit if sel.bit else b.bit, key)


class CountingBackend(CleartextBackend):
    """Gate-accounting backend: same evaluation, contract checks off."""

    strict = False

    def __init__(self, unit_cost: float = DEFAULT_GATE_SECONDS,
                 unit_costs: dict[str, float] | None = None):
        super().__init__(unit_cost=unit_cost, unit_costs=unit_costs, check_overflow=False)
