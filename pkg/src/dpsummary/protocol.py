"""Four-party summary construction as in-process message passing.

Roles: data owners (``DO1..DON``) encrypt records under the key generated by
the decryption server (``DS``); the computation server (``CS``) aggregates,
partitions and adds noise without the key; data analysts (``DA1..``) query the
finished plaintext summary held by the CS.

The CS and DS talk in two rounds. The first decrypts the encrypted argmin
index (the partition, protected by epsilon1); the second decrypts the noisy
bucket totals of that partition (protected by epsilon2). Each request carries
a capability token minted only for noise-protected ciphertexts, and the DS
refuses anything else.

Every message passes through a :class:`Transcript` before delivery, and
:func:`assert_visibility` checks a transcript against the trust model.
"""

from __future__ import annotations

import enum
import hashlib
import hmac
import json
import logging
import math
from collections import deque
from dataclasses import dataclass, field, fields, is_dataclass
from typing import Sequence

from .config import PipelineConfig
from .enc_fixed import EncWord, enc_decrypt, enc_encrypt_plain, enc_sum, words_digest
from .fixed import FixedFormat, PlainFixed, encode
from .gates import CleartextBackend, SecretKey, keygen
from .noise import BudgetLedger, NoiseLog, NoiseSource, NoiseStream
from .partition import (EncArgmin, Partition, bucket_sums, build_cost_table, enumerate_partitions,
                        noisy_bucket_sums, partition_total_cost, select_min_partition)
from .summary import DpSummary, range_query, uniform_expand

log = logging.getLogger(__name__)

CS, DS = "CS", "DS"


class DecryptionRefused(PermissionError):
    pass


class VisibilityViolation(AssertionError):
    pass


# -- capability tokens ---------------------------------------------------------

class CapabilityMint:
    """Issues and checks tokens binding a ciphertext digest to the DP pipeline."""

    def __init__(self, secret: bytes):
        self._secret = secret

    @classmethod
    def for_seed(cls, seed: int) -> CapabilityMint:
        return cls(hashlib.sha256(f"dpsummary-mint:{seed}".encode()).digest())

    def issue(self, digest: str) -> str:
        return hmac.new(self._secret, digest.encode(), hashlib.sha256).hexdigest()

    def verify(self, digest: str, token: str | None) -> bool:
        return token is not None and hmac.compare_digest(self.issue(digest), token)


# -- messages ------------------------------------------------------------------

def _sha(*parts) -> str:
    return hashlib.sha256(json.dumps(parts, sort_keys=True, default=str).encode()).hexdigest()


@dataclass(frozen=True)
class KeyDist:
    key: SecretKey

    def digest(self) -> str:
        return _sha("KeyDist", self.key.key_id)


@dataclass(frozen=True)
class Record:
    words: tuple[EncWord, ...]

    def digest(self) -> str:
        return _sha("Record", words_digest(self.words))


@dataclass(frozen=True)
class DecryptRequest:
    argmin: EncArgmin | None = None
    s_prime: tuple[EncWord, ...] | None = None
    token: str | None = None

    def ciphertext_digest(self) -> str:
        a = self.argmin.digest() if self.argmin is not None else "-"
        s = words_digest(self.s_prime) if self.s_prime is not None else "-"
        return _sha("DecryptRequest", a, s)

    def digest(self) -> str:
        return _sha(self.ciphertext_digest(), self.token)


@dataclass(frozen=True)
class DecryptReply:
    cut_mask: int | None = None
    s_prime: tuple[float, ...] | None = None
    s_prime_raw: tuple[int, ...] | None = None
    dp_protected: bool = False

    def digest(self) -> str:
        return _sha("DecryptReply", self.cut_mask, self.s_prime_raw, self.dp_protected)


@dataclass(frozen=True)
class Query:
    l: int
    r: int

    def digest(self) -> str:
        return _sha("Query", self.l, self.r)


@dataclass(frozen=True)
class Response:
    l: int
    r: int
    value: float

    def digest(self) -> str:
        return _sha("Response", self.l, self.r, repr(self.value))


@dataclass(frozen=True)
class Message:
    seq: int
    sender: str
    receiver: str
    body: object

    @property
    def variant(self) -> str:
        return type(self.body).__name__

    def export(self) -> dict:
        return {"seq": self.seq, "sender": self.sender, "receiver": self.receiver,
                "variant": self.variant, "digest": self.body.digest()}


@dataclass
class Transcript:
    messages: list[Message] = field(default_factory=list)
    verifier: CapabilityMint | None = None

    def append(self, msg: Message) -> None:
        self.messages.append(msg)

    def lines(self) -> list[str]:
        return [json.dumps(m.export(), sort_keys=True) for m in self.messages]

    def dumps(self) -> str:
        return "".join(line + "\n" for line in self.lines())

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())

    def between(self, a: str, b: str) -> list[Message]:
        return [m for m in self.messages if {m.sender, m.receiver} == {a, b}]

    def forged(self, sender: str, receiver: str, body) -> Transcript:
        """Copy with one extra message appended (fault injection in tests)."""
        msgs = list(self.messages)
        msgs.append(Message(len(msgs), sender, receiver, body))
        return Transcript(msgs, self.verifier)


# -- operations used by the parties ---------------------------------------------

def do_encrypt_record(backend: CleartextBackend, key: SecretKey, domain: int, n: int,
                      fmt: FixedFormat) -> Record:
    """Encrypted one-hot vector: 1 at ``domain`` (1-based), 0 elsewhere."""
    if not 1 <= domain <= n:
        raise ValueError(f"domain {domain} outside 1..{n}")
    one, zero = encode(1, fmt), PlainFixed.zero(fmt)
    return Record(tuple(enc_encrypt_plain(backend, key, one if i == domain else zero)
                        for i in range(1, n + 1)))


def do_encrypt_histogram(backend: CleartextBackend, key: SecretKey, x: Sequence[float],
                         fmt: FixedFormat) -> Record:
    """A pre-aggregated record carrying a whole encrypted histogram."""
    return Record(tuple(enc_encrypt_plain(backend, key, encode(v, fmt)) for v in x))


def cs_aggregate(records: Sequence[Record]) -> list[EncWord]:
    """Component-wise encrypted sum of the owners' vectors, in arrival order."""
    if not records:
        raise ValueError("no records to aggregate")
    n = len(records[0].words)
    if any(len(r.words) != n for r in records):
        raise ValueError("records disagree on the number of domains")
    return [enc_sum([r.words[i] for r in records]) for i in range(n)]


def ds_decrypt_summary(key: SecretKey, req: DecryptRequest, mint: CapabilityMint) -> DecryptReply:
    """Decrypt a DP-protected partition index and/or noisy bucket totals."""
    if not mint.verify(req.ciphertext_digest(), req.token):
        raise DecryptionRefused("ciphertext is not tagged as DP-protected")
    if req.argmin is None and req.s_prime is None:
        raise DecryptionRefused("empty decryption request")
    mask = None if req.argmin is None else req.argmin.decrypt_mask(key)
    raws = vals = None
    if req.s_prime is not None:
        plain = [enc_decrypt(key, w) for w in req.s_prime]
        raws = tuple(p.raw for p in plain)
        vals = tuple(p.value for p in plain)
    return DecryptReply(mask, vals, raws, dp_protected=True)


# -- parties -------------------------------------------------------------------

class DataOwner:
    def __init__(self, name: str, backend: CleartextBackend, n: int, fmt: FixedFormat,
                 domain: int | None = None, histogram: Sequence[float] | None = None):
        self.name = name
        self.backend = backend
        self.n = n
        self.fmt = fmt
        self.domain = domain
        self.histogram = histogram
        self.key: SecretKey | None = None

    def handle(self, msg: Message) -> list[Message]:
        if not isinstance(msg.body, KeyDist):
            raise ValueError(f"{self.name} cannot handle {msg.variant}")
        self.key = msg.body.key
        if self.histogram is not None:
            rec = do_encrypt_histogram(self.backend, self.key, self.histogram, self.fmt)
        else:
            rec = do_encrypt_record(self.backend, self.key, self.domain, self.n, self.fmt)
        return [Message(-1, self.name, CS, rec)]


class DecryptionServer:
    def __init__(self, backend: CleartextBackend, key_seed: int, mint: CapabilityMint):
        self.name = DS
        self.backend = backend
        self.key = keygen(key_seed)
        self.mint = mint
        self.plaintexts: dict[str, object] = {}
        self._served: dict[str, DecryptReply] = {}
        self._partition: Partition | None = None

    def handle(self, msg: Message) -> list[Message]:
        body = msg.body
        if not isinstance(body, DecryptRequest):
            raise ValueError(f"DS cannot handle {msg.variant}")
        reply = self.decrypt(body)
        return [Message(-1, DS, msg.sender, reply)]

    def decrypt(self, req: DecryptRequest) -> DecryptReply:
        digest = req.digest()
        if digest in self._served:
            return self._served[digest]
        reply = ds_decrypt_summary(self.key, req, self.mint)
        self._served[digest] = reply
        if reply.cut_mask is not None:
            self._partition = Partition(req.argmin.n, reply.cut_mask)
            self.plaintexts["B"] = self._partition
        if reply.s_prime is not None:
            self.plaintexts["S_prime"] = reply.s_prime
            if self._partition is not None and self._partition.k == len(reply.s_prime):
                self.plaintexts["x_prime"] = uniform_expand(reply.s_prime, self._partition).x_prime
        return reply


class CsState(enum.Enum):
    COLLECTING = "collecting"
    AWAIT_PARTITION = "await_partition"
    AWAIT_SUMS = "await_sums"
    READY = "ready"


class ComputationServer:
    def __init__(self, backend: CleartextBackend, config: PipelineConfig, stream: NoiseSource,
                 mint: CapabilityMint, noise_log: NoiseLog | None = None):
        self.name = CS
        self.backend = backend
        self.config = config
        self.stream = stream
        self.mint = mint
        self.noise_log = noise_log
        self.state = CsState.COLLECTING
        self.records: list[Record] = []
        self.enc_x: list[EncWord] | None = None
        self.partition: Partition | None = None
        self.summary: DpSummary | None = None
        self.plaintexts: dict[str, object] = {}
        self.phase_gates: dict[str, int] = {}

    def _phase(self, name: str, start: int) -> int:
        now = self.backend.stats.total
        self.phase_gates[name] = self.phase_gates.get(name, 0) + now - start
        return now

    def handle(self, msg: Message) -> list[Message]:
        body = msg.body
        if isinstance(body, Record):
            if self.state is not CsState.COLLECTING:
                raise ValueError("record arrived after construction started")
            self.records.append(body)
            return []
        if isinstance(body, DecryptReply) and msg.sender == DS:
            return self._on_reply(body)
        if isinstance(body, Query):
            return [Message(-1, CS, msg.sender, self.answer(body))]
        raise ValueError(f"CS cannot handle {msg.variant} from {msg.sender}")

    def start_construction(self) -> list[Message]:
        """Aggregate, select the partition under encryption and ask the DS for it."""
        if self.state is not CsState.COLLECTING:
            raise ValueError(f"construction already started (state {self.state.value})")
        cfg = self.config
        t = self.backend.stats.total
        self.enc_x = cs_aggregate(self.records)
        t = self._phase("aggregation", t)
        candidates = enumerate_partitions(cfg.n, max_n=cfg.max_n)
        table = build_cost_table(self.enc_x, cfg.budget.epsilon1, self.stream,
                                 sensitivity=cfg.cost_sensitivity, noise_log=self.noise_log)
        t = self._phase("cost_table", t)
        totals = [(partition_total_cost(table, p), p.cut_mask) for p in candidates]
        argmin = select_min_partition(totals, cfg.n)
        self._phase("argmin", t)
        req = DecryptRequest(argmin=argmin)
        req = DecryptRequest(argmin=argmin, token=self.mint.issue(req.ciphertext_digest()))
        self.state = CsState.AWAIT_PARTITION
        return [Message(-1, CS, DS, req)]

    def _on_reply(self, reply: DecryptReply) -> list[Message]:
        if not reply.dp_protected:
            raise ValueError("DS reply is not marked DP-protected")
        if self.state is CsState.AWAIT_PARTITION and reply.cut_mask is not None:
            self.partition = Partition(self.config.n, reply.cut_mask)
            self.plaintexts["B"] = self.partition
            t = self.backend.stats.total
            sums = bucket_sums(self.enc_x, self.partition)
            noisy = tuple(noisy_bucket_sums(sums, self.partition, self.config.budget.epsilon2,
                                            self.stream, self.noise_log))
            self._phase("bucket_sums", t)
            req = DecryptRequest(s_prime=noisy)
            req = DecryptRequest(s_prime=noisy, token=self.mint.issue(req.ciphertext_digest()))
            self.state = CsState.AWAIT_SUMS
            return [Message(-1, CS, DS, req)]
        if self.state is CsState.AWAIT_SUMS and reply.s_prime is not None:
            self.plaintexts["S_prime"] = reply.s_prime
            prov = {"seed_digest": _sha(self.config.noise_seed, self.config.key_seed)[:16],
                    "epsilon": self.config.budget.epsilon,
                    "epsilon1": self.config.budget.epsilon1,
                    "epsilon2": self.config.budget.epsilon2,
                    "format": str(self.config.fmt),
                    "s_prime_raw": list(reply.s_prime_raw)}
            self.summary = uniform_expand(reply.s_prime, self.partition, provenance=prov)
            self.plaintexts["x_prime"] = self.summary.x_prime
            self.state = CsState.READY
            return []
        raise ValueError(f"unexpected DS reply in state {self.state.value}")

    def answer(self, q: Query) -> Response:
        if self.state is not CsState.READY:
            raise ValueError("summary not ready")
        return Response(q.l, q.r, range_query(self.summary, q.l, q.r))


class DataAnalyst:
    def __init__(self, name: str, queries: Sequence[tuple[int, int]]):
        self.name = name
        self.queries = list(queries)
        self.answers: dict[tuple[int, int], float] = {}

    def ask(self) -> list[Message]:
        return [Message(-1, self.name, CS, Query(l, r)) for l, r in self.queries]

    def handle(self, msg: Message) -> list[Message]:
        if not isinstance(msg.body, Response):
            raise ValueError(f"{self.name} cannot handle {msg.variant}")
        self.answers[(msg.body.l, msg.body.r)] = msg.body.value
        return []


class Network:
    """FIFO delivery; every message is logged before the receiver sees it."""

    def __init__(self, transcript: Transcript):
        self.transcript = transcript
        self.parties: dict[str, object] = {}
        self._queue: deque[Message] = deque()

    def register(self, party) -> None:
        self.parties[party.name] = party

    def post(self, messages: Sequence[Message]) -> None:
        for m in messages:
            stamped = Message(len(self.transcript.messages), m.sender, m.receiver, m.body)
            self.transcript.append(stamped)
            self._queue.append(stamped)

    def run(self) -> None:
        while self._queue:
            msg = self._queue.popleft()
            self.post(self.parties[msg.receiver].handle(msg))


# -- driver --------------------------------------------------------------------

@dataclass
class PipelineRun:
    summary: DpSummary
    transcript: Transcript
    noise_log: NoiseLog
    histogram: tuple[float, ...]
    cs: ComputationServer
    ds: DecryptionServer
    analysts: list[DataAnalyst]
    backend: CleartextBackend

    def __iter__(self):
        # allows ``summary, transcript = run_pipeline(...)``
        return iter((self.summary, self.transcript))

    @property
    def cut_mask(self) -> int:
        return self.summary.cut_mask

    @property
    def s_prime_raw(self) -> tuple[int, ...]:
        return tuple(self.summary.provenance["s_prime_raw"])


def run_pipeline(config: PipelineConfig, *, ledger: BudgetLedger | None = None,
                 noise: NoiseSource | None = None, backend: CleartextBackend | None = None,
                 noise_log: NoiseLog | None = None) -> PipelineRun:
    """Key generation through uniform expansion, then the configured queries."""
    ledger = ledger if ledger is not None else BudgetLedger()
    backend = backend if backend is not None else CleartextBackend()
    noise_log = noise_log if noise_log is not None else NoiseLog()
    stream = noise if noise is not None else NoiseStream(config.noise_seed)
    enumerate_partitions(config.n, max_n=config.max_n)  # fail fast on oversized domains
    ledger.spend(config.resolved_dataset_id(), config.budget)

    mint = CapabilityMint.for_seed(config.noise_seed)
    transcript = Transcript(verifier=mint)
    net = Network(transcript)
    ds = DecryptionServer(backend, config.key_seed, mint)
    cs = ComputationServer(backend, config, stream, mint, noise_log)
    net.register(ds)
    net.register(cs)

    histogram = config.resolve_histogram()
    if config.inject_histogram:
        owners = [DataOwner("DO1", backend, config.n, config.fmt, histogram=histogram)]
    else:
        owners = [DataOwner(f"DO{j}", backend, config.n, config.fmt, domain=d)
                  for j, d in enumerate(config.resolve_records(), start=1)]
    if not owners:
        raise ValueError("no data owners: the dataset is empty")
    for o in owners:
        net.register(o)

    # 1-2: key distribution, encryption, upload
    net.post([Message(-1, DS, o.name, KeyDist(ds.key)) for o in owners])
    net.run()
    # 3-6: aggregation, partitioning, noise, decryption, expansion
    net.post(cs.start_construction())
    net.run()
    if cs.state is not CsState.READY:
        raise RuntimeError(f"construction stalled in state {cs.state.value}")
    # 7: queries
    analysts = []
    if config.queries:
        da = DataAnalyst("DA1", config.queries)
        net.register(da)
        analysts.append(da)
        net.post(da.ask())
        net.run()
    return PipelineRun(cs.summary, transcript, noise_log, tuple(histogram), cs, ds, analysts, backend)


# -- trust-model checks ----------------------------------------------------------

def _contains_key(obj, depth: int = 0) -> bool:
    if isinstance(obj, SecretKey):
        return True
    if depth > 4:
        return False
    if is_dataclass(obj) and not isinstance(obj, type):
        return any(_contains_key(getattr(obj, f.name), depth + 1) for f in fields(obj))
    if isinstance(obj, (list, tuple, set)):
        return any(_contains_key(v, depth + 1) for v in obj)
    if isinstance(obj, dict):
        return any(_contains_key(v, depth + 1) for v in obj.values())
    return False


def holds_key(party) -> bool:
    """Whether any attribute of a party's state is (or contains) secret key material."""
    return any(_contains_key(v) for v in vars(party).values())


@dataclass
class VisibilityReport:
    results: dict[str, tuple[bool, str]]

    @property
    def ok(self) -> bool:
        return all(passed for passed, _ in self.results.values())

    def failed(self) -> list[str]:
        return [name for name, (passed, _) in self.results.items() if not passed]

    def require(self) -> None:
        for name, (passed, detail) in self.results.items():
            if not passed:
                raise VisibilityViolation(f"{name}: {detail}")


def assert_visibility(t: Transcript) -> VisibilityReport:
    """Check a transcript against the trust model.

    (a) no key material reaches the CS; (b) the DS only decrypts
    capability-tagged, DP-protected ciphertexts and only releases tagged
    plaintexts; (c) analysts receive only answers computed from the summary;
    (d) the CS and DS exchange nothing but decryption requests and replies.
    """
    res: dict[str, tuple[bool, str]] = {}

    bad = [m.seq for m in t.messages if m.receiver == CS and _contains_key(m.body)]
    res["a_no_key_to_cs"] = (not bad, f"key material in CS-bound messages {bad}" if bad else "")

    bad = []
    for m in t.messages:
        if m.receiver == DS and isinstance(m.body, DecryptRequest):
            if t.verifier is None or not t.verifier.verify(m.body.ciphertext_digest(), m.body.token):
                bad.append(m.seq)
        elif m.receiver == DS and not isinstance(m.body, DecryptRequest) and m.sender == CS:
            bad.append(m.seq)
        if m.sender == DS and m.receiver != DS and not isinstance(m.body, KeyDist):
            if not (isinstance(m.body, DecryptReply) and m.body.dp_protected):
                bad.append(m.seq)
    res["b_ds_outputs_dp_protected"] = (not bad, f"untagged decryption traffic at {bad}" if bad else "")

    mask = s_prime = None
    n = None
    for m in t.messages:
        if isinstance(m.body, DecryptRequest) and m.body.argmin is not None:
            n = m.body.argmin.n
        if isinstance(m.body, DecryptReply) and m.sender == DS:
            if m.body.cut_mask is not None:
                mask = m.body.cut_mask
            if m.body.s_prime is not None:
                s_prime = m.body.s_prime
    summary = None
    if mask is not None and s_prime is not None and n is not None:
        summary = uniform_expand(s_prime, Partition(n, mask))
    bad = []
    for m in t.messages:
        if not m.receiver.startswith("DA"):
            continue
        if not isinstance(m.body, Response) or summary is None:
            bad.append(m.seq)
            continue
        expected = range_query(summary, m.body.l, m.body.r)
        if not math.isclose(expected, m.body.value, rel_tol=1e-12, abs_tol=1e-12):
            bad.append(m.seq)
    res["c_da_sees_summary_only"] = (not bad, f"analyst messages not derived from x' at {bad}" if bad else "")

    bad = [m.seq for m in t.between(CS, DS)
           if not ((m.sender == CS and isinstance(m.body, DecryptRequest))
                   or (m.sender == DS and isinstance(m.body, DecryptReply)))]
    res["d_cs_ds_decryption_only"] = (not bad, f"out-of-protocol CS/DS messages at {bad}" if bad else "")
    return VisibilityReport(res)


def plaintext_inventory(cs: ComputationServer, ds: DecryptionServer) -> set[str]:
    return set(cs.plaintexts) | set(ds.plaintexts)
