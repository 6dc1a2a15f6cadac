"""Scoring oracle contract, built-in reference matcher, and bridge clients.

Every classifier is a black box behind :class:`Matcher`: a batch of record
pairs in, one score in [0, 1] per pair out, order preserved. A score strictly
above 0.5 is a match.
"""

from __future__ import annotations

import json
import select
import subprocess
import threading
import urllib.error
import urllib.request
from abc import ABC, abstractmethod
from dataclasses import dataclass

from .dataset import Record, tokenize

MATCH_THRESHOLD = 0.5

Pair = tuple[Record, Record]


class BridgeProtocolError(Exception):
    """The remote oracle replied with something that is not a valid score."""


class BridgeTransportError(Exception):
    """The remote oracle could not be reached or timed out."""


def score_label(score: float) -> bool:
    """Match iff score strictly above 0.5 (a score of exactly 0.5 is non-match)."""
    return score > MATCH_THRESHOLD


@dataclass(frozen=True)
class Prediction:
    """A record pair with its model score; the label is induced by the score."""

    record_u: Record
    record_v: Record
    score: float

    @property
    def label(self) -> bool:
        return score_label(self.score)

    @property
    def pair(self) -> Pair:
        return (self.record_u, self.record_v)


class Matcher(ABC):
    """Black-box scoring oracle over record pairs.

    Implementations must be deterministic and order-preserving. Set
    ``single_consumer`` when the implementation cannot take concurrent
    batches; the engine then serializes calls to it.
    """

    single_consumer = False

    @abstractmethod
    def predict_batch(self, pairs: list[Pair]) -> list[float]:
        """Score each (U-side, V-side) pair; output aligns with input."""

    def predict(self, record_u: Record, record_v: Record) -> Prediction:
        score = self.predict_batch([(record_u, record_v)])[0]
        return Prediction(record_u=record_u, record_v=record_v, score=score)


def mask(record: Record, attrs: set[str] | frozenset[str]) -> Record:
    """Copy of ``record`` with each attribute in ``attrs`` blanked out."""
    unknown = set(attrs) - set(record.values)
    if unknown:
        raise ValueError(f"unknown attribute(s) {sorted(unknown)} on side {record.side}")
    values = {a: ("" if a in attrs else v) for a, v in record.values.items()}
    return Record(id=record.id, side=record.side, values=values)


def _jaccard(a: set[str], b: set[str]) -> float:
    union = a | b
    if not union:
        return 0.0
    return len(a & b) / len(union)


def reference_score(
    u: Record, v: Record, weights: list[float] | None = None
) -> float:
    """Weighted mean of token-set Jaccard over positionally aligned attributes.

    Attribute i of U is compared to attribute i of V up to the shorter schema;
    trailing unaligned attributes are ignored. Attribute pairs that are empty
    on both sides are excluded from the mean whenever at least one non-empty
    pair exists.
    """
    values_u = list(u.values.values())
    values_v = list(v.values.values())
    n = min(len(values_u), len(values_v))
    if n == 0:
        raise ValueError("no aligned attributes between the two schemas")
    if weights is None:
        weights = [1.0] * n
    if len(weights) != n:
        raise ValueError(f"expected {n} weights, got {len(weights)}")
    sims: list[float] = []
    used_weights: list[float] = []
    for i in range(n):
        tokens_u = set(tokenize(values_u[i]))
        tokens_v = set(tokenize(values_v[i]))
        if not tokens_u and not tokens_v:
            continue
        sims.append(_jaccard(tokens_u, tokens_v))
        used_weights.append(weights[i])
    if not sims:
        return 0.0
    total = sum(used_weights)
    if total <= 0:
        raise ValueError("weights over non-empty attribute pairs must sum to > 0")
    score = sum(s * w for s, w in zip(sims, used_weights)) / total
    return min(1.0, max(0.0, score))


class ReferenceMatcher(Matcher):
    """Offline stand-in oracle based on aligned token-set Jaccard similarity."""

    def __init__(self, weights: list[float] | None = None) -> None:
        self.weights = weights

    def predict_batch(self, pairs: list[Pair]) -> list[float]:
        return [reference_score(u, v, self.weights) for u, v in pairs]


class CachingMatcher(Matcher):
    """Content-keyed score cache wrapped around another matcher.

    Keys are (fingerprint, fingerprint) so records that are attribute-equal
    share one oracle call, which is exactly what a content-only wire protocol
    guarantees anyway. Reads are concurrent; writes are exclusive.
    """

    def __init__(self, inner: Matcher) -> None:
        self.inner = inner
        self._cache: dict[tuple, float] = {}
        self._cache_lock = threading.Lock()
        self._inner_lock = threading.Lock()
        self.scored_pairs = 0
        self.cache_hits = 0

    def predict_batch(self, pairs: list[Pair]) -> list[float]:
        keys = [(u.fingerprint, v.fingerprint) for u, v in pairs]
        missing: dict[tuple, Pair] = {}
        with self._cache_lock:
            for key, pair in zip(keys, pairs):
                if key not in self._cache and key not in missing:
                    missing[key] = pair
            self.cache_hits += len(pairs) - len(missing)
        if missing:
            batch = list(missing.values())
            if self.inner.single_consumer:
                with self._inner_lock:
                    scores = self.inner.predict_batch(batch)
            else:
                scores = self.inner.predict_batch(batch)
            if len(scores) != len(batch):
                raise BridgeProtocolError(
                    f"oracle returned {len(scores)} scores for {len(batch)} pairs"
                )
            with self._cache_lock:
                for key, score in zip(missing, scores):
                    self._cache[key] = score
                self.scored_pairs += len(batch)
        with self._cache_lock:
            return [self._cache[key] for key in keys]


def _request_line(u: Record, v: Record) -> bytes:
    body = {"l": u.values, "r": v.values}
    return json.dumps(body, ensure_ascii=False).encode("utf-8") + b"\n"


def _parse_score(line: str) -> float:
    text = line.strip()
    if text.startswith("{"):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError:
            obj = {}
        raise BridgeProtocolError(f"oracle error reply: {obj.get('error', text)}")
    try:
        score = float(text)
    except ValueError:
        raise BridgeProtocolError(f"malformed score line {text!r}") from None
    if not 0.0 <= score <= 1.0:
        raise BridgeProtocolError(f"score {score} outside [0, 1]")
    return score


class _LineChannel:
    """Newline-framed byte stream over a child process's stdin/stdout."""

    def __init__(self, command: list[str], timeout: float) -> None:
        self.timeout = timeout
        self.proc = subprocess.Popen(
            command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            bufsize=0,
        )
        self._buffer = b""

    def send(self, data: bytes) -> None:
        try:
            self.proc.stdin.write(data)
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BridgeTransportError(f"bridge process pipe closed: {exc}") from exc

    def recv_line(self) -> str:
        while b"\n" not in self._buffer:
            ready, _, _ = select.select([self.proc.stdout], [], [], self.timeout)
            if not ready:
                raise BridgeTransportError(
                    f"bridge read timed out after {self.timeout}s"
                )
            chunk = self.proc.stdout.read(65536)
            if not chunk:
                raise BridgeTransportError("bridge process closed its output")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        return line.decode("utf-8")

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
            try:
                self.proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()


class BridgeMatcher(Matcher):
    """Oracle served by a child process speaking the line bridge protocol.

    One JSON request line per pair, one decimal score line back, order
    preserved. The channel is a single request stream, so the matcher is
    single-consumer; transport failures are retried by respawning the child.
    """

    single_consumer = True

    def __init__(
        self, command: list[str], retries: int = 2, timeout: float = 60.0
    ) -> None:
        self.command = command
        self.retries = retries
        self.timeout = timeout
        self._channel: _LineChannel | None = None
        self._lock = threading.Lock()

    def _ensure_channel(self) -> _LineChannel:
        if self._channel is None:
            channel = _LineChannel(self.command, self.timeout)
            channel.send(b'{"op":"hello"}\n')
            reply = channel.recv_line()
            try:
                ok = json.loads(reply).get("ok") is True
            except json.JSONDecodeError:
                ok = False
            if not ok:
                channel.close()
                raise BridgeProtocolError(f"bad handshake reply {reply!r}")
            self._channel = channel
        return self._channel

    def close(self) -> None:
        if self._channel is not None:
            self._channel.close()
            self._channel = None

    def __enter__(self) -> "BridgeMatcher":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def predict_batch(self, pairs: list[Pair]) -> list[float]:
        if not pairs:
            return []
        last_error: BridgeTransportError | None = None
        with self._lock:
            for _ in range(self.retries + 1):
                try:
                    channel = self._ensure_channel()
                    channel.send(b"".join(_request_line(u, v) for u, v in pairs))
                    return [_parse_score(channel.recv_line()) for _ in pairs]
                except BridgeTransportError as exc:
                    last_error = exc
                    self.close()
        raise last_error


class HttpBridgeMatcher(Matcher):
    """Oracle behind an HTTP endpoint using the same line framing in the body."""

    single_consumer = True

    def __init__(self, url: str, retries: int = 2, timeout: float = 60.0) -> None:
        self.url = url
        self.retries = retries
        self.timeout = timeout
        self._handshaken = False
        self._lock = threading.Lock()

    def _post(self, body: bytes) -> str:
        request = urllib.request.Request(
            self.url, data=body, headers={"Content-Type": "application/x-ndjson"}
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                return response.read().decode("utf-8")
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            raise BridgeTransportError(f"bridge endpoint unreachable: {exc}") from exc

    def _handshake(self) -> None:
        if self._handshaken:
            return
        reply = self._post(b'{"op":"hello"}\n')
        try:
            ok = json.loads(reply.strip()).get("ok") is True
        except json.JSONDecodeError:
            ok = False
        if not ok:
            raise BridgeProtocolError(f"bad handshake reply {reply!r}")
        self._handshaken = True

    def predict_batch(self, pairs: list[Pair]) -> list[float]:
        if not pairs:
            return []
        last_error: BridgeTransportError | None = None
        with self._lock:
            for _ in range(self.retries + 1):
                try:
                    self._handshake()
                    body = b"".join(_request_line(u, v) for u, v in pairs)
                    lines = self._post(body).splitlines()
                    if len(lines) != len(pairs):
                        raise BridgeProtocolError(
                            f"expected {len(pairs)} score lines, got {len(lines)}"
                        )
                    return [_parse_score(line) for line in lines]
                except BridgeTransportError as exc:
                    last_error = exc
                    self._handshaken = False
        raise last_error
