"""DDNSD: the resolution core plus UDP and DNS-over-HTTPS front ends.

Resolution path for a managed name: L1 -> L2 -> (L3 ownership cache or
chain lookup) -> content store fetch -> integrity check -> record query
-> respond and populate caches. Non-managed TLDs are forwarded upstream
over UDP, or answered REFUSED when no upstream is configured. A store
payload whose hash mismatches its on-chain content id is answered
SERVFAIL and never cached.
"""

from __future__ import annotations

import base64
import logging
import socket
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from . import registry
from .cache import CacheHierarchy
from .controlfile import parse_control_file
from .errors import CorruptionError, DnsParseError, NotFoundError, StoreUnavailableError
from .wire import (CLASS_IN, DnsMessage, FORMERR, NOERROR, NOTIMP, NXDOMAIN,
                   REFUSED, SERVFAIL, Question, ResourceRecord, TYPE_NAMES,
                   decode_message, decode_name, encode_message, record_to_rr,
                   truncate_for_udp)

log = logging.getLogger(__name__)

MAX_CNAME_DEPTH = 8
UPSTREAM_TIMEOUT = 2.0
NEGATIVE_TTL = 15


@dataclass(frozen=True)
class ResolverConfig:
    managed_tlds: tuple = ("ddns", "phi")
    upstream: tuple | None = None          # (host, port)
    udp_host: str = "127.0.0.1"
    udp_port: int = 5353
    doh_host: str = "127.0.0.1"
    doh_port: int = 8053
    cache_dir: str = "resolver-cache"
    invalidate_on_update: bool = True


@dataclass(frozen=True)
class Answer:
    rcode: int
    records: tuple = ()


def _answer_to_cache(answer: Answer) -> dict:
    return {
        "rcode": answer.rcode,
        "records": [[r.name, r.rtype, r.rclass, r.ttl, r.rdata.hex()]
                    for r in answer.records],
    }


def _answer_from_cache(doc: dict) -> Answer:
    return Answer(doc["rcode"],
                  tuple(ResourceRecord(n, t, c, ttl, bytes.fromhex(rd))
                        for n, t, c, ttl, rd in doc["records"]))


class Resolver:
    def __init__(self, config: ResolverConfig, chain_view, store,
                 caches: CacheHierarchy | None = None):
        """`chain_view` is a zero-arg callable returning the current ChainState."""
        self.config = config
        self.chain_view = chain_view
        self.store = store
        self.caches = caches or CacheHierarchy(config.cache_dir)
        self.stats = {"queries": 0, "l1_hits": 0, "l2_hits": 0, "l3_hits": 0,
                      "chain_reads": 0, "store_reads": 0, "forwarded": 0}
        self._lock = threading.Lock()

    # -- public API ---------------------------------------------------------

    def resolve(self, qname: str, qtype: int) -> Answer:
        qname = qname.lower().rstrip(".")
        with self._lock:
            self.stats["queries"] += 1
            return self._resolve_cached(qname, qtype, depth=0)

    def notice_update(self, dns_name: str):
        """Flush every tier for a domain (called on observed chain updates)."""
        with self._lock:
            self.caches.invalidate(dns_name)

    # -- internals ----------------------------------------------------------

    def _managed(self, qname: str) -> bool:
        return qname.rsplit(".", 1)[-1] in self.config.managed_tlds

    def _resolve_cached(self, qname: str, qtype: int, depth: int) -> Answer:
        if not self._managed(qname):
            return self._forward(qname, qtype)
        l1_key = (qname, qtype)
        cached = self.caches.l1.get(l1_key)
        if cached is not None:
            self.stats["l1_hits"] += 1
            return _answer_from_cache(cached)
        binding = self._binding(qname)
        if binding is None:
            # Negative answers are cached in L1 only, short TTL.
            answer = Answer(NXDOMAIN)
            self.caches.l1.put(l1_key, _answer_to_cache(answer))
            return answer
        domain, label, content_id = binding
        # Keying L2 by content id bounds staleness after a confirmed update
        # by the L3 TTL even though L2 entries live as long as the record TTL.
        l2_key = (qname, qtype, content_id)
        cached = self.caches.l2.get(l2_key)
        if cached is not None:
            self.stats["l2_hits"] += 1
            self.caches.l1.put(l1_key, cached)
            return _answer_from_cache(cached)
        answer = self._resolve_content(qname, qtype, depth, domain, label, content_id)
        if answer.rcode == NOERROR:
            doc = _answer_to_cache(answer)
            self.caches.l1.put(l1_key, doc)
            ttl = min((r.ttl for r in answer.records), default=NEGATIVE_TTL)
            self.caches.l2.put(l2_key, doc, ttl)
        elif answer.rcode == NXDOMAIN:
            self.caches.l1.put(l1_key, _answer_to_cache(answer))
        return answer

    def _binding(self, qname: str):
        """Current on-chain (domain, label, content id) for a qname, or None."""
        labels = qname.split(".")
        if len(labels) < 2:
            return None
        domain = ".".join(labels[-2:])
        label = ".".join(labels[:-2]) or "@"
        ownership = self.caches.l3.get(domain)
        if ownership is None:
            self.stats["chain_reads"] += 1
            try:
                asset = registry.lookup_domain(self.chain_view(), domain)
            except Exception:
                return None
            if asset is None or asset.ipfs_hash is None:
                return None
            ownership = {"content_id": asset.ipfs_hash, "owner": asset.owner_address}
            self.caches.l3.put(domain, ownership)
        else:
            self.stats["l3_hits"] += 1
        return domain, label, ownership["content_id"]

    def _resolve_content(self, qname: str, qtype: int, depth: int,
                         domain: str, label: str, content_id: str) -> Answer:
        try:
            self.stats["store_reads"] += 1
            payload = self.store.get(content_id)
        except (NotFoundError, CorruptionError, StoreUnavailableError) as exc:
            log.warning("store failure for %s (%s): %s", qname, content_id, exc)
            return Answer(SERVFAIL)
        try:
            cf = parse_control_file(payload)
        except Exception as exc:
            log.warning("unparseable control file for %s: %s", domain, exc)
            return Answer(SERVFAIL)
        rtype_name = TYPE_NAMES.get(qtype)
        if rtype_name is None:
            return Answer(NOERROR)
        wanted = [rtype_name]
        if rtype_name == "TXT":
            wanted += ["SPF", "DKIM", "DMARC"]
        by_type = cf.entries_at(label)
        records = []
        chase_target = None
        if any(logical in by_type for logical in wanted):
            for logical in wanted:
                for entry in by_type.get(logical, []):
                    records.append(record_to_rr(qname, logical, entry, cf.domain))
        elif "CNAME" in by_type and rtype_name != "CNAME":
            for entry in by_type["CNAME"]:
                records.append(record_to_rr(qname, "CNAME", entry, cf.domain))
                chase_target, _ = decode_name(records[-1].rdata, 0)
        if chase_target is not None:
            if depth >= MAX_CNAME_DEPTH:
                return Answer(SERVFAIL)
            if self._managed(chase_target.lower()):
                chased = self._resolve_cached(chase_target.lower(), qtype, depth + 1)
                if chased.rcode == SERVFAIL:
                    return Answer(SERVFAIL)
                if chased.rcode == NOERROR:
                    records.extend(chased.records)
        return Answer(NOERROR, tuple(records))

    def _forward(self, qname: str, qtype: int) -> Answer:
        if self.config.upstream is None:
            return Answer(REFUSED)
        self.stats["forwarded"] += 1
        query = DnsMessage(id=int(time.time() * 1000) & 0xFFFF, rd=True,
                           questions=(Question(qname, qtype),))
        wire = encode_message(query)
        for _ in range(2):  # one retry
            try:
                with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
                    sock.settimeout(UPSTREAM_TIMEOUT)
                    sock.sendto(wire, self.config.upstream)
                    data, _ = sock.recvfrom(65535)
                reply = decode_message(data)
                if reply.id != query.id:
                    continue
                return Answer(reply.rcode, reply.answers)
            except (OSError, DnsParseError):
                continue
        return Answer(SERVFAIL)

    # -- wire handling ------------------------------------------------------

    def handle_wire_query(self, data: bytes, udp: bool = True) -> bytes | None:
        try:
            query = decode_message(data)
        except DnsParseError:
            if len(data) >= 2:
                msg_id = int.from_bytes(data[:2], "big")
                return encode_message(DnsMessage(id=msg_id, qr=True, rcode=FORMERR))
            return None
        if query.qr or not query.questions:
            return encode_message(DnsMessage(id=query.id, qr=True, rd=query.rd,
                                             rcode=FORMERR))
        if query.opcode != 0:
            return encode_message(DnsMessage(id=query.id, qr=True, rd=query.rd,
                                             opcode=query.opcode, rcode=NOTIMP))
        question = query.questions[0]
        if question.qclass != CLASS_IN:
            answer = Answer(REFUSED)
        else:
            answer = self.resolve(question.qname, question.qtype)
        qname = question.qname.lower().rstrip(".")
        response = DnsMessage(
            id=query.id, qr=True, rd=query.rd,
            aa=self._managed(qname),
            ra=self.config.upstream is not None,
            rcode=answer.rcode,
            questions=(question,),
            answers=answer.records)
        return truncate_for_udp(response) if udp else encode_message(response)


# ---------------------------------------------------------------------------
# UDP front end


class UdpServer:
    def __init__(self, resolver: Resolver, host: str, port: int):
        self.resolver = resolver
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.bind((host, port))
        self.address = self.sock.getsockname()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._loop, daemon=True)

    def start(self):
        self._thread.start()
        return self

    def _loop(self):
        self.sock.settimeout(0.2)
        while not self._stop.is_set():
            try:
                data, peer = self.sock.recvfrom(65535)
            except socket.timeout:
                continue
            except OSError:
                break
            try:
                reply = self.resolver.handle_wire_query(data, udp=True)
            except Exception:
                log.exception("query handling failed")
                continue
            if reply is not None:
                try:
                    self.sock.sendto(reply, peer)
                except OSError:
                    pass

    def stop(self):
        self._stop.set()
        self._thread.join(timeout=2)
        self.sock.close()


def serve_udp(resolver: Resolver, host: str | None = None, port: int | None = None) -> UdpServer:
    host = host if host is not None else resolver.config.udp_host
    port = port if port is not None else resolver.config.udp_port
    return UdpServer(resolver, host, port).start()


# ---------------------------------------------------------------------------
# DoH front end (RFC 8484 over plain HTTP; TLS termination out of scope)

DOH_MEDIA_TYPE = "application/dns-message"


class _DohHandler(BaseHTTPRequestHandler):
    resolver: Resolver = None  # set on the server class
    protocol_version = "HTTP/1.1"

    def log_message(self, *args):
        pass

    def _reply_dns(self, payload: bytes):
        self.send_response(200)
        self.send_header("Content-Type", DOH_MEDIA_TYPE)
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def _reply_error(self, status: int, text: str):
        body = text.encode()
        self.send_response(status)
        self.send_header("Content-Type", "text/plain")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        url = urlparse(self.path)
        if url.path != "/dns-query":
            return self._reply_error(404, "not found")
        params = parse_qs(url.query)
        if "dns" not in params:
            return self._reply_error(400, "missing dns parameter")
        b64 = params["dns"][0]
        try:
            wire = base64.urlsafe_b64decode(b64 + "=" * (-len(b64) % 4))
        except Exception:
            return self._reply_error(400, "invalid base64url")
        self._handle(wire)

    def do_POST(self):
        url = urlparse(self.path)
        if url.path != "/dns-query":
            return self._reply_error(404, "not found")
        if self.headers.get("Content-Type", "").split(";")[0].strip() != DOH_MEDIA_TYPE:
            return self._reply_error(415, f"expected {DOH_MEDIA_TYPE}")
        try:
            length = int(self.headers.get("Content-Length", "0"))
        except ValueError:
            return self._reply_error(400, "bad content length")
        if not 0 < length <= 64 * 1024:
            return self._reply_error(400, "bad content length")
        self._handle(self.rfile.read(length))

    def _handle(self, wire: bytes):
        reply = self.server.resolver.handle_wire_query(wire, udp=False)
        if reply is None:
            return self._reply_error(400, "unparseable dns message")
        self._reply_dns(reply)


class DohServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, resolver: Resolver, host: str, port: int):
        super().__init__((host, port), _DohHandler)
        self.resolver = resolver
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)

    @property
    def address(self):
        return self.server_address

    def start(self):
        self._thread.start()
        return self

    def stop(self):
        self.shutdown()
        self._thread.join(timeout=2)
        self.server_close()


def serve_doh(resolver: Resolver, host: str | None = None, port: int | None = None) -> DohServer:
    host = host if host is not None else resolver.config.doh_host
    port = port if port is not None else resolver.config.doh_port
    return DohServer(resolver, host, port).start()
