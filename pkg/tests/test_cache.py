import json
import logging
import os

from ddns.cache import CacheHierarchy, L1Cache, L2Cache, L3Cache


class FakeClock:
    def __init__(self):
        self.t = 0.0

    def __call__(self):
        return self.t


def test_l1_lru_eviction_at_capacity():
    cache = L1Cache(capacity=50_000)
    for i in range(50_001):
        cache.put(("name%d" % i, 1), i)
    assert len(cache) == 50_000
    assert cache.get(("name0", 1)) is None          # least recently used is gone
    assert cache.get(("name50000", 1)) == 50_000


def test_l1_lru_touch_refreshes_recency():
    cache = L1Cache(capacity=2)
    cache.put("a", 1)
    cache.put("b", 2)
    assert cache.get("a") == 1
    cache.put("c", 3)  # evicts b, not a
    assert cache.get("a") == 1 and cache.get("b") is None


def test_l1_entry_expires_after_ttl():
    clock = FakeClock()
    cache = L1Cache(ttl=15, clock=clock)
    cache.put("k", "v")
    clock.t = 15
    assert cache.get("k") == "v"
    clock.t = 16
    assert cache.get("k") is None


def test_l2_survives_restart(tmp_path):
    first = L2Cache(str(tmp_path))
    first.put(("example.ddns", 1), {"rcode": 0}, ttl=3600)
    second = L2Cache(str(tmp_path))
    assert second.get(("example.ddns", 1)) == {"rcode": 0}


def test_l2_entry_expires_by_record_ttl(tmp_path):
    clock = FakeClock()
    cache = L2Cache(str(tmp_path), clock=clock)
    cache.put("k", "v", ttl=300)
    clock.t = 300
    assert cache.get("k") == "v"
    clock.t = 301
    assert cache.get("k") is None


def test_l2_corrupt_entry_dropped_and_logged(tmp_path, caplog):
    cache = L2Cache(str(tmp_path))
    cache.put("k", "v", ttl=60)
    (path,) = (os.path.join(str(tmp_path), f) for f in os.listdir(str(tmp_path)))
    with open(path, "w") as fh:
        fh.write("{broken json")
    with caplog.at_level(logging.WARNING):
        assert cache.get("k") is None
    assert "corrupt" in caplog.text
    assert not os.path.exists(path)


def test_l3_expiry():
    clock = FakeClock()
    cache = L3Cache(ttl=60, clock=clock)
    cache.put("example.ddns", {"content_id": "Qm..."})
    clock.t = 60
    assert cache.get("example.ddns") is not None
    clock.t = 61
    assert cache.get("example.ddns") is None


def test_hierarchy_invalidate_hits_all_tiers(tmp_path):
    caches = CacheHierarchy(str(tmp_path))
    caches.l1.put(("example.ddns", 1), "a")
    caches.l1.put(("www.example.ddns", 1), "a")
    caches.l1.put(("other.ddns", 1), "keep")
    caches.l2.put(("example.ddns", 1, "Qm1"), "a", ttl=3600)
    caches.l3.put("example.ddns", {"content_id": "Qm1"})
    caches.invalidate("example.ddns")
    assert caches.l1.get(("example.ddns", 1)) is None
    assert caches.l1.get(("www.example.ddns", 1)) is None  # subdomains too
    assert caches.l1.get(("other.ddns", 1)) == "keep"
    assert caches.l2.get(("example.ddns", 1, "Qm1")) is None
    assert caches.l3.get("example.ddns") is None
