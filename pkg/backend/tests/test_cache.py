from app.cache import Cache


def test_get_and_set():
    cache = Cache(max_entries=4)
    assert cache.get("a") is None
    cache.set("a", 1)
    assert cache.get("a") == 1
    assert (cache.hits, cache.misses) == (1, 1)


def test_least_recently_used_entry_is_evicted():
    cache = Cache(max_entries=2)
    cache.set("a", 1)
    cache.set("b", 2)
    cache.get("a")
    cache.set("c", 3)
    assert cache.get("b") is None
    assert cache.get("a") == 1
    assert cache.size() == 2


def test_get_or_build_builds_once():
    cache = Cache()
    calls = []

    def build():
        calls.append(1)
        return "stencil"

    assert cache.get_or_build(("ball", 1, 2.5), build) == "stencil"
    assert cache.get_or_build(("ball", 1, 2.5), build) == "stencil"
    assert len(calls) == 1


def test_delete_and_clear():
    cache = Cache()
    cache.set("a", 1)
    cache.set("b", 2)
    cache.delete("a")
    cache.delete("missing")
    assert cache.size() == 1
    cache.clear()
    assert cache.size() == 0
    assert cache.hits == cache.misses == 0
