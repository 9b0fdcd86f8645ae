"""Order-preserving parallel map.

The compiled kernel releases the GIL for built-in coefficients, so threads
give real concurrency there; with the pure-Python backend they only
interleave.
"""

from concurrent.futures import ThreadPoolExecutor


def pmap(fn, items, threads=1):
    """``[fn(x) for x in items]``, evaluated on up to ``threads`` threads."""
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        return list(pool.map(fn, items))
