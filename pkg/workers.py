import logging

from joblib import Parallel, delayed

logger = logging.getLogger(__name__)


def parallel_map(func, items, jobs=1):
    """
    Apply func to every item, results in submission order.

    Work units are fixed by the caller, never by `jobs`, so the output is
    identical for any worker count.
    """
    items = list(items)
    if jobs is None or jobs <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    logger.debug("dispatching %d tasks to %d workers", len(items), jobs)
    return Parallel(n_jobs=jobs)(delayed(func)(item) for item in items)
