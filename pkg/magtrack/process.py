import logging
import multiprocessing
from multiprocessing.pool import Pool
import traceback

from magtrack.exceptions import WorkerError
from magtrack.output import debug



class ProcessLogger(object):
    """
    I wrap the callable a pool worker runs so that a crash gets its traceback
    out to the multiprocessing logger, instead of being silent
    """


    def __init__(self, callable):
        self.__callable = callable


    def __call__(self, *args, **kwargs):
        try:
            result = self.__callable(*args, **kwargs)
        except Exception:
            logger = multiprocessing.get_logger()
            if not logger.handlers:
                logger.addHandler(logging.StreamHandler())
            logger.error(traceback.format_exc())
            logger.handlers[0].flush()
            # Re-raise the original exception so the Pool worker can
            # clean up
            raise

        return result


def cpuCount():
    try:
        return multiprocessing.cpu_count()
    except NotImplementedError: # pragma: no cover
        return 1


def runPool(func, items, processes=1):
    """
    Map func over items and return the results in the order of items.

    processes=1 runs everything in this process, 0 (or None) uses one worker
    per CPU.  func must be picklable, i.e. defined at module level.  A
    failing item raises WorkerError naming it.
    """
    items = list(items)
    if not processes:
        processes = cpuCount()
    processes = min(processes, max(len(items), 1))
    debug("Running {} item(s) in {} process(es)".format(len(items),
        processes))
    if processes == 1:
        results = []
        for item in items:
            try:
                results.append(func(item))
            except Exception as err:
                raise WorkerError("{!r} failed: {}".format(item, err))
        return results
    pool = Pool(processes)
    try:
        pending = [pool.apply_async(ProcessLogger(func), (item,))
            for item in items]
        results = []
        for item, result in zip(items, pending):
            try:
                results.append(result.get())
            except Exception as err:
                raise WorkerError("{!r} failed: {}".format(item, err))
        return results
    finally:
        pool.close()
        pool.join()
