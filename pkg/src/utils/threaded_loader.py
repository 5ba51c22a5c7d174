"""
Threaded Loader Module
Background writer thread that applies completed batches to the store.
"""

import logging
import queue
import threading
from typing import Any, Callable, List, Optional


_STOP = object()


class ThreadedLoader:
    """
    Runs ``load_fn`` on submitted items in one background thread.

    The hand-off queue is bounded: ``submit`` blocks while it is full, which
    pushes back on whatever produces the items. The loader is the only
    thread that calls ``load_fn``, so store writes stay single-writer.
    """

    def __init__(self, load_fn: Callable[[Any], Any], maxsize: int = 8,
                 logger: logging.Logger = None):
        """
        Initialize the loader.

        Args:
            load_fn: Called once per submitted item, in submission order
            maxsize: Items that may wait before ``submit`` blocks
            logger: Logger for failures
        """
        self.load_fn = load_fn
        self.logger = logger or logging.getLogger("provd4m.loader")
        self.item_queue = queue.Queue(maxsize=max(1, maxsize))

        self.results: List[Any] = []
        self.error: Optional[BaseException] = None

        self.running = False
        self.thread = None

    def start(self):
        """Start the loader thread."""
        if not self.running:
            self.running = True
            self.thread = threading.Thread(target=self._load_loop, name="batch-loader", daemon=True)
            self.thread.start()

    def _load_loop(self):
        while True:
            item = self.item_queue.get()
            if item is _STOP:
                break
            if self.error is not None:
                # Drain without loading so blocked producers are released.
                continue
            try:
                self.results.append(self.load_fn(item))
            except Exception as e:
                self.logger.error(f"Loader failed: {e}")
                self.error = e

    def submit(self, item: Any):
        """
        Queue an item for loading, blocking while the queue is full.

        Raises:
            The loader's stored exception, if an earlier item failed
        """
        if self.error is not None:
            raise self.error
        if not self.running:
            raise RuntimeError("loader is not running")
        self.item_queue.put(item)

    def stop(self) -> List[Any]:
        """
        Load everything already queued, then stop the thread.

        Returns:
            Results of ``load_fn`` in submission order

        Raises:
            The loader's stored exception, if any item failed
        """
        if self.running:
            self.item_queue.put(_STOP)
            self.thread.join()
            self.running = False
        if self.error is not None:
            raise self.error
        return self.results
