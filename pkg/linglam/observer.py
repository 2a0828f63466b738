import abc
import threading
from typing import Callable, Generic, List, TypeVar

T = TypeVar("T")


class Observable(Generic[T], abc.ABC):
    @abc.abstractmethod
    def add_handler(self, handler: Callable[[T], None]) -> Callable[[T], None]:
        pass

    @abc.abstractmethod
    def remove_handler(self, handler: Callable[[T], None]):
        pass

    @abc.abstractmethod
    def trigger(self, event: T):
        pass

    @abc.abstractmethod
    def trigger_batch(self, events: List[T]):
        pass


class LocalObservable(Observable[T]):
    """In-process observable; handlers are called synchronously in registration order.

    Triggering is serialized, so handlers may append to shared lists even when
    events are published from worker threads."""

    def __init__(self) -> None:
        self._handlers: List[Callable[[T], None]] = []
        self._lock = threading.Lock()

    def add_handler(self, handler: Callable[[T], None]) -> Callable[[T], None]:
        self._handlers.append(handler)
        return handler  # return value can be used for decorator chaining

    def remove_handler(self, handler: Callable[[T], None]):
        self._handlers.remove(handler)

    def trigger(self, event: T):
        with self._lock:
            for handler in list(self._handlers):
                handler(event)

    def trigger_batch(self, events: List[T]):
        with self._lock:
            for handler in list(self._handlers):
                for event in events:
                    handler(event)
