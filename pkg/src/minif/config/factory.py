"""Object factories: kind -> builder, applied to served configuration.

Builders are registered once at process start-up; instantiation happens
when the manifest arrives, so the same binary produces whatever object
population its served records describe.
"""

from __future__ import annotations

import logging
from typing import Callable

from ..errors import MinifError
from .records import DeviceRecord, ProcessManifest

log = logging.getLogger(__name__)


class DuplicateKind(MinifError):
    pass


class UnknownKind(MinifError):
    pass


class PartialFailure(MinifError):
    """Some records failed to build; the rest stay registered."""

    def __init__(self, outcomes: list[tuple[str, str | None]]):
        failures = [f"{name}: {err}" for name, err in outcomes if err]
        super().__init__("; ".join(failures))
        self.outcomes = outcomes
        self.built = [name for name, err in outcomes if err is None]


class FactoryRegistry:
    def __init__(self):
        self._builders: dict[str, Callable[[DeviceRecord], object]] = {}

    def register_factory(self, kind: str, builder: Callable[[DeviceRecord], object]) -> None:
        if kind in self._builders:
            raise DuplicateKind(kind)
        self._builders[kind] = builder

    def kinds(self) -> list[str]:
        return sorted(self._builders)

    def build(self, record: DeviceRecord):
        builder = self._builders.get(record.kind)
        if builder is None:
            raise UnknownKind(record.kind)
        return builder(record)

    def instantiate_process(self, manifest: ProcessManifest,
                            records: list[DeviceRecord],
                            on_built: Callable[[str, object], None]) -> int:
        """Build one live object per record and hand it to `on_built`
        (which typically registers it on the bus). All-known-kinds is a
        precondition; a failure mid-way reports per-record outcomes and
        keeps the objects already built."""
        outcomes: list[tuple[str, str | None]] = []
        failed = False
        for record in records:
            try:
                obj = self.build(record)
                on_built(record.name, obj)
                outcomes.append((record.name, None))
            except MinifError as e:
                log.warning("factory failed for %s: %s", record.name, e)
                outcomes.append((record.name, f"{type(e).__name__}: {e.detail}"))
                failed = True
        if failed:
            raise PartialFailure(outcomes)
        return len(outcomes)
