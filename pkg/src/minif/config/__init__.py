"""Taxonomic naming, served per-process configuration, object factories."""

from .taxon import (Taxon, parse_taxon, render_taxon, EmptyName, BadSegment,
                    TooManySegments, TooLong)
from .records import (DeviceRecord, ProcessManifest, UnknownProcess,
                      load_process_config, store_device_record, store_manifest)
from .factory import FactoryRegistry, DuplicateKind, UnknownKind, PartialFailure
from .fixture import FixtureSpec, generate_fixture, write_fixture

__all__ = [
    "Taxon", "parse_taxon", "render_taxon",
    "EmptyName", "BadSegment", "TooManySegments", "TooLong",
    "DeviceRecord", "ProcessManifest", "UnknownProcess",
    "load_process_config", "store_device_record", "store_manifest",
    "FactoryRegistry", "DuplicateKind", "UnknownKind", "PartialFailure",
    "FixtureSpec", "generate_fixture", "write_fixture",
]
