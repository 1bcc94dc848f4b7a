"""Instance catalog, resource vectors, cheapest-fit selection and the cost model."""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

HOURS_PER_MONTH = 730.0
BURSTABLE_FAMILIES = frozenset({"t3"})

REQUIRED_COLUMNS = (
    "family",
    "size",
    "cpu_perf_ghz",
    "vcpu",
    "memory_gb",
    "network_gbps",
    "cost_per_hour",
)
OPTIONAL_COLUMNS = ("disk_mbps",)

# EC2 on-demand rows used by the experiments. Network "Max 5"/"Max 10" -> 5.0/10.0.
BUILTIN_CATALOG_CSV = """\
family,size,cpu_perf_ghz,vcpu,memory_gb,network_gbps,cost_per_hour
m5,large,3.1,2,8,5,0.104
m5,xlarge,3.1,4,16,5,0.208
m5,2xlarge,3.1,8,32,5,0.416
t3,large,3.1,2,8,10,0.118
t3,xlarge,3.1,4,16,10,0.236
t3,2xlarge,3.1,8,32,10,0.482
c5,large,3.3,2,4,10,0.086
c5,xlarge,3.3,4,8,10,0.172
c5,2xlarge,3.3,8,16,10,0.344
"""


class CatalogError(ValueError):
    """Raised for malformed or inconsistent catalog documents."""


class UnsatisfiableDemand(ValueError):
    def __init__(self, demand: "ResourceVector", violated: Sequence["ResourceKind"]):
        self.demand = demand
        self.violated = tuple(violated)
        names = ", ".join(k.value for k in self.violated)
        super().__init__(f"demand unsatisfiable: exceeds catalog in {names}")


class ResourceKind(str, enum.Enum):
    CPU = "cpu"
    MEMORY = "memory"
    DISK_IO = "disk_io"
    NETWORK = "network"

    @property
    def index(self) -> int:
        return RESOURCE_KINDS.index(self)


RESOURCE_KINDS: tuple[ResourceKind, ...] = tuple(ResourceKind)


@dataclass(frozen=True)
class ResourceVector:
    """Per-resource quantities (vCPU, GB, MB/s, Gbps).

    ``disk_io`` may be ``None`` when the dimension is not provided; the other
    components are always present.  The same type carries utilization
    fractions when produced by aggregation.
    """

    cpu: float = 0.0
    memory: float = 0.0
    disk_io: Optional[float] = None
    network: float = 0.0

    def __post_init__(self):
        for kind in RESOURCE_KINDS:
            value = getattr(self, kind.value)
            if value is None:
                if kind is not ResourceKind.DISK_IO:
                    raise ValueError(f"{kind.value} is required")
                continue
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{kind.value} must be finite and >= 0, got {value!r}")

    def get(self, kind: ResourceKind) -> Optional[float]:
        return getattr(self, ResourceKind(kind).value)

    def to_array(self) -> np.ndarray:
        """Values in ``RESOURCE_KINDS`` order; unavailable entries are NaN."""
        return np.array(
            [np.nan if self.get(k) is None else float(self.get(k)) for k in RESOURCE_KINDS],
            dtype=np.float64,
        )

    @classmethod
    def from_array(cls, values: Iterable[float]) -> "ResourceVector":
        vals = [float(v) for v in values]
        if len(vals) != len(RESOURCE_KINDS):
            raise ValueError(f"expected {len(RESOURCE_KINDS)} values, got {len(vals)}")
        kwargs = {k.value: (None if math.isnan(v) else v) for k, v in zip(RESOURCE_KINDS, vals)}
        return cls(**kwargs)

    def dominates(self, other: "ResourceVector") -> bool:
        """True if ``self >= other`` in every dimension both provide."""
        a, b = self.to_array(), other.to_array()
        usable = ~(np.isnan(a) | np.isnan(b))
        return bool(np.all(a[usable] >= b[usable]))


@dataclass(frozen=True)
class InstanceType:
    family: str
    size: str
    cpu_perf_ghz: float
    specs: ResourceVector
    hourly_cost: float
    burstable: bool = False

    def __post_init__(self):
        if not (self.hourly_cost > 0 and math.isfinite(self.hourly_cost)):
            raise ValueError(f"{self.name}: hourly_cost must be > 0")

    @property
    def name(self) -> str:
        return f"{self.family}.{self.size}"

    @property
    def key(self) -> tuple[str, str]:
        return (self.family, self.size)


@dataclass(frozen=True)
class InstanceCatalog:
    entries: tuple[InstanceType, ...]
    _specs: np.ndarray = field(init=False, repr=False, compare=False)
    _costs: np.ndarray = field(init=False, repr=False, compare=False)
    _order: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        entries = tuple(self.entries)
        if not entries:
            raise CatalogError("empty catalog")
        seen = set()
        for e in entries:
            if e.key in seen:
                raise CatalogError(f"duplicate instance type {e.name}")
            seen.add(e.key)
        _check_family_pricing(entries)
        object.__setattr__(self, "entries", entries)
        specs = np.vstack([e.specs.to_array() for e in entries])
        specs.setflags(write=False)
        costs = np.array([e.hourly_cost for e in entries])
        costs.setflags(write=False)
        # cheapest first; equal costs fall back to (family, size)
        order = np.array(
            sorted(range(len(entries)), key=lambda i: (entries[i].hourly_cost, entries[i].key)),
            dtype=np.intp,
        )
        object.__setattr__(self, "_specs", specs)
        object.__setattr__(self, "_costs", costs)
        object.__setattr__(self, "_order", order)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def get(self, family: str, size: str) -> InstanceType:
        for e in self.entries:
            if e.key == (family, size):
                return e
        raise KeyError(f"{family}.{size} not in catalog")

    def lookup(self, name: str) -> InstanceType:
        family, _, size = name.partition(".")
        return self.get(family, size)

    def families(self) -> list[str]:
        return list(dict.fromkeys(e.family for e in self.entries))

    def filter(self, family: Optional[str] = None) -> list[InstanceType]:
        return [e for e in self.entries if family is None or e.family == family]

    def capacity_max(self) -> np.ndarray:
        """Per-dimension maximum capacity; NaN where no entry provides it."""
        filled = np.where(np.isnan(self._specs), -np.inf, self._specs).max(axis=0)
        return np.where(np.isinf(filled), np.nan, filled)

    @property
    def spec_matrix(self) -> np.ndarray:
        return self._specs

    @property
    def costs(self) -> np.ndarray:
        return self._costs


def _check_family_pricing(entries: Sequence[InstanceType]) -> None:
    by_family: dict[str, list[InstanceType]] = {}
    for e in entries:
        by_family.setdefault(e.family, []).append(e)
    for family, members in by_family.items():
        members = sorted(members, key=lambda e: (e.specs.cpu, e.specs.memory))
        for small, big in zip(members, members[1:]):
            if not big.hourly_cost > small.hourly_cost:
                raise CatalogError(
                    f"family {family}: cost must increase with size ({small.name} -> {big.name})"
                )


def _parse_row(row: dict, lineno: int) -> InstanceType:
    missing = [c for c in REQUIRED_COLUMNS if not (row.get(c) or "").strip()]
    if missing:
        raise CatalogError(f"row {lineno}: missing {', '.join(missing)}")
    try:
        disk_raw = (row.get("disk_mbps") or "").strip()
        specs = ResourceVector(
            cpu=float(row["vcpu"]),
            memory=float(row["memory_gb"]),
            disk_io=float(disk_raw) if disk_raw else None,
            network=float(row["network_gbps"]),
        )
        family = row["family"].strip()
        return InstanceType(
            family=family,
            size=row["size"].strip(),
            cpu_perf_ghz=float(row["cpu_perf_ghz"]),
            specs=specs,
            hourly_cost=float(row["cost_per_hour"]),
            burstable=family in BURSTABLE_FAMILIES,
        )
    except (ValueError, TypeError) as exc:
        raise CatalogError(f"row {lineno}: {exc}") from exc


def parse_catalog(text: str) -> InstanceCatalog:
    """Parse a catalog document (CSV text)."""
    if not text.strip():
        raise CatalogError("empty catalog")
    reader = csv.DictReader(io.StringIO(text))
    header = [h.strip() for h in (reader.fieldnames or [])]
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise CatalogError(f"header missing column(s): {', '.join(missing)}")
    reader.fieldnames = header
    entries = [_parse_row(row, lineno) for lineno, row in enumerate(reader, start=1)]
    return InstanceCatalog(tuple(entries))


def load_catalog(source: str | Path | None = "builtin") -> InstanceCatalog:
    """Load a catalog from a CSV path, or the built-in EC2 table for ``"builtin"``/``None``."""
    if source is None or source == "builtin":
        return parse_catalog(BUILTIN_CATALOG_CSV)
    return parse_catalog(Path(source).read_text(encoding="utf-8"))


def default_catalog() -> InstanceCatalog:
    return load_catalog("builtin")


def catalog_to_csv(catalog: InstanceCatalog) -> str:
    with_disk = any(e.specs.disk_io is not None for e in catalog)
    cols = list(REQUIRED_COLUMNS) + (["disk_mbps"] if with_disk else [])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for e in catalog:
        row = [e.family, e.size, f"{e.cpu_perf_ghz:g}", f"{e.specs.cpu:g}", f"{e.specs.memory:g}",
               f"{e.specs.network:g}", f"{e.hourly_cost:g}"]
        if with_disk:
            row.append("" if e.specs.disk_io is None else f"{e.specs.disk_io:g}")
        writer.writerow(row)
    return buf.getvalue()


def satisfying_mask(catalog: InstanceCatalog, demand: ResourceVector) -> np.ndarray:
    d = demand.to_array()
    specs = catalog.spec_matrix
    ok = (specs >= d) | np.isnan(specs) | np.isnan(d)
    return np.all(ok, axis=1)


def grid_search(catalog: InstanceCatalog, demand: ResourceVector) -> InstanceType:
    """Cheapest instance whose specs cover ``demand`` in every available dimension."""
    mask = satisfying_mask(catalog, demand)
    for idx in catalog._order:
        if mask[idx]:
            return catalog.entries[idx]
    caps = catalog.capacity_max()
    d = demand.to_array()
    violated = [k for k, c, v in zip(RESOURCE_KINDS, caps, d) if not np.isnan(c) and not np.isnan(v) and v > c]
    raise UnsatisfiableDemand(demand, violated)


def monthly_cost(instance: InstanceType, replicas: int = 1, hours_per_month: float = HOURS_PER_MONTH) -> float:
    """USD per month for ``replicas`` copies of ``instance``."""
    if isinstance(replicas, bool) or int(replicas) != replicas or replicas < 1:
        raise ValueError(f"replicas must be a positive integer, got {replicas!r}")
    if not hours_per_month > 0:
        raise ValueError(f"hours_per_month must be > 0, got {hours_per_month!r}")
    return instance.hourly_cost * int(replicas) * hours_per_month
