"""Module engine: dependency resolution and partial-failure execution.

Modules declare hard dependencies (must succeed, otherwise the dependent
is skipped) and soft dependencies (ordering only: the dependent still
runs and simply observes the soft input's artifacts as absent). The
pattern follows plugin-loader dependency declarations, which is what
keeps one broken stage from sinking a whole run.

Execution is sequential in plan order. Run procedures receive a store
view bound to their module id; artifacts are written exactly once per
run unless a module explicitly revises an existing one, in which case
the store keeps every version and readers get the latest.
"""

from __future__ import annotations

import json
import time
from collections import Counter, deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

from ecoscapes.errors import (
    CycleDetectedError,
    DuplicateArtifactError,
    MissingHardDependencyError,
)


@dataclass(frozen=True)
class ModuleSpec:
    """A pipeline node: id, dependency edges, and the work itself."""

    id: str
    run: Callable[["StoreView"], None]
    deps: frozenset[str] = frozenset()
    soft_deps: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "deps", frozenset(self.deps))
        object.__setattr__(self, "soft_deps", frozenset(self.soft_deps))
        if self.deps & self.soft_deps:
            raise ValueError(
                f"module {self.id!r} lists {sorted(self.deps & self.soft_deps)} "
                "as both hard and soft dependencies"
            )
        if self.id in self.deps | self.soft_deps:
            raise ValueError(f"module {self.id!r} depends on itself")


class ModuleState(str, Enum):
    SUCCEEDED = "succeeded"
    FAILED = "failed"
    SKIPPED = "skipped"
    NOT_RUN = "not_run"


@dataclass(frozen=True)
class ModuleStatus:
    state: ModuleState
    reason: str | None = None      # failure detail
    missing: tuple[str, ...] = ()  # hard deps that did not succeed

    def to_dict(self) -> dict:
        out: dict = {"state": self.state.value}
        if self.reason is not None:
            out["reason"] = self.reason
        if self.missing:
            out["missing"] = list(self.missing)
        return out


@dataclass(frozen=True)
class _ArtifactVersion:
    payload: bytes | str
    producer: str
    timestamp: float


class ArtifactStore:
    """Run-scoped map of named outputs flowing between modules."""

    def __init__(self):
        self._versions: dict[str, list[_ArtifactVersion]] = {}

    def put(self, name: str, payload: bytes | str, producer: str) -> None:
        if name in self._versions:
            raise DuplicateArtifactError(
                f"artifact {name!r} already written by "
                f"{self._versions[name][0].producer!r}; use revise() for a "
                "declared revision"
            )
        self._versions[name] = [_ArtifactVersion(payload, producer, time.time())]

    def revise(self, name: str, payload: bytes | str, producer: str) -> None:
        if name not in self._versions:
            raise KeyError(f"cannot revise unknown artifact {name!r}")
        self._versions[name].append(_ArtifactVersion(payload, producer, time.time()))

    def has(self, name: str) -> bool:
        return name in self._versions

    def get(self, name: str) -> bytes | str:
        """Latest payload; raises KeyError when absent."""
        return self._versions[name][-1].payload

    def get_version(self, name: str, version: int) -> bytes | str:
        """Payload of a specific version, 1-based."""
        return self._versions[name][version - 1].payload

    def version_count(self, name: str) -> int:
        return len(self._versions.get(name, ()))

    def names(self) -> list[str]:
        return list(self._versions)

    def manifest(self) -> dict[str, dict]:
        return {
            name: {
                "producer": versions[-1].producer,
                "versions": len(versions),
            }
            for name, versions in self._versions.items()
        }

    def mirror_to_disk(self, out_dir) -> None:
        """Write each artifact under its own name; superseded versions get
        a ``.v<k>`` infix so revisions stay inspectable."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, versions in self._versions.items():
            path = out / name
            _write_payload(path, versions[-1].payload)
            if len(versions) > 1:
                for k, version in enumerate(versions[:-1], start=1):
                    versioned = out / f"{path.stem}.v{k}{path.suffix}"
                    _write_payload(versioned, version.payload)


def _write_payload(path: Path, payload: bytes | str) -> None:
    if isinstance(payload, bytes):
        path.write_bytes(payload)
    else:
        path.write_text(payload, encoding="utf-8")


class StoreView:
    """A module's handle on the store; writes are tagged with its id."""

    def __init__(self, store: ArtifactStore, module_id: str):
        self._store = store
        self._module_id = module_id

    def has(self, name: str) -> bool:
        return self._store.has(name)

    def get(self, name: str) -> bytes | str:
        return self._store.get(name)

    def get_text(self, name: str) -> str:
        payload = self._store.get(name)
        return payload.decode("utf-8") if isinstance(payload, bytes) else payload

    def put(self, name: str, payload: bytes | str) -> None:
        self._store.put(name, payload, self._module_id)

    def revise(self, name: str, payload: bytes | str) -> None:
        self._store.revise(name, payload, self._module_id)


@dataclass
class RunReport:
    """Outcome of one engine run: statuses, attempt order, artifacts."""

    order: list[str]
    statuses: dict[str, ModuleStatus]
    manifest: dict[str, dict] = field(default_factory=dict)

    def state(self, module_id: str) -> ModuleState:
        return self.statuses[module_id].state

    def succeeded(self, module_id: str) -> bool:
        return self.statuses[module_id].state is ModuleState.SUCCEEDED

    def all_succeeded(self) -> bool:
        return all(
            s.state is ModuleState.SUCCEEDED for s in self.statuses.values()
        )

    def to_dict(self) -> dict:
        return {
            "order": list(self.order),
            "statuses": {m: s.to_dict() for m, s in sorted(self.statuses.items())},
            "manifest": dict(sorted(self.manifest.items())),
        }

    def write(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, ensure_ascii=False, sort_keys=False)
            + "\n",
            encoding="utf-8",
        )


def resolve_order(modules) -> list[ModuleSpec]:
    """Topologically order modules over hard and soft edges.

    Soft dependencies on unknown ids are ignored (soft means optional);
    hard dependencies on unknown ids are errors. Ties among ready modules
    break lexicographically by id so plans are reproducible.
    """
    specs = list(modules)
    by_id = {m.id: m for m in specs}
    if len(by_id) != len(specs):
        counts = Counter(m.id for m in specs)
        dupes = sorted(mid for mid, n in counts.items() if n > 1)
        raise ValueError(f"duplicate module ids: {dupes}")

    for m in specs:
        unknown_hard = m.deps - by_id.keys()
        if unknown_hard:
            raise MissingHardDependencyError(
                f"module {m.id!r} hard-depends on unknown "
                f"module(s): {sorted(unknown_hard)}"
            )

    # Edge u -> v means u must run before v.
    successors: dict[str, set[str]] = {mid: set() for mid in by_id}
    in_degree = {mid: 0 for mid in by_id}
    for m in specs:
        for dep in m.deps | (m.soft_deps & by_id.keys()):
            if m.id not in successors[dep]:
                successors[dep].add(m.id)
                in_degree[m.id] += 1

    ready = sorted(mid for mid, deg in in_degree.items() if deg == 0)
    plan: list[str] = []
    while ready:
        current = ready.pop(0)
        plan.append(current)
        opened = []
        for succ in successors[current]:
            in_degree[succ] -= 1
            if in_degree[succ] == 0:
                opened.append(succ)
        if opened:
            ready = sorted(ready + opened)

    if len(plan) < len(specs):
        raise CycleDetectedError(_find_cycle(by_id, set(by_id) - set(plan)))
    return [by_id[mid] for mid in plan]


def _find_cycle(by_id: dict[str, ModuleSpec], stuck: set[str]) -> list[str]:
    """Walk predecessor edges inside the stuck set until a node repeats."""
    start = min(stuck)
    trail = [start]
    positions = {start: 0}
    current = start
    while True:
        spec = by_id[current]
        nxt = min(
            d for d in (spec.deps | (spec.soft_deps & by_id.keys())) if d in stuck
        )
        if nxt in positions:
            cycle = trail[positions[nxt]:]
            cycle.reverse()  # report in execution (dependency-first) order
            return cycle
        positions[nxt] = len(trail)
        trail.append(nxt)
        current = nxt


def execute(plan: list[ModuleSpec], store: ArtifactStore) -> RunReport:
    """Run a resolved plan; failures become statuses, never exceptions.

    A module whose hard dependency did not succeed is skipped with the
    offending ids recorded; failed soft dependencies leave the dependent
    running against an absent artifact. The report always covers every
    module in the plan.
    """
    statuses: dict[str, ModuleStatus] = {
        m.id: ModuleStatus(ModuleState.NOT_RUN) for m in plan
    }
    order: list[str] = []
    for module in plan:
        order.append(module.id)
        unsatisfied = tuple(sorted(
            dep for dep in module.deps
            if statuses[dep].state is not ModuleState.SUCCEEDED
        ))
        if unsatisfied:
            statuses[module.id] = ModuleStatus(ModuleState.SKIPPED,
                                               missing=unsatisfied)
            continue
        view = StoreView(store, module.id)
        try:
            module.run(view)
        except Exception as e:
            statuses[module.id] = ModuleStatus(
                ModuleState.FAILED, reason=f"{type(e).__name__}: {e}")
        else:
            statuses[module.id] = ModuleStatus(ModuleState.SUCCEEDED)
    return RunReport(order=order, statuses=statuses, manifest=store.manifest())


def hard_failure_closure(plan: list[ModuleSpec], failed: set[str]) -> set[str]:
    """Forward reachability of ``failed`` over hard edges only.

    The set of modules execute() must skip given those failures; exposed
    so callers can reason about blast radius without running anything.
    """
    dependents: dict[str, set[str]] = {m.id: set() for m in plan}
    for m in plan:
        for dep in m.deps:
            if dep in dependents:
                dependents[dep].add(m.id)
    reached: set[str] = set()
    queue = deque(failed)
    while queue:
        current = queue.popleft()
        for dependent in dependents.get(current, ()):
            if dependent not in reached:
                reached.add(dependent)
                queue.append(dependent)
    return reached - failed
