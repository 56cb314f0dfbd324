"""Architecture meta-model: service/volume/network nodes plus typed edges.

The model keeps two orders at once. Node and edge tuples preserve the order in
which elements appeared in the source text, so emission is order-faithful.
``canonicalize`` projects a model onto a fully sorted :class:`CanonicalForm`,
which is the equality oracle used by every consistency check: two models are
"the same architecture" exactly when their canonical forms are equal.

All values are immutable after construction; every operation here is a pure
function.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import CycleError, ModelError


class EdgeKind(Enum):
    DEPENDENCY = "dependency"
    LINK = "link"
    MOUNT = "mount"
    ATTACHMENT = "attachment"


# Endpoint typing: (source kind, destination kind) per edge kind. Sources are
# always services; only the destination varies.
_EDGE_DST = {
    EdgeKind.DEPENDENCY: "service",
    EdgeKind.LINK: "service",
    EdgeKind.MOUNT: "volume",
    EdgeKind.ATTACHMENT: "network",
}


@dataclass(frozen=True)
class BuildRef:
    """Image build source: a context directory and an optional dockerfile."""

    context: str
    dockerfile: str | None = None


@dataclass(frozen=True)
class ServiceNode:
    name: str
    image: str | None = None
    build: BuildRef | None = None
    container_name: str | None = None
    phantom: bool = False


@dataclass(frozen=True)
class VolumeNode:
    name: str
    phantom: bool = False


@dataclass(frozen=True)
class NetworkNode:
    name: str
    phantom: bool = False


@dataclass(frozen=True)
class Edge:
    """Typed relation between named nodes.

    ``target`` is the one permitted annotation and is only meaningful on mount
    edges, where it holds the in-container mount path. A dependency edge points
    from the dependent service to the service it depends on.
    """

    kind: EdgeKind
    src: str
    dst: str
    target: str | None = None


@dataclass(frozen=True)
class ArchModel:
    """The architecture graph, in source order.

    ``title`` is diagram metadata (defaults to the descriptor file stem at the
    CLI); it does not participate in canonical equality. Phantom nodes are
    synthesized placeholders for dangling references and are likewise excluded
    from equality, but kept on the graph so diagrams can show them.
    """

    title: str = "system"
    services: tuple[ServiceNode, ...] = ()
    volumes: tuple[VolumeNode, ...] = ()
    networks: tuple[NetworkNode, ...] = ()
    edges: tuple[Edge, ...] = ()

    @property
    def phantom_names(self) -> tuple[str, ...]:
        nodes = (*self.services, *self.volumes, *self.networks)
        return tuple(n.name for n in nodes if n.phantom)

    def validate(self) -> None:
        """Check every structural invariant; raise ModelError/CycleError on the first hit."""
        service_names = _unique_names("service", self.services)
        volume_names = _unique_names("volume", self.volumes)
        network_names = _unique_names("network", self.networks)
        by_kind = {"service": service_names, "volume": volume_names, "network": network_names}

        for svc in self.services:
            if svc.image is not None and svc.build is not None:
                raise ModelError(f"service {svc.name!r} declares both image and build")

        for edge in self.edges:
            if edge.src not in service_names:
                raise ModelError(f"{edge.kind.value} edge source {edge.src!r} is not a declared service")
            dst_kind = _EDGE_DST[edge.kind]
            if edge.dst not in by_kind[dst_kind]:
                raise ModelError(
                    f"{edge.kind.value} edge destination {edge.dst!r} is not a declared {dst_kind}"
                )
            if edge.target is not None and edge.kind is not EdgeKind.MOUNT:
                raise ModelError(f"target annotation is only valid on mount edges, not {edge.kind.value}")

        assert_acyclic(self)


def _unique_names(kind: str, nodes: tuple) -> set[str]:
    seen: set[str] = set()
    for node in nodes:
        if not node.name:
            raise ModelError(f"{kind} with empty name")
        if node.name in seen:
            raise ModelError(f"duplicate {kind} name {node.name!r}")
        seen.add(node.name)
    return seen


def assert_acyclic(model: ArchModel) -> None:
    """Raise CycleError with a witness path if the dependency subgraph has a cycle.

    Only dependency edges are considered; link/mount/attachment edges carry no
    ordering semantics.
    """
    adjacency: dict[str, list[str]] = {svc.name: [] for svc in model.services}
    for edge in model.edges:
        if edge.kind is EdgeKind.DEPENDENCY:
            adjacency.setdefault(edge.src, []).append(edge.dst)

    done: set[str] = set()
    for start in adjacency:
        if start in done:
            continue
        # Iterative DFS keeping the current path for the witness.
        path: list[str] = []
        on_path: set[str] = set()
        stack: list[tuple[str, int]] = [(start, 0)]
        while stack:
            node, edge_idx = stack.pop()
            if edge_idx == 0:
                path.append(node)
                on_path.add(node)
            neighbors = adjacency.get(node, [])
            if edge_idx < len(neighbors):
                stack.append((node, edge_idx + 1))
                nxt = neighbors[edge_idx]
                if nxt in on_path:
                    raise CycleError(path[path.index(nxt):] + [nxt])
                if nxt not in done:
                    stack.append((nxt, 0))
            else:
                done.add(node)
                on_path.discard(node)
                path.pop()


@dataclass(frozen=True)
class CanonicalForm:
    """Order-free projection of a model onto the retained subset.

    Node lists are sorted by name within their kind, edges by
    (kind, src, dst, target), attribute pairs by key. Title and phantom flags
    are excluded: the former is diagram metadata, the latter provenance.
    canonicalize(canonicalize(x)) == canonicalize(x) by construction.
    """

    services: tuple[tuple[str, tuple[tuple[str, str], ...]], ...] = ()
    volumes: tuple[str, ...] = ()
    networks: tuple[str, ...] = ()
    edges: tuple[tuple[str, str, str, str], ...] = ()

    def node_count(self) -> int:
        return len(self.services) + len(self.volumes) + len(self.networks)

    def edge_count(self) -> int:
        return len(self.edges)

    def as_text(self) -> str:
        """Stable one-line-per-element rendering, handy for byte-level comparisons."""
        lines = []
        for name, attrs in self.services:
            rendered = " ".join(f"{k}={v}" for k, v in attrs)
            lines.append(f"service {name}" + (f" {rendered}" if rendered else ""))
        lines.extend(f"volume {name}" for name in self.volumes)
        lines.extend(f"network {name}" for name in self.networks)
        for kind, src, dst, target in self.edges:
            lines.append(f"edge {kind} {src} -> {dst}" + (f" target={target}" if target else ""))
        return "\n".join(lines) + "\n"


def _service_attrs(svc: ServiceNode) -> tuple[tuple[str, str], ...]:
    attrs: dict[str, str] = {}
    if svc.image is not None:
        attrs["image"] = svc.image
    if svc.build is not None:
        attrs["build_context"] = svc.build.context
        if svc.build.dockerfile is not None:
            attrs["build_dockerfile"] = svc.build.dockerfile
    if svc.container_name is not None:
        attrs["container_name"] = svc.container_name
    return tuple(sorted(attrs.items()))


def canonicalize(model: ArchModel | CanonicalForm) -> CanonicalForm:
    """Project a model onto its canonical form; idempotent on canonical forms."""
    if isinstance(model, CanonicalForm):
        return model
    return CanonicalForm(
        services=tuple(sorted((s.name, _service_attrs(s)) for s in model.services)),
        volumes=tuple(sorted(v.name for v in model.volumes)),
        networks=tuple(sorted(n.name for n in model.networks)),
        edges=tuple(
            sorted((e.kind.value, e.src, e.dst, e.target or "") for e in model.edges)
        ),
    )


def model_equal(a: ArchModel, b: ArchModel) -> bool:
    """True iff the two models have identical canonical forms."""
    return canonicalize(a) == canonicalize(b)
