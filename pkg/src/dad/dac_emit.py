"""Diagram emission: ArchModel -> diagram-as-code script / DOT text.

The script grammar (shared with the ingestion side, bit-exact):

    script   := header NL (body | INDENT "pass" NL)
    header   := 'with DaC("' TITLE '", direction="' ("TB"|"LR") '"):'
    body     := (cluster | edge)+
    cluster  := INDENT 'with Cluster("' NAME '"):' NL node+
    node     := INDENT INDENT IDENT " = " KIND '("' LABEL '")' annot? NL
    KIND     := "Server" | "Storage" | "Network"
    edge     := INDENT IDENT " >> " IDENT annot? NL
              | INDENT IDENT " - " IDENT annot? NL
    annot    := "  # " KV ("," KV)*        ; KV := KEY "=" VALUE, no "=" padding

INDENT is two spaces, encoding UTF-8, line endings LF. Emission is
deterministic, so equal models with equal options give byte-identical text.
Trailing annotations carry the node attributes and mount targets that the
pictures alone would lose; they are what makes the inverse direction
information-preserving.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import EmitError, ModelError
from .model import ArchModel, EdgeKind, NetworkNode, ServiceNode, VolumeNode

# First matching image substring wins; no match means role "service".
DEFAULT_ROLE_TABLE: tuple[tuple[str, str], ...] = (
    ("mysql", "database"),
    ("postgres", "database"),
    ("mongo", "database"),
    ("mariadb", "database"),
    ("redis", "database"),
    ("kafka", "messaging"),
    ("rabbitmq", "messaging"),
    ("zookeeper", "messaging"),
    ("nginx", "gateway"),
    ("traefik", "gateway"),
    ("haproxy", "gateway"),
)

_KIND_BY_NODE = {ServiceNode: "Server", VolumeNode: "Storage", NetworkNode: "Network"}
_CLUSTER_SUFFIX = {ServiceNode: "service", VolumeNode: "volume", NetworkNode: "network"}


@dataclass(frozen=True)
class EmitOptions:
    direction: str = "TB"
    group_by_role: bool = False
    role_table: tuple[tuple[str, str], ...] = DEFAULT_ROLE_TABLE

    def __post_init__(self):
        if self.direction not in ("TB", "LR"):
            raise EmitError(f"direction must be TB or LR, got {self.direction!r}")
        for substring, role in self.role_table:
            if not substring:
                raise EmitError("role table substrings must be nonempty")
            if not role:
                raise EmitError("role table roles must be nonempty")


@dataclass(frozen=True)
class DacScript:
    text: str
    # (ident, constructor kind, label) per emitted node, in script order
    identifiers: tuple[tuple[str, str, str], ...] = field(default_factory=tuple)


def sanitize_ident(name: str, taken: set[str]) -> str:
    """Turn an arbitrary node name into a unique script identifier.

    ASCII letters/digits are kept lowercased, everything else becomes an
    underscore, a leading digit gets an underscore prefix. Collisions take
    the first free ``_2``, ``_3``, ... suffix.
    """
    base = "".join(
        ch.lower() if ("A" <= ch <= "Z" or "a" <= ch <= "z" or "0" <= ch <= "9") else "_"
        for ch in name
    )
    if "0" <= base[0] <= "9":
        base = "_" + base
    if base not in taken:
        return base
    n = 2
    while f"{base}_{n}" in taken:
        n += 1
    return f"{base}_{n}"


def escape_quoted(value: str) -> str:
    return value.replace("\\", "\\\\").replace('"', '\\"')


def unescape_quoted(value: str) -> str:
    out = []
    i = 0
    while i < len(value):
        ch = value[i]
        if ch == "\\" and i + 1 < len(value):
            out.append(value[i + 1])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def encode_annot_value(value: str) -> str:
    """Percent-encode the characters that would break the k=v,k=v syntax."""
    encoded = (
        value.replace("%", "%25").replace(",", "%2C").replace("\r", "%0D").replace("\n", "%0A")
    )
    if encoded.startswith(" "):
        encoded = "%20" + encoded[1:]
    if encoded.endswith(" "):
        encoded = encoded[:-1] + "%20"
    return encoded


def decode_annot_value(value: str) -> str:
    return (
        value.replace("%20", " ")
        .replace("%0A", "\n")
        .replace("%0D", "\r")
        .replace("%2C", ",")
        .replace("%25", "%")
    )


def _format_annotations(pairs: list[tuple[str, str]]) -> str:
    if not pairs:
        return ""
    return "  # " + ",".join(f"{key}={encode_annot_value(value)}" for key, value in pairs)


def _node_annotations(node) -> list[tuple[str, str]]:
    pairs: list[tuple[str, str]] = []
    if isinstance(node, ServiceNode):
        if node.image is not None:
            pairs.append(("image", node.image))
        if node.build is not None:
            pairs.append(("build_context", node.build.context))
            if node.build.dockerfile is not None:
                pairs.append(("build_dockerfile", node.build.dockerfile))
        if node.container_name is not None:
            pairs.append(("container_name", node.container_name))
    if node.phantom:
        pairs.append(("phantom", "true"))
    return pairs


def role_of(node: ServiceNode, role_table: tuple[tuple[str, str], ...]) -> str:
    if node.image:
        for substring, role in role_table:
            if substring in node.image:
                return role
    return "service"


def _ordered_services(model: ArchModel, opts: EmitOptions) -> list[ServiceNode]:
    services = list(model.services)
    if opts.group_by_role:
        services.sort(key=lambda node: role_of(node, opts.role_table))  # stable
    return services


def _checked(model: ArchModel) -> ArchModel:
    try:
        model.validate()
    except ModelError as exc:
        raise EmitError(f"refusing to emit invalid model: {exc}") from exc
    return model


def emit_dac(model: ArchModel, opts: EmitOptions | None = None) -> DacScript:
    """Render the model as a diagram script.

    Node order is model order (stable-sorted by role first when grouping is
    on), one cluster per node, then every edge at body level: ``a >> b`` for
    dependencies, ``a - b`` for links, mounts and attachments.
    """
    opts = opts or EmitOptions()
    _checked(model)

    nodes = _ordered_services(model, opts) + list(model.volumes) + list(model.networks)
    idents: dict[str, str] = {}
    identifiers: list[tuple[str, str, str]] = []
    taken: set[str] = set()
    for node in nodes:
        ident = sanitize_ident(node.name, taken)
        taken.add(ident)
        idents[node.name] = ident
        identifiers.append((ident, _KIND_BY_NODE[type(node)], node.name))

    lines = [f'with DaC("{escape_quoted(model.title)}", direction="{opts.direction}"):']
    if not nodes and not model.edges:
        lines.append("  pass")
    for node in nodes:
        label = escape_quoted(node.name)
        suffix = _CLUSTER_SUFFIX[type(node)]
        kind = _KIND_BY_NODE[type(node)]
        annot = _format_annotations(_node_annotations(node))
        lines.append(f'  with Cluster("{label} {suffix}"):')
        lines.append(f'    {idents[node.name]} = {kind}("{label}"){annot}')
    for edge in model.edges:
        op = ">>" if edge.kind is EdgeKind.DEPENDENCY else "-"
        annot = _format_annotations([("target", edge.target)] if edge.target is not None else [])
        lines.append(f"  {idents[edge.src]} {op} {idents[edge.dst]}{annot}")
    return DacScript(text="\n".join(lines) + "\n", identifiers=tuple(identifiers))


_DOT_SHAPE = {ServiceNode: "box", VolumeNode: "cylinder", NetworkNode: "diamond"}
_DOT_EDGE_ATTRS = {
    EdgeKind.DEPENDENCY: [],
    EdgeKind.LINK: ["dir=none"],
    EdgeKind.MOUNT: ["dir=none", "style=dashed"],
    EdgeKind.ATTACHMENT: ["dir=none", "style=dotted"],
}


def emit_dot(model: ArchModel, opts: EmitOptions | None = None) -> str:
    """Render the model as a DOT digraph (same node order rules as emit_dac).

    Services are boxes, volumes cylinders, networks diamonds; dependency
    edges are directed, the symmetric kinds carry dir=none with a per-kind
    line style; mount edges are labeled with their target path.
    """
    opts = opts or EmitOptions()
    _checked(model)

    nodes = _ordered_services(model, opts) + list(model.volumes) + list(model.networks)
    idents: dict[str, str] = {}
    taken: set[str] = set()
    lines = [f'digraph "{escape_quoted(model.title)}" {{', f"  rankdir={opts.direction};"]
    for node in nodes:
        ident = sanitize_ident(node.name, taken)
        taken.add(ident)
        idents[node.name] = ident
        attrs = [f"shape={_DOT_SHAPE[type(node)]}", f'label="{escape_quoted(node.name)}"']
        if node.phantom:
            attrs.append("style=dashed")
        lines.append(f'  {ident} [{", ".join(attrs)}];')
    for edge in model.edges:
        attrs = list(_DOT_EDGE_ATTRS[edge.kind])
        if edge.kind is EdgeKind.MOUNT and edge.target is not None:
            attrs.append(f'label="{escape_quoted(edge.target)}"')
        suffix = f" [{', '.join(attrs)}]" if attrs else ""
        lines.append(f"  {idents[edge.src]} -> {idents[edge.dst]}{suffix};")
    lines.append("}")
    return "\n".join(lines) + "\n"
