"""Concepts, dimensions, the schema poset, collections and elements.

A schema is a set of concepts partially ordered by their reference fields
(dimensions): the concept a reference points at is greater than the concept
declaring the reference.  A database instance mirrors the same shape one
level down.  Every element stores the identities of the greater elements it
references, each collection keeps a per-dimension reverse index, and the
type constraint keeps every reference inside its destination collection.

Identities are plain tuples of primitive values.  They double as the
by-value references stored in entity fields, so two elements are related
exactly when one holds the identity of the other (directly or transitively).
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Iterable, Mapping

from .errors import (
    CyclicSchema,
    DanglingReference,
    DuplicateConcept,
    DuplicateField,
    DuplicateIdentity,
    NestedIdentity,
    NullViolation,
    PathNotComposable,
    SchemaError,
    TypeMismatch,
    UnknownCollection,
    UnknownConcept,
)

PRIMITIVE_TYPES = ("string", "integer", "decimal", "date")

#: Flat tuple of primitive values; identities double as references.
Identity = tuple


@dataclass(frozen=True)
class FieldSpec:
    """One field of a concept: a primitive value or a reference to a greater concept."""

    name: str
    type: str                  # primitive type name or referenced concept name
    nullable: bool = True
    length: int | None = None  # declared width, kept for display only

    @property
    def is_primitive(self) -> bool:
        return self.type in PRIMITIVE_TYPES


@dataclass(frozen=True)
class Concept:
    """A named pair of field lists; the identity part is the by-value reference."""

    name: str
    identity_fields: tuple[FieldSpec, ...]
    entity_fields: tuple[FieldSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "identity_fields", tuple(self.identity_fields))
        object.__setattr__(self, "entity_fields", tuple(self.entity_fields))

    @property
    def fields(self) -> tuple[FieldSpec, ...]:
        return self.identity_fields + self.entity_fields

    @property
    def reference_fields(self) -> tuple[FieldSpec, ...]:
        return tuple(f for f in self.entity_fields if not f.is_primitive)

    def field(self, name: str) -> FieldSpec | None:
        for f in self.fields:
            if f.name == name:
                return f
        return None

    def identity_index(self, name: str) -> int | None:
        for i, f in enumerate(self.identity_fields):
            if f.name == name:
                return i
        return None


@dataclass(frozen=True)
class Dimension:
    """A reference field seen as an edge of the schema poset (source < destination)."""

    name: str
    source: str
    destination: str
    nullable: bool = True

    def __str__(self) -> str:
        return f"{self.source}.{self.name}"


@dataclass(frozen=True)
class DimensionPath:
    """A composable sequence of dimensions; rank is the number of segments."""

    segments: tuple[Dimension, ...]

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise PathNotComposable("a dimension path needs at least one segment")
        for prev, nxt in zip(self.segments, self.segments[1:]):
            if nxt.source != prev.destination:
                raise PathNotComposable(f"'{nxt}' does not start where '{prev}' ends")

    @property
    def rank(self) -> int:
        return len(self.segments)

    @property
    def source(self) -> str:
        return self.segments[0].source

    @property
    def destination(self) -> str:
        return self.segments[-1].destination

    def dotted(self) -> str:
        return ".".join(d.name for d in self.segments)

    def __str__(self) -> str:
        return f"{self.source}.{self.dotted()}"


@dataclass
class Schema:
    """A validated set of concepts plus the derived dimension DAG.

    Instances come from build_schema, which enforces the invariants; the
    derived lookup tables and the strict order closure are computed here.
    """

    concepts: dict[str, Concept]
    dimensions: tuple[Dimension, ...]
    _by_source: dict[str, tuple[Dimension, ...]] = field(init=False, repr=False)
    _by_destination: dict[str, tuple[Dimension, ...]] = field(init=False, repr=False)
    _above: dict[str, frozenset[str]] = field(init=False, repr=False)
    _below: dict[str, frozenset[str]] = field(init=False, repr=False)

    def __post_init__(self):
        by_src: dict[str, list[Dimension]] = {name: [] for name in self.concepts}
        by_dst: dict[str, list[Dimension]] = {name: [] for name in self.concepts}
        for d in self.dimensions:
            by_src[d.source].append(d)
            by_dst[d.destination].append(d)
        self._by_source = {k: tuple(sorted(v, key=lambda d: d.name)) for k, v in by_src.items()}
        self._by_destination = {
            k: tuple(sorted(v, key=lambda d: (d.source, d.name))) for k, v in by_dst.items()
        }
        above: dict[str, frozenset[str]] = {}

        def walk(name: str) -> frozenset[str]:
            got = above.get(name)
            if got is not None:
                return got
            acc: set[str] = set()
            for d in self._by_source[name]:
                acc.add(d.destination)
                acc |= walk(d.destination)
            above[name] = frozenset(acc)
            return above[name]

        for name in self.concepts:
            walk(name)
        self._above = above
        below: dict[str, set[str]] = {name: set() for name in self.concepts}
        for name, greaters in above.items():
            for g in greaters:
                below[g].add(name)
        self._below = {k: frozenset(v) for k, v in below.items()}

    def concept(self, name: str) -> Concept:
        got = self.concepts.get(name)
        if got is None:
            raise UnknownConcept(f"unknown concept '{name}'")
        return got

    def has(self, name: str) -> bool:
        return name in self.concepts

    def dimensions_from(self, name: str) -> tuple[Dimension, ...]:
        self.concept(name)
        return self._by_source[name]

    def dimensions_into(self, name: str) -> tuple[Dimension, ...]:
        self.concept(name)
        return self._by_destination[name]

    def dimension(self, source: str, name: str) -> Dimension | None:
        for d in self.dimensions_from(source):
            if d.name == name:
                return d
        return None

    def above(self, name: str) -> frozenset[str]:
        """Concepts strictly greater than name."""
        self.concept(name)
        return self._above[name]

    def below(self, name: str) -> frozenset[str]:
        """Concepts strictly lesser than name."""
        self.concept(name)
        return self._below[name]

    def strictly_less(self, a: str, b: str) -> bool:
        return b in self.above(a)

    def path(self, source: str, *names: str) -> DimensionPath:
        """Resolve a left-to-right chain of dimension names into a path."""
        segments = []
        current = source
        for n in names:
            d = self.dimension(current, n)
            if d is None:
                raise PathNotComposable(f"no dimension '{n}' on concept '{current}'")
            segments.append(d)
            current = d.destination
        return DimensionPath(tuple(segments))


def build_schema(definitions: Iterable[Concept]) -> Schema:
    """Validate concept definitions and derive the dimension DAG.

    Rejects duplicate concepts and fields, references to unknown concepts,
    non-primitive or nullable identity fields, and any cycle among
    dimensions (including self-references).
    """
    concepts: dict[str, Concept] = {}
    for c in definitions:
        if c.name in concepts:
            raise DuplicateConcept(f"concept '{c.name}' defined twice")
        if c.name in PRIMITIVE_TYPES:
            raise SchemaError(f"concept name '{c.name}' collides with a primitive type")
        concepts[c.name] = c

    dims: list[Dimension] = []
    for c in concepts.values():
        seen: set[str] = set()
        for f in c.fields:
            if f.name in seen:
                raise DuplicateField(f"field '{f.name}' defined twice in concept '{c.name}'")
            seen.add(f.name)
        if not c.identity_fields:
            raise SchemaError(f"concept '{c.name}' has an empty identity part")
        for f in c.identity_fields:
            if not f.is_primitive:
                raise NestedIdentity(
                    f"identity field {c.name}.{f.name} has type '{f.type}': "
                    "identities must be flat primitive tuples"
                )
            if f.nullable:
                raise SchemaError(f"identity field {c.name}.{f.name} cannot be nullable")
        for f in c.entity_fields:
            if f.is_primitive:
                continue
            if f.type not in concepts:
                raise UnknownConcept(
                    f"field {c.name}.{f.name} references unknown concept '{f.type}'"
                )
            if f.type == c.name:
                raise CyclicSchema(f"dimension {c.name}.{f.name} references its own concept")
            dims.append(Dimension(f.name, c.name, f.type, f.nullable))

    _check_acyclic(concepts, dims)
    return Schema(concepts=concepts, dimensions=tuple(dims))


def _check_acyclic(concepts: dict[str, Concept], dims: list[Dimension]) -> None:
    out: dict[str, set[str]] = {name: set() for name in concepts}
    indeg: dict[str, int] = {name: 0 for name in concepts}
    for d in dims:
        if d.destination not in out[d.source]:
            out[d.source].add(d.destination)
            indeg[d.destination] += 1
    ready = [n for n, k in indeg.items() if k == 0]
    done = 0
    while ready:
        n = ready.pop()
        done += 1
        for m in out[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                ready.append(m)
    if done != len(concepts):
        stuck = sorted(n for n, k in indeg.items() if k > 0)
        raise CyclicSchema(f"dimension cycle through concepts: {', '.join(stuck)}")


def greater_concepts(schema: Schema, concept: str) -> set[tuple[Dimension, Concept]]:
    """Immediately greater concepts of `concept`, paired with the dimension used."""
    return {(d, schema.concept(d.destination)) for d in schema.dimensions_from(concept)}


def lesser_concepts(schema: Schema, concept: str) -> set[tuple[Dimension, Concept]]:
    """Immediately lesser concepts of `concept`, paired with the dimension used."""
    return {(d, schema.concept(d.source)) for d in schema.dimensions_into(concept)}


# --- elements and collections ---------------------------------------------


@dataclass(eq=False, slots=True)
class Element:
    """One element: identity tuple plus entity values (references as identities)."""

    collection: str
    identity: Identity
    entity: dict


@dataclass(eq=False)
class Collection:
    """All elements of one concept plus forward maps and reverse indexes.

    forward maps each owned dimension name to {identity: referenced identity
    or None}; reverse maps each dimension arriving here to {greater identity:
    set of lesser identities}.
    """

    name: str
    concept: Concept
    elements: dict = field(default_factory=dict)
    forward: dict = field(default_factory=dict)
    reverse: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.elements)


def create_collections(schema: Schema) -> dict[str, Collection]:
    """One collection per concept, carrying the same name, with empty indexes."""
    colls: dict[str, Collection] = {}
    for name, c in schema.concepts.items():
        coll = Collection(name, c)
        coll.forward = {f.name: {} for f in c.reference_fields}
        colls[name] = coll
    for d in schema.dimensions:
        colls[d.destination].reverse[d] = {}
    return colls


def coerce_primitive(value, ftype: str, where: str):
    """Check or convert a python value against a primitive type name."""
    if ftype == "string":
        if isinstance(value, str):
            return value
    elif ftype == "integer":
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif ftype == "decimal":
        if isinstance(value, Decimal):
            return value
        if isinstance(value, int) and not isinstance(value, bool):
            return Decimal(value)
        if isinstance(value, str):
            try:
                return Decimal(value)
            except InvalidOperation:
                raise TypeMismatch(f"{where}: '{value}' is not a decimal") from None
    elif ftype == "date":
        if isinstance(value, datetime.date) and not isinstance(value, datetime.datetime):
            return value
        if isinstance(value, str):
            try:
                return datetime.date.fromisoformat(value)
            except ValueError:
                raise TypeMismatch(f"{where}: '{value}' is not an ISO date") from None
    raise TypeMismatch(f"{where}: expected {ftype}, got {type(value).__name__} {value!r}")


def make_identity(concept: Concept, values) -> Identity:
    """Build a typed identity tuple for a concept; a bare value means arity one."""
    if not isinstance(values, (tuple, list)):
        values = (values,)
    if len(values) != len(concept.identity_fields):
        raise TypeMismatch(
            f"identity of '{concept.name}' has {len(concept.identity_fields)} "
            f"field(s), got {len(values)} value(s)"
        )
    out = []
    for f, v in zip(concept.identity_fields, values):
        if v is None:
            raise NullViolation(f"identity field {concept.name}.{f.name} cannot be NULL")
        out.append(coerce_primitive(v, f.type, f"{concept.name}.{f.name}"))
    return tuple(out)


def insert_element(db, collection: str, identity, entity_values: Mapping | None = None) -> Element:
    """Insert one element; identity must be fresh and references must exist.

    Entity values may omit nullable fields.  Reference values may be given
    as identity tuples or as a bare value when the destination identity has
    a single field.
    """
    coll = db.collections.get(collection)
    if coll is None:
        raise UnknownCollection(f"unknown collection '{collection}'")
    concept = coll.concept
    ident = make_identity(concept, identity)
    if ident in coll.elements:
        raise DuplicateIdentity(f"element {ident!r} already exists in '{collection}'")

    entity_values = dict(entity_values or {})
    entity: dict = {}
    refs: list[tuple[FieldSpec, Identity]] = []
    for f in concept.entity_fields:
        raw = entity_values.pop(f.name, None)
        if raw is None:
            if not f.nullable:
                raise NullViolation(f"field {concept.name}.{f.name} cannot be NULL")
            entity[f.name] = None
        elif f.is_primitive:
            entity[f.name] = coerce_primitive(raw, f.type, f"{concept.name}.{f.name}")
        else:
            dest_concept = db.schema.concept(f.type)
            ref = make_identity(dest_concept, raw)
            if ref not in db.collections[f.type].elements:
                raise DanglingReference(
                    f"{concept.name}.{f.name} references missing element {ref!r} of '{f.type}'"
                )
            entity[f.name] = ref
            refs.append((f, ref))
    if entity_values:
        extra = ", ".join(sorted(entity_values))
        raise TypeMismatch(f"unknown entity field(s) for '{collection}': {extra}")

    el = Element(collection, ident, entity)
    coll.elements[ident] = el
    for f in concept.reference_fields:
        coll.forward[f.name][ident] = entity[f.name]
    for f, ref in refs:
        dim = db.schema.dimension(concept.name, f.name)
        rmap = db.collections[f.type].reverse[dim]
        rmap.setdefault(ref, set()).add(ident)
    return el


def greater_of(db, element: Element, path) -> Element | None:
    """Follow a dimension or path upward; None as soon as a reference is NULL."""
    segments = path.segments if isinstance(path, DimensionPath) else (path,)
    cur = element
    for seg in segments:
        if seg.source != cur.collection or seg.name not in cur.entity:
            raise PathNotComposable(f"'{seg}' does not apply to an element of '{cur.collection}'")
        ref = cur.entity[seg.name]
        if ref is None:
            return None
        cur = db.collections[seg.destination].elements[ref]
    return cur


def lessers_of(db, element: Element, dimension: Dimension) -> set[Element]:
    """All elements referencing `element` along one dimension."""
    if dimension.destination != element.collection:
        raise PathNotComposable(
            f"'{dimension}' does not arrive at collection '{element.collection}'"
        )
    rmap = db.collections[element.collection].reverse.get(dimension)
    if rmap is None:
        raise PathNotComposable(f"'{dimension}' is not a dimension of this schema")
    src = db.collections[dimension.source]
    return {src.elements[i] for i in rmap.get(element.identity, ())}


def less_than(db, a: Element, b: Element) -> bool:
    """True iff b is reachable from a by following one or more references."""
    target = (b.collection, b.identity)
    seen: set = set()
    stack = [(a.collection, a.identity)]
    while stack:
        cname, ident = stack.pop()
        coll = db.collections[cname]
        el = coll.elements[ident]
        for f in coll.concept.reference_fields:
            ref = el.entity[f.name]
            if ref is None:
                continue
            key = (f.type, ref)
            if key == target:
                return True
            if key not in seen:
                seen.add(key)
                stack.append(key)
    return False


def leq(db, a: Element, b: Element) -> bool:
    """Reflexive variant of less_than."""
    if a.collection == b.collection and a.identity == b.identity:
        return True
    return less_than(db, a, b)


def element_field_value(db, element: Element, name: str):
    """Read an identity or entity field by name."""
    concept = db.collections[element.collection].concept
    idx = concept.identity_index(name)
    if idx is not None:
        return element.identity[idx]
    if name in element.entity:
        return element.entity[name]
    raise PathNotComposable(f"no field '{name}' on concept '{element.collection}'")
