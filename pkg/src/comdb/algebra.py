"""Set operations over collections: projection, de-projection, inference.

All operations take and return ElementSet values: an immutable set of
identities tagged with the domain they belong to.  A domain is a collection
name, a primitive domain (the values of one primitive field) or a product
collection built from several factor collections and a membership predicate.

Projection moves up the partial order and deduplicates; de-projection moves
down and fans out.  NULL references contribute nothing in either direction.
The star forms take the union over every simple dimension path between the
two collections, and infer routes a constraint through common lesser
collections when the source and target are incomparable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from .errors import (
    DuplicateAlias,
    NonNumericPath,
    NoPath,
    PathNotComposable,
    ViaNotCommonLesser,
)
from .model import Collection, Dimension, DimensionPath, Element, FieldSpec, Identity, Schema

INDEPENDENT_WARNING = "independent collections: full target returned"


@dataclass(frozen=True)
class PrimitiveDomain:
    """The value space of one primitive field, e.g. the countries of Addresses."""

    concept: str
    field: str
    type: str

    def __str__(self) -> str:
        return f"{self.concept}.{self.field}"


@dataclass(eq=False)
class ProductCollection:
    """Cartesian product of factor collections restricted by a predicate.

    Factors are (alias, collection name) pairs; members are tuples of factor
    identities in factor order.  The predicate is an opaque callable taking
    (db, {alias: Element}) so background knowledge can be expressed in any
    form the caller likes.  Members are enumerated lazily.
    """

    name: str
    factors: tuple[tuple[str, str], ...]
    predicate: Callable | None = None
    text: str = ""
    alias_index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.factors = tuple(self.factors)
        idx: dict[str, int] = {}
        for i, (alias, _) in enumerate(self.factors):
            if alias in idx:
                raise DuplicateAlias(f"alias '{alias}' used twice in product '{self.name}'")
            idx[alias] = i
        self.alias_index = idx

    @property
    def label(self) -> str:
        return self.name

    def collection_of(self, alias: str) -> str:
        return self.factors[self.alias_index[alias]][1]

    def __str__(self) -> str:
        return self.name


#: Where an element set lives: a collection name, a field's value space,
#: or a product collection.
Domain = str | PrimitiveDomain | ProductCollection


@dataclass(frozen=True)
class ElementSet:
    """An immutable set of members tagged with their domain.

    Members are identity tuples for collection domains, primitive values for
    primitive domains, and tuples of factor identities for product domains.
    """

    domain: Domain
    members: frozenset

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, item) -> bool:
        return item in self.members


@dataclass(frozen=True)
class FieldPath:
    """Zero or more dimensions followed by one field, read off an element."""

    source: str
    dims: tuple[Dimension, ...]
    field: FieldSpec


def domain_name(domain: Domain) -> str:
    if isinstance(domain, ProductCollection):
        return domain.name
    return str(domain)


def full_set(db, collection: str) -> ElementSet:
    coll = db.collections[collection]
    return ElementSet(collection, frozenset(coll.elements.keys()))


def make_product(name: str, factors: Sequence[tuple[str, str]],
                 predicate: Callable | None = None, text: str = "") -> ProductCollection:
    if len(factors) < 2:
        raise PathNotComposable(f"product '{name}' needs at least two factors")
    return ProductCollection(name=name, factors=tuple(factors), predicate=predicate, text=text)


def iter_members(db, product: ProductCollection,
                 restrict: Mapping[str, frozenset] | None = None) -> Iterator[tuple]:
    """Enumerate product members in factor-identity order, predicate applied.

    restrict optionally narrows individual factors to given identity sets
    before the cross product is formed, which keeps de-projections into
    large products from enumerating everything.
    """
    axes = []
    for alias, cname in product.factors:
        idents = sorted(db.collections[cname].elements.keys())
        if restrict is not None and alias in restrict:
            allowed = restrict[alias]
            idents = [i for i in idents if i in allowed]
        axes.append(idents)
    aliases = [a for a, _ in product.factors]
    cnames = [c for _, c in product.factors]
    for combo in itertools.product(*axes):
        if product.predicate is not None:
            subject = {
                aliases[i]: db.collections[cnames[i]].elements[combo[i]]
                for i in range(len(combo))
            }
            if not product.predicate(db, subject):
                continue
        yield combo


def product_members(db, product: ProductCollection) -> ElementSet:
    return ElementSet(product, frozenset(iter_members(db, product)))


# --- projection -------------------------------------------------------------


def _walk_up(db, collection: str, idents: Iterable[Identity],
             segments: Sequence[Dimension]) -> tuple[str, set]:
    """Follow forward maps along segments; drops elements that hit NULL."""
    cur = collection
    current = set(idents)
    for seg in segments:
        fmap = db.collections[cur].forward.get(seg.name)
        if fmap is None or seg.source != cur:
            raise PathNotComposable(f"'{seg}' does not start at collection '{cur}'")
        current = {fmap[i] for i in current}
        current.discard(None)
        cur = seg.destination
    return cur, current


def project(db, eset: ElementSet, path: DimensionPath) -> ElementSet:
    """Move a set up along one dimension path, deduplicating as it goes."""
    domain = eset.domain
    if isinstance(domain, PrimitiveDomain):
        raise PathNotComposable("cannot project a set of primitive values")
    segments = path.segments
    if isinstance(domain, ProductCollection):
        first = segments[0]
        if first.source != domain.label or first.name not in domain.alias_index:
            raise PathNotComposable(f"'{first}' does not start at product '{domain.name}'")
        idx = domain.alias_index[first.name]
        start = domain.collection_of(first.name)
        if first.destination != start:
            raise PathNotComposable(f"'{first}' does not start at product '{domain.name}'")
        cur, idents = _walk_up(db, start, {m[idx] for m in eset.members}, segments[1:])
    else:
        if path.source != domain:
            raise PathNotComposable(f"path '{path}' does not start at collection '{domain}'")
        cur, idents = _walk_up(db, domain, eset.members, segments)
    return ElementSet(cur, frozenset(idents))


def project_values(db, eset: ElementSet, dims: Sequence[Dimension],
                   fld: FieldSpec) -> ElementSet:
    """Project and finish by reading one primitive field; NULLs contribute nothing."""
    if dims:
        eset = project(db, eset, DimensionPath(tuple(dims)))
    cname = eset.domain
    coll = db.collections[cname]
    concept = coll.concept
    idx = concept.identity_index(fld.name)
    values = set()
    if idx is not None:
        for ident in eset.members:
            values.add(ident[idx])
    else:
        for ident in eset.members:
            v = coll.elements[ident].entity.get(fld.name)
            if v is not None:
                values.add(v)
    return ElementSet(PrimitiveDomain(concept.name, fld.name, fld.type), frozenset(values))


# --- de-projection ----------------------------------------------------------


def deproject(db, eset: ElementSet, path: DimensionPath) -> ElementSet:
    """Move a set down along one dimension path; NULL references never match."""
    domain = eset.domain
    if not isinstance(domain, str):
        raise PathNotComposable(f"cannot de-project from '{domain_name(domain)}' along '{path}'")
    if path.destination != domain:
        raise PathNotComposable(f"path '{path}' does not arrive at collection '{domain}'")
    idents = set(eset.members)
    cur = domain
    for seg in reversed(path.segments):
        rmap = db.collections[cur].reverse.get(seg)
        if rmap is None:
            raise PathNotComposable(f"'{seg}' is not a dimension arriving at '{cur}'")
        nxt: set = set()
        for i in idents:
            nxt.update(rmap.get(i, ()))
        idents = nxt
        cur = seg.source
    return ElementSet(cur, frozenset(idents))


def deproject_values(db, collection: str, field_name: str, values: Iterable) -> ElementSet:
    """Select the elements of a collection whose field takes one of the values.

    This is the first hop of a constraint anchored at primitive values; a
    NULL field never matches.
    """
    coll = db.collections[collection]
    concept = coll.concept
    wanted = {v for v in values if v is not None}
    idx = concept.identity_index(field_name)
    if idx is not None:
        members = frozenset(i for i in coll.elements if i[idx] in wanted)
    else:
        fld = concept.field(field_name)
        if fld is None or not fld.is_primitive:
            raise PathNotComposable(f"'{concept.name}.{field_name}' is not a primitive field")
        members = frozenset(
            i for i, el in coll.elements.items()
            if el.entity.get(field_name) is not None and el.entity[field_name] in wanted
        )
    return ElementSet(collection, members)


def intersect_deprojections(esets: Sequence[ElementSet]) -> ElementSet:
    """Combine constraints arriving at the same domain: set intersection."""
    if not esets:
        raise ValueError("nothing to intersect")
    first = esets[0]
    for e in esets[1:]:
        if domain_name(e.domain) != domain_name(first.domain):
            raise PathNotComposable(
                f"cannot intersect sets over '{domain_name(first.domain)}' "
                f"and '{domain_name(e.domain)}'"
            )
    members = frozenset.intersection(*(e.members for e in esets))
    return ElementSet(first.domain, members)


# --- path enumeration and star operations -----------------------------------


def enumerate_up_paths(schema: Schema, lower: str, upper: str) -> list[DimensionPath]:
    """All simple dimension paths from lower up to upper, in name order.

    The schema is a DAG, so every upward walk is simple; branches that can
    no longer reach the upper collection are pruned early.
    """
    if lower == upper:
        return []
    paths: list[DimensionPath] = []
    prefix: list[Dimension] = []

    def walk(at: str) -> None:
        for d in schema.dimensions_from(at):
            prefix.append(d)
            if d.destination == upper:
                paths.append(DimensionPath(tuple(prefix)))
            elif upper in schema.above(d.destination):
                walk(d.destination)
            prefix.pop()

    walk(lower)
    paths.sort(key=lambda p: tuple(d.name for d in p.segments))
    return paths


def product_up_paths(schema: Schema, product: ProductCollection, upper: str) -> list[DimensionPath]:
    """Paths from a product up to a collection: one pseudo-dimension per factor."""
    paths: list[DimensionPath] = []
    for alias, cname in product.factors:
        pseudo = Dimension(alias, product.label, cname)
        if cname == upper:
            paths.append(DimensionPath((pseudo,)))
        else:
            for p in enumerate_up_paths(schema, cname, upper):
                paths.append(DimensionPath((pseudo,) + p.segments))
    paths.sort(key=lambda p: tuple(d.name for d in p.segments))
    return paths


def star_project(db, eset: ElementSet, target: str) -> ElementSet:
    """Project along every path up to target and take the union."""
    domain = eset.domain
    if isinstance(domain, PrimitiveDomain):
        raise PathNotComposable("cannot project a set of primitive values")
    if isinstance(domain, ProductCollection):
        paths = product_up_paths(db.schema, domain, target)
        if not paths:
            raise NoPath(f"no factor of product '{domain.name}' reaches '{target}'")
    else:
        if domain == target:
            return eset
        paths = enumerate_up_paths(db.schema, domain, target)
        if not paths:
            raise NoPath(
                f"no upward path from '{domain}' to '{target}'; "
                "'<-*->' routes through common lesser collections"
            )
    members: set = set()
    for p in paths:
        members |= project(db, eset, p).members
    return ElementSet(target, frozenset(members))


def star_deproject(db, eset: ElementSet, target) -> ElementSet:
    """De-project along every path down to target and take the union.

    target may be a collection name or a ProductCollection; a product is
    below a collection whenever one of its factors is at or below it.
    """
    domain = eset.domain
    if not isinstance(domain, str):
        if domain is target:
            return eset
        raise NoPath(f"cannot de-project from '{domain_name(domain)}'")
    if isinstance(target, ProductCollection):
        allowed: dict[str, frozenset] = {}
        for alias, cname in target.factors:
            if cname == domain:
                allowed[alias] = eset.members
            elif domain in db.schema.above(cname):
                allowed[alias] = star_deproject(db, eset, cname).members
        if not allowed:
            raise NoPath(f"no factor of product '{target.name}' reaches '{domain}'")
        members: set = set()
        for alias, keep in allowed.items():
            members.update(iter_members(db, target, restrict={alias: keep}))
        return ElementSet(target, frozenset(members))
    if target == domain:
        return eset
    paths = enumerate_up_paths(db.schema, target, domain)
    if not paths:
        raise NoPath(
            f"no downward path from '{domain}' to '{target}'; "
            "'<-*->' routes through common lesser collections"
        )
    out: set = set()
    for p in paths:
        out |= deproject(db, eset, p).members
    return ElementSet(target, frozenset(out))


# --- inference --------------------------------------------------------------


def common_lesser_collections(schema: Schema, a: str, b: str) -> list[str]:
    """Maximal collections below both a and b, sorted by name."""
    common = schema.below(a) & schema.below(b)
    return sorted(c for c in common if not (schema.above(c) & common))


def _reaches(db, lesser, greater: str) -> bool:
    if isinstance(lesser, ProductCollection):
        return any(c == greater or greater in db.schema.above(c) for _, c in lesser.factors)
    return lesser == greater or greater in db.schema.above(lesser)


def infer(db, eset: ElementSet, target, via=None,
          warnings: list | None = None) -> ElementSet:
    """Propagate a constraint from its source to an arbitrary target.

    Comparable collections use the star operations directly.  Incomparable
    ones route through the maximal common lesser collections (union over
    routes), or through `via` when given, which must lie below both ends.
    With no connection at all the whole target is returned and a warning is
    recorded.
    """
    domain = eset.domain
    if isinstance(domain, PrimitiveDomain):
        raise PathNotComposable("cannot infer from a set of primitive values")

    if (isinstance(target, ProductCollection) and target is domain) or target == domain:
        return eset

    if via is not None:
        below_source = _reaches(db, via, domain) if isinstance(domain, str) else via is domain
        if not below_source:
            raise ViaNotCommonLesser(
                f"'{domain_name(via)}' is not at or below source '{domain_name(domain)}'"
            )
        below_target = _reaches(db, via, target) if isinstance(target, str) else via is target
        if not below_target:
            raise ViaNotCommonLesser(
                f"'{domain_name(via)}' is not at or below target '{domain_name(target)}'"
            )
        down = star_deproject(db, eset, via)
        return star_project(db, down, target) if isinstance(target, str) else down

    if isinstance(target, ProductCollection):
        if _reaches(db, target, domain):
            return star_deproject(db, eset, target)
        if warnings is not None:
            warnings.append(INDEPENDENT_WARNING)
        return product_members(db, target)

    if isinstance(domain, ProductCollection):
        if _reaches(db, domain, target):
            return star_project(db, eset, target)
        if warnings is not None:
            warnings.append(INDEPENDENT_WARNING)
        return full_set(db, target)

    schema = db.schema
    if target in schema.above(domain):
        return star_project(db, eset, target)
    if target in schema.below(domain):
        return star_deproject(db, eset, target)

    routes = common_lesser_collections(schema, domain, target)
    if not routes:
        if warnings is not None:
            warnings.append(INDEPENDENT_WARNING)
        return full_set(db, target)
    members: set = set()
    for lesser in routes:
        down = star_deproject(db, eset, lesser)
        members |= star_project(db, down, target).members
    return ElementSet(target, frozenset(members))


# --- values and aggregates ---------------------------------------------------


def value_along(db, collection: str, ident: Identity,
                dims: Sequence[Dimension], field_name: str | None):
    """Follow dimensions from one element, then read a field; NULL propagates.

    With field_name None the value is the identity of the endpoint element.
    """
    cur_coll = collection
    cur = ident
    for seg in dims:
        r = db.collections[cur_coll].forward[seg.name][cur]
        if r is None:
            return None
        cur = r
        cur_coll = seg.destination
    if field_name is None:
        return cur
    coll = db.collections[cur_coll]
    idx = coll.concept.identity_index(field_name)
    if idx is not None:
        return cur[idx]
    return coll.elements[cur].entity.get(field_name)


def count(eset: ElementSet) -> int:
    return len(eset.members)


def sum_values(db, eset: ElementSet, path: FieldPath):
    """Sum a numeric field over a set of elements; NULL contributes zero."""
    if path.field.type not in ("integer", "decimal"):
        raise NonNumericPath(
            f"cannot sum over '{path.field.name}' of type {path.field.type}"
        )
    if not isinstance(eset.domain, str) or eset.domain != path.source:
        raise PathNotComposable(
            f"sum path starts at '{path.source}' but the set is over "
            f"'{domain_name(eset.domain)}'"
        )
    total = Decimal(0) if path.field.type == "decimal" else 0
    for ident in eset.members:
        v = value_along(db, eset.domain, ident, path.dims, path.field.name)
        if v is not None:
            total += v
    return total
