"""Name resolution and planning: a parsed query becomes an executable plan.

Resolution binds collection, dimension and field names against a schema,
compiles predicates into evaluable closures, enumerates the dimension paths
each star or inference step will use, and records any warnings (such as the
full-target fallback for unconnected collections) before anything runs.
"""

from __future__ import annotations

import datetime
import operator
from dataclasses import dataclass
from decimal import Decimal
from typing import Mapping

from ..algebra import (
    INDEPENDENT_WARNING,
    FieldPath,
    PrimitiveDomain,
    ProductCollection,
    common_lesser_collections,
    deproject,
    enumerate_up_paths,
    make_product,
    product_up_paths,
    sum_values,
    ElementSet,
)
from ..errors import (
    AmbiguousPath,
    NonNumericPath,
    NoPath,
    ResolveError,
    UnknownAlias,
    UnknownCollection,
    UnknownDimension,
)
from ..model import Dimension, DimensionPath, FieldSpec, Schema
from . import ast
from .printer import print_literal, print_predicate, print_query, print_set_expr


def _raise(cls, msg: str, pos: tuple[int, int]):
    if pos and pos != (0, 0):
        raise cls(msg, pos[0], pos[1])
    raise cls(msg)


# --- compiled predicate terms -------------------------------------------------

_OPS = {
    "==": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}


@dataclass(frozen=True)
class ConstTerm:
    value: object
    text: str


@dataclass(frozen=True)
class PathValue:
    """A value read off the subject element: hops, then one field.

    field None means the identity of the endpoint element.  value_type is
    the primitive type name, or None when the endpoint is a reference
    (ref_to then names the destination concept).
    """

    alias: str | None
    source: str
    dims: tuple[Dimension, ...]
    field: str | None
    value_type: str | None
    ref_to: str | None
    text: str


@dataclass(frozen=True)
class AggValue:
    """COUNT or SUM over the one-hop de-projection of the subject element."""

    func: str
    dim: Dimension
    collection: str
    inner: object | None
    sum_path: FieldPath | None
    text: str


@dataclass(frozen=True)
class CompiledComparison:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class CompiledAnd:
    items: tuple


@dataclass(frozen=True)
class CompiledOr:
    items: tuple


@dataclass(frozen=True)
class CompiledNot:
    item: object


def _subject_element(db, pv: PathValue, subject):
    if isinstance(subject, Mapping):
        return subject[pv.alias]
    return subject


def _term_value(db, term, subject):
    if isinstance(term, ConstTerm):
        return term.value
    if isinstance(term, PathValue):
        el = _subject_element(db, term, subject)
        cur_coll = el.collection
        cur = el.identity
        for seg in term.dims:
            ref = db.collections[cur_coll].forward[seg.name][cur]
            if ref is None:
                return None
            cur = ref
            cur_coll = seg.destination
        if term.field is None:
            return cur
        coll = db.collections[cur_coll]
        idx = coll.concept.identity_index(term.field)
        if idx is not None:
            return cur[idx]
        return coll.elements[cur].entity.get(term.field)
    if isinstance(term, AggValue):
        el = subject
        base = ElementSet(el.collection, frozenset((el.identity,)))
        down = deproject(db, base, DimensionPath((term.dim,)))
        members = down.members
        if term.inner is not None:
            coll = db.collections[term.collection]
            members = frozenset(
                i for i in members if evaluate(db, term.inner, coll.elements[i])
            )
        if term.func == "COUNT":
            return len(members)
        return sum_values(db, ElementSet(term.collection, members), term.sum_path)
    raise TypeError(f"not a compiled term: {term!r}")


def evaluate(db, node, subject) -> bool:
    """Two-valued predicate evaluation; any comparison touching NULL is false."""
    if isinstance(node, CompiledComparison):
        left = _term_value(db, node.left, subject)
        right = _term_value(db, node.right, subject)
        if left is None or right is None:
            return False
        try:
            return bool(_OPS[node.op](left, right))
        except TypeError:
            return False
    if isinstance(node, CompiledAnd):
        return all(evaluate(db, item, subject) for item in node.items)
    if isinstance(node, CompiledOr):
        return any(evaluate(db, item, subject) for item in node.items)
    if isinstance(node, CompiledNot):
        return not evaluate(db, node.item, subject)
    raise TypeError(f"not a compiled predicate: {node!r}")


# --- predicate compilation ----------------------------------------------------


@dataclass(frozen=True)
class _Ctx:
    """What predicate paths may start from: one concept or product factors."""

    schema: Schema
    concept: str | None = None           # element subject
    alias: str | None = None             # its optional alias
    aliases: Mapping[str, str] | None = None  # product subject: alias -> concept


def _compile_path(ctx: _Ctx, node: ast.PathTerm) -> PathValue:
    parts = list(node.parts)
    text = ".".join(node.parts)
    alias = None
    if ctx.aliases is not None:
        if not parts or parts[0] not in ctx.aliases:
            known = ", ".join(sorted(ctx.aliases))
            _raise(UnknownAlias, f"path '{text}' must start with a factor alias ({known})", node.pos)
        alias = parts.pop(0)
        start = ctx.aliases[alias]
    else:
        start = ctx.concept
        if parts and ctx.alias is not None and parts[0] == ctx.alias:
            parts.pop(0)

    dims: list[Dimension] = []
    cur = start
    field_name = None
    value_type: str | None = None
    ref_to: str | None = None
    for k, part in enumerate(parts):
        concept = ctx.schema.concept(cur)
        f = concept.field(part)
        if f is None:
            _raise(ResolveError, f"no field '{part}' on concept '{cur}'", node.pos)
        if k == len(parts) - 1:
            field_name = part
            if f.is_primitive:
                value_type = f.type
            else:
                ref_to = f.type
        else:
            if f.is_primitive:
                _raise(
                    ResolveError,
                    f"'{cur}.{part}' is primitive; only the last path part may be",
                    node.pos,
                )
            dims.append(ctx.schema.dimension(cur, part))
            cur = f.type
    if field_name is None:
        ref_to = start
    return PathValue(alias, start, tuple(dims), field_name, value_type, ref_to, text)


def _coerce_literal(value, value_type: str, pos) -> object:
    """Fit a literal to the primitive type it is compared with."""
    if value is None:
        return None
    if value_type == "string":
        if not isinstance(value, str):
            _raise(ResolveError, f"expected a string, found {value!r}", pos)
    elif value_type in ("integer", "decimal"):
        if not isinstance(value, (int, Decimal)):
            _raise(ResolveError, f"expected a number, found {value!r}", pos)
    elif value_type == "date":
        if not isinstance(value, str):
            _raise(ResolveError, f"expected an ISO date string, found {value!r}", pos)
        try:
            return datetime.date.fromisoformat(value)
        except ValueError:
            _raise(ResolveError, f"'{value}' is not an ISO date", pos)
    return value


def _type_literal_against(term, lit: ast.Literal, schema: Schema) -> ConstTerm:
    value = lit.value
    if isinstance(term, AggValue):
        if value is not None and not isinstance(value, (int, Decimal)):
            _raise(ResolveError, f"{term.func} compares against numbers, found {value!r}", lit.pos)
        return ConstTerm(value, print_literal(lit))
    if isinstance(term, PathValue):
        if term.value_type is not None:
            return ConstTerm(_coerce_literal(value, term.value_type, lit.pos), print_literal(lit))
        if term.ref_to is not None and value is not None:
            # literal against a reference endpoint: wrap into an identity
            # tuple when the destination identity has a single field
            concept = schema.concept(term.ref_to)
            if len(concept.identity_fields) == 1:
                f = concept.identity_fields[0]
                return ConstTerm((_coerce_literal(value, f.type, lit.pos),), print_literal(lit))
            _raise(
                ResolveError,
                f"cannot compare '{term.text}' with a constant: "
                f"'{term.ref_to}' has a composite identity",
                lit.pos,
            )
    return ConstTerm(value, print_literal(lit))


def _compile_term(ctx: _Ctx, node):
    if isinstance(node, ast.Literal):
        return ConstTerm(node.value, print_literal(node))
    if isinstance(node, ast.PathTerm):
        return _compile_path(ctx, node)
    if isinstance(node, ast.AggTerm):
        return _compile_agg(ctx, node)
    raise TypeError(f"not a term: {node!r}")


def _compile_agg(ctx: _Ctx, node: ast.AggTerm) -> AggValue:
    if ctx.aliases is not None:
        _raise(ResolveError, "aggregates are not allowed in product predicates", node.pos)
    subject = ctx.concept
    if node.collection not in ctx.schema.concepts:
        _raise(UnknownCollection, f"unknown collection '{node.collection}'", node.pos)
    dim = ctx.schema.dimension(node.collection, node.dim)
    if dim is None or dim.destination != subject:
        _raise(
            UnknownDimension,
            f"'{node.dim}' is not a dimension of '{node.collection}' into '{subject}'",
            node.pos,
        )
    inner = None
    if node.predicate is not None:
        inner = compile_predicate(_Ctx(ctx.schema, concept=node.collection), node.predicate)
    sum_path = None
    if node.func == "SUM":
        if node.path is None:
            raise NonNumericPath(
                "SUM needs a numeric field path, like SUM(dim <- (Coll).field); "
                "COUNT counts elements without one"
            )
        sum_path = _resolve_field_path(ctx.schema, node.collection, node.path, node.pos)
        if sum_path.field.type not in ("integer", "decimal"):
            raise NonNumericPath(
                f"cannot sum over '{sum_path.field.name}' of type {sum_path.field.type}"
            )
    elif node.path is not None:
        _raise(ResolveError, "COUNT takes no field path", node.pos)
    text = f"{node.func}({node.dim} <- ({node.collection}))"
    return AggValue(node.func, dim, node.collection, inner, sum_path, text)


def _resolve_field_path(schema: Schema, source: str, parts, pos) -> FieldPath:
    dims: list[Dimension] = []
    cur = source
    for k, part in enumerate(parts):
        concept = schema.concept(cur)
        f = concept.field(part)
        if f is None:
            _raise(ResolveError, f"no field '{part}' on concept '{cur}'", pos)
        if k == len(parts) - 1:
            if not f.is_primitive:
                _raise(ResolveError, f"'{cur}.{part}' is not a primitive field", pos)
            return FieldPath(source, tuple(dims), f)
        if f.is_primitive:
            _raise(ResolveError, f"'{cur}.{part}' is primitive; only the last path part may be", pos)
        dims.append(schema.dimension(cur, part))
        cur = f.type
    _raise(ResolveError, "empty field path", pos)


def compile_predicate(ctx: _Ctx, node):
    if isinstance(node, ast.Comparison):
        left = node.left
        right = node.right
        # compile paths first so literals can be typed against them
        cl = _compile_term(ctx, left) if not isinstance(left, ast.Literal) else None
        cr = _compile_term(ctx, right) if not isinstance(right, ast.Literal) else None
        if cl is None and cr is None:
            cl = ConstTerm(left.value, print_literal(left))
            cr = ConstTerm(right.value, print_literal(right))
        elif cl is None:
            cl = _type_literal_against(cr, left, ctx.schema)
        elif cr is None:
            cr = _type_literal_against(cl, right, ctx.schema)
        return CompiledComparison(node.op, cl, cr)
    if isinstance(node, ast.And):
        return CompiledAnd(tuple(compile_predicate(ctx, i) for i in node.items))
    if isinstance(node, ast.Or):
        return CompiledOr(tuple(compile_predicate(ctx, i) for i in node.items))
    if isinstance(node, ast.Not):
        return CompiledNot(compile_predicate(ctx, node.item))
    raise TypeError(f"not a predicate: {node!r}")


def _predicate_callable(compiled):
    def run(db, subject):
        return evaluate(db, compiled, subject)

    return run


# --- plans ---------------------------------------------------------------------


@dataclass(frozen=True)
class CollectionAnchor:
    collection: str
    predicate: object | None
    text: str


@dataclass(frozen=True)
class ProductAnchor:
    product: ProductCollection
    text: str


@dataclass(frozen=True)
class LiteralAnchor:
    domain: PrimitiveDomain
    values: tuple
    text: str


@dataclass(frozen=True)
class PlanFilter:
    predicate: object
    text: str


@dataclass(frozen=True)
class PlanProject:
    path: DimensionPath
    target: str
    text: str


@dataclass(frozen=True)
class PlanProjectField:
    dims: tuple[Dimension, ...]
    field: FieldSpec
    domain: PrimitiveDomain
    text: str


@dataclass(frozen=True)
class PlanDeproject:
    path: DimensionPath
    target: str
    text: str


@dataclass(frozen=True)
class PlanDeprojectValues:
    """First hop of a constant-anchored chain: values into their owner, then down."""

    owner: str
    field: FieldSpec
    tail: DimensionPath | None
    target: str
    text: str


@dataclass(frozen=True)
class PlanStarProject:
    target: str
    paths: tuple[DimensionPath, ...]
    text: str


@dataclass(frozen=True)
class PlanStarDeproject:
    target: object                      # collection name or ProductCollection
    paths: tuple[DimensionPath, ...]
    text: str


@dataclass(frozen=True)
class InferRoute:
    via: str | None
    down_paths: tuple[DimensionPath, ...]
    up_paths: tuple[DimensionPath, ...]


@dataclass(frozen=True)
class PlanInfer:
    target: object                      # collection name or ProductCollection
    via: object | None
    routes: tuple[InferRoute, ...]
    warning: str | None
    text: str


@dataclass(frozen=True)
class QueryPlan:
    anchor: object
    steps: tuple
    warnings: tuple[str, ...]
    text: str


# --- resolution -----------------------------------------------------------------


def _single_factor(se: ast.SetExpr):
    if len(se.factors) == 1:
        return se.factors[0]
    return None


def _anchor_ctx(schema: Schema, name: str, alias: str | None) -> _Ctx:
    return _Ctx(schema, concept=name, alias=alias)


def _product_from_set_expr(se: ast.SetExpr, schema: Schema) -> ProductCollection:
    factors = []
    for f in se.factors:
        if f.collection not in schema.concepts:
            _raise(UnknownCollection, f"unknown collection '{f.collection}'", f.pos)
        factors.append((f.alias or f.collection, f.collection))
    predicate = None
    if se.predicate is not None:
        aliases = {a: c for a, c in factors}
        compiled = compile_predicate(_Ctx(schema, aliases=aliases), se.predicate)
        predicate = _predicate_callable(compiled)
    text = print_set_expr(se)
    return make_product(text, factors, predicate, text)


def _narrow_product(base: ProductCollection, se: ast.SetExpr, schema: Schema) -> ProductCollection:
    """A registered product with an extra predicate on top."""
    aliases = {a: c for a, c in base.factors}
    compiled = compile_predicate(_Ctx(schema, aliases=aliases), se.predicate)
    extra = _predicate_callable(compiled)
    inner = base.predicate

    def both(db, subject):
        return (inner is None or inner(db, subject)) and extra(db, subject)

    return ProductCollection(base.name, base.factors, both, print_set_expr(se))


def _resolve_set_anchor(se: ast.SetExpr, schema: Schema, products: Mapping):
    one = _single_factor(se)
    if one is not None and one.collection in schema.concepts:
        pred = None
        if se.predicate is not None:
            ctx = _anchor_ctx(schema, one.collection, one.alias)
            pred = compile_predicate(ctx, se.predicate)
        return CollectionAnchor(one.collection, pred, print_set_expr(se)), one.collection
    if one is not None and one.collection in products:
        if one.alias is not None:
            _raise(ResolveError, "a product collection cannot take an alias", one.pos)
        product = products[one.collection]
        if se.predicate is not None:
            product = _narrow_product(product, se, schema)
        return ProductAnchor(product, print_set_expr(se)), product
    if one is not None:
        _raise(UnknownCollection, f"unknown collection '{one.collection}'", one.pos)
    product = _product_from_set_expr(se, schema)
    return ProductAnchor(product, print_set_expr(se)), product


def _resolve_step_target(se: ast.SetExpr, schema: Schema, products: Mapping):
    """A step target: a collection (plus optional post filter) or a product."""
    one = _single_factor(se)
    if one is not None and one.collection in schema.concepts:
        post = None
        if se.predicate is not None:
            post = compile_predicate(_anchor_ctx(schema, one.collection, one.alias), se.predicate)
        return one.collection, post
    if one is not None and one.collection in products:
        if one.alias is not None:
            _raise(ResolveError, "a product collection cannot take an alias", one.pos)
        product = products[one.collection]
        if se.predicate is not None:
            product = _narrow_product(product, se, schema)
        return product, None
    if one is not None:
        _raise(UnknownCollection, f"unknown collection '{one.collection}'", one.pos)
    return _product_from_set_expr(se, schema), None


def _require_collection_domain(domain, step_pos, what: str) -> str:
    if isinstance(domain, PrimitiveDomain):
        _raise(
            ResolveError,
            f"the chain already ended at primitive values '{domain}'",
            step_pos,
        )
    if isinstance(domain, ProductCollection):
        _raise(ResolveError, f"{what} cannot start from product '{domain.name}'", step_pos)
    return domain


def _unique_up_path(schema: Schema, lower: str, upper: str, pos) -> DimensionPath:
    paths = enumerate_up_paths(schema, lower, upper)
    if not paths:
        raise NoPath(
            f"no path between '{lower}' and '{upper}'; "
            "'<-*->' routes through common lesser collections"
        )
    if len(paths) > 1:
        listing = "; ".join(p.dotted() for p in paths)
        _raise(
            AmbiguousPath,
            f"multiple paths between '{lower}' and '{upper}': {listing}; name the dimensions",
            pos,
        )
    return paths[0]


def _resolve_project(step: ast.ProjectStep, domain, schema: Schema, products: Mapping, out: list):
    if isinstance(domain, PrimitiveDomain):
        _raise(ResolveError, f"the chain already ended at primitive values '{domain}'", step.pos)

    # explicit dimensions, possibly starting with a product factor alias
    segs: list[Dimension] = []
    cur = domain
    dims = list(step.dims)
    if isinstance(domain, ProductCollection):
        if not dims:
            _raise(ResolveError, "projection from a product names a factor alias first", step.pos)
        first = dims.pop(0)
        if first not in domain.alias_index:
            known = ", ".join(sorted(domain.alias_index))
            _raise(UnknownDimension, f"'{first}' is not a factor alias ({known})", step.pos)
        segs.append(Dimension(first, domain.label, domain.collection_of(first)))
        cur = domain.collection_of(first)
        if not dims and step.target is None:
            out.append(PlanProject(DimensionPath(tuple(segs)), cur, f"-> {first} -> ({cur})"))
            return cur

    if not dims and step.target is not None and not segs:
        target, post = _resolve_step_target(step.target, schema, products)
        if isinstance(target, ProductCollection):
            _raise(ResolveError, "use '<-*' to reach a product collection", step.pos)
        path = _unique_up_path(schema, cur, target, step.pos)
        out.append(PlanProject(path, target, f"-> ({target})"))
        if post is not None:
            out.append(PlanFilter(post, print_predicate(step.target.predicate)))
        return target

    for k, name in enumerate(dims):
        concept = schema.concept(cur)
        f = concept.field(name)
        last = k == len(dims) - 1
        if f is None:
            if len(step.dims) == 1 and step.target is None and name in schema.concepts:
                # bare '-> Coll' reads as '-> (Coll)' when no dimension matches
                path = _unique_up_path(schema, cur, name, step.pos)
                out.append(PlanProject(path, name, f"-> ({name})"))
                return name
            _raise(UnknownDimension, f"no dimension or field '{name}' on '{cur}'", step.pos)
        if f.is_primitive:
            if not last or step.target is not None:
                _raise(
                    ResolveError,
                    f"'{cur}.{name}' is primitive and ends the chain",
                    step.pos,
                )
            dom = PrimitiveDomain(cur, name, f.type)
            out.append(PlanProjectField(tuple(segs), f, dom, f"-> {name}"))
            return dom
        segs.append(schema.dimension(cur, name))
        cur = f.type

    if step.target is not None:
        target, post = _resolve_step_target(step.target, schema, products)
        if isinstance(target, ProductCollection):
            _raise(ResolveError, "use '<-*' to reach a product collection", step.pos)
        if target != cur:
            dotted = ".".join(step.dims)
            _raise(ResolveError, f"'{dotted}' arrives at '{cur}', not '{target}'", step.pos)
        out.append(PlanProject(DimensionPath(tuple(segs)), cur,
                               "-> " + " -> ".join(step.dims) + f" -> ({cur})"))
        if post is not None:
            out.append(PlanFilter(post, print_predicate(step.target.predicate)))
        return cur
    out.append(PlanProject(DimensionPath(tuple(segs)), cur,
                           "-> " + " -> ".join(step.dims)))
    return cur


def _resolve_deproject(step: ast.DeprojectStep, domain, schema: Schema,
                       products: Mapping, out: list):
    cur = _require_collection_domain(domain, step.pos, "'<-'")

    if not step.dims:
        target, post = _resolve_step_target(step.target, schema, products)
        if isinstance(target, ProductCollection):
            _raise(ResolveError, "use '<-*' to reach a product collection", step.pos)
        path = _unique_up_path(schema, target, cur, step.pos)
        out.append(PlanDeproject(path, target, f"<- ({target})"))
        if post is not None:
            out.append(PlanFilter(post, print_predicate(step.target.predicate)))
        return target

    if step.target is not None:
        target, post = _resolve_step_target(step.target, schema, products)
        if isinstance(target, ProductCollection):
            _raise(ResolveError, "use '<-*' to reach a product collection", step.pos)
        segs: list[Dimension] = []
        walk = target
        for name in reversed(step.dims):
            d = schema.dimension(walk, name)
            if d is None:
                _raise(UnknownDimension, f"no dimension '{name}' on '{walk}'", step.pos)
            segs.append(d)
            walk = d.destination
        if walk != cur:
            dotted = " <- ".join(step.dims)
            _raise(ResolveError, f"'{dotted} <- ({target})' arrives at '{walk}', not '{cur}'",
                   step.pos)
        out.append(PlanDeproject(DimensionPath(tuple(segs)), target,
                                 "<- " + " <- ".join(step.dims) + f" <- ({target})"))
        if post is not None:
            out.append(PlanFilter(post, print_predicate(step.target.predicate)))
        return target

    # no explicit source collection: walk down one dimension name at a time
    segs_down: list[Dimension] = []
    walk = cur
    for name in step.dims:
        cands = [d for d in schema.dimensions_into(walk) if d.name == name]
        if not cands:
            _raise(UnknownDimension, f"no dimension '{name}' arrives at '{walk}'", step.pos)
        if len(cands) > 1:
            sources = ", ".join(sorted(d.source for d in cands))
            _raise(
                AmbiguousPath,
                f"dimension '{name}' arrives at '{walk}' from several collections "
                f"({sources}); finish with one in parentheses",
                step.pos,
            )
        segs_down.append(cands[0])
        walk = cands[0].source
    path = DimensionPath(tuple(reversed(segs_down)))
    out.append(PlanDeproject(path, walk, "<- " + " <- ".join(step.dims)))
    return walk


def _resolve_literal_anchor(lits, first: ast.DeprojectStep, schema: Schema, out: list):
    if not first.dims:
        _raise(ResolveError, "constants de-project through a field name first", first.pos)
    field_name = first.dims[0]
    rest = first.dims[1:]

    post = None
    if first.target is not None:
        one = _single_factor(first.target)
        if one is None or one.collection not in schema.concepts:
            name = one.collection if one is not None else print_set_expr(first.target)
            _raise(UnknownCollection, f"unknown collection '{name}'", first.pos)
        target = one.collection
        if first.target.predicate is not None:
            post = compile_predicate(_anchor_ctx(schema, target, one.alias),
                                     first.target.predicate)
        segs: list[Dimension] = []
        walk = target
        for name in reversed(rest):
            d = schema.dimension(walk, name)
            if d is None:
                _raise(UnknownDimension, f"no dimension '{name}' on '{walk}'", first.pos)
            segs.append(d)
            walk = d.destination
        owner = walk
        tail = DimensionPath(tuple(segs)) if segs else None
    else:
        if rest:
            _raise(ResolveError, "finish the de-projection with a collection in parentheses",
                   first.pos)
        owners = sorted(
            c.name for c in schema.concepts.values()
            if c.field(field_name) is not None and c.field(field_name).is_primitive
        )
        if not owners:
            _raise(ResolveError, f"no collection has a primitive field '{field_name}'", first.pos)
        if len(owners) > 1:
            _raise(
                AmbiguousPath,
                f"field '{field_name}' exists on several collections "
                f"({', '.join(owners)}); name one in parentheses",
                first.pos,
            )
        owner = owners[0]
        target = owner
        tail = None

    fld = schema.concept(owner).field(field_name)
    if fld is None or not fld.is_primitive:
        _raise(ResolveError, f"'{owner}.{field_name}' is not a primitive field", first.pos)
    values = []
    for lit in lits:
        if lit.value is None:
            continue  # de-projection never matches NULL
        values.append(_coerce_literal(lit.value, fld.type, lit.pos))
    domain = PrimitiveDomain(owner, field_name, fld.type)
    anchor = LiteralAnchor(domain, tuple(values), ", ".join(print_literal(l) for l in lits))
    text = "<- " + " <- ".join(first.dims)
    if first.target is not None:
        text += f" <- ({target})"
    out.append(PlanDeprojectValues(owner, fld, tail, target, text))
    if post is not None:
        out.append(PlanFilter(post, print_predicate(first.target.predicate)))
    return anchor, target


def _resolve_star_project(step: ast.StarProjectStep, domain, schema: Schema,
                          products: Mapping, out: list):
    if isinstance(domain, PrimitiveDomain):
        _raise(ResolveError, f"the chain already ended at primitive values '{domain}'", step.pos)
    target, post = _resolve_step_target(step.target, schema, products)
    if isinstance(target, ProductCollection):
        _raise(ResolveError, "'*->' cannot arrive at a product; use '<-*'", step.pos)
    if isinstance(domain, ProductCollection):
        paths = product_up_paths(schema, domain, target)
        if not paths:
            raise NoPath(f"no factor of product '{domain.name}' reaches '{target}'")
    elif domain == target:
        paths = []
    else:
        paths = enumerate_up_paths(schema, domain, target)
        if not paths:
            raise NoPath(
                f"no upward path from '{domain}' to '{target}'; "
                "'<-*->' routes through common lesser collections"
            )
    out.append(PlanStarProject(target, tuple(paths), f"*-> ({target})"))
    if post is not None:
        out.append(PlanFilter(post, print_predicate(step.target.predicate)))
    return target


def _resolve_star_deproject(step: ast.StarDeprojectStep, domain, schema: Schema,
                            products: Mapping, out: list):
    cur = _require_collection_domain(domain, step.pos, "'<-*'")
    target, post = _resolve_step_target(step.target, schema, products)
    if isinstance(target, ProductCollection):
        paths = product_up_paths(schema, target, cur)
        if not paths:
            raise NoPath(f"no factor of product '{target.name}' reaches '{cur}'")
        out.append(PlanStarDeproject(target, tuple(paths), f"<-* ({target.name})"))
        return target
    if target == cur:
        paths = []
    else:
        paths = enumerate_up_paths(schema, target, cur)
        if not paths:
            raise NoPath(
                f"no downward path from '{cur}' to '{target}'; "
                "'<-*->' routes through common lesser collections"
            )
    out.append(PlanStarDeproject(target, tuple(paths), f"<-* ({target})"))
    if post is not None:
        out.append(PlanFilter(post, print_predicate(step.target.predicate)))
    return target


def _resolve_infer(step: ast.InferStep, domain, schema: Schema, products: Mapping,
                   out: list, warnings: list):
    if isinstance(domain, PrimitiveDomain):
        _raise(ResolveError, f"the chain already ended at primitive values '{domain}'", step.pos)
    target, post = _resolve_step_target(step.target, schema, products)

    routes: tuple[InferRoute, ...] = ()
    warning = None
    if isinstance(target, ProductCollection):
        src = domain if isinstance(domain, str) else None
        if src is None:
            if target is not domain:
                raise NoPath("cannot infer between two different products")
        else:
            paths = product_up_paths(schema, target, src)
            if paths:
                routes = (InferRoute(None, tuple(paths), ()),)
            else:
                warning = INDEPENDENT_WARNING
    elif isinstance(domain, ProductCollection):
        paths = product_up_paths(schema, domain, target)
        if paths:
            routes = (InferRoute(None, (), tuple(paths)),)
        else:
            warning = INDEPENDENT_WARNING
    elif target == domain:
        routes = ()
    elif target in schema.above(domain):
        routes = (InferRoute(None, (), tuple(enumerate_up_paths(schema, domain, target))),)
    elif target in schema.below(domain):
        routes = (InferRoute(None, tuple(enumerate_up_paths(schema, target, domain)), ()),)
    else:
        commons = common_lesser_collections(schema, domain, target)
        if commons:
            routes = tuple(
                InferRoute(
                    via,
                    tuple(enumerate_up_paths(schema, via, domain)),
                    tuple(enumerate_up_paths(schema, via, target)),
                )
                for via in commons
            )
        else:
            warning = INDEPENDENT_WARNING
    if warning is not None:
        warnings.append(warning)
    name = target.name if isinstance(target, ProductCollection) else target
    out.append(PlanInfer(target, None, routes, warning, f"<-*-> ({name})"))
    if post is not None:
        out.append(PlanFilter(post, print_predicate(step.target.predicate)))
    return target


def resolve(query: ast.Query, schema: Schema, products: Mapping | None = None) -> QueryPlan:
    """Bind a parsed query against a schema; returns the executable plan."""
    products = products or {}
    warnings: list[str] = []
    steps_out: list = []

    if isinstance(query.anchor, ast.SetExpr):
        anchor, domain = _resolve_set_anchor(query.anchor, schema, products)
        pending = list(query.steps)
    else:
        if not query.steps or not isinstance(query.steps[0], ast.DeprojectStep):
            _raise(ResolveError, "constants must be followed by a de-projection ('<-')",
                   query.pos)
        anchor, domain = _resolve_literal_anchor(
            query.anchor, query.steps[0], schema, steps_out
        )
        pending = list(query.steps[1:])

    for st in pending:
        if isinstance(st, ast.ProjectStep):
            domain = _resolve_project(st, domain, schema, products, steps_out)
        elif isinstance(st, ast.DeprojectStep):
            domain = _resolve_deproject(st, domain, schema, products, steps_out)
        elif isinstance(st, ast.StarProjectStep):
            domain = _resolve_star_project(st, domain, schema, products, steps_out)
        elif isinstance(st, ast.StarDeprojectStep):
            domain = _resolve_star_deproject(st, domain, schema, products, steps_out)
        elif isinstance(st, ast.InferStep):
            domain = _resolve_infer(st, domain, schema, products, steps_out, warnings)
        else:
            raise TypeError(f"not a step: {st!r}")

    return QueryPlan(anchor, tuple(steps_out), tuple(warnings), print_query(query))


def resolve_product(pd: ast.ProductDef, schema: Schema,
                    products: Mapping | None = None) -> ProductCollection:
    """Bind a product definition; the result can be registered under its name."""
    if pd.name in schema.concepts:
        _raise(ResolveError, f"'{pd.name}' is already a collection", pd.pos)
    if len(pd.body.factors) < 2:
        _raise(ResolveError, "a product needs at least two factors", pd.pos)
    product = _product_from_set_expr(pd.body, schema)
    return ProductCollection(pd.name, product.factors, product.predicate,
                             print_set_expr(pd.body))


# --- explain --------------------------------------------------------------------


def _up_lines(path: DimensionPath) -> list[str]:
    return [f"-> {seg.name} -> ({seg.destination})" for seg in path.segments]


def _down_lines(path: DimensionPath) -> list[str]:
    return [f"<- {seg.name} <- ({seg.source})" for seg in reversed(path.segments)]


def _explain_step(step) -> list[str]:
    if isinstance(step, PlanFilter):
        return [f"| {step.text}"]
    if isinstance(step, PlanProject):
        return _up_lines(step.path)
    if isinstance(step, PlanProjectField):
        lines = _up_lines(DimensionPath(step.dims)) if step.dims else []
        return lines + [f"-> {step.field.name}"]
    if isinstance(step, PlanDeproject):
        return _down_lines(step.path)
    if isinstance(step, PlanDeprojectValues):
        lines = [f"<- {step.field.name} <- ({step.owner})"]
        if step.tail is not None:
            lines.extend(_down_lines(step.tail))
        return lines
    if isinstance(step, PlanStarProject):
        if not step.paths:
            return []
        if len(step.paths) == 1:
            return _up_lines(step.paths[0])
        lines = [f"*-> ({step.target}) over {len(step.paths)} paths:"]
        lines.extend(f"  path: {p.dotted()}" for p in step.paths)
        return lines
    if isinstance(step, PlanStarDeproject):
        name = step.target.name if isinstance(step.target, ProductCollection) else step.target
        if not step.paths:
            return []
        if len(step.paths) == 1:
            return _down_lines(step.paths[0])
        lines = [f"<-* ({name}) over {len(step.paths)} paths:"]
        lines.extend(f"  path: {p.dotted()}" for p in step.paths)
        return lines
    if isinstance(step, PlanInfer):
        name = step.target.name if isinstance(step.target, ProductCollection) else step.target
        if step.warning is not None:
            return [f"<-*-> ({name})"]
        if not step.routes:
            return []
        if len(step.routes) == 1:
            r = step.routes[0]
            if len(r.down_paths) <= 1 and len(r.up_paths) <= 1:
                lines = []
                for p in r.down_paths:
                    lines.extend(_down_lines(p))
                for p in r.up_paths:
                    lines.extend(_up_lines(p))
                return lines
        lines = [f"<-*-> ({name}) over {len(step.routes)} routes:"]
        for r in step.routes:
            lines.append(f"via {r.via}:" if r.via is not None else "direct:")
            for p in r.down_paths:
                lines.append(f"  down: {p.dotted()}")
            for p in r.up_paths:
                lines.append(f"  up: {p.dotted()}")
        return lines
    raise TypeError(f"not a plan step: {step!r}")


def explain(plan: QueryPlan) -> str:
    """Human-readable listing of the motions a plan will make, one hop per line."""
    lines = [plan.anchor.text]
    for step in plan.steps:
        lines.extend(_explain_step(step))
    for w in plan.warnings:
        lines.append(f"warning: {w}")
    return "\n".join(lines)
