"""Ingest, identity encoding, snapshots, execution, and rendering."""

import datetime
import json
from decimal import Decimal
from pathlib import Path

import pytest

from comdb import algebra, engine, model
from comdb.errors import FileError, HeaderMismatch, UnknownCollection

SCHEMA = """
CONCEPT Addresses IDENTITY id INT ENTITY country CHAR(2) NOT NULL;
CONCEPT Publishers IDENTITY name CHAR(40) ENTITY address Addresses;
"""

COMPOSITE = """
CONCEPT Slots IDENTITY day DATE, room CHAR(8);
CONCEPT Talks IDENTITY id INT ENTITY slot Slots NOT NULL;
"""


def fresh(text: str = SCHEMA) -> engine.Database:
    db = engine.Database()
    engine.load_schema(db, text)
    return db


def write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


# --- identity encoding -------------------------------------------------------


def test_scalar_encoding_round_trip():
    assert engine.encode_scalar(Decimal("9.50")) == "9.50"
    assert engine.encode_scalar(datetime.date(2021, 5, 3)) == "2021-05-03"
    assert engine.encode_scalar(7) == "7"


def test_single_field_identity_encodes_bare():
    assert engine.encode_identity((5,)) == "5"
    db = fresh()
    addr = db.schema.concept("Addresses")
    assert engine.decode_identity(addr, "5") == (5,)


def test_composite_identity_parenthesizes_and_escapes():
    enc = engine.encode_identity((1, "x(y)"))
    assert enc == "(1,x((y)))"
    db = fresh(COMPOSITE)
    slots = db.schema.concept("Slots")
    assert engine.decode_identity(slots, "(2021-05-03,r(1))") == (
        datetime.date(2021, 5, 3),
        "r(1)",
    )


def test_composite_decode_rejects_bad_shapes():
    db = fresh(COMPOSITE)
    slots = db.schema.concept("Slots")
    with pytest.raises(model.TypeMismatch):
        engine.decode_identity(slots, "2021-05-03")  # missing parentheses
    with pytest.raises(model.TypeMismatch):
        engine.decode_identity(slots, "(2021-05-03)")  # wrong arity


# --- CSV ingest ---------------------------------------------------------------


def test_load_csv_happy_path(tmp_path):
    db = fresh()
    f = write(tmp_path / "Addresses.csv", "id,country\n1,DE\n2,US\n")
    report = engine.load_csv(db, "Addresses", f)
    assert report.inserted == 2 and report.rejected == []
    assert db.collections["Addresses"].elements[(2,)].entity["country"] == "US"


def test_load_csv_tolerates_bom_and_any_column_order(tmp_path):
    db = fresh()
    f = tmp_path / "Addresses.csv"
    f.write_bytes("﻿country,id\nDE,1\n".encode("utf-8"))
    report = engine.load_csv(db, "Addresses", f)
    assert report.inserted == 1


def test_load_csv_reads_empty_and_null_as_null(tmp_path):
    db = fresh()
    write(tmp_path / "Addresses.csv", "id,country\n1,DE\n")
    engine.load_csv(db, "Addresses", tmp_path / "Addresses.csv")
    f = write(tmp_path / "Publishers.csv", "name,address\nSpringer,1\nWiley,\nHanser,NULL\n")
    engine.load_csv(db, "Publishers", f)
    assert db.collections["Publishers"].elements[("Wiley",)].entity["address"] is None
    assert db.collections["Publishers"].elements[("Hanser",)].entity["address"] is None


def test_load_csv_rejects_bad_rows_with_line_numbers(tmp_path):
    db = fresh()
    f = write(
        tmp_path / "Addresses.csv",
        "id,country\n1,DE\nnope,US\n1,US\n2\n2,FR\n",
    )
    report = engine.load_csv(db, "Addresses", f)
    assert report.inserted == 2  # rows 1,DE and 2,FR
    lines = [line for line, _ in report.rejected]
    assert lines == [3, 4, 5]
    messages = " | ".join(msg for _, msg in report.rejected)
    assert "integer" in messages          # nope is not an integer
    assert "already exists" in messages   # duplicate identity
    assert "expected 2" in messages       # short row


def test_load_csv_strict_aborts_on_first_bad_row(tmp_path):
    db = fresh()
    f = write(tmp_path / "Addresses.csv", "id,country\n1,DE\nnope,US\n")
    with pytest.raises(FileError) as exc:
        engine.load_csv(db, "Addresses", f, strict=True)
    assert ":3:" in str(exc.value)


def test_load_csv_header_must_match_fields(tmp_path):
    db = fresh()
    for body in (
        "id\n1\n",                     # missing field
        "id,country,extra\n1,DE,x\n",  # unknown field
        "id,country,id\n1,DE,1\n",     # duplicated header
    ):
        f = write(tmp_path / "Addresses.csv", body)
        with pytest.raises(HeaderMismatch):
            engine.load_csv(db, "Addresses", f)


def test_load_csv_empty_file_is_a_header_error(tmp_path):
    db = fresh()
    f = write(tmp_path / "Addresses.csv", "")
    with pytest.raises(HeaderMismatch):
        engine.load_csv(db, "Addresses", f)


def test_load_csv_unknown_collection(tmp_path):
    db = fresh()
    f = write(tmp_path / "Nope.csv", "id\n1\n")
    with pytest.raises(UnknownCollection):
        engine.load_csv(db, "Nope", f)


def test_load_csv_composite_references(tmp_path):
    db = fresh(COMPOSITE)
    write(tmp_path / "Slots.csv", "day,room\n2021-05-03,r1\n")
    engine.load_csv(db, "Slots", tmp_path / "Slots.csv")
    f = write(tmp_path / "Talks.csv", "id,slot\n1,\"(2021-05-03,r1)\"\n")
    report = engine.load_csv(db, "Talks", f)
    assert report.inserted == 1
    talk = db.collections["Talks"].elements[(1,)]
    assert talk.entity["slot"] == (datetime.date(2021, 5, 3), "r1")


def test_load_order_visits_greater_collections_first(market_db):
    order = engine.load_order(market_db.schema)
    assert order == ["Books", "Shops", "Sellers", "Writers", "WriterBooks"]
    pos = {name: i for i, name in enumerate(order)}
    for d in market_db.schema.dimensions:
        assert pos[d.destination] < pos[d.source]


def test_load_data_dir_reports_and_unmatched(tmp_path):
    db = fresh()
    write(tmp_path / "Addresses.csv", "id,country\n1,DE\n")
    write(tmp_path / "Publishers.csv", "name,address\nSpringer,1\n")
    write(tmp_path / "Readme.csv", "a\n1\n")
    reports, unmatched = engine.load_data_dir(db, tmp_path)
    assert [r.collection for r in reports] == ["Addresses", "Publishers"]
    assert unmatched == ["Readme"]
    with pytest.raises(FileError):
        engine.load_data_dir(db, tmp_path / "missing")


# --- versioning and snapshots ---------------------------------------------------


def test_insert_bumps_version_once_per_mutation():
    db = fresh()
    assert db.version == 0
    db.insert("Addresses", 1, {"country": "DE"})
    db.insert("Addresses", 2, {"country": "US"})
    assert db.version == 2


def test_bulk_load_bumps_version_once_per_file(tmp_path):
    db = fresh()
    write(tmp_path / "Addresses.csv", "id,country\n1,DE\n2,US\n")
    engine.load_csv(db, "Addresses", tmp_path / "Addresses.csv")
    assert db.version == 1


def test_snapshot_pins_version_and_products(market_db):
    db = market_db
    snap = db.snapshot()
    v = snap.version
    kind, pc = engine.execute_statement(db, "Deals = (WriterBooks wb, Sellers s | wb.book == s.book)")
    db.register_product(pc)
    db.insert("Shops", "s3")
    assert snap.version == v
    assert "Deals" not in snap.products
    # storage is shared, algebra keeps working against the snapshot
    shops = algebra.full_set(snap, "Shops")
    assert len(shops) == 3


# --- statement execution ----------------------------------------------------------


def test_execute_statement_routes_products_and_queries(market_db):
    kind, pc = engine.execute_statement(
        market_db, "Deals = (WriterBooks wb, Sellers s | wb.book == s.book)"
    )
    assert kind == "product" and pc.name == "Deals"
    market_db.register_product(pc)
    kind2, rs = engine.execute_statement(market_db, "(Deals)")
    assert kind2 == "result"
    assert rs.kind == "product" and rs.columns == ("wb", "s")
    assert rs.identities == [((1,), (10,)), ((2,), (20,))]


def test_identical_warnings_are_deduplicated(market_db):
    rs = market_db.query("(Writers | age < 30) <-*-> (Shops) <-*-> (Writers)")
    assert rs.warnings == (algebra.INDEPENDENT_WARNING,)


def test_results_are_sorted_by_identity(catalog_db):
    rs = catalog_db.query("(Books)")
    assert [i[0] for i in rs.identities] == ["b1", "b2", "b3", "b4", "b5"]


# --- rendering ---------------------------------------------------------------------


def test_render_table_golden(catalog_db):
    rs = catalog_db.query("(Books | price < 10)")
    assert engine.render_table(rs) == (
        "isbn  title  price  publisher\n"
        "----  -----  -----  ---------\n"
        "b1    Alpha  9.50   Springer\n"
        "b3    Gamma  8      Wiley\n"
        "b4    Delta  5      NULL\n"
        "(3 rows)"
    )


def test_render_table_singular_row(catalog_db):
    rs = catalog_db.query("(Books | isbn == 'b1') -> publisher -> address -> country")
    assert engine.render_table(rs) == "country\n-------\nDE\n(1 row)"


def test_render_csv_golden(catalog_db):
    rs = catalog_db.query("(Books | price < 10)")
    assert engine.render_csv(rs) == (
        "isbn,title,price,publisher\n"
        "b1,Alpha,9.50,Springer\n"
        "b3,Gamma,8,Wiley\n"
        "b4,Delta,5,"
    )


def test_render_json_golden(catalog_db):
    rs = catalog_db.query("(Books | price < 10)")
    lines = engine.render_json(rs).splitlines()
    rows = [json.loads(line) for line in lines]
    assert rows[0] == {
        "isbn": "b1", "title": "Alpha", "price": "9.50",
        "publisher": "Springer", "_identity": "b1",
    }
    assert rows[2]["publisher"] is None


def test_render_dispatch_rejects_unknown_format(catalog_db):
    rs = catalog_db.query("(Books)")
    assert engine.render(rs, "csv") == engine.render_csv(rs)
    with pytest.raises(ValueError):
        engine.render(rs, "yaml")


# --- outlines -----------------------------------------------------------------------


def test_schema_outline_golden(colors_db):
    assert engine.schema_outline(colors_db.schema) == (
        "X\n"
        "  Z (x)\n"
        "Y\n"
        "  Z (y)"
    )


def test_collections_outline_golden(colors_db):
    assert engine.collections_outline(colors_db) == (
        "X: 3 elements\n"
        "Y: 3 elements\n"
        "Z: 4 elements"
    )


def test_explain_is_exposed_on_the_database(colors_db):
    text = colors_db.explain("(X | name == 'red') <-*-> (Y)")
    assert "(X | name == 'red')" in text
    assert "<- x <- (Z)" in text
    assert "-> y -> (Y)" in text
