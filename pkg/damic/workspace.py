# -*- coding: utf-8 -*-
"""A small SQLite ledger of comparative runs.

- Ledger:
    A database connection that knows the damic version it was created with.
- Result:
    One (method, seed) outcome: NMI, ARI, ACC, empty clusters and final loss.
"""
import contextlib

import peewee as pw
import semantic_version as semver

from damic import DataError

_db = pw.SqliteDatabase(None)


class LedgerModel(pw.Model):

    class Meta:
        database = _db


class Result(LedgerModel):

    method = pw.CharField()
    seed = pw.IntegerField()
    nmi = pw.FloatField()
    ari = pw.FloatField()
    acc = pw.FloatField()
    empty_clusters = pw.IntegerField(default=0)
    final_loss = pw.FloatField(null=True)

    class Meta:
        indexes = ((('method', 'seed'), True),)

    def __repr__(self):
        return "Result {}:{} nmi={:.4f}".format(self.method, self.seed, self.nmi)


class _metadata(LedgerModel):

    version = pw.TextField()


_tables = [Result, _metadata]


class Ledger(object):

    def __init__(self, db):
        self.db = db

    def create_tables(self, version):
        self.db.create_tables(_tables, safe=True)
        if _metadata.select().count() == 0:
            _metadata.create(version=version)

    @property
    def version(self):
        try:
            row = _metadata.get()
        except (_metadata.DoesNotExist, pw.OperationalError):
            return None
        return row.version

    def check_version(self, version):
        """Refuse a ledger written by a version with another major.minor."""
        ver = semver.Version(version)
        spec = semver.SimpleSpec('>={0}.{1}.0,<{0}.{2}.0'.format(
            ver.major, ver.minor, ver.minor + 1))
        found = self.version
        try:
            ledger_ver = semver.Version(found) if found else None
        except ValueError:
            ledger_ver = None
        if ledger_ver is None or ledger_ver not in spec:
            raise DataError(
                "This ledger was created with a different version of damic.\n"
                "  Ledger version: {}\n"
                "  damic version:  {}\n"
                "Remove it or use another output directory."
                .format(found or "<NA>", ver))

    @_db.atomic()
    def record(self, method, seed, scores, empty_clusters=0, final_loss=None):
        """Store (or replace) the outcome of one method on one seed."""
        Result.delete().where(
            (Result.method == method) & (Result.seed == seed)).execute()
        return Result.create(
            method=method, seed=seed, nmi=scores['nmi'], ari=scores['ari'],
            acc=scores['acc'], empty_clusters=empty_clusters,
            final_loss=final_loss)

    def results(self, method=None):
        query = Result.select().order_by(Result.method, Result.seed)
        if method is not None:
            query = query.where(Result.method == method)
        return list(query)

    def averages(self):
        """{method: (mean nmi, mean ari, mean acc, total empty clusters, runs)}"""
        query = (Result
                 .select(Result.method,
                         pw.fn.AVG(Result.nmi).alias('nmi'),
                         pw.fn.AVG(Result.ari).alias('ari'),
                         pw.fn.AVG(Result.acc).alias('acc'),
                         pw.fn.SUM(Result.empty_clusters).alias('empty'),
                         pw.fn.COUNT(Result.id).alias('runs'))
                 .group_by(Result.method)
                 .dicts())
        return dict((row['method'], (row['nmi'], row['ari'], row['acc'],
                                     row['empty'], row['runs']))
                    for row in query)


@contextlib.contextmanager
def connection(db_name):
    """Open the ledger at db_name and close it when done."""
    _db.init(db_name)
    _db.connect(reuse_if_open=True)
    try:
        yield Ledger(_db)
    finally:
        _db.close()
