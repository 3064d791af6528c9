import pytest

from damic import DataError
from damic import workspace
from damic.workspace import Result


def _scores(v):
    return {'nmi': v, 'ari': v / 2, 'acc': v}


class TestLedger(object):

    def test_connection(self):
        with workspace.connection(':memory:') as ledger:
            assert not ledger.db.is_closed()
            assert ledger.db.database == ':memory:'

    def test_create_tables(self):
        with workspace.connection(':memory:') as ledger:
            ledger.create_tables('1.2.3')
            assert set(ledger.db.get_tables()) == set(t._meta.table_name for t in workspace._tables)
            assert ledger.version == '1.2.3'

    def test_version_check(self):
        with workspace.connection(':memory:') as ledger:
            ledger.create_tables('1.2.3')
            ledger.check_version('1.2.9')
            with pytest.raises(DataError):
                ledger.check_version('1.3.0')

    def test_record_replaces(self):
        with workspace.connection(':memory:') as ledger:
            ledger.create_tables('1.0.0')
            ledger.record('full', 0, _scores(0.5))
            ledger.record('full', 0, _scores(0.9), empty_clusters=1)
            results = ledger.results('full')
            assert len(results) == 1
            assert results[0].nmi == 0.9

    def test_averages(self):
        with workspace.connection(':memory:') as ledger:
            ledger.create_tables('1.0.0')
            ledger.record('full', 0, _scores(0.8))
            ledger.record('full', 1, _scores(1.0), empty_clusters=1)
            ledger.record('kmeans', 0, _scores(0.4), final_loss=2.5)
            averages = ledger.averages()
            nmi, ari, acc, empty, runs = averages['full']
            assert nmi == pytest.approx(0.9)
            assert ari == pytest.approx(0.45)
            assert (empty, runs) == (1, 2)
            assert averages['kmeans'][0] == pytest.approx(0.4)
            assert Result.select().count() == 3
