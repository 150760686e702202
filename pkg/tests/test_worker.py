import pytest

from entrolim.verify import Cell
from entrolim.worker import CellManager


def squared_seed(cell):
    if cell.seed == 3:
        raise ValueError('cell %d is bad' % cell.cell_id)
    return cell.seed ** 2


def make_cells(count):
    return [Cell(i, {}, {}, 2.0, 0, i, {}) for i in range(count)]


@pytest.mark.parametrize('threads', [1, 3])
def test_run(threads):
    reports, failures = CellManager(squared_seed, threads).run(make_cells(6))
    assert sorted(reports) == [0, 1, 4, 16, 25]
    assert len(failures) == 1
    cell_id, message = failures[0]
    assert cell_id == 3
    assert 'ValueError: cell 3 is bad' in message


def test_empty():
    assert CellManager(squared_seed, 4).run([]) == ([], [])


def test_threads_floor():
    assert CellManager(squared_seed, 0).threads == 1
