import logging
import multiprocessing
import queue
import time
import traceback

log = logging.getLogger(__name__)

POLL_INTERVAL = 0.1


class CellWorker(object):
    # Runs sweep cells and posts (op, result) tuples back to the manager.
    # Exceptions never escape a task: they are posted as ('exception',
    # (cell_id, formatted traceback)) and the worker carries on.

    def __init__(self, run_cell, result_queue):
        self.run_cell = run_cell
        self.result_queue = result_queue

    def post(self, op, result):
        self.result_queue.put((op, result))

    def post_exception(self, cell_id):
        msg = traceback.format_exc()
        self.post('exception', (cell_id, msg))

    def task(self, cell):
        try:
            self.post('report', (cell.cell_id, self.run_cell(cell)))
        except Exception:
            self.post_exception(cell.cell_id)

    def shutdown(self):
        self.post('shutdown', None)


def start_cell_worker(task_queue, result_queue, run_cell):
    worker = CellWorker(run_cell, result_queue)
    while True:
        try:
            cell = task_queue.get(True, POLL_INTERVAL)
        except queue.Empty:
            continue
        if cell == 'STOP':
            worker.shutdown()
            return
        worker.task(cell)


class CellManager(object):
    '''Distributes cells over `threads` worker processes (inline when
    threads == 1) and collects (reports, failures). failures is a list of
    (cell_id, message).'''

    def __init__(self, run_cell, threads=1):
        self.run_cell = run_cell
        self.threads = max(1, int(threads))

    def run(self, cells):
        if not cells:
            return [], []
        if self.threads == 1 or len(cells) == 1:
            return self.run_inline(cells)
        return self.run_processes(cells)

    def run_inline(self, cells):
        results = queue.Queue()
        worker = CellWorker(self.run_cell, results)
        for cell in cells:
            worker.task(cell)
        return self.collect(results, len(cells), processes=None)

    def run_processes(self, cells):
        task_queue = multiprocessing.Queue()
        result_queue = multiprocessing.Queue()
        count = min(self.threads, len(cells))
        processes = [multiprocessing.Process(None, start_cell_worker, 'cellworker-%d' % i,
                                             (task_queue, result_queue, self.run_cell))
                     for i in range(count)]
        for process in processes:
            process.start()
        for cell in cells:
            task_queue.put(cell)
        for _ in processes:
            task_queue.put('STOP')
        try:
            return self.collect(result_queue, len(cells), processes, [c.cell_id for c in cells])
        finally:
            for process in processes:
                process.join(timeout=1.0)
                if process.is_alive():
                    process.terminate()

    def collect(self, result_queue, expected, processes, cell_ids=()):
        reports, failures = [], []
        finished = set()
        drained = False
        while len(finished) < expected:
            try:
                op, result = result_queue.get(True, POLL_INTERVAL)
            except queue.Empty:
                if processes is not None and not any(p.is_alive() for p in processes):
                    if not drained:
                        # Results put just before exit may still be in flight.
                        drained = True
                        time.sleep(1.0)
                        continue
                    log.error('All sweep worker processes died with %d cell(s) outstanding', expected - len(finished))
                    for cell_id in cell_ids:
                        if cell_id not in finished:
                            failures.append((cell_id, 'Sweep worker process died'))
                    break
                continue
            if op == 'report':
                cell_id, report = result
                finished.add(cell_id)
                reports.append(report)
                log.debug('Cell %d done', cell_id)
            elif op == 'exception':
                cell_id, msg = result
                finished.add(cell_id)
                failures.append(result)
                log.debug('Cell %d raised:\n%s', cell_id, msg)
        return reports, failures
