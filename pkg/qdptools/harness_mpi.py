#
# Copyright 2026 The qdptools developers
#
#    This file is part of qdptools.
#
#    qdptools is free software: you can redistribute it and/or modify
#    it under the terms of the GNU General Public License as published by
#    the Free Software Foundation, either version 3 of the License, or
#    (at your option) any later version.
#
#    qdptools is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU General Public License for more details.
#
#    You should have received a copy of the GNU General Public License
#    along with qdptools.  If not, see <https://www.gnu.org/licenses/>.
#
# An MPI driver for the experiment sweeps, one sweep point per task.
# usage: mpirun -np 5 python3 -u -m qdptools tradeoff --mpi
import collections
import time
import warnings
import dill
from mpi4py import MPI
from . import harness


class MpiScheduler:
    """Execute a list of sweep points on MPI tasks.

    Rank 0 hands out indices into the point list and collects results, the
    other ranks compute. Needs at least two ranks.

    Args:
        wall_start: time.time() at the start of the job.
        wall_limit_total: Seconds after wall_start to stop handing out work.
        verbose (optional): If True, print scheduling progress.
            Defaults to False.
    """

    def __init__(self, wall_start, wall_limit_total, verbose=False):
        self.verbose = verbose
        self.comm = MPI.COMM_WORLD
        self.rank = self.comm.Get_rank()
        self.nranks = self.comm.Get_size()
        self.wall_start = wall_start
        self.wall_limit_total = wall_limit_total
        assert self.comm.size > 1

    def run(self, arglist):
        """Dict of index to result on rank 0, None on the other ranks."""
        if self.rank == 0:
            return self.masterprocess(arglist)
        else:
            self.slaveprocess(arglist)
            return None

    def in_time(self):
        return time.time() < self.wall_start + self.wall_limit_total

    def masterprocess(self, campaign):
        if self.verbose:
            print('Master Process rank ', self.rank, flush=True)
        emptyflag = False
        am = collections.deque(range(0, len(campaign)))
        finishedruns = {}
        waiting = []
        for dest in range(1, self.nranks):
            if len(am) > 0:
                self.comm.send(['run', am.popleft()], dest=dest, tag=1)
            else:
                self.comm.send(['wait'], dest=dest, tag=1)

        exitFlag = False
        while self.in_time() and not exitFlag:
            status = MPI.Status()
            finished = self.comm.recv(source=MPI.ANY_SOURCE, tag=2,
                                      status=status)
            if finished[0] == 'finished':
                finishedruns[finished[1]] = finished[2]
            elif finished[0] == 'waiting':
                if status.source not in waiting:
                    waiting.append(status.source)
            else:
                print('Error, MpiScheduler unknown status message ', finished,
                      flush=True)
            dest = status.source
            # a waiting rank must not be told to wait twice
            if len(am) > 0:
                self.comm.send(['run', am.popleft()], dest=dest, tag=1)
            elif dest not in waiting:
                if self.verbose:
                    print('Rank {:d} commanded to wait'.format(dest),
                          flush=True)
                self.comm.send(['wait'], dest=dest, tag=1)

            if len(am) < 10 and not emptyflag:
                if self.verbose:
                    print('***Master unassigned list is now ', list(am),
                          flush=True)
                if len(am) == 0:
                    emptyflag = True
            if len(am) == 0 and len(waiting) == self.nranks - 1:
                exitFlag = True

        for dest in range(1, self.nranks):
            self.comm.isend(['exit'], dest=dest, tag=1)
        if self.verbose:
            print('Exit rank ', self.rank, flush=True)
        return finishedruns

    def slaveprocess(self, campaign):
        if self.verbose:
            print('Slave Process rank ', self.rank, flush=True)
        exitFlag = False
        while self.in_time() and not exitFlag:
            cmd = self.comm.recv(source=0, tag=1)
            if cmd[0] == 'run':
                result = self.runcompute(campaign[cmd[1]])
                self.comm.isend(['finished', cmd[1], result], dest=0, tag=2)
            elif cmd[0] == 'exit':
                exitFlag = True
            else:
                self.comm.isend(['waiting'], dest=0, tag=2)
        if self.verbose:
            print('Exit rank ', self.rank, flush=True)

    def runcompute(self, args):
        """Override in subclasses."""
        raise NotImplementedError


class SweepMpiScheduler(MpiScheduler):
    """Evaluate harness sweep points.

    Each entry of the argument list is a dict with keys 'name', 'config'
    and 'point', as passed to harness.evaluate_point. A point that raises
    is pickled to failed_point_<rank>.pickle and returns None.
    """

    def runcompute(self, args):
        try:
            return harness.evaluate_point(args['name'], args['config'],
                                          args['point'])
        except (ValueError, RuntimeError) as err:
            with open('failed_point_{:04d}.pickle'.format(self.rank),
                      'wb') as f:
                dill.dump({'args': args, 'error': repr(err)}, f)
            print('Rank {:d} failed on {} : {}'.format(self.rank,
                                                       args['point'], err),
                  flush=True)
            return None


def sweep_arglist(name, cfg):
    return [{'name': name, 'config': cfg.to_dict(), 'point': p}
            for p in harness.sweep_points(name, cfg)]


def run_sweep_mpi(name, cfg, wall_limit_total=70*60*60):
    """MPI version of harness.run_sweep.

    Returns the rows in sweep-point order on rank 0 and None elsewhere.
    Points that failed or were not reached before the wall limit are
    dropped with a warning.
    """
    arglist = sweep_arglist(name, cfg)
    ms = SweepMpiScheduler(time.time(), wall_limit_total,
                           verbose=cfg.verbose_flag)
    finishedruns = ms.run(arglist)
    if finishedruns is None:
        return None
    missing = [i for i in range(len(arglist))
               if finishedruns.get(i) is None]
    if missing:
        warnings.warn('run_sweep_mpi: {:d} sweep points missing {}'
                      .format(len(missing), missing))
    rows = [row for i in range(len(arglist)) if finishedruns.get(i)
            for row in finishedruns[i]]
    return harness.finish_rows(name, rows)
