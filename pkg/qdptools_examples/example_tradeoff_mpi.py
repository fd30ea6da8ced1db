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
# Privacy-utility map of the optimal and isotropic channels on a fine
# gamma grid, one sweep point per MPI task.
# usage: mpirun -np 9 python3 -u example_tradeoff_mpi.py
import time
import h5py
import numpy as np
import qdptools.harness
import qdptools.harness_mpi

batchname = 'tradeoff_fine'
datafile_hdf5 = batchname + '.hdf5'

wall_start = time.time()
wall_limit_total = 70*60*60

gammas = np.logspace(-3, np.log10(0.3), 32)
cfg = qdptools.harness.ExperimentConfig(gamma_grid=list(gammas),
                                        modes=['isotropic', 'optimal'])
arglist = qdptools.harness_mpi.sweep_arglist('tradeoff', cfg)

# get the MPI execution object
ms = qdptools.harness_mpi.SweepMpiScheduler(wall_start, wall_limit_total)

# run the calculations
finishedruns = ms.run(arglist)

# master process write an HDF5 file
if finishedruns is not None:
    eps = np.full((2, gammas.size), np.nan)
    accuracy = np.full((2, gammas.size), np.nan)
    fidelity = np.full((2, gammas.size), np.nan)
    for flatindex, args in enumerate(arglist):
        rows = finishedruns.get(flatindex)
        if rows is None:
            continue
        imode = cfg.modes.index(args['point']['mode'])
        igamma = int(np.argmin(np.abs(gammas - args['point']['gamma'])))
        eps[imode, igamma] = rows[0]['epsilon']
        accuracy[imode, igamma] = rows[0]['accuracy']
        fidelity[imode, igamma] = rows[0]['fidelity']

    with h5py.File(datafile_hdf5, 'w') as h5f:
        grp = h5f.create_group(batchname)
        grp.attrs['alpha'] = cfg.alpha
        grp.attrs['Delta'] = cfg.Delta
        grp.attrs['c'] = cfg.c
        grp.attrs['seed'] = cfg.seed
        grp.attrs['modes'] = ','.join(cfg.modes)
        grp.create_dataset('gamma', data=gammas)
        grp.create_dataset('epsilon', data=eps)
        grp.create_dataset('accuracy', data=accuracy)
        grp.create_dataset('fidelity', data=fidelity)
