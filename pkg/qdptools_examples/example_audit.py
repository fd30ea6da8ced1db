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
# Commit the per-sample privacy costs of the default dataset, then run one
# non-interactive audit round against an honest and an understated claim.
import numpy as np
import qdptools.audit
import qdptools.harness

cfg = qdptools.harness.ExperimentConfig()
trail = qdptools.harness.get_context(cfg).audit_trail
print('root {:s} eps_claimed {:s}'.format(
    trail.root.hex(), qdptools.audit.eps_string(trail.eps_claimed)))

for scale in (1.0, 0.95, 0.8):
    claim = scale*trail.eps_claimed
    transcript = qdptools.audit.run_round(trail, cfg.challenge_ratio,
                                          cfg.mech_config(),
                                          mode='FiatShamir',
                                          eps_claimed=claim)
    f = np.mean([r.epsilon > claim for r in trail.records])
    k = len(transcript.challenge_set)
    error, bits = qdptools.audit.soundness_error(f, k)
    print('claim x{:.2f}: {:s}, {:d} rejected openings, fraud fraction {:.3f}'
          ', soundness error {:.3g} ({:.1f} bits)'
          .format(scale, transcript.verdict,
                  len(transcript.reject_reasons), f, error, bits))
