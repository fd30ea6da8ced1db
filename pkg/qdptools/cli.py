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
"""Command line entry point.

Every experiment subcommand writes <name>.csv and <name>_summary.json to
the output directory. Exit status is 0 on success, 1 on invalid input and
2 when --check finds a failed threshold or audit verify rejects.
"""
import argparse
import json
import os
import sys
from . import audit
from . import harness

exit_ok = 0
exit_invalid = 1
exit_failed = 2


def add_common(parser):
    parser.add_argument('--config', default=None,
                        help='TOML file of ExperimentConfig keys')
    parser.add_argument('--seed', type=int, default=None)
    parser.add_argument('--out-dir', dest='out_dir', default=None)
    parser.add_argument('--processes', type=int, default=None,
                        help='local worker processes')
    parser.add_argument('--check', action='store_true',
                        help='evaluate acceptance thresholds')
    parser.add_argument('--hdf5', action='store_true',
                        help='also append the rows to results.hdf5')
    parser.add_argument('--mpi', action='store_true',
                        help='distribute sweep points over MPI ranks')
    parser.add_argument('--verbose', action='store_true')


def build_parser():
    parser = argparse.ArgumentParser(
        prog='qdptools',
        description='Geometry-aware quantum differential privacy '
                    'experiments.')
    sub = parser.add_subparsers(dest='command', required=True)
    for name in harness.runner_names:
        if name == 'audit':
            continue
        add_common(sub.add_parser(name))

    p_audit = sub.add_parser('audit', help='commit, challenge, verify')
    audit_sub = p_audit.add_subparsers(dest='audit_command', required=True)
    p = audit_sub.add_parser('commit',
                             help='commit per-sample epsilons of the dataset')
    add_common(p)
    p = audit_sub.add_parser('challenge')
    p.add_argument('--commitment', required=True)
    p.add_argument('--n', type=int, default=None,
                   help='number of records, defaults to the commitment')
    p.add_argument('--ratio', type=float, default=0.12)
    p.add_argument('--mode', default='Interactive',
                   choices=audit.challenge_modes)
    p.add_argument('--seed', type=int, default=None)
    p.add_argument('--output', default='challenge.json')
    p = audit_sub.add_parser('verify',
                             help='verify a challenge against records, or '
                                  'a saved transcript with --transcript')
    p.add_argument('--commitment', required=True)
    p.add_argument('--records', default=None)
    p.add_argument('--challenge', default=None)
    p.add_argument('--transcript', default=None,
                   help='saved transcript to re-verify offline')
    p.add_argument('--ratio', type=float, default=None,
                   help='challenge ratio, defaults to challenge_ratio')
    p.add_argument('--n', type=int, default=None,
                   help='number of records, defaults to the commitment')
    p.add_argument('--seed', type=int, default=None,
                   help='seed of an interactive challenge to recompute')
    p.add_argument('--config', default=None)
    p.add_argument('--output', default='transcript.json')
    p = audit_sub.add_parser('run', help='honest and fraudulent trials')
    add_common(p)
    return parser


def load_config(args):
    overrides = {'seed': args.seed, 'out_dir': args.out_dir,
                 'processes': getattr(args, 'processes', None)}
    if getattr(args, 'verbose', False):
        overrides['verbose_flag'] = True
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.config is not None:
        return harness.ExperimentConfig.from_toml(args.config, **overrides)
    return harness.ExperimentConfig(**overrides)


def run_experiment(name, args):
    cfg = load_config(args)
    os.makedirs(cfg.out_dir, exist_ok=True)
    if name == 'audit':
        rows = harness.run_audit(cfg, cfg.out_dir)
    elif args.mpi:
        from . import harness_mpi
        rows = harness_mpi.run_sweep_mpi(name, cfg)
        if rows is None:
            return exit_ok
    else:
        rows = harness.runners[name](cfg)
    checks = harness.acceptance_checks(name, rows, cfg) if args.check \
        else None
    harness.write_csv(rows, os.path.join(cfg.out_dir, name + '.csv'))
    summary = harness.summarize(name, rows, cfg, checks)
    harness.write_json(summary, os.path.join(cfg.out_dir,
                                             name + '_summary.json'))
    if args.hdf5:
        spectrum = harness.get_context(cfg).spectrum \
            if name in ('tradeoff', 'pareto', 'spectrum') else None
        harness.write_hdf5(name, rows, cfg,
                           os.path.join(cfg.out_dir, 'results.hdf5'),
                           spectrum)
    print('{:s}: {:d} rows written to {:s}'.format(name, len(rows),
                                                   cfg.out_dir))
    if checks is not None:
        for c in checks:
            print('{:s} {:s} {}'.format('PASS' if c['passed'] else 'FAIL',
                                        c['check'], c['value']))
        if not summary['passed']:
            return exit_failed
    return exit_ok


def audit_commit(args):
    cfg = load_config(args)
    os.makedirs(cfg.out_dir, exist_ok=True)
    trail = harness.get_context(cfg).audit_trail
    audit.write_commitment(trail.root, trail.eps_claimed,
                           os.path.join(cfg.out_dir, 'commitment.txt'),
                           len(trail.records))
    audit.save_records(trail.records,
                       os.path.join(cfg.out_dir, 'records.json'))
    print('{:s} {:s}'.format(trail.root.hex(),
                             audit.eps_string(trail.eps_claimed)))
    return exit_ok


def committed_size(args, n_committed):
    n = args.n if args.n is not None else n_committed
    if n is None:
        raise ValueError('audit: commitment has no record count, pass --n')
    return n


def audit_challenge(args):
    root, eps, n_committed = audit.read_commitment(args.commitment)
    n = committed_size(args, n_committed)
    S = audit.challenge(n, args.ratio, args.mode, args.seed, root, eps)
    with open(args.output, 'w') as f:
        json.dump({'mode': args.mode, 'challenge_set': S}, f)
    print(' '.join(str(i) for i in S))
    return exit_ok


def audit_verify(args):
    """Verify against the published commitment.

    Fiat-Shamir challenge sets, and interactive ones when --seed is given,
    are recomputed from the commitment instead of trusted.
    """
    root, eps, n_committed = audit.read_commitment(args.commitment)
    cfg = harness.ExperimentConfig() if args.config is None \
        else harness.ExperimentConfig.from_toml(args.config)
    ratio = cfg.challenge_ratio if args.ratio is None else args.ratio
    if args.transcript is not None:
        saved = audit.load_transcript(args.transcript)
        n = committed_size(args, n_committed)
        transcript = audit.reverify(saved, cfg.mech_config(), root, eps, n,
                                    ratio)
    else:
        if args.records is None or args.challenge is None:
            raise ValueError('audit verify: pass --records and --challenge, '
                             'or --transcript')
        records = audit.load_records(args.records)
        with open(args.challenge, 'r') as f:
            challenge = json.load(f)
        S = challenge['challenge_set']
        mode = challenge.get('mode', 'Interactive')
        n = args.n if args.n is not None else n_committed
        if n is None:
            n = len(records)
        tree = audit.MerkleTree([r.leaf_hash() for r in records])
        answerable = [i for i in S if 0 <= i < len(records)]
        responses = audit.respond(tree, records, answerable)
        transcript = audit.verify(root, eps, responses, cfg.mech_config(), S,
                                  mode, n, ratio, args.seed)
    audit.save_transcript(transcript, args.output)
    print(transcript.verdict)
    for index, code in transcript.reject_reasons:
        print(' {:d} {:s}'.format(index, code))
    return exit_ok if transcript.accepted else exit_failed


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command != 'audit':
            return run_experiment(args.command, args)
        if args.audit_command == 'commit':
            return audit_commit(args)
        elif args.audit_command == 'challenge':
            return audit_challenge(args)
        elif args.audit_command == 'verify':
            return audit_verify(args)
        return run_experiment('audit', args)
    except (ValueError, IndexError, OSError) as err:
        print('qdptools: error: {}'.format(err), file=sys.stderr)
        return exit_invalid
