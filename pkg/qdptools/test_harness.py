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
import json
import os
import h5py
import numpy as np
import numpy.testing as npt
import pytest
from . import adversary
from . import audit
from . import harness
from . import mech
from . import qfi

# Tolerance for tests
rtol = 1e-9


def small_config(**kwargs):
    d = dict(n=20, gamma_grid=[0.01, 0.1], n_poison_trials=2,
             n_audit_trials=5, challenge_ratio=0.5, grid_size=8,
             thetas=[0.0, np.pi/2], dephasing_gammas=[0.0, 0.8], k_max=200,
             n_noise_points=4, batch_size=4, n_batches=3)
    d.update(kwargs)
    return harness.ExperimentConfig(**d)


def checks_by_name(checks):
    return {c['check']: c for c in checks}


@pytest.mark.mpi_skip()
def test_config_defaults():
    cfg = harness.ExperimentConfig()
    assert cfg.seed == 42
    assert cfg.Delta == 1.0
    assert cfg.mode == 'optimal'
    assert list(cfg.modes) == list(harness.privacy_modes)
    assert cfg.spec().n_qubits == 4
    assert cfg.mech_config().c_gamma == 0.01
    assert cfg.mech_config(0.1).gamma == 0.1
    assert cfg.replace(seed=7).seed == 7
    assert cfg.replace(seed=None).seed == 42


@pytest.mark.mpi_skip()
def test_config_validation():
    with pytest.raises(ValueError):
        harness.ExperimentConfig(bogus=1)
    with pytest.raises(ValueError):
        harness.ExperimentConfig(gamma_grid=[])
    with pytest.raises(ValueError):
        harness.ExperimentConfig(gamma_grid=[0.0])
    with pytest.raises(ValueError):
        harness.ExperimentConfig(c=2.0, gamma_grid=[0.6])
    with pytest.raises(ValueError):
        harness.ExperimentConfig(mode='laplace')
    with pytest.raises(ValueError):
        harness.ExperimentConfig(regimes=['Extreme'])
    with pytest.raises(ValueError):
        harness.ExperimentConfig(thetas=[2.0])
    with pytest.raises(ValueError):
        harness.ExperimentConfig(poison_shift=[1.0, 0.0])
    with pytest.raises(ValueError):
        harness.ExperimentConfig(feature_index=4)
    with pytest.raises(ValueError):
        harness.ExperimentConfig(processes=0)
    with pytest.raises(ValueError):
        harness.ExperimentConfig(effective_gammas=[0.0])
    with pytest.raises(ValueError):
        harness.ExperimentConfig(wasserstein_separations=[0.0, 8.0])
    with pytest.raises(ValueError):
        harness.ExperimentConfig(n_wasserstein_pairs=0)


@pytest.mark.mpi_skip()
def test_config_from_toml(tmpdir):
    filename = os.path.join(str(tmpdir), 'run.toml')
    with open(filename, 'w') as f:
        f.write('seed = 7\nn = 40\ngamma_grid = [0.01, 0.02]\n')
    cfg = harness.ExperimentConfig.from_toml(filename)
    assert cfg.seed == 7
    assert cfg.n == 40
    assert cfg.gamma_grid == [0.01, 0.02]
    assert harness.ExperimentConfig.from_toml(filename, seed=3).seed == 3

    with open(filename, 'a') as f:
        f.write('colour = "red"\n')
    with pytest.raises(ValueError):
        harness.ExperimentConfig.from_toml(filename)


@pytest.mark.mpi_skip()
def test_sweep_points():
    cfg = small_config()
    points = harness.sweep_points('tradeoff', cfg)
    assert len(points) == 10
    assert points[0] == {'gamma': 0.01, 'mode': 'baseline'}
    assert points[-1] == {'gamma': 0.1, 'mode': 'subspace'}
    assert len(harness.sweep_points('spectrum', cfg)) == 22
    assert len(harness.sweep_points('adversary', cfg)) == 4
    assert harness.sweep_points('dephasing', cfg) == [{'theta': 0.0},
                                                      {'theta': np.pi/2}]
    assert len(harness.sweep_points('audit', cfg)) == 5
    assert harness.sweep_points('effective', cfg) == [
        {'gamma': 0.05}, {'gamma': 0.1}, {'gamma': 0.2}]
    assert harness.sweep_points('wasserstein', cfg) == [
        {'separation': 0.05, 'index': 0}, {'separation': 8.0, 'index': 1}]
    assert set(harness.runners) == set(harness.runner_names)
    with pytest.raises(ValueError):
        harness.sweep_points('plots', cfg)
    with pytest.raises(ValueError):
        harness.evaluate_point('plots', cfg.to_dict(), {})


@pytest.mark.mpi_skip()
def test_tradeoff_rows():
    cfg = small_config()
    rows = harness.run_tradeoff(cfg)
    assert len(rows) == 10
    for r in rows:
        assert np.isfinite(r['epsilon']) and r['epsilon'] >= 0
        assert 0.0 <= r['fidelity'] <= 1.0
        assert r['min_fidelity'] <= r['fidelity'] + 1e-12
        assert 0.0 <= r['accuracy'] <= 1.0
    by = {(r['mode'], r['gamma']): r for r in rows}
    npt.assert_allclose(by[('baseline', 0.01)]['fidelity'], 1.0, rtol=1e-9)
    npt.assert_allclose(by[('isotropic', 0.01)]['epsilon'],
                        mech.eps_isotropic(16, 1/16, 0.01), rtol=rtol)
    npt.assert_allclose(by[('subspace', 0.1)]['epsilon'], 0.05, rtol=rtol)
    assert by[('optimal', 0.1)]['epsilon'] < by[('optimal', 0.01)]['epsilon']
    assert by[('optimal', 0.01)]['epsilon'] \
        <= by[('geometric', 0.01)]['epsilon'] + 1e-12

    checks = checks_by_name(harness.acceptance_checks('tradeoff', rows, cfg))
    assert checks['mode_order_gamma_0.01']['passed']
    assert checks['optimal_monotone_in_gamma']['passed']
    for m in ('optimal', 'geometric'):
        for g in (0.01, 0.1):
            assert checks['uncertainty_{:s}_gamma_{:g}'.format(m, g)]['passed']
    opt = by[('optimal', 0.01)]
    assert opt['uncertainty_lhs'] < opt['uncertainty_rhs_static']
    assert 'uncertainty_isotropic_gamma_0.01' not in checks


@pytest.mark.mpi_skip()
def test_tradeoff_deterministic(tmpdir):
    cfg = small_config(modes=['isotropic', 'optimal'])
    a = os.path.join(str(tmpdir), 'a.csv')
    b = os.path.join(str(tmpdir), 'b.csv')
    harness.write_csv(harness.run_tradeoff(cfg), a)
    harness._cached_context.cache_clear()
    harness.write_csv(harness.run_tradeoff(cfg), b)
    with open(a, 'rb') as fa, open(b, 'rb') as fb:
        assert fa.read() == fb.read()


@pytest.mark.mpi_skip()
def test_pareto_front():
    rows = [{'mode': 'a', 'epsilon': 1.0, 'accuracy': 0.9},
            {'mode': 'b', 'epsilon': 2.0, 'accuracy': 0.8},
            {'mode': 'c', 'epsilon': 0.5, 'accuracy': 0.6},
            {'mode': 'd', 'epsilon': 1.0, 'accuracy': 0.9}]
    front = harness.pareto_front(rows)
    assert [r['pareto'] for r in front] == [True, False, True, True]
    assert all(r['experiment'] == 'pareto' for r in front)


@pytest.mark.mpi_skip()
def test_spectrum_sample_row():
    cfg = small_config()
    rows = harness.evaluate_point('spectrum', cfg.to_dict(),
                                  {'kind': 'sample', 'index': 3})
    assert len(rows) == 1
    r = rows[0]
    lams = [r['lambda_{:d}'.format(k)] for k in range(1, 5)]
    assert np.all(np.diff(lams) <= 0)
    npt.assert_allclose(r['trace'], sum(lams), rtol=rtol)
    npt.assert_allclose(r['condition'], lams[0]/lams[-1], rtol=rtol)


@pytest.mark.mpi_skip()
def test_hw_noise_rows():
    cfg = small_config()
    rows = harness.run_hw_noise(cfg)
    assert [r['regime'] for r in rows] == ['Ideal', 'Low', 'Moderate', 'High']
    assert rows[0]['delta_f'] <= 1e-9
    checks = checks_by_name(harness.acceptance_checks('hwnoise', rows, cfg))
    assert checks['delta_f_increasing']['passed']
    assert checks['ideal_zero']['passed']


@pytest.mark.mpi_skip()
def test_composition_rows():
    cfg = small_config()
    rows = harness.run_composition(cfg)
    assert len(rows) == 400
    tenth = {r['k']: r for r in rows if r['gamma'] == 0.1}
    npt.assert_allclose(tenth[1]['ratio'], 0.9, rtol=rtol)
    assert abs(tenth[100]['ratio'] - 9.0) <= 0.05
    assert tenth[200]['total'] < tenth[200]['saturation']
    assert rows[0]['crossover'] == 163
    checks = harness.acceptance_checks('compose', rows, cfg)
    assert all(c['passed'] for c in checks)


@pytest.mark.mpi_skip()
def test_adversary_rows():
    cfg = small_config()
    rows = harness.run_adversary(cfg)
    kinds = [r['kind'] for r in rows]
    assert kinds == ['leakage']*4 + ['evasion'] + ['poison']*2
    npt.assert_allclose(sum(r['fraction'] for r in rows[:4]), 1.0, rtol=rtol)
    for r in rows[5:]:
        assert r['mean_error'] >= 0 and r['median_error'] >= 0
        npt.assert_allclose(r['centroid_shift'], 0.1*3.0, rtol=1e-9)
    checks = checks_by_name(harness.acceptance_checks('adversary', rows,
                                                      cfg))
    assert checks['leakage_fractions']['passed']
    assert checks['evasion_ratio']['passed']
    assert checks['isotropic_evasion']['passed']


@pytest.mark.mpi_skip()
def test_adaptive_rows():
    cfg = small_config()
    rows = harness.run_adaptive(cfg)
    assert [r['batch'] for r in rows] == [1, 2, 3]
    npt.assert_allclose(rows[-1]['running_mean'],
                        np.mean([r['batch_mean'] for r in rows]), rtol=rtol)
    ctx = harness.get_context(cfg)
    worst = float(np.max(ctx.sample_lambdas))
    npt.assert_allclose(rows[-1]['lambda_worst'], worst, rtol=rtol)
    npt.assert_allclose(rows[-1]['eps_worst'],
                        mech.eps_optimal(worst, cfg.mech_config()), rtol=rtol)
    assert 9.0 - 1e-6 <= worst <= 11.25 + 1e-6
    npt.assert_allclose(rows[-1]['median_lambda'],
                        np.median(ctx.sample_lambdas), rtol=1e-9)
    assert rows[-1]['eps_adaptive'] <= rows[-1]['eps_worst']
    assert rows[-1]['ratio'] >= 1.0
    errors = [r['stream_rms_error'] for r in rows]
    assert errors[-1] < errors[0]
    assert -1.0 < rows[-1]['ema_rate'] < 0.0
    checks = checks_by_name(harness.acceptance_checks('adaptive', rows, cfg))
    assert checks['running_mean']['passed']
    assert 'ema_rate' in checks


@pytest.mark.slow()
@pytest.mark.mpi_skip()
def test_adaptive_acceptance():
    cfg = harness.ExperimentConfig()
    rows = harness.run_adaptive(cfg)
    assert len(rows) == 10
    checks = checks_by_name(harness.acceptance_checks('adaptive', rows, cfg))
    for name in ('ema_within_10pct', 'adaptive_ratio', 'ema_rate',
                 'running_mean'):
        assert checks[name]['passed'], checks[name]
    # the worst case is the largest per-sample eigenvalue, near 9 (1 + 1/4)
    assert 11.0 <= rows[-1]['lambda_worst'] <= 11.25 + 1e-6


@pytest.mark.mpi_skip()
def test_dephasing_rows():
    cfg = small_config()
    rows = harness.run_dephasing(cfg)
    assert len(rows) == 4
    base = rows[0]['baseline_mi']
    for r in rows:
        assert r['mi'] >= -1e-12
        if r['gamma'] == 0.0:
            npt.assert_allclose(r['mi'], base, rtol=1e-9, atol=1e-12)
        npt.assert_allclose(r['residual'],
                            r['mi'] - base*np.cos(r['theta'])**2, atol=1e-12)
    curve = adversary.DephasingCurve.from_rows(rows)
    assert curve.mi_values.shape == (2, 2)
    checks = checks_by_name(harness.acceptance_checks('dephasing', rows, cfg))
    assert checks['amplification']['value'] > 1.0
    assert checks['gamma0_theta0']['passed']


@pytest.mark.mpi_skip()
def test_noisy_kernel():
    K = np.eye(5)
    rng = np.random.Generator(np.random.PCG64(0))
    npt.assert_array_equal(harness._noisy_kernel(K, 0.0, rng, 'gaussian',
                                                 True), K)
    Kn = harness._noisy_kernel(K, 0.5, rng, 'laplace', True)
    npt.assert_allclose(Kn, Kn.T, atol=1e-12)
    assert np.min(np.linalg.eigvalsh(Kn)) >= -1e-10


@pytest.mark.mpi_skip()
def test_classical_rows():
    cfg = small_config()
    rows = harness.run_classical_baseline(cfg)
    assert [r['gamma'] for r in rows] == [0.01, 0.1]
    for r in rows:
        assert r['eps_laplace'] >= r['eps_gaussian']
        assert 0.0 <= r['accuracy_gaussian'] <= 1.0
    assert rows[1]['sigma'] > rows[0]['sigma']


@pytest.mark.mpi_skip()
def test_effective_rows():
    cfg = small_config()
    rows = harness.run_effective(cfg)
    assert [r['gamma'] for r in rows] == [0.05, 0.1, 0.2]
    ctx = harness.get_context(cfg)
    F = qfi.qfi_pure(ctx.centroid, ctx.spec).entries
    for r in rows:
        assert r['weight'] > 0 and 0 < r['contraction'] < 1
        assert r['fitted_c'] == rows[0]['fitted_c']
        u = ctx.spectrum.eigenvectors[:, r['mode']]
        theta = r['eta']*np.sqrt(u @ F @ u)/2
        g = r['gamma']
        npt.assert_allclose(r['contraction'],
                            1 - 4*g*(1 - g)*np.sin(theta)**2, rtol=1e-4)
        npt.assert_allclose(r['predicted'],
                            1 - r['fitted_c']*g*r['weight'], rtol=rtol)
    checks = checks_by_name(harness.acceptance_checks('effective', rows, cfg))
    assert checks['contraction_fit']['passed']
    assert checks['fitted_c_range']['passed']
    summary = harness.summarize('effective', rows, cfg, list(checks.values()))
    assert summary['passed']
    assert summary['fitted_c'] == rows[0]['fitted_c']
    assert summary['fit_residual'] <= 0.1

    bad = [dict(r, fitted_c=2.4) for r in rows]
    checks = checks_by_name(harness.acceptance_checks('effective', bad, cfg))
    assert not checks['fitted_c_range']['passed']


@pytest.mark.mpi_skip()
def test_wasserstein_rows():
    cfg = small_config()
    rows = harness.run_wasserstein(cfg)
    near, far = rows
    assert near['separation'] == 0.05 and far['separation'] == 8.0
    assert near['n_pairs'] == far['n_pairs'] == 20
    for r in rows:
        assert r['sqrt_lambda_max'] >= 3.0
        assert r['mean_ratio'] <= r['L_W']
        npt.assert_allclose(r['gap'], r['sqrt_lambda_max']/r['L_W'],
                            rtol=rtol)
    # Z-basis populations move at most at rate sqrt(sum alpha_k^2)/2
    assert near['L_W'] <= np.sqrt(np.sum(np.square(cfg.alpha)))/2
    assert far['gap'] >= 5
    checks = checks_by_name(harness.acceptance_checks('wasserstein', rows,
                                                      cfg))
    assert checks['wasserstein_gap']['passed']
    summary = harness.summarize('wasserstein', rows, cfg)
    assert summary['gap'] == far['gap'] and summary['L_W'] == far['L_W']
    assert harness.run_wasserstein(cfg) == rows


@pytest.mark.mpi_skip()
def test_audit_run(tmpdir):
    cfg = small_config()
    out_dir = str(tmpdir)
    rows = harness.run_audit(cfg, out_dir)
    assert len(rows) == 5
    assert all(r['honest_verdict'] == 'accept' for r in rows)
    assert all(r['k'] == 10 for r in rows)
    root, eps, n = audit.read_commitment(os.path.join(out_dir,
                                                      'commitment.txt'))
    assert n == 20
    trail = harness.get_context(cfg).audit_trail
    assert root == trail.root
    npt.assert_allclose(eps, trail.eps_claimed, rtol=1e-11)
    transcript = audit.load_transcript(os.path.join(out_dir,
                                                    'transcript.json'))
    assert transcript.accepted
    assert transcript.mode == 'FiatShamir'
    assert audit.reverify(transcript, cfg.mech_config(), root, eps, n,
                          cfg.challenge_ratio).accepted
    records = audit.load_records(os.path.join(out_dir, 'records.json'))
    assert len(records) == 20
    checks = checks_by_name(harness.acceptance_checks('audit', rows, cfg))
    assert checks['honest_accepted']['passed']


@pytest.mark.mpi_skip()
def test_acceptance_unknown_runner():
    with pytest.raises(ValueError):
        harness.acceptance_checks('plots', [])


@pytest.mark.mpi_skip()
def test_writers(tmpdir):
    cfg = small_config(gamma_grid=[0.1], k_max=5)
    rows = harness.run_composition(cfg)
    csv_name = os.path.join(str(tmpdir), 'compose.csv')
    harness.write_csv(rows, csv_name)
    with open(csv_name) as f:
        lines = f.read().splitlines()
    assert lines[0].split(',')[:3] == ['experiment', 'gamma', 'c_gamma']
    assert len(lines) == 6

    json_name = os.path.join(str(tmpdir), 'summary.json')
    checks = harness.acceptance_checks('compose', rows, cfg)
    harness.write_json(harness.summarize('compose', rows, cfg, checks),
                       json_name)
    with open(json_name) as f:
        summary = json.load(f)
    assert summary['n_rows'] == 5
    assert summary['config']['seed'] == 42

    h5_name = os.path.join(str(tmpdir), 'results.h5')
    harness.write_hdf5('compose', rows, cfg, h5_name)
    harness.write_hdf5('compose', rows, cfg, h5_name)
    with h5py.File(h5_name, 'r') as h5f:
        grp = h5f['compose']
        npt.assert_array_equal(grp['k'][:], np.arange(1, 6))
        assert grp.attrs['seed'] == 42
        assert json.loads(grp.attrs['modes']) == list(harness.privacy_modes)


@pytest.mark.slow()
@pytest.mark.mpi_skip()
def test_pool_matches_serial():
    cfg = small_config()
    serial = harness.run_tradeoff(cfg)
    pooled = harness.run_tradeoff(cfg.replace(processes=2))
    assert serial == pooled


@pytest.mark.slow()
@pytest.mark.mpi_skip()
def test_mixed_spectrum_direction():
    cfg = small_config()
    rows = harness.run_spectrum(cfg)
    mixed = [r for r in rows if r['kind'] == 'mixed']
    assert [r['gamma'] for r in mixed] == [0.0, 0.8]
    checks = checks_by_name(harness.acceptance_checks('spectrum', rows, cfg))
    assert checks['quantum_fraction_decreasing']['passed']
    assert checks['classical_lambda_increases']['passed']
    assert mixed[0]['quantum_fraction'] >= 0.85
    assert mixed[1]['quantum_fraction'] < 0.2
    assert mixed[1]['lambda_class'] >= 5.0*mixed[0]['lambda_class']
    for name in ('quantum_fraction_gamma0', 'quantum_fraction_gamma0.8'):
        assert checks[name]['passed'], checks[name]
    # the noisy preparation keeps the spectrum fixed without dephasing
    npt.assert_allclose(mixed[0]['quantum_fraction'], 1.0, atol=1e-6)
