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
import csv
import functools
import h5py
import json
import multiprocessing
import os
import numpy as np
import toml
from . import adversary
from . import audit
from . import embed
from . import mech
from . import qfi
from . import qstate as qs

privacy_modes = ('baseline', 'isotropic', 'geometric', 'optimal', 'subspace')

runner_names = ('tradeoff', 'spectrum', 'pareto', 'hwnoise', 'compose',
                'adversary', 'adaptive', 'dephasing', 'classical',
                'effective', 'wasserstein', 'audit')

config_defaults = {
    'alpha': [3.0, 1.0, 0.3, 0.1],
    'rz_factor': 0.5,
    'Delta': 1.0,
    'c': 1.0,
    'gamma_grid': [0.001, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2],
    'gamma': 0.01,
    'seed': 42,
    'n': 200,
    'separation': 1.0,
    'cluster_sigma': 0.7,
    'mode': 'optimal',
    'modes': list(privacy_modes),
    'tau': 0.1,
    'f_min': None,
    'k_max': 200,
    'beta_ema': 0.9,
    'batch_size': 20,
    'n_batches': 10,
    'n_rate_streams': 200,
    'poison_beta': 0.1,
    'poison_shift': [3.0, 0.0, 0.0, 0.0],
    'n_poison_trials': 20,
    'challenge_ratio': 0.12,
    'fraud_scale': 0.8,
    'n_audit_trials': 200,
    'thetas': [0.0, np.pi/12, np.pi/6, np.pi/4, np.pi/3, 5*np.pi/12,
               np.pi/2],
    'dephasing_gammas': [0.0, 0.2, 0.4, 0.6, 0.8],
    'sigma_rule': 'NoisyPreparation',
    'mixed_point': [0.25, 0.0, 0.0, 0.0],
    'grid_size': 32,
    'feature_index': 0,
    'regimes': ['Ideal', 'Low', 'Moderate', 'High'],
    'n_noise_points': 20,
    'classical_delta': 1e-5,
    'effective_gammas': [0.05, 0.1, 0.2],
    'wasserstein_separations': [0.05, 8.0],
    'n_wasserstein_pairs': 50,
    'processes': 1,
    'out_dir': 'qdp_output',
    'verbose_flag': False,
}


class ExperimentConfig():
    """Parameters of every experiment runner.

    Every key of config_defaults is a keyword argument. The main ones:

    Args:
        alpha (optional): Embedding strengths. Defaults to [3, 1, 0.3, 0.1].
        rz_factor (optional): RZ layer scale. Defaults to 0.5.
        Delta (optional): Sensitivity radius. Defaults to 1.0.
        c (optional): Calibration constant. Defaults to 1.0.
        gamma_grid (optional): Noise budgets swept by tradeoff, compose and
            classical. Defaults to seven values from 0.001 to 0.2.
        gamma (optional): Budget of single-budget runners. Defaults to 0.01.
        seed (optional): Master seed. Defaults to 42.
        n, separation, cluster_sigma (optional): Dataset parameters.
            Defaults to 200, 1.0 and 0.7.
        mode (optional): Quantum mode matched by the classical baseline.
            Defaults to 'optimal'.
        modes (optional): Modes swept by tradeoff. Defaults to all five.
        f_min (optional): Isotropic minimum fidelity. Defaults to None,
            meaning 1/d.
        n_rate_streams (optional): Resampled streams behind the fitted EMA
            convergence exponent. Defaults to 200.
        sigma_rule, mixed_point (optional): Noise rule and input point of
            the mixed-state dephasing sweep. Default to 'NoisyPreparation'
            and [0.25, 0, 0, 0].
        effective_gammas (optional): Budgets the contraction constant is
            fitted over. Defaults to [0.05, 0.1, 0.2].
        wasserstein_separations (optional): Pair separations of the
            Wasserstein runner; the gap is checked at the largest.
            Defaults to [0.05, 8.0].
        n_wasserstein_pairs (optional): Dataset points displaced per
            separation. Defaults to 50.
        processes (optional): Local worker processes. Defaults to 1.
        out_dir (optional): Output directory. Defaults to 'qdp_output'.
        verbose_flag (optional): If True, print progress. Defaults to False.
    """
    def __init__(self, **kwargs):
        unknown = set(kwargs) - set(config_defaults)
        if unknown:
            raise ValueError('Unknown config keys ', sorted(unknown))
        for key, default in config_defaults.items():
            value = kwargs.get(key, default)
            if isinstance(value, list):
                value = list(value)
            setattr(self, key, value)
        self.validate()

    @classmethod
    def from_toml(cls, filename, **overrides):
        data = toml.load(filename)
        data.update(overrides)
        return cls(**data)

    def log_print(self, arg):
        """Only print info if verbose_flag is True"""
        if (self.verbose_flag == True):
            print(arg)

    def validate(self):
        if len(self.alpha) == 0:
            raise ValueError('ExperimentConfig: alpha is empty')
        for name in ('gamma_grid', 'modes', 'thetas', 'dephasing_gammas',
                     'regimes', 'effective_gammas',
                     'wasserstein_separations'):
            if len(getattr(self, name)) == 0:
                raise ValueError('ExperimentConfig: empty grid ', name)
        for g in list(self.gamma_grid) + list(self.effective_gammas) \
                + [self.gamma]:
            if not 0.0 < g < 1.0 or self.c*g >= 1.0:
                raise ValueError('ExperimentConfig: gamma outside (0,1) or '
                                 'c gamma >= 1 ', g)
        for m in list(self.modes) + [self.mode]:
            if m not in privacy_modes:
                raise ValueError('Unknown privacy mode ', m)
        for r in self.regimes:
            qs.get_regime(r)
        for t in self.thetas:
            if not 0.0 <= t <= np.pi/2 + 1e-12:
                raise ValueError('ExperimentConfig: theta outside [0,pi/2] ',
                                 t)
        if len(self.poison_shift) != len(self.alpha):
            raise ValueError('ExperimentConfig: poison_shift length ',
                             len(self.poison_shift))
        if len(self.mixed_point) != len(self.alpha):
            raise ValueError('ExperimentConfig: mixed_point length ',
                             len(self.mixed_point))
        if min(self.wasserstein_separations) <= 1e-6 \
           or self.n_wasserstein_pairs < 1:
            raise ValueError('ExperimentConfig: empty Wasserstein sweep ',
                             (self.wasserstein_separations,
                              self.n_wasserstein_pairs))
        if self.sigma_rule not in embed.sigma_rules:
            raise ValueError('Unknown sigma rule ', self.sigma_rule)
        if not 0 <= self.feature_index < len(self.alpha):
            raise ValueError('ExperimentConfig: feature_index out of range ',
                             self.feature_index)
        if self.processes < 1:
            raise ValueError('ExperimentConfig: processes below 1 ',
                             self.processes)
        if self.batch_size < 1 or self.n_batches < 1 \
           or self.n_rate_streams < 1:
            raise ValueError('ExperimentConfig: empty adaptive stream ',
                             (self.batch_size, self.n_batches,
                              self.n_rate_streams))
        mech.MechanismConfig(self.Delta, self.c, self.gamma)

    def to_dict(self):
        return {key: getattr(self, key) for key in config_defaults}

    def replace(self, **kwargs):
        d = self.to_dict()
        d.update({k: v for k, v in kwargs.items() if v is not None})
        return ExperimentConfig(**d)

    def spec(self):
        return embed.EmbeddingSpec(self.alpha, self.rz_factor)

    def mech_config(self, gamma=None):
        return mech.MechanismConfig(self.Delta, self.c,
                                    self.gamma if gamma is None else gamma)

    def dataset(self, seed=None):
        return embed.gen_dataset(self.n, self.separation, self.cluster_sigma,
                                 self.seed if seed is None else seed,
                                 p=len(self.alpha))


class ExperimentContext():
    """Data and QFI geometry shared by the sweep points of one config."""
    def __init__(self, cfg):
        self.cfg = cfg
        self.spec = cfg.spec()
        self.dataset = cfg.dataset()
        self.train, self.test = embed.train_test_split(self.dataset)
        self.d = 2**self.spec.n_qubits
        self.centroid = self.dataset.centroid()

    @functools.cached_property
    def train_qfis(self):
        return [qfi.qfi_pure(x, self.spec) for x in self.train.points]

    @functools.cached_property
    def spectrum(self):
        """Spectrum of the mean QFI over the training points."""
        mean = np.mean([F.entries for F in self.train_qfis], axis=0)
        return qfi.spectral(mean)

    @functools.cached_property
    def sample_lambdas(self):
        return qfi.per_sample_lambda_max(self.dataset.points, self.spec)

    @functools.cached_property
    def baseline_kernels(self):
        return self.kernels('baseline', self.cfg.gamma)

    def allocation(self, mode, gamma):
        cfg_m = self.cfg.mech_config(gamma)
        lam = self.spectrum.eigenvalues
        if mode == 'optimal':
            alloc = mech.optimal_allocation(lam, cfg_m.c_gamma)
            return mech.calibrate_allocation(alloc, self.spectrum, cfg_m)
        active = [k for k in range(lam.size) if lam[k] > 0]
        weights = np.zeros(lam.size)
        weights[active] = lam[active]/lam[active].sum()
        alloc = mech.NoiseAllocation(
            weights, active, mech.minimax_value(lam, weights, cfg_m.c_gamma))
        return mech.calibrate_allocation(alloc, self.spectrum, cfg_m,
                                         mech.eps_linear(lam, cfg_m))

    def epsilon(self, mode, gamma):
        cfg_m = self.cfg.mech_config(gamma)
        lam = self.spectrum.eigenvalues
        if mode == 'baseline':
            return 0.5*cfg_m.Delta**2*lam[0]
        elif mode == 'isotropic':
            f_min = 1.0/self.d if self.cfg.f_min is None else self.cfg.f_min
            return mech.eps_isotropic(self.d, f_min, gamma)
        elif mode == 'geometric':
            return mech.eps_linear(lam, cfg_m)
        elif mode == 'optimal':
            return mech.eps_optimal(lam[0], cfg_m)
        elif mode == 'subspace':
            return 0.5*cfg_m.Delta**2*self.cfg.tau
        else:
            raise ValueError('Unknown privacy mode ', mode)

    def channel_outputs(self, points, mode, gamma):
        cfg_m = self.cfg.mech_config(gamma)
        if mode == 'baseline':
            return [embed.embed_pure(x, self.spec).density() for x in points]
        elif mode == 'isotropic':
            return [qs.depolarize(embed.embed_pure(x, self.spec).density(),
                                  gamma) for x in points]
        elif mode in ('geometric', 'optimal'):
            alloc = self.allocation(mode, gamma)
            return [mech.metric_channel_apply(x, alloc, self.spec, cfg_m)
                    for x in points]
        elif mode == 'subspace':
            return [mech.subspace_project(x, self.spectrum, self.cfg.tau,
                                          self.spec, cfg_m, self.centroid)
                    .state.density() for x in points]
        else:
            raise ValueError('Unknown privacy mode ', mode)

    def kernels(self, mode, gamma):
        train = self.channel_outputs(self.train.points, mode, gamma)
        test = self.channel_outputs(self.test.points, mode, gamma)
        return (embed.density_kernel_matrix(train),
                embed.density_kernel_matrix(test, train), test)

    def svm_accuracy(self, K_train, K_test):
        model = embed.svm_fit(K_train, self.train.labels,
                              verbose_flag=self.cfg.verbose_flag)
        return embed.accuracy(model.predict(K_test), self.test.labels)

    @functools.cached_property
    def audit_trail(self):
        return audit.AuditTrail.from_lambdas(self.sample_lambdas,
                                             self.cfg.mech_config())

    @functools.cached_property
    def dephasing_baseline(self):
        return adversary.dephasing_mi(0.0, 0.0, self.spec,
                                      self.cfg.feature_index,
                                      self.cfg.grid_size,
                                      centroid=self.centroid)


@functools.lru_cache(maxsize=4)
def _cached_context(cfg_json):
    return ExperimentContext(ExperimentConfig(**json.loads(cfg_json)))


def get_context(cfg):
    d = cfg.to_dict()
    for key in ('processes', 'out_dir', 'verbose_flag'):
        d.pop(key)
    return _cached_context(json.dumps(d, sort_keys=True))


def _tradeoff_point(ctx, point):
    mode, gamma = point['mode'], point['gamma']
    cfg_m = ctx.cfg.mech_config(gamma)
    K_train, K_test, outputs = ctx.kernels(mode, gamma)
    fids = [qs.fidelity(embed.embed_pure(x, ctx.spec), rho)
            for x, rho in zip(ctx.test.points, outputs)]
    eps = ctx.epsilon(mode, gamma)
    unc = mech.uncertainty_check(eps, min(fids), ctx.spectrum.reconstruct(),
                                 cfg_m, ctx.d)
    ctx.cfg.log_print('tradeoff: mode {:s} gamma {:g} eps {:g}'
                      .format(mode, gamma, eps))
    return [{'experiment': 'tradeoff', 'mode': mode, 'gamma': gamma,
             'epsilon': eps, 'fidelity': float(np.mean(fids)),
             'min_fidelity': float(min(fids)),
             'accuracy': ctx.svm_accuracy(K_train, K_test),
             'lambda_max': ctx.spectrum.lambda_max,
             'uncertainty_lhs': unc.lhs, 'uncertainty_rhs': unc.rhs,
             'uncertainty_rhs_static': unc.rhs_static}]


def _spectrum_point(ctx, point):
    if point['kind'] == 'sample':
        i = point['index']
        s = qfi.spectral(qfi.qfi_pure(ctx.dataset.points[i], ctx.spec))
        row = {'experiment': 'spectrum', 'kind': 'sample', 'index': i,
               'label': int(ctx.dataset.labels[i])}
        for k, lam in enumerate(s.eigenvalues):
            row['lambda_{:d}'.format(k + 1)] = lam
        row['condition'] = s.lambda_max/s.lambda_min \
            if s.lambda_min > 0 else np.inf
        row['trace'] = s.trace()
        return [row]
    gamma = point['gamma']
    mixed = embed.MixedEmbeddingSpec(ctx.spec, sigma_rule=ctx.cfg.sigma_rule)

    def family(y):
        rho = embed.embed_mixed(y, mixed)
        return qs.dephase(rho, gamma, 0.0) if gamma > 0 else rho
    dec = qfi.qfi_mixed(np.array(ctx.cfg.mixed_point, dtype=float), family)
    return [{'experiment': 'spectrum', 'kind': 'mixed', 'gamma': gamma,
             'lambda_total': qfi.spectral(dec.f_total).lambda_max,
             'lambda_class': qfi.spectral(dec.f_class).lambda_max,
             'quantum_fraction': dec.quantum_fraction}]


def _hwnoise_point(ctx, point):
    regime = qs.get_regime(point['regime'])
    losses = []
    distances = []
    for x in ctx.dataset.points[:ctx.cfg.n_noise_points]:
        psi = embed.embed_pure(x, ctx.spec)
        rho = qs.thermal_noise(psi.density(), regime, ctx.spec.cz_pairs())
        losses.append(qs.fidelity_loss(psi, rho))
        distances.append(qs.hellinger(qs.measure_probs(psi),
                                      qs.measure_probs(rho)))
    return [{'experiment': 'hwnoise', 'regime': regime.name,
             't1_us': regime.t1_us, 't2_us': regime.t2_us,
             'eps_1q': regime.eps_1q, 'eps_2q': regime.eps_2q,
             'delta_f': float(np.mean(losses)),
             'hellinger': float(np.mean(distances))}]


def _compose_point(ctx, point):
    cfg_m = ctx.cfg.mech_config(point['gamma'])
    lam = ctx.spectrum.lambda_max
    crossover = mech.composition_crossover(cfg_m.c_gamma)
    rows = []
    for k in range(1, ctx.cfg.k_max + 1):
        ledger = mech.compose_qfi(k, lam, cfg_m)
        rows.append({'experiment': 'compose', 'gamma': point['gamma'],
                     'c_gamma': cfg_m.c_gamma, 'k': k,
                     'total': ledger.total, 'eps_seq': ledger.eps_seq,
                     'ratio': ledger.ratio, 'saturation': ledger.saturation,
                     'crossover': -1 if crossover is None else crossover})
    return rows


def _adversary_point(ctx, point):
    kind = point['kind']
    if kind == 'leakage':
        prof = adversary.leakage_profile(ctx.spectrum.eigenvalues, 1.0, 1.0)
        return [{'experiment': 'adversary', 'kind': 'leakage', 'mode': k,
                 'lambda': prof.lambdas[k], 'bound': prof.bounds[k],
                 'fraction': prof.fractions[k]}
                for k in range(prof.lambdas.size)]
    elif kind == 'evasion':
        rep = adversary.evasion_analysis(ctx.spectrum, 0.05, ctx.spec,
                                         ctx.centroid)
        measured = adversary.measured_evasion_ratios(
            ctx.test.points[:ctx.cfg.n_noise_points], ctx.spec)
        iso_spec = embed.EmbeddingSpec(np.ones(ctx.spec.n_qubits),
                                       ctx.cfg.rz_factor)
        iso = adversary.evasion_analysis(
            qfi.qfi_pure(np.zeros(ctx.spec.n_qubits), iso_spec), 0.05)
        return [{'experiment': 'adversary', 'kind': 'evasion',
                 'ratio': rep.ratio,
                 'spectrum_ratio': ctx.spectrum.lambda_max
                 / ctx.spectrum.lambda_min
                 if ctx.spectrum.lambda_min > 0 else np.inf,
                 'd_inf_min': rep.d_inf_min, 'd_inf_max': rep.d_inf_max,
                 'consistency': rep.consistency(),
                 'measured_median_ratio': float(np.median(measured)),
                 'isotropic_ratio': iso.ratio}]
    trial = point['trial']
    seed = ctx.cfg.seed + trial
    rep = adversary.poison_experiment(ctx.cfg.dataset(seed),
                                      ctx.cfg.poison_beta,
                                      ctx.cfg.poison_shift, ctx.spec,
                                      seed=seed)
    return [{'experiment': 'adversary', 'kind': 'poison', 'trial': trial,
             'beta': rep.beta, 'mean_error': rep.mean_error,
             'median_error': rep.median_error,
             'centroid_shift': float(np.linalg.norm(rep.centroid_shift))}]


def _adaptive_point(ctx, point):
    cfg = ctx.cfg
    cfg_m = cfg.mech_config()
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    order = rng.permutation(len(ctx.dataset))
    lams = ctx.sample_lambdas
    population = float(np.mean(lams))
    population_matrix = np.mean([qfi.qfi_pure(x, ctx.spec).entries
                                 for x in ctx.dataset.points], axis=0)
    lambda_worst = float(np.max(lams))
    eps_worst = mech.eps_optimal(lambda_worst, cfg_m)
    median = qfi.median_lambda_max(ctx.dataset.points, ctx.spec)
    rms_errors = _ema_stream_errors(lams, population, cfg, rng)
    if cfg.n_batches > 1:
        ns = cfg.batch_size*np.arange(1, cfg.n_batches + 1)
        rate = qfi.ema_convergence_rate(ns, rms_errors)
    else:
        rate = float('nan')
    tracker = qfi.EmaTracker(cfg.beta_ema)
    running = qfi.EmaTracker(cfg.beta_ema)
    matrix = qfi.MatrixEmaTracker(cfg.beta_ema)
    rows = []
    for b in range(cfg.n_batches):
        idx = order[np.arange(b*cfg.batch_size, (b + 1)*cfg.batch_size)
                    % len(order)]
        batch_mean = float(np.mean(lams[idx]))
        tracker = qfi.ema_update(tracker, batch_mean)
        running = qfi.ema_update(running, batch_mean, beta=1.0 - 1.0/(b + 1))
        matrix = matrix.update(np.mean([qfi.qfi_pure(x, ctx.spec).entries
                                        for x in ctx.dataset.points[idx]],
                                       axis=0))
        estimate = tracker.bias_corrected
        eps_adaptive = qfi.adaptive_epsilon(estimate, cfg.Delta, cfg.c,
                                            cfg.gamma)
        rows.append({'experiment': 'adaptive', 'batch': b + 1,
                     'batch_mean': batch_mean, 'ema': tracker.value,
                     'ema_corrected': estimate,
                     'running_mean': running.value,
                     'population_mean': population,
                     'median_lambda': median,
                     'lambda_worst': lambda_worst,
                     'rel_error': abs(estimate - population)/population,
                     'matrix_error': float(
                         np.linalg.norm(matrix.bias_corrected
                                        - population_matrix)
                         / np.linalg.norm(population_matrix)),
                     'stream_rms_error': rms_errors[b],
                     'ema_rate': rate,
                     'eps_adaptive': eps_adaptive, 'eps_worst': eps_worst,
                     'ratio': eps_worst/eps_adaptive})
    return rows


def _ema_stream_errors(lams, population, cfg, rng):
    """Root mean square error of the bias-corrected EMA after each batch,
    over cfg.n_rate_streams streams drawn with replacement."""
    draws = rng.integers(0, len(lams), size=(cfg.n_rate_streams,
                                             cfg.n_batches, cfg.batch_size))
    batch_means = lams[draws].mean(axis=2)
    ema = np.zeros(cfg.n_rate_streams)
    errors = []
    for b in range(cfg.n_batches):
        ema = cfg.beta_ema*ema + (1.0 - cfg.beta_ema)*batch_means[:, b]
        corrected = ema/(1.0 - cfg.beta_ema**(b + 1))
        errors.append(float(np.sqrt(np.mean((corrected - population)**2))))
    return errors


def _dephasing_point(ctx, point):
    curve = adversary.dephasing_curve([point['theta']],
                                      sorted(ctx.cfg.dephasing_gammas),
                                      ctx.spec, ctx.cfg.feature_index,
                                      ctx.cfg.grid_size, centroid=ctx.centroid,
                                      baseline_mi=ctx.dephasing_baseline)
    return [dict({'experiment': 'dephasing'}, **r) for r in curve.rows()]


def _noisy_kernel(K, scale, rng, kind, symmetric):
    if scale == 0:
        return K.copy()
    if kind == 'gaussian':
        noise = rng.normal(0.0, scale, K.shape)
    else:
        noise = rng.laplace(0.0, scale/np.sqrt(2.0), K.shape)
    if symmetric:
        noise = (noise + noise.T)/np.sqrt(2.0)
        w, v = np.linalg.eigh(K + noise)
        return (v*np.clip(w, 0.0, None)) @ v.T
    return K + noise


def _classical_point(ctx, point):
    cfg = ctx.cfg
    gamma = point['gamma']
    K_train, K_test, base_test = ctx.baseline_kernels
    Q_train, Q_test, q_test = ctx.kernels(cfg.mode, gamma)
    sigma = float(np.sqrt(np.mean((Q_train - K_train)**2)))
    n_train = len(ctx.train)
    if sigma > 0:
        eps_gauss = np.sqrt(n_train - 1.0) \
            * np.sqrt(2.0*np.log(1.25/cfg.classical_delta))/sigma
        eps_laplace = (n_train - 1.0)/(sigma/np.sqrt(2.0))
    else:
        eps_gauss = eps_laplace = np.inf
    eps_q = ctx.epsilon(cfg.mode, gamma)
    rng = np.random.Generator(np.random.PCG64([cfg.seed, point['index']]))
    acc = {}
    for kind in ('gaussian', 'laplace'):
        Kn = _noisy_kernel(K_train, sigma, rng, kind, True)
        Kt = _noisy_kernel(K_test, sigma, rng, kind, False)
        acc[kind] = ctx.svm_accuracy(Kn, Kt)
    return [{'experiment': 'classical', 'gamma': gamma, 'mode': cfg.mode,
             'sigma': sigma, 'eps_quantum': eps_q,
             'eps_gaussian': eps_gauss, 'eps_laplace': eps_laplace,
             'gap': eps_gauss/eps_q if eps_q > 0 else np.inf,
             'accuracy_baseline': ctx.svm_accuracy(K_train, K_test),
             'accuracy_quantum': ctx.svm_accuracy(Q_train, Q_test),
             'accuracy_gaussian': acc['gaussian'],
             'accuracy_laplace': acc['laplace']}]


def _audit_point(ctx, point):
    cfg = ctx.cfg
    cfg_m = cfg.mech_config()
    trail = ctx.audit_trail
    seed = cfg.seed + point['trial']
    honest = audit.run_round(trail, cfg.challenge_ratio, cfg_m, seed=seed)
    claim = cfg.fraud_scale*trail.eps_claimed
    fraud = audit.run_round(trail, cfg.challenge_ratio, cfg_m, seed=seed,
                            eps_claimed=claim)
    f = float(np.mean([r.epsilon > claim for r in trail.records]))
    k = audit.challenge_size(len(trail.records), cfg.challenge_ratio)
    return [{'experiment': 'audit', 'trial': point['trial'], 'k': k,
             'honest_verdict': honest.verdict,
             'fraud_verdict': fraud.verdict, 'fraud_fraction': f,
             'detection_bound': 1.0 - audit.soundness_error(f, k)[0]}]


def _effective_point(ctx, point):
    gamma = point['gamma']
    cfg_m = ctx.cfg.mech_config(gamma)
    alloc = ctx.allocation('optimal', gamma)
    eff = mech.effective_qfi(alloc, ctx.spec, cfg_m, ctx.centroid)
    ctx.cfg.log_print('effective: gamma {:g} c {:g}'
                      .format(gamma, eff.fitted_c))
    return [{'experiment': 'effective', 'gamma': gamma, 'mode': int(k),
             'lambda': ctx.spectrum.eigenvalues[k],
             'weight': float(eff.weights[k]), 'eta': float(alloc.etas[k]),
             'contraction': float(eff.contractions[k]),
             'c_estimate': float((1.0 - eff.contractions[k])
                                 / (gamma*eff.weights[k]))}
            for k in eff.active()]


def _wasserstein_point(ctx, point):
    cfg = ctx.cfg
    pairs = mech.displaced_pairs(
        ctx.dataset.points[:cfg.n_wasserstein_pairs], point['separation'],
        seed=[cfg.seed, point['index']])
    report = mech.wasserstein_lipschitz(pairs, ctx.spec, gamma=cfg.gamma)
    return [{'experiment': 'wasserstein', 'separation': point['separation'],
             'n_pairs': len(pairs), 'L_W': report.L_W,
             'mean_ratio': float(np.mean(report.ratios)),
             'sqrt_lambda_max': report.sqrt_lambda_max, 'gap': report.gap,
             'max_bound': float(np.max(report.bounds))}]


evaluators = {'tradeoff': _tradeoff_point,
              'pareto': _tradeoff_point,
              'spectrum': _spectrum_point,
              'hwnoise': _hwnoise_point,
              'compose': _compose_point,
              'adversary': _adversary_point,
              'adaptive': _adaptive_point,
              'dephasing': _dephasing_point,
              'classical': _classical_point,
              'effective': _effective_point,
              'wasserstein': _wasserstein_point,
              'audit': _audit_point}


def sweep_points(name, cfg):
    """Ordered list of sweep points of a runner."""
    gammas = sorted(cfg.gamma_grid)
    if name in ('tradeoff', 'pareto'):
        return [{'gamma': g, 'mode': m} for g in gammas
                for m in privacy_modes if m in cfg.modes]
    elif name == 'spectrum':
        return [{'kind': 'sample', 'index': i} for i in range(cfg.n)] + \
               [{'kind': 'mixed', 'gamma': g}
                for g in sorted(cfg.dephasing_gammas)]
    elif name == 'hwnoise':
        return [{'regime': r} for r in cfg.regimes]
    elif name == 'compose':
        return [{'gamma': g} for g in gammas]
    elif name == 'adversary':
        return [{'kind': 'leakage'}, {'kind': 'evasion'}] + \
               [{'kind': 'poison', 'trial': t}
                for t in range(cfg.n_poison_trials)]
    elif name == 'adaptive':
        return [{'kind': 'stream'}]
    elif name == 'dephasing':
        return [{'theta': t} for t in sorted(cfg.thetas)]
    elif name == 'classical':
        return [{'gamma': g, 'index': i} for i, g in enumerate(gammas)]
    elif name == 'effective':
        return [{'gamma': g} for g in sorted(cfg.effective_gammas)]
    elif name == 'wasserstein':
        return [{'separation': s, 'index': i}
                for i, s in enumerate(sorted(cfg.wasserstein_separations))]
    elif name == 'audit':
        return [{'trial': t} for t in range(cfg.n_audit_trials)]
    else:
        raise ValueError('Unknown runner ', name)


def evaluate_point(name, cfg_dict, point):
    """Result rows of one sweep point. Pure given its arguments."""
    if name not in evaluators:
        raise ValueError('Unknown runner ', name)
    cfg = ExperimentConfig(**cfg_dict)
    return evaluators[name](get_context(cfg), point)


def run_sweep(name, cfg):
    """Evaluate every sweep point, on a local pool when processes > 1.

    Rows come back in sweep-point order whatever the pool size.
    """
    points = sweep_points(name, cfg)
    cfg_dict = cfg.to_dict()
    cfg.log_print('{:s}: {:d} sweep points on {:d} processes'
                  .format(name, len(points), cfg.processes))
    args = [(name, cfg_dict, p) for p in points]
    if cfg.processes > 1:
        with multiprocessing.Pool(cfg.processes) as pool:
            results = pool.starmap(evaluate_point, args)
    else:
        results = [evaluate_point(*a) for a in args]
    return [row for rows in results for row in rows]


def pareto_front(rows, x='epsilon', y='accuracy'):
    """Flag rows not dominated by another row with lower x and higher y."""
    out = []
    for r in rows:
        dominated = any(o[x] <= r[x] and o[y] >= r[y]
                        and (o[x] < r[x] or o[y] > r[y]) for o in rows)
        out.append(dict(r, experiment='pareto', pareto=not dominated))
    return out


def run_tradeoff(cfg):
    return run_sweep('tradeoff', cfg)


def run_spectrum(cfg):
    return run_sweep('spectrum', cfg)


def run_pareto(cfg):
    return finish_rows('pareto', run_sweep('pareto', cfg))


def run_hw_noise(cfg):
    return run_sweep('hwnoise', cfg)


def run_composition(cfg):
    return run_sweep('compose', cfg)


def run_adversary(cfg):
    return run_sweep('adversary', cfg)


def run_adaptive(cfg):
    return run_sweep('adaptive', cfg)


def run_dephasing(cfg):
    return run_sweep('dephasing', cfg)


def run_classical_baseline(cfg):
    return run_sweep('classical', cfg)


def contraction_fit_rows(rows):
    """Effective QFI rows with the contraction constant fitted across
    every budget attached."""
    fit = mech.fit_contraction([r['gamma'] for r in rows],
                               [r['weight'] for r in rows],
                               [r['contraction'] for r in rows])
    return [dict(r, fitted_c=fit.fitted_c, predicted=float(p),
                 deviation=float(d))
            for r, p, d in zip(rows, fit.predicted, fit.deviations)]


def finish_rows(name, rows):
    """Post-processing of runners that need every row of the sweep."""
    if name == 'pareto':
        return pareto_front(rows)
    elif name == 'effective':
        return contraction_fit_rows(rows)
    return rows


def run_effective(cfg):
    return finish_rows('effective', run_sweep('effective', cfg))


def run_wasserstein(cfg):
    return run_sweep('wasserstein', cfg)


def run_audit(cfg, out_dir=None):
    """Audit trials, and with out_dir the commitment, records and one
    Fiat-Shamir transcript written there."""
    rows = run_sweep('audit', cfg)
    if out_dir is not None:
        ctx = get_context(cfg)
        trail = ctx.audit_trail
        os.makedirs(out_dir, exist_ok=True)
        audit.write_commitment(trail.root, trail.eps_claimed,
                               os.path.join(out_dir, 'commitment.txt'),
                               len(trail.records))
        audit.save_records(trail.records,
                           os.path.join(out_dir, 'records.json'))
        transcript = audit.run_round(trail, cfg.challenge_ratio,
                                     cfg.mech_config(), mode='FiatShamir')
        audit.save_transcript(transcript,
                              os.path.join(out_dir, 'transcript.json'))
    return rows


runners = {'tradeoff': run_tradeoff,
           'spectrum': run_spectrum,
           'pareto': run_pareto,
           'hwnoise': run_hw_noise,
           'compose': run_composition,
           'adversary': run_adversary,
           'adaptive': run_adaptive,
           'dephasing': run_dephasing,
           'classical': run_classical_baseline,
           'effective': run_effective,
           'wasserstein': run_wasserstein,
           'audit': run_audit}


def _check(name, passed, value):
    return {'check': name, 'passed': bool(passed), 'value': value}


def _close(a, b, tol=1e-12):
    return abs(a - b) <= tol


def acceptance_checks(name, rows, cfg=None):
    """Threshold checks of a runner's rows, as a list of
    {'check', 'passed', 'value'} dicts."""
    checks = []
    if name in ('tradeoff', 'pareto'):
        by = {(r['mode'], r['gamma']): r for r in rows}
        gammas = sorted({r['gamma'] for r in rows})
        for r in rows:
            ok = np.isfinite(r['epsilon']) and r['epsilon'] >= 0 \
                and -1e-12 <= r['fidelity'] <= 1 + 1e-12
            if not ok:
                checks.append(_check('finite_row', False, r['epsilon']))
            if r['mode'] in ('optimal', 'geometric'):
                lhs, rhs = r['uncertainty_lhs'], r['uncertainty_rhs']
                checks.append(_check('uncertainty_{:s}_gamma_{:g}'
                                     .format(r['mode'], r['gamma']),
                                     lhs >= rhs - 1e-9, [lhs, rhs]))
        for g in gammas:
            if g > 0.05:
                continue
            trio = [by.get((m, g)) for m in ('subspace', 'optimal',
                                             'isotropic')]
            if None not in trio:
                e = [t['epsilon'] for t in trio]
                checks.append(_check('mode_order_gamma_{:g}'.format(g),
                                     e[0] <= e[1] <= e[2], e))
            if ('optimal', g) in by and ('isotropic', g) in by \
               and _close(g, 0.01):
                ratio = by[('isotropic', g)]['epsilon'] \
                    / by[('optimal', g)]['epsilon']
                checks.append(_check('advantage_ratio', ratio > 1.0, ratio))
        for m in ('optimal', 'geometric'):
            eps = [by[(m, g)]['epsilon'] for g in gammas if (m, g) in by]
            if len(eps) > 1:
                checks.append(_check(m + '_monotone_in_gamma',
                                     np.all(np.diff(eps) <= 1e-12), eps))
        if name == 'pareto':
            front = [r for r in rows if r['pareto']]
            checks.append(_check('optimal_on_front',
                                 any(r['mode'] == 'optimal' for r in front),
                                 len(front)))
    elif name == 'spectrum':
        mixed = [r for r in rows if r['kind'] == 'mixed']
        if len(mixed) > 1:
            frac = [r['quantum_fraction'] for r in mixed]
            checks.append(_check('quantum_fraction_decreasing',
                                 np.all(np.diff(frac) <= 1e-9), frac))
            lam = [mixed[0]['lambda_class'], mixed[-1]['lambda_class']]
            checks.append(_check('classical_lambda_increases',
                                 lam[1] > 0 and lam[1] >= 5.0*lam[0], lam))
        by = {r['gamma']: r['quantum_fraction'] for r in mixed}
        if 0.0 in by:
            checks.append(_check('quantum_fraction_gamma0', by[0.0] >= 0.85,
                                 by[0.0]))
        if 0.8 in by:
            checks.append(_check('quantum_fraction_gamma0.8', by[0.8] < 0.2,
                                 by[0.8]))
    elif name == 'hwnoise':
        by = {r['regime']: r['delta_f'] for r in rows}
        vals = [by[r] for r in ('Ideal', 'Low', 'Moderate', 'High')
                if r in by]
        checks.append(_check('delta_f_increasing',
                             np.all(np.diff(vals) > 0), vals))
        if 'Ideal' in by:
            checks.append(_check('ideal_zero', by['Ideal'] <= 1e-9,
                                 by['Ideal']))
        if 'High' in by:
            checks.append(_check('high_delta_f',
                                 abs(by['High'] - 0.041) <= 0.02,
                                 by['High']))
    elif name == 'compose':
        for cg in sorted({r['c_gamma'] for r in rows}):
            sub = [r for r in rows if r['c_gamma'] == cg]
            totals = [r['total'] for r in sub]
            checks.append(_check('total_monotone_{:g}'.format(cg),
                                 np.all(np.diff(totals) > 0)
                                 and totals[-1] <= sub[0]['saturation'],
                                 totals[-1]))
            ratio = {r['k']: r['ratio'] for r in sub}
            if _close(cg, 0.1):
                for k, want in ((20, 2.0), (100, 9.0)):
                    if k in ratio:
                        checks.append(_check('ratio_k{:d}'.format(k),
                                             abs(ratio[k] - want) <= 0.05,
                                             ratio[k]))
            if _close(cg, 0.01):
                checks.append(_check('crossover',
                                     abs(sub[0]['crossover'] - 163) <= 5,
                                     sub[0]['crossover']))
    elif name == 'adversary':
        leak = [r for r in rows if r['kind'] == 'leakage']
        frac = [r['fraction'] for r in leak]
        checks.append(_check('leakage_fractions',
                             _close(sum(frac), 1.0, 1e-9)
                             and np.all(np.diff(frac) <= 1e-12), frac))
        for r in rows:
            if r['kind'] == 'evasion':
                checks.append(_check('evasion_ratio',
                                     _close(r['ratio'], r['spectrum_ratio'],
                                            1e-9*r['ratio']), r['ratio']))
                checks.append(_check('isotropic_evasion',
                                     abs(r['isotropic_ratio'] - 1) <= 0.01,
                                     r['isotropic_ratio']))
        poison = [r for r in rows if r['kind'] == 'poison']
        if poison:
            mean_err = float(np.mean([r['mean_error'] for r in poison]))
            median_err = float(np.mean([r['median_error'] for r in poison]))
            checks.append(_check('median_robust',
                                 median_err <= 0.6*mean_err,
                                 [median_err, mean_err]))
    elif name == 'adaptive':
        within = rows[:10]
        checks.append(_check('ema_within_10pct',
                             within[-1]['rel_error'] <= 0.1,
                             within[-1]['rel_error']))
        checks.append(_check('adaptive_ratio', rows[-1]['ratio'] >= 1.05,
                             rows[-1]['ratio']))
        rate = rows[-1]['ema_rate']
        if np.isfinite(rate):
            checks.append(_check('ema_rate', -0.65 <= rate <= -0.30, rate))
        means = [r['batch_mean'] for r in rows]
        checks.append(_check('running_mean',
                             _close(rows[-1]['running_mean'], np.mean(means),
                                    1e-9*abs(np.mean(means))),
                             rows[-1]['running_mean']))
    elif name == 'dephasing':
        by = {(r['theta'], r['gamma']): r['mi'] for r in rows}
        base = rows[0]['baseline_mi']
        for (t, g), mi in by.items():
            if g == 0:
                checks.append(_check('gamma0_theta{:g}'.format(t),
                                     _close(mi, base, 1e-9), mi))
        if (0.0, 0.6) in by:
            checks.append(_check('dephasing_paradox',
                                 by[(0.0, 0.6)] >= base - 1e-9,
                                 by[(0.0, 0.6)]))
        curve = adversary.DephasingCurve.from_rows(rows, base)
        aligned = _close(curve.thetas[0], 0.0) \
            and _close(curve.thetas[-1], np.pi/2)
        if aligned and 0.8 in curve.gammas:
            ratio = curve.amplification(list(curve.gammas).index(0.8))
            checks.append(_check('amplification', ratio >= 1e3, ratio))
    elif name == 'classical':
        for r in rows:
            checks.append(_check('laplace_above_gaussian_{:g}'
                                 .format(r['gamma']),
                                 r['eps_laplace'] >= r['eps_gaussian'],
                                 [r['eps_laplace'], r['eps_gaussian']]))
            if cfg is not None and _close(r['gamma'], cfg.gamma):
                checks.append(_check('classical_gap', r['gap'] >= 1e3,
                                     r['gap']))
    elif name == 'effective':
        small = [r for r in rows if r['gamma'] <= 0.2 + 1e-12]
        if small:
            worst = max(r['deviation'] for r in small)
            checks.append(_check('contraction_fit', worst <= 0.1, worst))
        c = rows[0]['fitted_c']
        checks.append(_check('fitted_c_range', 0 < c <= 2, c))
    elif name == 'wasserstein':
        far = max(rows, key=lambda r: r['separation'])
        checks.append(_check('wasserstein_gap', far['gap'] >= 5, far['gap']))
        for r in rows:
            checks.append(_check('bound_finite_{:g}'.format(r['separation']),
                                 np.isfinite(r['max_bound']), r['max_bound']))
    elif name == 'audit':
        honest = [r['honest_verdict'] == 'accept' for r in rows]
        checks.append(_check('honest_accepted', all(honest), sum(honest)))
        rate = float(np.mean([r['fraud_verdict'] == 'reject'
                              for r in rows]))
        bound = rows[0]['detection_bound']
        checks.append(_check('fraud_detected', rate >= bound - 0.05,
                             [rate, bound]))
    else:
        raise ValueError('Unknown runner ', name)
    return checks


def _format(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (float, np.floating)):
        return '%.12g' % value
    if value is None:
        return ''
    return str(value)


def row_columns(rows):
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    return cols


def write_csv(rows, filename):
    """Rows as CSV with 12 significant digits, columns in first-seen order."""
    cols = row_columns(rows)
    with open(filename, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(cols)
        for r in rows:
            writer.writerow([_format(r.get(c)) for c in cols])


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, bytes):
        return value.hex()
    raise TypeError('write_json: cannot serialise ', type(value))


def write_json(summary, filename):
    with open(filename, 'w') as f:
        json.dump(summary, f, indent=1, sort_keys=True, default=_jsonable)


def summary_fields(name, rows):
    """Runner-specific scalars of the JSON summary."""
    if not rows:
        return {}
    if name == 'effective':
        return {'fitted_c': rows[0]['fitted_c'],
                'fit_residual': max(r['deviation'] for r in rows)}
    elif name == 'wasserstein':
        far = max(rows, key=lambda r: r['separation'])
        return {'L_W': far['L_W'], 'sqrt_lambda_max': far['sqrt_lambda_max'],
                'gap': far['gap']}
    return {}


def summarize(name, rows, cfg, checks=None):
    summary = {'runner': name, 'config': cfg.to_dict(), 'n_rows': len(rows),
               'checks': [] if checks is None else checks,
               'passed': checks is None or all(c['passed'] for c in checks)}
    summary.update(summary_fields(name, rows))
    return summary


def write_hdf5(name, rows, cfg, filename, spectrum=None):
    """Append a runner's rows as one HDF5 group, config in its attrs.

    Numeric columns become float datasets, the rest fixed-width strings.
    An existing group of the same name is replaced.
    """
    cols = row_columns(rows)
    with h5py.File(filename, 'a') as h5f:
        if name in h5f:
            del h5f[name]
        grp = h5f.create_group(name)
        for key, value in cfg.to_dict().items():
            if value is None or (isinstance(value, list)
                                 and any(isinstance(v, str) for v in value)):
                value = json.dumps(value)
            grp.attrs[key] = value
        for c in cols:
            values = [r.get(c) for r in rows]
            if all(isinstance(v, (int, float, np.integer, np.floating))
                   and not isinstance(v, (bool, np.bool_))
                   for v in values):
                grp.create_dataset(c, data=np.array(values, dtype=float))
            else:
                grp.create_dataset(c, data=np.array(
                    [_format(v) for v in values], dtype='S'))
        if spectrum is not None:
            grp.create_dataset('qfi_eigenvalues', data=spectrum.eigenvalues)
            grp.create_dataset('qfi_eigenvectors',
                               data=spectrum.eigenvectors)
