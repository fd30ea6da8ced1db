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
import numpy as np
from . import embed
from . import qfi
from . import qstate as qs

# Default grid of the sensitive feature
feature_range = (-1.5, 1.5)


class EvasionReport():
    """Distinguishability of adversarial shifts along the extreme QFI
    eigenvectors.

    Attributes:
        direction_min, direction_max: Unit eigenvectors of lambda_min and
            lambda_max.
        d_inf_min, d_inf_max: (eps_adv^2/2) lambda along each direction, nats.
        ratio: d_inf_max/d_inf_min, inf when lambda_min is zero.
        flagged: True when the ratio is infinite.
        direct_min, direct_max: -ln |<psi(x)|psi(x + eps u)>|^2, None unless
            a spec and base point were given.
        quadratic_min, quadratic_max: The quadratic-form prediction
            eps^2 lambda/4 of the direct values.
    """
    def __init__(self, direction_min, direction_max, d_inf_min, d_inf_max,
                 ratio, flagged, direct_min=None, direct_max=None,
                 quadratic_min=None, quadratic_max=None):
        self.direction_min = direction_min
        self.direction_max = direction_max
        self.d_inf_min = d_inf_min
        self.d_inf_max = d_inf_max
        self.ratio = ratio
        self.flagged = flagged
        self.direct_min = direct_min
        self.direct_max = direct_max
        self.quadratic_min = quadratic_min
        self.quadratic_max = quadratic_max

    def consistency(self):
        """Largest relative gap between direct and quadratic-form values
        over the directions with nonzero prediction."""
        if self.direct_max is None:
            return None
        pairs = ((self.direct_min, self.quadratic_min),
                 (self.direct_max, self.quadratic_max))
        gaps = [abs(d - q)/q for d, q in pairs if q > 0]
        return max(gaps) if gaps else 0.0

    def to_dict(self):
        return {'d_inf_min': self.d_inf_min, 'd_inf_max': self.d_inf_max,
                'ratio': self.ratio, 'flagged': self.flagged,
                'direction_min': np.asarray(self.direction_min).tolist(),
                'direction_max': np.asarray(self.direction_max).tolist(),
                'direct_min': self.direct_min, 'direct_max': self.direct_max}


class LeakageProfile():
    def __init__(self, lambdas, bounds, fractions):
        self.lambdas = lambdas
        self.bounds = bounds
        self.fractions = fractions

    @property
    def total(self):
        return float(np.sum(self.bounds))


class PoisonReport():
    """Top-eigenvalue estimates before and after poisoning.

    The mean estimates are lambda_max at the data centroid. The median
    estimates are the median of the per-sample lambda_max values.
    """
    def __init__(self, beta, n_poisoned, poisoned_indices, centroid_shift,
                 clean_mean, poisoned_mean, clean_median, poisoned_median):
        self.beta = beta
        self.n_poisoned = n_poisoned
        self.poisoned_indices = poisoned_indices
        self.centroid_shift = centroid_shift
        self.clean_mean = clean_mean
        self.poisoned_mean = poisoned_mean
        self.clean_median = clean_median
        self.poisoned_median = poisoned_median

    @property
    def mean_error(self):
        return abs(self.poisoned_mean - self.clean_mean)/self.clean_mean

    @property
    def median_error(self):
        return abs(self.poisoned_median - self.clean_median)/self.clean_median


class DephasingCurve():
    """Mutual information over a theta x gamma grid.

    mi_values[i, j] belongs to thetas[i] and gammas[j].
    """
    def __init__(self, thetas, gammas, mi_values, baseline_mi):
        self.thetas = np.asarray(thetas, dtype=float)
        self.gammas = np.asarray(gammas, dtype=float)
        self.mi_values = np.asarray(mi_values, dtype=float)
        self.baseline_mi = float(baseline_mi)
        if np.any(self.mi_values < -1e-9):
            raise ValueError('DephasingCurve: negative mutual information ',
                             self.mi_values.min())

    def amplification(self, j):
        """I(theta first)/I(theta last) at gammas[j]."""
        low = self.mi_values[-1, j]
        return self.mi_values[0, j]/low if low > 0 else np.inf

    def residual(self):
        """I_theta - I_0 cos^2 theta, with I_0 the noiseless value."""
        return self.mi_values \
            - self.baseline_mi*np.cos(self.thetas)[:, None]**2

    def rows(self):
        residual = self.residual()
        return [{'theta': float(t), 'gamma': float(g),
                 'mi': float(self.mi_values[i, j]),
                 'baseline_mi': self.baseline_mi,
                 'residual': float(residual[i, j])}
                for i, t in enumerate(self.thetas)
                for j, g in enumerate(self.gammas)]

    @classmethod
    def from_rows(cls, rows, baseline_mi=None):
        """Rebuild the grid from rows with theta, gamma and mi keys."""
        thetas = sorted({r['theta'] for r in rows})
        gammas = sorted({r['gamma'] for r in rows})
        mi = np.full((len(thetas), len(gammas)), np.nan)
        for r in rows:
            mi[thetas.index(r['theta']), gammas.index(r['gamma'])] = r['mi']
        if np.any(np.isnan(mi)):
            raise ValueError('DephasingCurve: incomplete grid')
        if baseline_mi is None:
            baseline_mi = rows[0]['baseline_mi']
        return cls(thetas, gammas, mi, baseline_mi)


def _spectrum(F):
    if isinstance(F, qfi.QfiSpectrum):
        return F
    return qfi.spectral(F)


def evasion_analysis(F, eps_adv, spec=None, x=None):
    """Distinguishability (eps_adv^2/2) lambda of shifts along u_min and
    u_max.

    With spec and x given, the shifted states are also embedded and the
    fidelity-based value -ln|<psi(x)|psi(x + eps u)>|^2 is compared with
    eps^2 lambda/4.
    """
    spectrum = _spectrum(F)
    lam_max, lam_min = spectrum.lambda_max, spectrum.lambda_min
    u_max = spectrum.eigenvectors[:, 0]
    u_min = spectrum.eigenvectors[:, -1]
    d_max = 0.5*eps_adv**2*lam_max
    d_min = 0.5*eps_adv**2*lam_min
    flagged = not lam_min > 0
    ratio = np.inf if flagged else lam_max/lam_min
    report = EvasionReport(u_min, u_max, d_min, d_max, ratio, flagged)
    if spec is not None:
        if x is None:
            x = np.zeros(spec.n_qubits)
        psi = embed.embed_amplitudes(x, spec)

        def direct(u):
            phi = embed.embed_amplitudes(np.asarray(x) + eps_adv*u, spec)
            overlap = abs(np.vdot(psi, phi))**2
            return float(-np.log(min(1.0, overlap)))
        report.direct_min = direct(u_min)
        report.direct_max = direct(u_max)
        report.quadratic_min = 0.25*eps_adv**2*lam_min
        report.quadratic_max = 0.25*eps_adv**2*lam_max
    return report


def measured_evasion_ratios(samples, spec, eps_adv=0.01, step=1e-4):
    """Evasion ratio at every sample point from its own QFI spectrum."""
    out = []
    for x in samples:
        rep = evasion_analysis(qfi.qfi_pure(x, spec, step), eps_adv)
        out.append(rep.ratio)
    return np.array(out)


def leakage_profile(lambdas, var_s, eps):
    """Per-mode mutual information bounds 1/2 ln(1 + lambda_k Var(s)/eps).

    Fractions are I_k over their sum, uniform if nothing leaks.
    """
    if not var_s > 0:
        raise ValueError('leakage_profile: var_s must be positive ', var_s)
    if not eps > 0:
        raise ValueError('leakage_profile: eps must be positive ', eps)
    lam = np.asarray(lambdas, dtype=float).ravel()
    if np.any(lam < 0):
        raise ValueError('leakage_profile: negative eigenvalue ', lam.min())
    bounds = 0.5*np.log1p(lam*var_s/eps)
    total = bounds.sum()
    if total > 0:
        fractions = bounds/total
    else:
        fractions = np.full(lam.size, 1.0/lam.size)
    return LeakageProfile(lam, bounds, fractions)


def poison_experiment(dataset, beta, delta_x, spec, seed=None, step=1e-4):
    """Shift floor(beta n) seeded random points by delta_x and compare the
    centroid and median top-eigenvalue estimates before and after.

    Args:
        dataset: Clean Dataset.
        beta: Poisoned fraction in [0, 0.5).
        delta_x: Shift applied to every poisoned point.
        spec: EmbeddingSpec.
        seed (optional): Seed of the point choice. Defaults to the dataset
            seed, or 0.
        step (optional): QFI difference step. Defaults to 1e-4.
    """
    if not 0.0 <= beta < 0.5:
        raise ValueError('poison_experiment: beta outside [0, 0.5) ', beta)
    n = len(dataset)
    m = int(np.floor(beta*n + 1e-9))
    if beta > 0 and m < 1:
        raise ValueError('poison_experiment: beta n below one point ',
                         beta*n)
    delta_x = np.asarray(delta_x, dtype=float).ravel()
    if delta_x.size != dataset.points.shape[1]:
        raise ValueError('poison_experiment: shift dimension mismatch ',
                         delta_x.size)
    if seed is None:
        seed = 0 if dataset.seed is None else dataset.seed
    rng = np.random.Generator(np.random.PCG64(seed))
    chosen = np.sort(rng.choice(n, size=m, replace=False)) if m > 0 \
        else np.zeros(0, dtype=int)
    clean = dataset.points
    poisoned = clean.copy()
    poisoned[chosen] += delta_x

    clean_lams = qfi.per_sample_lambda_max(clean, spec, step)
    if m > 0:
        poisoned_lams = clean_lams.copy()
        poisoned_lams[chosen] = qfi.per_sample_lambda_max(poisoned[chosen],
                                                          spec, step)
    else:
        poisoned_lams = clean_lams
    clean_mean = qfi.lambda_max(clean.mean(axis=0), spec, step)
    poisoned_mean = qfi.lambda_max(poisoned.mean(axis=0), spec, step) \
        if m > 0 else clean_mean
    return PoisonReport(beta, m, chosen,
                        poisoned.mean(axis=0) - clean.mean(axis=0),
                        clean_mean, poisoned_mean,
                        float(np.median(clean_lams)),
                        float(np.median(poisoned_lams)))


def _layer_unitaries(x, spec):
    """RY, CZ and RZ layers of the embedding circuit as d x d matrices."""
    angles = spec.alpha*x
    ry_layer = qs.rotation_layer(angles, spec.n_qubits)
    cz_layer = np.diag(spec._cz_sign).astype(complex)
    phase = (2.0*spec._bits - 1.0).T @ (0.5*spec.rz_factor*angles)
    rz_layer = np.diag(np.exp(1j*phase))
    return ry_layer, cz_layer, rz_layer


def _dephased_state(x, spec, gamma, theta, per_layer):
    if not per_layer or gamma == 0:
        rho = embed.embed_pure(x, spec).density()
        return qs.dephase(rho, gamma, theta) if gamma > 0 else rho
    d = 2**spec.n_qubits
    m = np.zeros((d, d), dtype=complex)
    m[0, 0] = 1.0
    rho = qs.MixedState(m, check=False)
    for u in _layer_unitaries(x, spec):
        rho = qs.MixedState(u @ rho.matrix @ u.conj().T, check=False)
        rho = qs.dephase(rho, gamma, theta)
    return rho


def mutual_information(joint):
    """I(S; M) in nats of a joint probability table, zero cells skipped."""
    joint = np.clip(np.asarray(joint, dtype=float), 0.0, None)
    joint = joint/joint.sum()
    ps = joint.sum(axis=1, keepdims=True)
    pm = joint.sum(axis=0, keepdims=True)
    mask = joint > 0
    ratio = np.where(mask, joint/np.where(mask, ps*pm, 1.0), 1.0)
    return float(max(0.0, np.sum(joint[mask]*np.log(ratio[mask]))))


def dephasing_mi(theta, gamma, spec, feature_index, grid_size=32,
                 per_layer=True, centroid=None, s_range=feature_range):
    """Mutual information between one input feature and the Z-basis
    measurement of the dephased embedding.

    The feature runs over a uniform grid of grid_size points on s_range with
    the other coordinates held at the centroid. Each grid value is embedded,
    dephased with strength gamma in the RY(theta) rotated basis and measured.
    With per_layer the channel follows each of the RY, CZ and RZ layers,
    otherwise it is applied once to the output state.
    """
    if grid_size < 8:
        raise ValueError('dephasing_mi: grid_size below 8 ', grid_size)
    if not 0.0 <= theta <= np.pi/2 + 1e-12:
        raise ValueError('dephasing_mi: theta outside [0, pi/2] ', theta)
    if not 0.0 <= gamma <= 1.0:
        raise ValueError('dephasing_mi: gamma outside [0, 1] ', gamma)
    if not 0 <= feature_index < spec.n_qubits:
        raise IndexError('dephasing_mi: feature index out of range',
                         feature_index)
    if not s_range[1] > s_range[0]:
        raise ValueError('dephasing_mi: degenerate grid ', s_range)
    base = np.zeros(spec.n_qubits) if centroid is None \
        else np.array(centroid, dtype=float)
    grid = np.linspace(s_range[0], s_range[1], grid_size)
    joint = np.zeros((grid_size, 2**spec.n_qubits))
    for i, s in enumerate(grid):
        x = base.copy()
        x[feature_index] = s
        rho = _dephased_state(x, spec, gamma, theta, per_layer)
        joint[i] = qs.measure_probs(rho).probs/grid_size
    return mutual_information(joint)


def dephasing_curve(thetas, gammas, spec, feature_index, grid_size=32,
                    per_layer=True, centroid=None, baseline_mi=None):
    """dephasing_mi over every (theta, gamma) pair, plus the noiseless
    baseline unless baseline_mi is given."""
    thetas = np.asarray(thetas, dtype=float)
    gammas = np.asarray(gammas, dtype=float)
    if thetas.size == 0 or gammas.size == 0:
        raise ValueError('dephasing_curve: empty grid')
    mi = np.zeros((thetas.size, gammas.size))
    for i, t in enumerate(thetas):
        for j, g in enumerate(gammas):
            mi[i, j] = dephasing_mi(t, g, spec, feature_index, grid_size,
                                    per_layer, centroid)
    if baseline_mi is None:
        baseline_mi = dephasing_mi(0.0, 0.0, spec, feature_index, grid_size,
                                   per_layer, centroid)
    return DephasingCurve(thetas, gammas, mi, baseline_mi)
