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
import warnings
import numpy as np
import scipy.linalg
from . import embed
from . import qfi
from . import qstate as qs
from . import transport


class MechanismConfig():
    """Parameters of a privacy mechanism.

    Args:
        Delta (optional): Sensitivity radius in data units. Defaults to 1.0.
        c (optional): Calibration constant in (0, 2]. Defaults to 1.0.
        gamma (optional): Noise budget in [0, 1). Defaults to 0.01.
    """
    def __init__(self, Delta=1.0, c=1.0, gamma=0.01):
        if not Delta > 0:
            raise ValueError('MechanismConfig: Delta must be positive ', Delta)
        if not 0 < c <= 2:
            raise ValueError('MechanismConfig: c outside (0, 2] ', c)
        if not 0 <= gamma < 1:
            raise ValueError('MechanismConfig: gamma outside [0, 1) ', gamma)
        if c*gamma >= 1:
            raise ValueError('MechanismConfig: c*gamma must be below 1 ',
                             c*gamma)
        self.Delta = float(Delta)
        self.c = float(c)
        self.gamma = float(gamma)

    @property
    def c_gamma(self):
        return self.c*self.gamma

    def with_gamma(self, gamma):
        return MechanismConfig(self.Delta, self.c, gamma)

    def to_dict(self):
        return {'Delta': self.Delta, 'c': self.c, 'gamma': self.gamma}


class NoiseAllocation():
    """Allocation of the noise budget over QFI eigenmodes.

    Attributes:
        weights: Simplex weights p_k.
        active_set: Indices with p_k > 0.
        minimax_value: Worst per-mode sensitivity
            t = max_k lambda_k (1 - c gamma p_k).
        etas: Shift magnitudes, None until calibrated.
        directions: Eigenvectors as columns, None until calibrated.
        candidates: (|A|, t_A, feasible) for every active set examined.
    """
    def __init__(self, weights, active_set, minimax_value, etas=None,
                 directions=None, candidates=()):
        w = np.array(weights, dtype=float)
        if np.any(w < -1e-12) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError('NoiseAllocation: weights off the simplex ', w)
        self.weights = np.clip(w, 0.0, None)
        self.active_set = list(active_set)
        self.minimax_value = float(minimax_value)
        self.etas = None if etas is None else np.array(etas, dtype=float)
        self.directions = directions
        self.candidates = list(candidates)
        if self.etas is not None and np.any(self.etas < 0):
            raise ValueError('NoiseAllocation: negative shift ', self.etas)


class CompositionLedger():
    """Privacy cost of k contracting layers."""
    def __init__(self, k, lambda_max, per_layer, total, eps_seq, ratio,
                 saturation):
        self.k = k
        self.lambda_max = lambda_max
        self.per_layer = per_layer
        self.total = total
        self.eps_seq = eps_seq
        self.ratio = ratio
        self.saturation = saturation


def eps_isotropic(d, f_min, gamma):
    """Privacy of the depolarizing channel,
    ln(1 + d(1-f_min)/(gamma(1-gamma))).
    """
    if d < 2:
        raise ValueError('eps_isotropic: dimension below 2 ', d)
    if not 0.0 <= f_min <= 1.0:
        raise ValueError('eps_isotropic: f_min outside [0,1] ', f_min)
    if not 0.0 < gamma < 1.0:
        raise ValueError('eps_isotropic: gamma outside (0,1) ', gamma)
    return float(np.log1p(d*(1.0 - f_min)/(gamma*(1.0 - gamma))))


def minimax_value(lambdas, weights, c_gamma):
    lambdas = np.asarray(lambdas, dtype=float)
    return float(np.max(lambdas*(1.0 - c_gamma*np.asarray(weights))))


def optimal_allocation(lambdas, c_gamma, strict=False):
    """Minimax allocation of the noise budget over eigenmodes.

    Active sets are the top-|A| modes. For each |A| the equalising value
    t_A = (|A| - c gamma)/sum_A(1/lambda_k) gives
    p_k = (1 - t_A/lambda_k)/(c gamma), and the feasible set with the
    smallest t_A wins, smaller |A| first on ties.

    Args:
        lambdas: Descending QFI eigenvalues.
        c_gamma: Product c*gamma in (0, 1).
        strict (optional): Also require every inactive mode to satisfy
            lambda_k <= t_A, which makes t_A the true minimax over the
            simplex. Defaults to False.
    """
    lam = np.asarray(lambdas, dtype=float).ravel()
    if np.any(np.diff(lam) > 1e-12):
        raise ValueError('optimal_allocation: eigenvalues not descending ',
                         lam)
    if not lam[0] > 0:
        raise ValueError('optimal_allocation: all-zero spectrum')
    if not 0.0 < c_gamma < 1.0:
        raise ValueError('optimal_allocation: c*gamma outside (0,1) ',
                         c_gamma)
    p = lam.size
    best = None
    candidates = []
    for size in range(1, p + 1):
        if lam[size - 1] <= 0:
            break
        t = (size - c_gamma)/np.sum(1.0/lam[:size])
        pk = (1.0 - t/lam[:size])/c_gamma
        feasible = bool(np.all(pk >= -1e-12))
        if strict:
            feasible = feasible and bool(np.all(lam[size:] <= t + 1e-12))
        candidates.append((size, float(t), feasible))
        if feasible and (best is None or t < best[0]*(1.0 - 1e-12)):
            best = (t, size, pk)
    if best is None:
        raise RuntimeError('optimal_allocation: no feasible active set')
    t, size, pk = best
    weights = np.zeros(p)
    weights[:size] = np.clip(pk, 0.0, None)
    weights /= weights.sum()
    return NoiseAllocation(weights, list(range(size)), t,
                           candidates=candidates)


def eps_optimal(lambda1, cfg):
    """(Delta^2/2) lambda_1 (1 - c gamma)."""
    return 0.5*cfg.Delta**2*lambda1*(1.0 - cfg.c_gamma)


def eps_linear(lambdas, cfg):
    """Privacy with weights proportional to the eigenvalues."""
    lam = np.asarray(lambdas, dtype=float)
    if lam.sum() <= 0:
        return 0.0
    weights = lam/lam.sum()
    return 0.5*cfg.Delta**2*minimax_value(lam, weights, cfg.c_gamma)


def advantage_ratio(eps_iso, eps_opt):
    if eps_opt <= 0:
        return np.inf
    return eps_iso/eps_opt


def calibrate_allocation(alloc, spectrum, cfg, eps_target=None,
                         max_turn=np.pi/4):
    """Attach shift magnitudes eta_k = sqrt(2 eps/(Delta^2 lambda_k)) and
    eigen-directions to an allocation.

    Args:
        alloc: NoiseAllocation.
        spectrum: QfiSpectrum the allocation was made on.
        cfg: MechanismConfig.
        eps_target (optional): Privacy to saturate. Defaults to
            eps_optimal(lambda_max).
        max_turn (optional): Largest angle eta_k sqrt(lambda_k)/2 a
            translation turns the state by. At pi/4 the contraction
            constant reaches 2(1 - gamma). None leaves eta_k uncapped.
            Defaults to pi/4.
    """
    if eps_target is None:
        eps_target = eps_optimal(spectrum.lambda_max, cfg)
    etas = np.zeros(spectrum.eigenvalues.size)
    for k in alloc.active_set:
        lam = spectrum.eigenvalues[k]
        if lam <= 0:
            raise ValueError('calibrate_allocation: zero eigenvalue in '
                             'active mode ', k)
        etas[k] = np.sqrt(2.0*eps_target/(cfg.Delta**2*lam))
        if max_turn is not None:
            etas[k] = min(etas[k], 2.0*max_turn/np.sqrt(lam))
    return NoiseAllocation(alloc.weights, alloc.active_set,
                           alloc.minimax_value, etas=etas,
                           directions=spectrum.eigenvectors.copy(),
                           candidates=alloc.candidates)


def translation_generator(x, direction, spec, step=1e-4):
    """Hermitian generator G of translations along direction at x.

    G psi(x) = -i d_u psi(x), with d_u psi(x) taken normal to psi(x), and
    G vanishes outside the plane of psi(x) and that derivative, so
    exp(i eta G) rotates psi(x) by the angle eta sqrt(u^T F u)/2.
    """
    x = np.asarray(x, dtype=float).ravel()
    u = np.asarray(direction, dtype=float).ravel()
    psi = embed.embed_amplitudes(x, spec)
    d = (embed.embed_amplitudes(x + step*u, spec)
         - embed.embed_amplitudes(x - step*u, spec))/(2.0*step)
    d = d - psi*np.vdot(psi, d)
    return -1j*(np.outer(d, psi.conj()) - np.outer(psi, d.conj()))


def channel_unitaries(alloc, spec, anchor):
    """[(p_k, U_k)] of the weighted active modes, U_k = exp(i eta_k G_k)
    with the generators taken at anchor."""
    if alloc.etas is None or alloc.directions is None:
        raise ValueError('metric_channel_apply: allocation is not calibrated')
    units = []
    for k in alloc.active_set:
        if alloc.weights[k] == 0:
            continue
        G = translation_generator(anchor, alloc.directions[:, k], spec)
        units.append((alloc.weights[k],
                      scipy.linalg.expm(1j*alloc.etas[k]*G)))
    return units


def _mix(psi, units, gamma):
    rho = (1.0 - gamma)*np.outer(psi, psi.conj())
    for weight, U in units:
        v = U @ psi
        rho += gamma*weight*np.outer(v, v.conj())
    return qs.MixedState(rho, check=False)


def metric_channel_apply(x, alloc, spec, cfg, anchor=None):
    """Metric-adapted channel output
    (1-gamma)|psi(x)><psi(x)| + gamma sum_k p_k U_k|psi(x)><psi(x)|U_k^+.

    Args:
        x: Input point.
        alloc: Calibrated NoiseAllocation.
        spec: EmbeddingSpec.
        cfg: MechanismConfig.
        anchor (optional): Point the generators are taken at. Defaults to
            x, which makes each U_k translate psi(x) along u_k.
    """
    x = np.asarray(x, dtype=float).ravel()
    anchor = x if anchor is None else np.asarray(anchor, dtype=float).ravel()
    units = channel_unitaries(alloc, spec, anchor)
    if cfg.gamma == 0:
        units = []
    return _mix(embed.embed_amplitudes(x, spec), units, cfg.gamma)


class EffectiveQfi():
    """QFI of the channel output family at one noise budget.

    Attributes:
        matrix: QfiMatrix of the output family.
        contractions: r_k = u_k^T F_eff u_k / u_k^T F u_k per mode.
        weights: Budget weights p_k of the allocation.
        gamma: Noise budget.
        fitted_c: Budget-weighted (1 - r_k)/(gamma p_k) over the weighted
            modes, None at gamma=0.
    """
    def __init__(self, matrix, contractions, weights, gamma, fitted_c):
        self.matrix = matrix
        self.contractions = contractions
        self.weights = weights
        self.gamma = gamma
        self.fitted_c = fitted_c

    def active(self):
        return np.flatnonzero(self.weights > 0)


def effective_qfi(alloc, spec, cfg, x, step=1e-4):
    """QFI at x of y -> Phi(|psi(y)><psi(y)|) by the SLD method, the
    channel Phi calibrated at x."""
    x = np.asarray(x, dtype=float).ravel()
    units = channel_unitaries(alloc, spec, x)

    def family(y):
        return _mix(embed.embed_amplitudes(y, spec), units, cfg.gamma)
    f_eff = qfi.qfi_mixed(x, family, step).f_total
    f_in = qfi.qfi_pure(x, spec, step).entries
    u = alloc.directions
    base = np.einsum('ik,ij,jk->k', u, f_in, u)
    after = np.einsum('ik,ij,jk->k', u, f_eff.entries, u)
    contractions = np.where(base > 0, after/np.where(base > 0, base, 1.0),
                            1.0)
    weights = np.asarray(alloc.weights, dtype=float)
    if cfg.gamma == 0:
        return EffectiveQfi(f_eff, contractions, weights, 0.0, None)
    active = np.flatnonzero(weights > 0)
    ck = (1.0 - contractions[active])/(cfg.gamma*weights[active])
    fitted_c = float(np.dot(weights[active], ck)/np.sum(weights[active]))
    return EffectiveQfi(f_eff, contractions, weights, cfg.gamma, fitted_c)


class ContractionFit():
    """Single c fitted to 1 - r = c gamma p over a budget sweep.

    Attributes:
        gammas, weights, contractions: One entry per (budget, active mode).
        fitted_c: Least squares c.
        predicted: 1 - c gamma p per entry.
        deviations: |r - predicted|/predicted per entry.
        residual: Largest deviation.
        warning: True if the residual exceeds 10% or c falls outside (0,2].
    """
    def __init__(self, gammas, weights, contractions, fitted_c):
        self.gammas = np.asarray(gammas, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        self.contractions = np.asarray(contractions, dtype=float)
        self.fitted_c = fitted_c
        self.predicted = 1.0 - fitted_c*self.gammas*self.weights
        self.deviations = np.abs(self.contractions - self.predicted) \
            / np.abs(self.predicted)
        self.residual = float(np.max(self.deviations))
        self.warning = self.residual > 0.1 or not 0 < fitted_c <= 2


def fit_contraction(gammas, weights, contractions):
    """Fit c over entries with gamma p > 0; the rest are dropped."""
    g = np.asarray(gammas, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    r = np.asarray(contractions, dtype=float).ravel()
    keep = g*w > 0
    if not np.any(keep):
        raise ValueError('fit_contraction: no entry with gamma p > 0')
    gp = g[keep]*w[keep]
    coef, *_ = np.linalg.lstsq(gp[:, None], 1.0 - r[keep], rcond=None)
    c = float(coef[0])
    fit = ContractionFit(g[keep], w[keep], r[keep], c)
    if fit.warning:
        warnings.warn('fit_contraction: fit residual {:.3g}, fitted c {:.3g}'
                      .format(fit.residual, c))
    return fit


def effective_qfi_sweep(spectrum, spec, cfg, x, gammas, step=1e-4):
    """Effective QFI of the optimal allocation at each budget, and the
    contraction constant fitted across them.

    Returns:
        (list of EffectiveQfi, ContractionFit)
    """
    results = []
    for gamma in gammas:
        cfg_g = cfg.with_gamma(gamma)
        alloc = calibrate_allocation(
            optimal_allocation(spectrum.eigenvalues, cfg_g.c_gamma),
            spectrum, cfg_g)
        results.append(effective_qfi(alloc, spec, cfg_g, x, step))
    g, w, r = [], [], []
    for res in results:
        for k in res.active():
            g.append(res.gamma)
            w.append(res.weights[k])
            r.append(res.contractions[k])
    return results, fit_contraction(g, w, r)


class SubspaceResult():
    def __init__(self, state, eps, utility_loss, projected_point, kept):
        self.state = state
        self.eps = eps
        self.utility_loss = utility_loss
        self.projected_point = projected_point
        self.kept = kept


def subspace_project(x, spectrum, tau, spec, cfg, centroid=None):
    """Embed x with its high-QFI eigencoordinates (lambda_k > tau) frozen at
    the centroid.

    Returns a SubspaceResult with eps = (Delta^2/2) tau and utility loss
    eta_tau = sum_{lambda_k > tau} lambda_k / Tr F.
    """
    if not tau > 0:
        raise ValueError('subspace_project: tau must be positive ', tau)
    lam = spectrum.eigenvalues
    kept = lam <= tau
    if not np.any(kept):
        raise ValueError('subspace_project: every mode exceeds tau ', tau)
    x = np.asarray(x, dtype=float).ravel()
    if centroid is None:
        centroid = np.zeros_like(x)
    u = spectrum.eigenvectors[:, kept]
    projected = centroid + u @ (u.T @ (x - centroid))
    total = spectrum.trace()
    loss = float(np.sum(lam[~kept])/total) if total > 0 else 0.0
    return SubspaceResult(embed.embed_pure(projected, spec),
                          0.5*cfg.Delta**2*tau, loss, projected,
                          np.flatnonzero(kept))


class UncertaintyResult():
    """Privacy-utility product against its lower bounds.

    Attributes:
        lhs: eps (1 - F_min).
        rhs: gamma (Delta^2/2) (Tr(F) - c gamma lambda_max)/(p d), the
            product bound of a gamma-mixing channel.
        rhs_static: (Delta^2/2) Tr(F)/d, without the gamma scaling.
        holds: lhs >= rhs up to 1e-9.
        holds_static: lhs >= rhs_static up to 1e-9.
    """
    def __init__(self, lhs, rhs, rhs_static):
        self.lhs = lhs
        self.rhs = rhs
        self.rhs_static = rhs_static
        self.holds = lhs >= rhs - 1e-9
        self.holds_static = lhs >= rhs_static - 1e-9
        self.ratio = lhs/rhs if rhs > 0 else np.inf


def uncertainty_check(eps, min_channel_fidelity, F, cfg, d):
    """Compare eps (1 - F_min) with the product bound of a channel that
    mixes in a fraction gamma of displaced states.

    With every turn at the calibration cap pi/4, which the calibrated
    angle sqrt(eps/2)/Delta reaches once eps >= pi^2 Delta^2/8, such a
    channel has 1 - F_min = gamma/2 >= gamma/d. eps is at least the mean
    of lambda_k (1 - c gamma p_k), which is >= (Tr(F) - c gamma
    lambda_max)/p. The static form (Delta^2/2) Tr(F)/d does not shrink
    with gamma and fails as gamma -> 0; it is reported as rhs_static.

    Args:
        eps: Privacy of the channel.
        min_channel_fidelity: Smallest F(psi(x), Phi(psi(x))) over the
            evaluated inputs.
        F: QfiMatrix or p x p array.
        cfg: MechanismConfig of the channel.
        d: Hilbert space dimension.
    """
    f = F.entries if hasattr(F, 'entries') else np.asarray(F, dtype=float)
    p = f.shape[0]
    trace = float(np.trace(f))
    lam_max = float(np.linalg.eigvalsh(0.5*(f + f.T))[-1])
    lhs = eps*(1.0 - min_channel_fidelity)
    rhs_static = 0.5*cfg.Delta**2*trace/d
    rhs = cfg.gamma*0.5*cfg.Delta**2 \
        * max(trace - cfg.c_gamma*lam_max, 0.0)/(p*d)
    return UncertaintyResult(lhs, rhs, rhs_static)


def compose_qfi(k, lambda_max, cfg):
    """Ledger of k layers each contracting the sensitivity by (1 - c gamma).

    Layer i costs (Delta^2/2) lambda_max (1 - c gamma)^(i-1). The ratio
    compares the sequential bound k (Delta^2/2) lambda_max (1 - c gamma)
    with the geometric total. c gamma = 0 means no contraction.
    """
    if k < 1:
        raise ValueError('compose_qfi: k must be at least 1 ', k)
    base = 0.5*cfg.Delta**2*lambda_max
    cg = cfg.c_gamma
    if cg == 0:
        per_layer = np.full(k, base)
        total = k*base
        return CompositionLedger(k, lambda_max, per_layer, total, total,
                                 1.0, np.inf)
    per_layer = base*(1.0 - cg)**np.arange(k)
    total = base*(1.0 - (1.0 - cg)**k)/cg
    eps_seq = k*base*(1.0 - cg)
    ratio = eps_seq/total if total > 0 else 1.0
    return CompositionLedger(k, lambda_max, per_layer, total, eps_seq, ratio,
                             base/cg)


def composition_ratio(k, c_gamma):
    if c_gamma == 0:
        return 1.0
    return k*(1.0 - c_gamma)*c_gamma/(1.0 - (1.0 - c_gamma)**k)


def composition_crossover(c_gamma, target=2.0, k_max=10**6):
    """Smallest k with composition ratio at least target, None if none."""
    if c_gamma <= 0:
        return None
    for k in range(1, k_max + 1):
        if composition_ratio(k, c_gamma) >= target:
            return k
    return None


def _probs(p):
    return p.probs if isinstance(p, qs.Distribution) \
        else np.asarray(p, dtype=float).ravel()


def w1_diag(p, q):
    """Wasserstein-1 distance between bitstring distributions under the
    Hamming ground metric, solved exactly."""
    a, b = _probs(p), _probs(q)
    if a.shape != b.shape:
        raise ValueError('w1_diag: dimension mismatch ', (a.shape, b.shape))
    d = a.size
    if d > 64 or d < 2 or (d & (d - 1)) != 0:
        raise ValueError('w1_diag: dimension must be a power of two <= 64 ',
                         d)
    cost = transport.hamming_cost(d.bit_length() - 1)
    return transport.transport_simplex(a, b, cost).cost


def displaced_pairs(points, separation, seed=None):
    """Pairs (x, x + separation v) with v uniform on the unit sphere."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if separation <= 1e-6:
        raise ValueError('displaced_pairs: separation not above 1e-6 ',
                         separation)
    rng = np.random.Generator(np.random.PCG64(seed))
    v = rng.normal(size=points.shape)
    v /= np.linalg.norm(v, axis=1)[:, None]
    return [(x, x + separation*u) for x, u in zip(points, v)]


class WassersteinReport():
    def __init__(self, L_W, sqrt_lambda_max, gap, ratios, bounds):
        self.L_W = L_W
        self.sqrt_lambda_max = sqrt_lambda_max
        self.gap = gap
        self.ratios = ratios
        self.bounds = bounds


def wasserstein_lipschitz(sample_pairs, spec, gamma=None):
    """Empirical Lipschitz constant of x -> measurement distribution in W1,
    compared with sqrt(lambda_max) of the QFI.

    With gamma given, each pair also gets the bound L_W |x - x'|/gamma.
    """
    if len(sample_pairs) == 0:
        raise ValueError('wasserstein_lipschitz: no sample pairs')
    ratios = []
    dists = []
    sqrt_lam = 0.0
    for x, xp in sample_pairs:
        x = np.asarray(x, dtype=float)
        xp = np.asarray(xp, dtype=float)
        dist = np.linalg.norm(x - xp)
        if dist <= 1e-6:
            raise ValueError('wasserstein_lipschitz: pair closer than 1e-6 ',
                             dist)
        w = w1_diag(qs.measure_probs(embed.embed_pure(x, spec)),
                    qs.measure_probs(embed.embed_pure(xp, spec)))
        ratios.append(w/dist)
        dists.append(dist)
        for point in (x, xp):
            sqrt_lam = max(sqrt_lam, np.sqrt(qfi.lambda_max(point, spec)))
    ratios = np.array(ratios)
    L_W = float(ratios.max())
    gap = sqrt_lam/L_W if L_W > 0 else np.inf
    bounds = None if gamma is None else L_W*np.array(dists)/gamma
    return WassersteinReport(L_W, float(sqrt_lam), gap, ratios, bounds)
