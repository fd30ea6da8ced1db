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
import warnings
import numpy as np
import scipy.linalg
from . import embed

# Eigenvalue floor for the SLD sums
sld_floor = 1e-8
# Pairs closer than this count as degenerate in the quantum part
degenerate_tol = 1e-10


class QfiMatrix():
    """Quantum Fisher information matrix at a base point.

    Args:
        entries: p x p real symmetric matrix, units 1/data-unit^2.
        base_point: Input x the matrix was evaluated at.
        check (optional): Validate symmetry and positivity. Defaults to True.
    """
    def __init__(self, entries, base_point, check=True):
        f = np.array(entries, dtype=float)
        if f.ndim != 2 or f.shape[0] != f.shape[1]:
            raise ValueError('QfiMatrix: entries are not square ', f.shape)
        if check:
            asym = np.max(np.abs(f - f.T))
            if asym > 1e-8:
                raise ValueError('QfiMatrix: asymmetric entries ', asym)
            wmin = np.linalg.eigvalsh(0.5*(f + f.T))[0]
            if wmin < -1e-6:
                raise ValueError('QfiMatrix: negative eigenvalue ', wmin)
        self.entries = f
        self.base_point = np.array(base_point, dtype=float).ravel()

    def trace(self):
        return float(np.trace(self.entries))

    def to_dict(self):
        spec = spectral(self)
        return {'base_point': self.base_point.tolist(),
                'entries': self.entries.tolist(),
                'eigenvalues': spec.eigenvalues.tolist(),
                'eigenvectors': spec.eigenvectors.tolist()}


class QfiSpectrum():
    """Eigenvalues in descending order with eigenvectors as columns."""
    def __init__(self, eigenvalues, eigenvectors):
        w = np.array(eigenvalues, dtype=float).ravel()
        v = np.array(eigenvectors, dtype=float)
        if np.any(np.diff(w) > 0):
            raise ValueError('QfiSpectrum: eigenvalues not descending ', w)
        if np.any(w < 0):
            raise ValueError('QfiSpectrum: negative eigenvalue ', w.min())
        if v.shape != (w.size, w.size):
            raise ValueError('QfiSpectrum: eigenvector shape ', v.shape)
        self.eigenvalues = w
        self.eigenvectors = v

    @classmethod
    def from_eigenvalues(cls, lambdas):
        """Spectrum of diag(sorted lambdas), aligned with the input axes."""
        lambdas = np.asarray(lambdas, dtype=float)
        order = np.argsort(-lambdas, kind='stable')
        return cls(lambdas[order], np.eye(lambdas.size)[:, order])

    @property
    def lambda_max(self):
        return float(self.eigenvalues[0])

    @property
    def lambda_min(self):
        return float(self.eigenvalues[-1])

    def trace(self):
        return float(np.sum(self.eigenvalues))

    def reconstruct(self):
        v = self.eigenvectors
        return (v*self.eigenvalues) @ v.T


class QfiDecomposition():
    """Split of a mixed-state QFI into classical and quantum parts."""
    def __init__(self, f_total, f_class, f_quant):
        self.f_total = f_total
        self.f_class = f_class
        self.f_quant = f_quant
        total = f_total.trace()
        self.quantum_fraction = f_quant.trace()/total if total > 0 else 0.0


def _family_amplitudes(spec):
    if isinstance(spec, embed.EmbeddingSpec):
        return lambda x: embed.embed_amplitudes(x, spec)
    if callable(spec):
        return spec
    raise ValueError('qfi_pure: expected EmbeddingSpec or callable ', spec)


def _aligned(v, ref):
    return v*np.exp(-1j*np.angle(v[ref]))


def _central_difference(family, x, k, step, ref):
    e = np.zeros_like(x)
    e[k] = step
    return (_aligned(family(x + e), ref)
            - _aligned(family(x - e), ref))/(2.0*step)


def qfi_pure(x, spec, step=1e-4, richardson=False):
    """QFI of a pure-state family by central finite differences.

    F_ij = 4 Re(<d_i psi|d_j psi> - <d_i psi|psi><psi|d_j psi>). Each state
    is phase aligned so the amplitude that is largest at x is real and
    positive before differencing.

    Args:
        x: Base point.
        spec: EmbeddingSpec, or a callable returning amplitudes for x.
        step (optional): Difference step. Defaults to 1e-4.
        richardson (optional): Combine steps h and h/2 to cancel the
            leading error term. Defaults to False.
    """
    if step < 1e-10:
        raise ValueError('qfi_pure: finite difference step too small ', step)
    family = _family_amplitudes(spec)
    x = np.asarray(x, dtype=float).ravel()
    psi = family(x)
    ref = int(np.argmax(np.abs(psi)))
    psi = _aligned(psi, ref)
    derivs = []
    for k in range(x.size):
        d = _central_difference(family, x, k, step, ref)
        if richardson:
            half = _central_difference(family, x, k, 0.5*step, ref)
            d = (4.0*half - d)/3.0
        derivs.append(d)
    D = np.array(derivs).T
    overlaps = D.conj().T @ psi
    f = 4.0*np.real(D.conj().T @ D - np.outer(overlaps, overlaps.conj()))
    return QfiMatrix(0.5*(f + f.T), x)


def _eigenvector_crossing(w, v, vp):
    """True if a well separated eigenvector changed its sorted slot."""
    overlap = np.abs(v.conj().T @ vp)**2
    for i in range(w.size):
        others = np.delete(w, i)
        if w[i] < sld_floor or np.min(np.abs(others - w[i])) < 1e-6:
            continue
        if overlap[i, i] < 0.5:
            return True
    return False


def _sld_terms(x, family, step):
    rho = family(x).matrix
    w, v = scipy.linalg.eigh(rho)
    p = x.size
    dlam = np.zeros((w.size, p))
    drho = []
    for k in range(p):
        e = np.zeros_like(x)
        e[k] = step
        rp = family(x + e).matrix
        rm = family(x - e).matrix
        wp, vp = scipy.linalg.eigh(rp)
        wm, vm = scipy.linalg.eigh(rm)
        if _eigenvector_crossing(w, v, vp) or _eigenvector_crossing(w, v, vm):
            return None
        dlam[:, k] = (wp - wm)/(2.0*step)
        drho.append(v.conj().T @ ((rp - rm)/(2.0*step)) @ v)
    return w, dlam, drho


def qfi_mixed(x, family, step=1e-4):
    """SLD quantum Fisher information of a mixed-state family, split into
    the eigenvalue (classical) and eigenvector (quantum) parts.

    Args:
        x: Base point.
        family: Callable mapping x to a MixedState.
        step (optional): Difference step. Defaults to 1e-4.

    Returns:
        QfiDecomposition.
    """
    if step < 1e-10:
        raise ValueError('qfi_mixed: finite difference step too small ', step)
    x = np.asarray(x, dtype=float).ravel()
    terms = _sld_terms(x, family, step)
    if terms is None:
        terms = _sld_terms(x, family, 0.1*step)
        if terms is None:
            raise RuntimeError('qfi_mixed: eigenvalue crossing at ', x)
    w, dlam, drho = terms
    p = x.size

    keep = w > sld_floor
    f_class = (dlam[keep].T/w[keep]) @ dlam[keep]

    lsum = w[:, None] + w[None, :]
    mask = (lsum >= 2*sld_floor) \
        & (np.abs(w[:, None] - w[None, :]) >= degenerate_tol)
    np.fill_diagonal(mask, False)
    weight = np.where(mask, 2.0/np.where(mask, lsum, 1.0), 0.0)
    f_quant = np.zeros((p, p))
    for k in range(p):
        for l in range(k, p):
            val = np.sum(weight*np.real(drho[k]*drho[l].T))
            f_quant[k, l] = f_quant[l, k] = val
    f_class = 0.5*(f_class + f_class.T)
    f_total = f_class + f_quant
    return QfiDecomposition(QfiMatrix(f_total, x),
                            QfiMatrix(f_class, x, check=False),
                            QfiMatrix(f_quant, x, check=False))


def spectral(F):
    """Descending eigen-decomposition of a QFI matrix.

    Each eigenvector is sign fixed so that its largest-magnitude component,
    lowest index first, is positive.
    """
    f = F.entries if isinstance(F, QfiMatrix) else np.asarray(F, dtype=float)
    asym = np.max(np.abs(f - f.T))
    if asym > 1e-8:
        raise ValueError('spectral: asymmetric matrix ', asym)
    w, v = scipy.linalg.eigh(0.5*(f + f.T))
    w, v = w[::-1], v[:, ::-1]
    if w[-1] < -1e-6:
        raise ValueError('spectral: negative eigenvalue ', w[-1])
    w = np.clip(w, 0.0, None)
    for k in range(w.size):
        mags = np.abs(v[:, k])
        dom = int(np.flatnonzero(mags >= mags.max() - 1e-12)[0])
        if v[dom, k] < 0:
            v[:, k] = -v[:, k]
    return QfiSpectrum(w, v)


def lambda_max(x, spec, step=1e-4):
    return spectral(qfi_pure(x, spec, step)).lambda_max


class EmaTracker():
    """Exponential moving average of the top QFI eigenvalue.

    Args:
        beta: Decay factor in [0, 1).
        value (optional): Current estimate. Defaults to 0.
        step_count (optional): Number of updates so far. Defaults to 0.
    """
    def __init__(self, beta, value=0.0, step_count=0):
        if not 0.0 <= beta < 1.0:
            raise ValueError('EmaTracker: beta outside [0,1) ', beta)
        self.beta = float(beta)
        self.value = float(value)
        self.step_count = int(step_count)

    @property
    def bias_corrected(self):
        """Estimate divided by 1 - beta^t, for trackers started at zero."""
        if self.step_count == 0:
            return 0.0
        return self.value/(1.0 - self.beta**self.step_count)


def ema_update(tracker, lambda_max_new, beta=None):
    """Return a new tracker holding beta old + (1 - beta) new.

    beta overrides the tracker's decay for this step only; 1 - 1/t turns
    the tracker into a running mean.
    """
    if lambda_max_new < 0:
        raise ValueError('ema_update: negative eigenvalue ', lambda_max_new)
    b = tracker.beta if beta is None else beta
    value = b*tracker.value + (1.0 - b)*lambda_max_new
    return EmaTracker(tracker.beta, value, tracker.step_count + 1)


class MatrixEmaTracker():
    """Exponential moving average of full QFI matrices."""
    def __init__(self, beta, matrix=None, step_count=0):
        if not 0.0 <= beta < 1.0:
            raise ValueError('MatrixEmaTracker: beta outside [0,1) ', beta)
        self.beta = float(beta)
        self.matrix = matrix
        self.step_count = int(step_count)

    def update(self, F):
        f = F.entries if isinstance(F, QfiMatrix) else np.asarray(F)
        if self.matrix is None:
            m = (1.0 - self.beta)*f
        else:
            m = self.beta*self.matrix + (1.0 - self.beta)*f
        return MatrixEmaTracker(self.beta, m, self.step_count + 1)

    @property
    def bias_corrected(self):
        if self.step_count == 0:
            return None
        return self.matrix/(1.0 - self.beta**self.step_count)


def adaptive_epsilon(tracker, Delta, c, gamma):
    """Privacy cost (Delta^2/2) lambda_hat (1 - c gamma) of the tracked
    estimate."""
    if Delta <= 0:
        raise ValueError('adaptive_epsilon: Delta must be positive ', Delta)
    if c*gamma >= 1:
        raise ValueError('adaptive_epsilon: c*gamma must be below 1 ',
                         c*gamma)
    value = tracker.value if isinstance(tracker, EmaTracker) else tracker
    return max(0.0, 0.5*Delta**2*value*(1.0 - c*gamma))


def per_sample_lambda_max(samples, spec, step=1e-4):
    return np.array([lambda_max(x, spec, step) for x in samples])


def median_lambda_max(samples, spec, step=1e-4):
    """Median of the per-sample top QFI eigenvalues."""
    if len(samples) == 0:
        raise ValueError('median_lambda_max: no samples')
    return float(np.median(per_sample_lambda_max(samples, spec, step)))


def ema_convergence_rate(ns, errors):
    """Fitted exponent of error ~ n^rate."""
    ns = np.asarray(ns, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if np.any(errors <= 0):
        warnings.warn('ema_convergence_rate: dropping nonpositive errors')
        keep = errors > 0
        ns, errors = ns[keep], errors[keep]
    return float(np.polyfit(np.log(ns), np.log(errors), 1)[0])


def save_qfi_csv(F, filename):
    np.savetxt(filename, F.entries, delimiter=',', fmt='%.17g')


def save_qfi_json(F, filename):
    with open(filename, 'w') as f:
        json.dump(F.to_dict(), f, indent=1)
