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
import functools
import warnings
import numpy as np
from . import qstate as qs

# Supported parameter ranges of the synthetic task
separation_range = (0.8, 1.5)
cluster_sigma_range = (0.6, 0.8)

sigma_rules = ('DephasedShifted', 'Thermal', 'NoisyPreparation')


class EmbeddingSpec():
    """Angle embedding of a p-dimensional input into p qubits.

    The circuit is an RY layer with angles alpha_i x_i, a CZ ladder on
    (0,1),(1,2),..., and an RZ layer with angles rz_factor alpha_i x_i.

    Args:
        alpha: Rotation strengths, radians per data unit.
        rz_factor (optional): Scale of the RZ layer. Defaults to 0.5.
    """
    def __init__(self, alpha, rz_factor=0.5):
        alpha = np.array(alpha, dtype=float).ravel()
        if alpha.size == 0 or not np.all(np.isfinite(alpha)):
            raise ValueError('EmbeddingSpec: alpha must be finite ', alpha)
        if not np.isfinite(rz_factor):
            raise ValueError('EmbeddingSpec: rz_factor must be finite ',
                             rz_factor)
        alpha.flags.writeable = False
        self.alpha = alpha
        self.n_qubits = alpha.size
        self.rz_factor = float(rz_factor)
        n = self.n_qubits
        self._bits = np.array([qs.bit_mask(n, q) for q in range(n)],
                              dtype=float)
        ladder = np.zeros(2**n)
        for q in range(n - 1):
            ladder += self._bits[q]*self._bits[q + 1]
        self._cz_sign = (-1.0)**ladder

    def cz_pairs(self):
        return [(q, q + 1) for q in range(self.n_qubits - 1)]

    def to_dict(self):
        return {'alpha': self.alpha.tolist(), 'rz_factor': self.rz_factor}


def _check_point(x, spec):
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != spec.n_qubits:
        raise ValueError('embed: input length does not match qubit count ',
                         (x.shape[0], spec.n_qubits))
    return x


def embedding_circuit(x, spec):
    """Gate list of the embedding circuit at x."""
    x = _check_point(x, spec)
    angles = spec.alpha*x
    gates = [qs.ry(a, q) for q, a in enumerate(angles)]
    gates += [qs.cz(q1, q2) for q1, q2 in spec.cz_pairs()]
    gates += [qs.rz(spec.rz_factor*a, q) for q, a in enumerate(angles)]
    return gates


def embed_amplitudes(x, spec):
    """Amplitude vector of the embedded state, built layer by layer in
    closed form."""
    x = _check_point(x, spec)
    half = 0.5*spec.alpha*x
    amps = functools.reduce(np.kron, [np.array([np.cos(t), np.sin(t)])
                                      for t in half])
    # RZ(phi) contributes exp(-i phi/2) on |0> and exp(+i phi/2) on |1>
    phase = (2.0*spec._bits - 1.0).T @ (spec.rz_factor*half)
    return amps*spec._cz_sign*np.exp(1j*phase)


def embed_pure(x, spec):
    return qs.PureState(embed_amplitudes(x, spec), check=False)


def embedding_unitary(x, spec):
    """Unitary of the embedding circuit at x; its first column is
    embed_amplitudes(x, spec)."""
    x = _check_point(x, spec)
    half = 0.5*spec.alpha*x
    phase = (2.0*spec._bits - 1.0).T @ (spec.rz_factor*half)
    diagonal = spec._cz_sign*np.exp(1j*phase)
    return diagonal[:, None]*qs.rotation_layer(spec.alpha*x, spec.n_qubits)


class MixedEmbeddingSpec():
    """Mixed-state embedding rho(x) = w |psi(x)><psi(x)| + (1-w) sigma(x).

    Args:
        base: EmbeddingSpec of the pure component.
        pure_weight (optional): Weight w of the pure component.
            Defaults to 0.6.
        noise_weight (optional): Weight of sigma(x).
            Defaults to 1 - pure_weight.
        sigma_rule (optional): 'DephasedShifted' is the X-basis dephased
            embedding of x + shift. 'Thermal' is the embedding of x with every
            qubit amplitude damped with probability damping.
            'NoisyPreparation' runs the embedding circuit on the product
            state with excitation probability excitation per qubit, so the
            spectrum of rho(x) does not depend on x. Defaults to
            'DephasedShifted'.
        shift (optional): Elementwise input shift for DephasedShifted.
            Defaults to 0.3.
        damping (optional): Damping probability for Thermal. Defaults to 0.5.
        excitation (optional): Excitation probability for NoisyPreparation.
            Defaults to 0.25.
    """
    def __init__(self, base, pure_weight=0.6, noise_weight=None,
                 sigma_rule='DephasedShifted', shift=0.3, damping=0.5,
                 excitation=0.25):
        if noise_weight is None:
            noise_weight = 1.0 - pure_weight
        if not (0.0 <= pure_weight <= 1.0 and 0.0 <= noise_weight <= 1.0) \
           or abs(pure_weight + noise_weight - 1.0) > 1e-12:
            raise ValueError('MixedEmbeddingSpec: weights must lie in [0,1] '
                             'and sum to 1 ', (pure_weight, noise_weight))
        if sigma_rule not in sigma_rules:
            raise ValueError('Unknown sigma rule ', sigma_rule)
        self.base = base
        self.pure_weight = float(pure_weight)
        self.noise_weight = float(noise_weight)
        self.sigma_rule = sigma_rule
        self.shift = float(shift)
        self.damping = float(damping)
        if not 0.0 <= excitation <= 1.0:
            raise ValueError('MixedEmbeddingSpec: excitation outside [0,1] ',
                             excitation)
        self.excitation = float(excitation)

    def sigma(self, x):
        if self.sigma_rule == 'DephasedShifted':
            x = _check_point(x, self.base) + self.shift
            rho = embed_pure(x, self.base).density()
            return qs.dephase(rho, 1.0, np.pi/2)
        if self.sigma_rule == 'NoisyPreparation':
            u = embedding_unitary(x, self.base)
            tau = functools.reduce(np.kron, [np.diag([1.0 - self.excitation,
                                                      self.excitation])]
                                   *self.base.n_qubits)
            return qs.MixedState(u @ tau @ u.conj().T, check=False)
        rho = embed_pure(x, self.base).density()
        for q in range(self.base.n_qubits):
            rho = qs.amplitude_damp(rho, self.damping, q)
        return rho


def embed_mixed(x, spec):
    rho = embed_pure(x, spec.base).density().matrix
    if spec.noise_weight > 0:
        rho = spec.pure_weight*rho + spec.noise_weight*spec.sigma(x).matrix
    return qs.MixedState(rho, check=False)


class Dataset():
    """Labelled binary classification data.

    Args:
        points: n x p real matrix.
        labels: Length n vector of 0/1 labels.
        seed (optional): Seed the data was generated with. Defaults to None.
    """
    def __init__(self, points, labels, seed=None):
        points = np.array(points, dtype=float)
        if points.ndim == 1:
            points = points[:, np.newaxis]
        labels = np.array(labels).astype(int).ravel()
        if points.shape[0] != labels.shape[0]:
            raise ValueError('Dataset: points and labels differ in length ',
                             (points.shape[0], labels.shape[0]))
        if np.any(np.isnan(points)):
            raise ValueError('Dataset: points contain NaN')
        if not np.all((labels == 0) | (labels == 1)):
            raise ValueError('Dataset: labels must be 0 or 1')
        if np.sum(labels == 0) == 0 or np.sum(labels == 1) == 0:
            raise ValueError('Dataset: both classes must be present')
        self.points = points
        self.labels = labels
        self.seed = seed

    def __len__(self):
        return self.points.shape[0]

    def centroid(self):
        return self.points.mean(axis=0)


def box_muller(rng, shape):
    """Standard normal samples from uniform pairs by the Box-Muller
    transform."""
    count = int(np.prod(shape))
    pairs = (count + 1)//2
    u1 = 1.0 - rng.random(pairs)
    u2 = rng.random(pairs)
    r = np.sqrt(-2.0*np.log(u1))
    z = np.concatenate((r*np.cos(2*np.pi*u2), r*np.sin(2*np.pi*u2)))
    return z[:count].reshape(shape)


def class_centers(separation_s, p):
    mu1 = np.zeros(p)
    mu1[0] = separation_s
    if p > 1:
        mu1[1] = 0.7*separation_s
    return np.zeros(p), mu1


def gen_dataset(n, separation_s, cluster_sigma, seed, p=4):
    """Two Gaussian clusters with n/2 samples each.

    Sampling uses numpy's PCG64 generator seeded with seed and Box-Muller
    normals, so a fixed seed reproduces the dataset bit for bit.
    """
    if n <= 0:
        raise ValueError('gen_dataset: n must be positive ', n)
    if n % 2 != 0:
        raise ValueError('gen_dataset: n must be even ', n)
    if not separation_range[0] <= separation_s <= separation_range[1]:
        warnings.warn('gen_dataset: separation s={:g} outside [{:g}, {:g}]'
                      .format(separation_s, *separation_range))
    if not cluster_sigma_range[0] <= cluster_sigma <= cluster_sigma_range[1]:
        warnings.warn('gen_dataset: cluster sigma={:g} outside [{:g}, {:g}]'
                      .format(cluster_sigma, *cluster_sigma_range))
    rng = np.random.Generator(np.random.PCG64(seed))
    half = n//2
    z = box_muller(rng, (n, p))
    mu0, mu1 = class_centers(separation_s, p)
    points = np.vstack((mu0 + cluster_sigma*z[:half],
                        mu1 + cluster_sigma*z[half:]))
    labels = np.concatenate((np.zeros(half, dtype=int),
                             np.ones(half, dtype=int)))
    return Dataset(points, labels, seed=seed)


def train_test_split(dataset, train_fraction=0.8, seed=None):
    """Seeded shuffle, then the first round(train_fraction n) points train."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError('train_test_split: fraction outside (0,1) ',
                         train_fraction)
    if seed is None:
        seed = 0 if dataset.seed is None else dataset.seed
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(len(dataset))
    n_train = int(round(train_fraction*len(dataset)))
    tr, te = order[:n_train], order[n_train:]
    return (Dataset(dataset.points[tr], dataset.labels[tr], dataset.seed),
            Dataset(dataset.points[te], dataset.labels[te], dataset.seed))


def save_dataset_csv(dataset, filename):
    p = dataset.points.shape[1]
    header = ','.join(['x{:d}'.format(i) for i in range(p)] + ['label'])
    data = np.column_stack((dataset.points, dataset.labels))
    np.savetxt(filename, data, delimiter=',', header=header, comments='',
               fmt=['%.17g']*p + ['%d'])


def load_dataset_csv(filename, seed=None):
    data = np.loadtxt(filename, delimiter=',', skiprows=1, ndmin=2)
    return Dataset(data[:, :-1], data[:, -1], seed=seed)


def embed_all(X, spec):
    """Rows of amplitude vectors for every row of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.array([embed_amplitudes(x, spec) for x in X])


def kernel_matrix(X, spec, Y=None):
    """Fidelity kernel K_ij = |<psi(x_i)|psi(y_j)>|^2.

    With Y omitted the result is the symmetric Gram matrix of X with unit
    diagonal.
    """
    A = embed_all(X, spec)
    B = A if Y is None else embed_all(Y, spec)
    K = np.clip(np.abs(A.conj() @ B.T)**2, 0.0, 1.0)
    if Y is None:
        K = 0.5*(K + K.T)
        np.fill_diagonal(K, 1.0)
    return K


def density_kernel_matrix(states, others=None):
    """Overlap kernel K_ij = Tr(rho_i rho_j) of mixed states.

    For pure states this is the fidelity kernel.
    """
    R = np.array([s.matrix.ravel() for s in states])
    S = R if others is None else np.array([s.matrix.ravel() for s in others])
    K = np.clip(np.real(R.conj() @ S.T), 0.0, 1.0)
    if others is None:
        K = 0.5*(K + K.T)
    return K


class KernelSVM():
    """Binary soft-margin SVM on a precomputed kernel.

    The dual is solved by SMO with maximal-violating-pair selection, lowest
    index first on ties.

    Args:
        C (optional): Box constraint of the dual. Defaults to 1.0.
        tol (optional): Stop once the KKT violation gap is at most tol.
            Defaults to 1e-4.
        max_sweeps (optional): Cap on iterations in units of n pair updates.
            Defaults to 10000.
        verbose_flag (optional): If True, print progress. Defaults to False.
    """
    def __init__(self, C=1.0, tol=1e-4, max_sweeps=10000, verbose_flag=False):
        if C <= 0:
            raise ValueError('KernelSVM: C must be positive ', C)
        self.C = float(C)
        self.tol = tol
        self.max_sweeps = max_sweeps
        self.verbose_flag = verbose_flag

    def log_print(self, arg):
        if (self.verbose_flag == True):
            print(arg)

    def fit(self, K, labels):
        K = np.asarray(K, dtype=float)
        labels = np.asarray(labels).astype(int).ravel()
        n = labels.shape[0]
        if K.shape != (n, n):
            raise ValueError('KernelSVM: kernel shape does not match labels ',
                             (K.shape, n))
        if np.all(labels == labels[0]):
            raise ValueError('KernelSVM: training labels contain one class')
        C = self.C
        y = np.where(labels == 1, 1.0, -1.0)
        alpha = np.zeros(n)
        # gradient of 0.5 a^T Q a - e^T a, with Q_ij = y_i y_j K_ij
        grad = -np.ones(n)
        kdiag = np.diag(K)
        history = [0.0]
        converged = False
        gap = np.inf
        for it in range(self.max_sweeps*n):
            yg = -y*grad
            up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
            low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
            i = np.argmax(np.where(up, yg, -np.inf))
            j = np.argmin(np.where(low, yg, np.inf))
            gap = yg[i] - yg[j]
            if gap <= self.tol:
                converged = True
                break
            curv = max(kdiag[i] + kdiag[j] - 2.0*K[i, j], 1e-12)
            bound_i = C - alpha[i] if y[i] > 0 else alpha[i]
            bound_j = alpha[j] if y[j] > 0 else C - alpha[j]
            step = min(gap/curv, bound_i, bound_j)
            alpha[i] = min(max(alpha[i] + y[i]*step, 0.0), C)
            alpha[j] = min(max(alpha[j] - y[j]*step, 0.0), C)
            grad += step*y*(K[:, i] - K[:, j])
            history.append(0.5*np.sum(alpha) - 0.5*np.dot(alpha, grad))
        if not converged:
            warnings.warn('KernelSVM: stopped at the iteration cap with KKT '
                          'gap {:g}'.format(gap))
        self.log_print('KernelSVM: {:d} updates, gap {:g}'
                       .format(len(history) - 1, gap))

        free = (alpha > 1e-12) & (alpha < C - 1e-12)
        yg = -y*grad
        if np.any(free):
            self.bias = float(np.mean(yg[free]))
        else:
            up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
            low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
            self.bias = 0.5*(np.max(yg[up], initial=-np.inf)
                             + np.min(yg[low], initial=np.inf)) \
                if np.any(up) and np.any(low) else 0.0
        self.alpha = alpha
        self.dual_coef = alpha*y
        self.objective_history = np.array(history)
        self.kkt_gap = gap
        self.converged = converged
        return self

    def decision_function(self, K_rows):
        K_rows = np.atleast_2d(np.asarray(K_rows, dtype=float))
        return K_rows @ self.dual_coef + self.bias

    def predict(self, K_rows):
        return (self.decision_function(K_rows) >= 0).astype(int)


def svm_fit(K, labels, C=1.0, **kwargs):
    return KernelSVM(C=C, **kwargs).fit(K, labels)


def svm_predict(model, K_rows):
    return model.predict(K_rows)


def accuracy(predicted, labels):
    return float(np.mean(np.asarray(predicted) == np.asarray(labels)))
