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
import numpy as np
import scipy.linalg

# Tolerances for state validation
norm_tol = 1e-10
herm_tol = 1e-10
psd_tol = 1e-9

# Single qubit Paulis
pauli_i = np.eye(2, dtype=complex)
pauli_x = np.array([[0, 1], [1, 0]], dtype=complex)
pauli_y = np.array([[0, -1j], [1j, 0]], dtype=complex)
pauli_z = np.array([[1, 0], [0, -1]], dtype=complex)
paulis = (pauli_i, pauli_x, pauli_y, pauli_z)


def _check_dimension(d, name):
    if d < 2 or (d & (d - 1)) != 0:
        raise ValueError(name + ': dimension is not a power of two ', d)
    return d.bit_length() - 1


def _readonly(a):
    a = np.array(a)
    a.flags.writeable = False
    return a


class PureState():
    """Pure state of n qubits as a dense amplitude vector.

    Qubit 0 is the most significant bit of the amplitude index.

    Args:
        amplitudes: Complex amplitudes, length 2**n.
        check (optional): Validate the normalisation. Defaults to True.
    """
    def __init__(self, amplitudes, check=True):
        amps = np.array(amplitudes, dtype=complex).ravel()
        self.d = amps.shape[0]
        self.n = _check_dimension(self.d, 'PureState')
        if check:
            norm = np.linalg.norm(amps)
            if abs(norm - 1.0) > norm_tol:
                raise ValueError('PureState: norm differs from 1 ', norm)
        self.amplitudes = _readonly(amps)

    @classmethod
    def zero(cls, n):
        """The all-zeros computational basis state |0...0>."""
        amps = np.zeros(2**n, dtype=complex)
        amps[0] = 1.0
        return cls(amps, check=False)

    def density(self):
        a = self.amplitudes
        return MixedState(np.outer(a, a.conj()), check=False)


class MixedState():
    """Density matrix of n qubits.

    Args:
        matrix: d x d complex Hermitian, unit trace, positive semidefinite.
        check (optional): Validate the invariants. Defaults to True.
    """
    def __init__(self, matrix, check=True):
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError('MixedState: matrix is not square ', m.shape)
        self.d = m.shape[0]
        self.n = _check_dimension(self.d, 'MixedState')
        if check:
            dev = np.max(np.abs(m - m.conj().T))
            if dev > herm_tol:
                raise ValueError('MixedState: not Hermitian, deviation ', dev)
            tr = np.trace(m).real
            if abs(tr - 1.0) > norm_tol:
                raise ValueError('MixedState: trace differs from 1 ', tr)
            wmin = np.linalg.eigvalsh(0.5*(m + m.conj().T))[0]
            if wmin < -psd_tol:
                raise ValueError('MixedState: negative eigenvalue ', wmin)
        self.matrix = _readonly(m)

    @classmethod
    def maximally_mixed(cls, n):
        return cls(np.eye(2**n, dtype=complex)/2**n, check=False)

    def purity(self):
        """Tr(rho^2)."""
        return float(np.real(np.vdot(self.matrix, self.matrix)))


class Distribution():
    """Probability distribution over the 2**n computational bitstrings.

    Args:
        probs: Nonnegative weights summing to one. Entries down to -1e-12
            are treated as rounding and clipped to zero.
        check (optional): Validate the normalisation. Defaults to True.
    """
    def __init__(self, probs, check=True):
        p = np.array(probs, dtype=float).ravel()
        if check:
            if np.any(p < -1e-12):
                raise ValueError('Distribution: negative probability ',
                                 p.min())
            if abs(p.sum() - 1.0) > norm_tol:
                raise ValueError('Distribution: probabilities sum to ',
                                 p.sum())
        p = np.clip(p, 0.0, None)
        self.d = p.shape[0]
        self.n = _check_dimension(self.d, 'Distribution')
        self.probs = _readonly(p)

    def bitstring(self, index):
        return format(index, '0{:d}b'.format(self.n))


class NoiseRegime():
    """Hardware noise parameters.

    Args:
        t1_us: Relaxation time in microseconds, may be np.inf.
        t2_us: Dephasing time in microseconds, may be np.inf.
        eps_1q: Single-qubit depolarizing probability.
        eps_2q: Two-qubit depolarizing probability per entangling gate.
        gate_time_us (optional): Duration the decoherence acts for.
            Defaults to 0.05.
        name (optional): Label used in result tables. Defaults to ''.
    """
    def __init__(self, t1_us, t2_us, eps_1q, eps_2q, gate_time_us=0.05,
                 name=''):
        if not (t1_us > 0 and t2_us > 0):
            raise ValueError('NoiseRegime: T1 and T2 must be positive ',
                             (t1_us, t2_us))
        if t2_us > 2*t1_us:
            raise ValueError('NoiseRegime: T2 exceeds 2*T1 ', (t1_us, t2_us))
        for eps in (eps_1q, eps_2q):
            if not 0.0 <= eps <= 1.0:
                raise ValueError('NoiseRegime: probability outside [0,1] ',
                                 eps)
        if gate_time_us < 0:
            raise ValueError('NoiseRegime: negative gate time ', gate_time_us)
        self.t1_us = float(t1_us)
        self.t2_us = float(t2_us)
        self.eps_1q = float(eps_1q)
        self.eps_2q = float(eps_2q)
        self.gate_time_us = float(gate_time_us)
        self.name = name

    def p_amplitude(self):
        return 1.0 - np.exp(-self.gate_time_us/self.t1_us)

    def p_phase(self):
        rate = max(0.0, 1.0/self.t2_us - 0.5/self.t1_us)
        return 1.0 - np.exp(-2.0*self.gate_time_us*rate)


# Named hardware presets: T1 (us), T2 (us), eps_1q, eps_2q
regimemap = {'ideal': (np.inf, np.inf, 0.0, 0.0),
             'low': (200.0, 150.0, 1e-4, 5e-3),
             'moderate': (100.0, 70.0, 3e-4, 1e-2),
             'high': (50.0, 30.0, 1e-3, 3e-2)}


def get_regime(name, gate_time_us=0.05):
    """Look up a NoiseRegime preset by name (case insensitive)."""
    key = name.lower()
    if key not in regimemap:
        raise ValueError('Unknown noise regime ', name)
    t1, t2, e1, e2 = regimemap[key]
    return NoiseRegime(t1, t2, e1, e2, gate_time_us=gate_time_us,
                       name=key.capitalize())


class Gate():
    """A gate from the embedding gate set: RY, RZ, H or CZ."""
    def __init__(self, name, qubits, matrix, theta=None):
        self.name = name
        self.qubits = tuple(int(q) for q in qubits)
        self.matrix = _readonly(matrix)
        self.theta = theta

    def __repr__(self):
        if self.theta is None:
            return '{:s}{}'.format(self.name, self.qubits)
        return '{:s}({:g}){}'.format(self.name, self.theta, self.qubits)


def ry(theta, q):
    c, s = np.cos(0.5*theta), np.sin(0.5*theta)
    return Gate('RY', (q,), np.array([[c, -s], [s, c]], dtype=complex),
                theta)


def rz(theta, q):
    return Gate('RZ', (q,), np.diag([np.exp(-0.5j*theta),
                                     np.exp(0.5j*theta)]), theta)


def h(q):
    return Gate('H', (q,), np.array([[1, 1], [1, -1]], dtype=complex)
                / np.sqrt(2))


def cz(q1, q2):
    if q1 == q2:
        raise ValueError('cz: control and target coincide ', q1)
    return Gate('CZ', (q1, q2), np.diag([1, 1, 1, -1]).astype(complex))


def _apply_local(tensor, op, axes):
    """Contract a k-qubit operator into the given axes of a (2,)*m tensor."""
    k = len(axes)
    op_t = np.reshape(op, (2,)*(2*k))
    out = np.tensordot(op_t, tensor, axes=(list(range(k, 2*k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def _check_qubits(qubits, n, name):
    for q in qubits:
        if q < 0 or q >= n:
            raise IndexError(name + ': qubit index out of range', q)


def bit_mask(n, q):
    """Boolean mask of basis indices whose qubit q is 1."""
    return ((np.arange(2**n) >> (n - 1 - q)) & 1).astype(bool)


def apply_gate(state, gate):
    """Apply a gate to a PureState, returning a new PureState."""
    n = state.n
    _check_qubits(gate.qubits, n, 'apply_gate')
    if gate.name == 'CZ':
        q1, q2 = gate.qubits
        amps = np.array(state.amplitudes)
        amps[bit_mask(n, q1) & bit_mask(n, q2)] *= -1
    else:
        psi = np.reshape(state.amplitudes, (2,)*n)
        amps = _apply_local(psi, gate.matrix, gate.qubits).reshape(-1)
    return PureState(amps, check=False)


def apply_kraus(rho, kraus_ops, qubits):
    """Apply the channel rho -> sum_K K rho K^dagger, with each K acting on
    the listed qubits."""
    n = rho.n
    qubits = tuple(qubits)
    _check_qubits(qubits, n, 'apply_kraus')
    t = np.reshape(rho.matrix, (2,)*(2*n))
    cols = [n + q for q in qubits]
    out = np.zeros_like(t)
    for k in kraus_ops:
        tk = _apply_local(t, k, qubits)
        out += _apply_local(tk, np.conj(k), cols)
    return MixedState(out.reshape(rho.d, rho.d), check=False)


def _check_probability(p, name):
    if not 0.0 <= p <= 1.0:
        raise ValueError(name + ': parameter outside [0,1] ', p)


def depolarize(rho, gamma):
    """Global depolarizing channel (1-gamma) rho + gamma I/d."""
    _check_probability(gamma, 'depolarize')
    m = (1.0 - gamma)*rho.matrix + gamma*np.eye(rho.d)/rho.d
    return MixedState(m, check=False)


def rotation_layer(theta, n):
    """Tensor product of RY(theta_q) over all qubits."""
    thetas = np.broadcast_to(np.asarray(theta, dtype=float), (n,))
    return functools.reduce(np.kron, [ry(t, q).matrix
                                      for q, t in enumerate(thetas)])


def dephase(rho, gamma, theta=0.0):
    """Dephasing in the basis rotated by RY(theta) on each qubit.

    theta=0 is the computational basis, theta=pi/2 the X basis. theta may
    be a scalar or one angle per qubit.
    """
    _check_probability(gamma, 'dephase')
    v = rotation_layer(theta, rho.n)
    m = v.conj().T @ rho.matrix @ v
    m = (1.0 - gamma)*m + gamma*np.diag(np.diag(m))
    return MixedState(v @ m @ v.conj().T, check=False)


def amplitude_damp(rho, p, qubit):
    _check_probability(p, 'amplitude_damp')
    k0 = np.array([[1, 0], [0, np.sqrt(1.0 - p)]], dtype=complex)
    k1 = np.array([[0, np.sqrt(p)], [0, 0]], dtype=complex)
    return apply_kraus(rho, (k0, k1), (qubit,))


def phase_damp(rho, lam, qubit):
    _check_probability(lam, 'phase_damp')
    k0 = np.array([[1, 0], [0, np.sqrt(1.0 - lam)]], dtype=complex)
    k1 = np.array([[0, 0], [0, np.sqrt(lam)]], dtype=complex)
    return apply_kraus(rho, (k0, k1), (qubit,))


def depolarize_1q(rho, eps, qubit):
    _check_probability(eps, 'depolarize_1q')
    ops = [np.sqrt(1.0 - 0.75*eps)*pauli_i] + \
          [np.sqrt(0.25*eps)*p for p in paulis[1:]]
    return apply_kraus(rho, ops, (qubit,))


def depolarize_2q(rho, eps, qubit_a, qubit_b):
    _check_probability(eps, 'depolarize_2q')
    ops = []
    for i, pa in enumerate(paulis):
        for j, pb in enumerate(paulis):
            w = 1.0 - 15.0*eps/16.0 if i == j == 0 else eps/16.0
            ops.append(np.sqrt(w)*np.kron(pa, pb))
    return apply_kraus(rho, ops, (qubit_a, qubit_b))


def thermal_noise(rho, regime, cz_pairs=()):
    """Hardware noise model.

    Per qubit in ascending order: amplitude damping, phase damping, then
    single-qubit depolarizing. Afterwards two-qubit depolarizing once for
    every entry of cz_pairs.
    """
    p_amp = regime.p_amplitude()
    p_phase = regime.p_phase()
    for q in range(rho.n):
        if p_amp > 0:
            rho = amplitude_damp(rho, p_amp, q)
        if p_phase > 0:
            rho = phase_damp(rho, p_phase, q)
        if regime.eps_1q > 0:
            rho = depolarize_1q(rho, regime.eps_1q, q)
    if regime.eps_2q > 0:
        for qa, qb in cz_pairs:
            rho = depolarize_2q(rho, regime.eps_2q, qa, qb)
    return rho


def _as_mixed(state):
    if isinstance(state, PureState):
        return state.density()
    return state


def _pure_vector(state):
    """Amplitudes if the state is pure (purity within 1e-12 of one)."""
    if isinstance(state, PureState):
        return state.amplitudes
    if state.purity() > 1.0 - 1e-12:
        w, v = scipy.linalg.eigh(state.matrix)
        return v[:, -1]
    return None


def fidelity(a, b):
    """Uhlmann fidelity F = (Tr sqrt(sqrt(a) b sqrt(a)))^2, in [0, 1].

    Accepts PureState or MixedState arguments; for pure inputs it equals
    |<a|b>|^2.
    """
    if a.d != b.d:
        raise ValueError('fidelity: dimension mismatch ', (a.d, b.d))
    psi = _pure_vector(a)
    if psi is None:
        psi, a, b = _pure_vector(b), b, a
    if psi is not None:
        if isinstance(b, PureState):
            f = abs(np.vdot(psi, b.amplitudes))**2
        else:
            f = np.real(np.vdot(psi, b.matrix @ psi))
    else:
        w, v = scipy.linalg.eigh(a.matrix)
        sa = (v*np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
        mid = sa @ b.matrix @ sa
        mw = scipy.linalg.eigvalsh(0.5*(mid + mid.conj().T))
        f = np.sum(np.sqrt(np.clip(mw, 0.0, None)))**2
    return float(np.clip(f, 0.0, 1.0))


def fidelity_loss(a, b):
    """Root-fidelity loss 1 - sqrt(F)."""
    return 1.0 - np.sqrt(fidelity(a, b))


def trace_distance(a, b):
    """Half the trace norm of a - b."""
    if a.d != b.d:
        raise ValueError('trace_distance: dimension mismatch ', (a.d, b.d))
    diff = _as_mixed(a).matrix - _as_mixed(b).matrix
    return 0.5*float(np.sum(np.abs(scipy.linalg.eigvalsh(diff))))


def measure_probs(state):
    """Computational-basis outcome distribution of a state."""
    if isinstance(state, PureState):
        p = np.abs(state.amplitudes)**2
    else:
        p = np.real(np.diag(state.matrix))
    p = np.clip(p, 0.0, None)
    return Distribution(p/p.sum())


def hellinger(p, q):
    """Hellinger distance sqrt(1 - sum_x sqrt(p_x q_x))."""
    if p.probs.shape != q.probs.shape:
        raise ValueError('hellinger: shape mismatch ',
                         (p.probs.shape, q.probs.shape))
    bc = np.sum(np.sqrt(p.probs*q.probs))
    return float(np.sqrt(max(0.0, 1.0 - bc)))


def _jacobi_eigh(a, tol=1e-12, max_sweeps=100):
    """Cyclic complex Jacobi diagonalisation of a Hermitian matrix."""
    a = np.array(a, dtype=complex)
    d = a.shape[0]
    v = np.eye(d, dtype=complex)
    scale = max(1.0, np.linalg.norm(a))
    for sweep in range(max_sweeps):
        off = np.sqrt(np.sum(np.abs(a)**2) - np.sum(np.abs(np.diag(a))**2))
        if off <= tol*scale:
            w = np.real(np.diag(a))
            order = np.argsort(w, kind='stable')
            return w[order], v[:, order]
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                mag = abs(apq)
                if mag == 0.0:
                    continue
                phase = np.exp(-1j*np.angle(apq))
                tau = (a[q, q].real - a[p, p].real)/(2.0*mag)
                sgn = 1.0 if tau >= 0 else -1.0
                t = sgn/(abs(tau) + np.sqrt(1.0 + tau*tau))
                c = 1.0/np.sqrt(1.0 + t*t)
                s = t*c
                j2 = np.array([[c, s], [-s*phase, c*phase]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ j2
                a[idx, :] = j2.conj().T @ a[idx, :]
                a[p, q] = 0.0
                a[q, p] = 0.0
                v[:, idx] = v[:, idx] @ j2
    raise RuntimeError('eig_hermitian: Jacobi did not converge in ',
                       max_sweeps)


def eig_hermitian(m, method='lapack'):
    """Eigen-decomposition of a Hermitian matrix.

    Args:
        m: Square Hermitian matrix.
        method (optional): 'lapack' (scipy.linalg.eigh) or 'jacobi'.
            Defaults to 'lapack'.

    Returns:
        Eigenvalues in ascending order and the unitary matrix of
        eigenvectors (columns).
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError('eig_hermitian: matrix is not square ', m.shape)
    dev = np.max(np.abs(m - m.conj().T))
    if dev > herm_tol*max(1.0, np.max(np.abs(m))):
        raise ValueError('eig_hermitian: matrix is not Hermitian ', dev)
    m = 0.5*(m + m.conj().T)
    if method == 'lapack':
        return scipy.linalg.eigh(m)
    elif method == 'jacobi':
        return _jacobi_eigh(m)
    else:
        raise ValueError('Unknown eigensolver ', method)
