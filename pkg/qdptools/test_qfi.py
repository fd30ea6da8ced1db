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
import os
import json
import numpy as np
import numpy.testing as npt
import pytest
from . import embed
from . import qfi
from . import qstate as qs

# Tolerance for tests
rtol = 1e-4

aniso_spec = embed.EmbeddingSpec([3.0, 1.0, 0.3, 0.1])
generic_x = np.array([0.4, 0.3, 0.5, 0.7])


@pytest.mark.mpi_skip()
def test_qfi_single_qubit():
    spec = embed.EmbeddingSpec([3.0], rz_factor=0.0)
    for x in [0.0, 0.37, -1.1]:
        F = qfi.qfi_pure([x], spec)
        npt.assert_allclose(F.entries, [[9.0]], rtol=rtol)
    # the RZ layer adds (rz alpha)^2 sin^2(alpha x)
    spec = embed.EmbeddingSpec([3.0])
    F = qfi.qfi_pure([0.4], spec)
    npt.assert_allclose(F.entries[0, 0], 9.0 + 2.25*np.sin(1.2)**2,
                        rtol=rtol)


@pytest.mark.mpi_skip()
def test_qfi_constant_family():
    spec = embed.EmbeddingSpec([0.0, 0.0])
    F = qfi.qfi_pure([0.3, -0.4], spec)
    npt.assert_allclose(F.entries, np.zeros((2, 2)), atol=1e-12)


@pytest.mark.mpi_skip()
def test_qfi_scales_with_alpha_squared():
    F = qfi.qfi_pure(np.zeros(4), aniso_spec)
    npt.assert_allclose(F.entries, np.diag(aniso_spec.alpha**2), rtol=rtol,
                        atol=1e-8)
    iso = embed.EmbeddingSpec([1.0, 1.0, 1.0, 1.0])
    lam = qfi.spectral(qfi.qfi_pure(np.zeros(4), iso)).eigenvalues
    assert lam.min() > 0.95*lam.max()


@pytest.mark.mpi_skip()
def test_qfi_step_validation():
    with pytest.raises(ValueError):
        qfi.qfi_pure(generic_x, aniso_spec, step=1e-12)


@pytest.mark.mpi_skip()
def test_qfi_global_phase_invariance():
    def family(x):
        return embed.embed_amplitudes(x, aniso_spec) \
            * np.exp(1j*(2.0*np.sum(x) + np.sin(x[0]) + 0.7))
    a = qfi.qfi_pure(generic_x, aniso_spec).entries
    b = qfi.qfi_pure(generic_x, family).entries
    assert np.max(np.abs(a - b)) < 1e-6


@pytest.mark.mpi_skip()
def test_qfi_richardson():
    a = qfi.qfi_pure(generic_x, aniso_spec, step=1e-3, richardson=True)
    b = qfi.qfi_pure(generic_x, aniso_spec, step=1e-4)
    npt.assert_allclose(a.entries, b.entries, rtol=1e-6, atol=1e-8)


@pytest.mark.mpi_skip()
def test_qfi_fidelity_expansion():
    rng = np.random.default_rng(0)
    v = rng.normal(size=4)
    v /= np.linalg.norm(v)
    F = qfi.qfi_pure(generic_x, aniso_spec).entries
    psi = embed.embed_pure(generic_x, aniso_spec)
    scales = np.array([1e-2, 5e-3, 2.5e-3])
    resid = []
    for s in scales:
        ov = qs.fidelity(psi, embed.embed_pure(generic_x + s*v, aniso_spec))
        resid.append(abs((1.0 - ov) - 0.25*s**2*v @ F @ v))
    slope = np.polyfit(np.log(scales), np.log(resid), 1)[0]
    print('residual slope', slope)
    assert slope >= 2.5


@pytest.mark.mpi_skip()
def test_qfi_mixed_pure_limit():
    def family(x):
        return embed.embed_pure(x, aniso_spec).density()
    dec = qfi.qfi_mixed(generic_x, family)
    pure = qfi.qfi_pure(generic_x, aniso_spec).entries
    scale = np.max(np.abs(pure))
    npt.assert_allclose(dec.f_total.entries, pure, rtol=1e-6,
                        atol=1e-6*scale)
    npt.assert_allclose(dec.f_class.entries, 0.0, atol=1e-6*scale)
    npt.assert_allclose(dec.quantum_fraction, 1.0, atol=1e-6)


@pytest.mark.mpi_skip()
def test_qfi_depolarize_contraction():
    rng = np.random.default_rng(1)
    for x in rng.normal(size=(3, 4)):
        before = qfi.spectral(qfi.qfi_pure(x, aniso_spec)).lambda_max
        for gamma in [0.1, 0.3, 0.5]:
            def family(y, g=gamma):
                return qs.depolarize(embed.embed_pure(y, aniso_spec)
                                     .density(), g)
            after = qfi.spectral(qfi.qfi_mixed(x, family).f_total)
            assert after.lambda_max <= before + 1e-6


@pytest.mark.mpi_skip()
def test_qfi_mixed_dephasing_moves_information():
    mixed = embed.MixedEmbeddingSpec(aniso_spec)

    def family(gamma):
        return lambda y: qs.dephase(embed.embed_mixed(y, mixed), gamma, 0.0)
    fractions = []
    for gamma in [0.0, 0.8, 1.0]:
        dec = qfi.qfi_mixed(generic_x, family(gamma))
        npt.assert_allclose(dec.f_total.entries,
                            dec.f_class.entries + dec.f_quant.entries,
                            atol=1e-6)
        fractions.append(dec.quantum_fraction)
    print('quantum fractions', fractions)
    assert fractions[1] < fractions[0]
    assert fractions[2] < 1e-6


@pytest.mark.mpi_skip()
def test_spectral():
    spec = qfi.spectral(np.diag([9.0, 0.09, 9.0, 0.09]))
    npt.assert_allclose(spec.eigenvalues, [9, 9, 0.09, 0.09], atol=1e-12)
    spec = qfi.spectral(np.eye(3))
    npt.assert_allclose(spec.eigenvalues, np.ones(3))
    v = np.array([0.3, -2.0, 1.0])
    spec = qfi.spectral(np.outer(v, v))
    npt.assert_allclose(spec.lambda_max, v @ v, rtol=1e-12)
    npt.assert_allclose(spec.eigenvectors[:, 0], -v/np.linalg.norm(v),
                        atol=1e-12)
    npt.assert_allclose(spec.reconstruct(), np.outer(v, v), atol=1e-7)
    with pytest.raises(ValueError):
        qfi.spectral(np.array([[1.0, 0.5], [0.0, 1.0]]))


@pytest.mark.mpi_skip()
def test_ema_update():
    t = qfi.ema_update(qfi.EmaTracker(0.0, value=3.0), 7.0)
    assert t.value == 7.0 and t.step_count == 1
    t = qfi.EmaTracker(0.9)
    for step in range(1, 31):
        t = qfi.ema_update(t, 5.0)
        npt.assert_allclose(t.value, 5.0*(1 - 0.9**step), rtol=1e-12)
        npt.assert_allclose(t.bias_corrected, 5.0, rtol=1e-12)
    with pytest.raises(ValueError):
        qfi.ema_update(t, -1.0)


@pytest.mark.mpi_skip()
def test_ema_running_mean_limit():
    rng = np.random.default_rng(2)
    xs = rng.random(25)
    t = qfi.EmaTracker(0.5)
    for i, x in enumerate(xs):
        t = qfi.ema_update(t, x, beta=1.0 - 1.0/(i + 1))
    npt.assert_allclose(t.value, xs.mean(), rtol=1e-12)


@pytest.mark.mpi_skip()
def test_matrix_ema():
    m = np.array([[2.0, 0.5], [0.5, 1.0]])
    t = qfi.MatrixEmaTracker(0.8)
    for i in range(10):
        t = t.update(m)
    npt.assert_allclose(t.bias_corrected, m, rtol=1e-12)


@pytest.mark.mpi_skip()
def test_adaptive_epsilon():
    npt.assert_allclose(qfi.adaptive_epsilon(qfi.EmaTracker(0.9), 1.0, 1.0,
                                             0.01), 0.0)
    t = qfi.EmaTracker(0.9, value=0.25)
    npt.assert_allclose(qfi.adaptive_epsilon(t, 1.0, 1.0, 0.01), 0.12375,
                        rtol=1e-12)
    with pytest.raises(ValueError):
        qfi.adaptive_epsilon(t, 1.0, 2.0, 0.5)
    with pytest.raises(ValueError):
        qfi.adaptive_epsilon(t, 0.0, 1.0, 0.1)


@pytest.mark.mpi_skip()
def test_median_lambda_max():
    spec = embed.EmbeddingSpec([3.0])
    npt.assert_allclose(qfi.median_lambda_max([[0.0]], spec), 9.0,
                        rtol=rtol)
    npt.assert_allclose(qfi.median_lambda_max([[0.0], [np.pi/6]], spec),
                        10.125, rtol=rtol)
    with pytest.raises(ValueError):
        qfi.median_lambda_max([], spec)


@pytest.mark.mpi_skip()
def test_per_sample_lambda_max():
    rng = np.random.default_rng(5)
    xs = rng.normal(size=(20, 4))
    lams = qfi.per_sample_lambda_max(xs, aniso_spec)
    # the coordinate QFI is alpha^2 (1 + rz^2 sin^2(alpha x))
    npt.assert_allclose(lams, 9.0*(1.0 + 0.25*np.sin(3.0*xs[:, 0])**2),
                        rtol=1e-6)
    assert np.all(lams <= 11.25 + 1e-6)


@pytest.mark.mpi_skip()
def test_ema_convergence_rate():
    ns = np.array([10, 20, 40, 80, 160])
    npt.assert_allclose(qfi.ema_convergence_rate(ns, 3.0*ns**-0.5), -0.5,
                        rtol=1e-10)


@pytest.mark.mpi_skip()
def test_qfi_export(tmpdir):
    F = qfi.qfi_pure(generic_x, aniso_spec)
    csvname = os.path.join(str(tmpdir), 'qfi.csv')
    jsonname = os.path.join(str(tmpdir), 'qfi.json')
    qfi.save_qfi_csv(F, csvname)
    qfi.save_qfi_json(F, jsonname)
    npt.assert_allclose(np.loadtxt(csvname, delimiter=','), F.entries,
                        rtol=1e-15)
    with open(jsonname) as f:
        data = json.load(f)
    npt.assert_allclose(data['eigenvalues'],
                        qfi.spectral(F).eigenvalues, rtol=1e-12)
