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
import hashlib
import os
import numpy as np
import numpy.testing as npt
import pytest
import scipy.stats
from . import audit
from . import mech

# Tolerance for tests
rtol = 1e-9

cfg = mech.MechanismConfig(1.0, 1.0, 0.01)


def linear_trail(n=100):
    return audit.AuditTrail.from_lambdas(np.linspace(1.0, 10.0, n), cfg)


@pytest.mark.mpi_skip()
def test_leaf_encoding():
    rec = audit.AuditRecord(3, 9.0, 4.455)
    assert rec.leaf_string() == '3|9.000000000000e+00|4.455000000000e+00'
    assert rec.leaf_hash() == hashlib.sha256(
        b'3|9.000000000000e+00|4.455000000000e+00').digest()


@pytest.mark.mpi_skip()
def test_single_record_root():
    rec = audit.AuditRecord(0, 2.0, audit.honest_epsilon(2.0, cfg))
    tree, eps = audit.commit([rec])
    leaf = hashlib.sha256(rec.leaf_string().encode('utf-8')).digest()
    pad = hashlib.sha256(b'PAD').digest()
    assert tree.root == hashlib.sha256(leaf + pad).digest()
    assert eps == rec.epsilon
    assert tree.depth == 1


@pytest.mark.mpi_skip()
def test_commit_properties():
    a = linear_trail()
    b = linear_trail()
    assert a.root == b.root
    assert a.eps_claimed == max(r.epsilon for r in a.records)
    npt.assert_allclose(a.eps_claimed, 0.5*10.0*0.99, rtol=rtol)
    assert len(a.tree.leaves) == 128
    for i in [0, 57, 99]:
        proof = a.tree.proof(i)
        assert len(proof.siblings) == 7
    with pytest.raises(ValueError):
        audit.commit([])


@pytest.mark.mpi_skip()
def test_challenge_interactive():
    assert audit.challenge(10, 1.0, seed=1) == list(range(10))
    S = audit.challenge(100, 0.12, seed=5)
    assert len(S) == 12 and len(set(S)) == 12
    assert S == audit.challenge(100, 0.12, seed=5)
    assert audit.challenge_size(100, 0.3) == 30
    assert audit.challenge_size(7, 0.5) == 4
    with pytest.raises(ValueError):
        audit.challenge(10, 0.0)
    with pytest.raises(ValueError):
        audit.challenge(10, 0.5, mode='Coin')


@pytest.mark.mpi_skip()
def test_challenge_uniform():
    counts = np.zeros(16)
    for seed in range(10000):
        for i in audit.challenge(16, 0.25, seed=seed):
            counts[i] += 1
    stat, pvalue = scipy.stats.chisquare(counts)
    print('chi-square p-value', pvalue)
    assert pvalue > 0.001


@pytest.mark.mpi_skip()
def test_challenge_fiat_shamir():
    trail = linear_trail()
    S = audit.challenge(100, 0.12, 'FiatShamir', root=trail.root,
                        eps_claimed=trail.eps_claimed)
    assert len(S) == 12 and len(set(S)) == 12
    assert S == audit.challenge(100, 0.12, 'FiatShamir', root=trail.root,
                                eps_claimed=trail.eps_claimed)
    for t in range(20):
        other = audit.challenge(100, 0.12, 'FiatShamir', root=trail.root,
                                eps_claimed=trail.eps_claimed
                                *(1 + 1e-6*(t + 1)))
        assert other != S
    with pytest.raises(ValueError):
        audit.challenge(100, 0.12, 'FiatShamir')


@pytest.mark.mpi_skip()
def test_honest_prover_accepted():
    trail = linear_trail()
    for seed in range(100):
        transcript = audit.run_round(trail, 0.12, cfg, seed=seed)
        assert transcript.accepted, transcript.reject_reasons
    fs = audit.run_round(trail, 0.3, cfg, mode='FiatShamir')
    assert fs.accepted


@pytest.mark.mpi_skip()
def test_tampered_sibling_rejected():
    trail = linear_trail(20)
    S = audit.challenge(20, 0.25, seed=0)
    for j in range(len(trail.tree.proof(0).siblings)):
        responses = audit.respond(trail.tree, trail.records, S)
        record, proof = responses[0]
        sib, side = proof.siblings[j]
        flipped = bytes([sib[0] ^ 0x01]) + sib[1:]
        proof.siblings[j] = (flipped, side)
        transcript = audit.verify(trail.root, trail.eps_claimed, responses,
                                  cfg, S)
        assert not transcript.accepted
        assert (record.index, 'BAD_PROOF') in transcript.reject_reasons


@pytest.mark.mpi_skip()
def test_tampered_leaf_rejected():
    trail = linear_trail(20)
    S = [4]
    record, proof = audit.respond(trail.tree, trail.records, S)[0]
    forged = audit.AuditRecord(4, record.lambda_max*0.5,
                               record.epsilon*0.5)
    transcript = audit.verify(trail.root, trail.eps_claimed,
                              [(forged, proof)], cfg, S)
    codes = [c for i, c in transcript.reject_reasons]
    assert codes == ['BAD_PROOF']
    malformed = audit.verify(trail.root, trail.eps_claimed,
                             [(record, audit.InclusionProof(4, [('x', 1)]))],
                             cfg, S)
    assert ('BAD_PROOF' in [c for i, c in malformed.reject_reasons])
    missing = audit.verify(trail.root, trail.eps_claimed, [], cfg, S)
    assert missing.reject_reasons == [(4, 'BAD_PROOF')]


@pytest.mark.mpi_skip()
def test_formula_mismatch():
    records = audit.make_records([1.0, 2.0, 3.0, 4.0], cfg)
    records[2] = audit.AuditRecord(2, 3.0, records[2].epsilon*1.01)
    trail = audit.AuditTrail(records)
    transcript = audit.run_round(trail, 1.0, cfg, seed=0)
    assert transcript.reject_reasons == [(2, 'EPS_FORMULA_MISMATCH')]


@pytest.mark.mpi_skip()
def test_fraudulent_claim_detection():
    trail = linear_trail()
    claim = 0.8*trail.eps_claimed
    fraud = sum(r.epsilon > claim for r in trail.records)
    f = fraud/len(trail.records)
    k = audit.challenge_size(100, 0.12)
    assert k == 12
    rejected = 0
    for seed in range(200):
        transcript = audit.run_round(trail, 0.12, cfg, seed=seed,
                                     eps_claimed=claim)
        rejected += not transcript.accepted
        codes = {c for i, c in transcript.reject_reasons}
        assert codes <= {'EPS_EXCEEDS_CLAIM'}
    bound = 1.0 - audit.soundness_error(f, k)[0]
    print('fraud fraction', f, 'rejection rate', rejected/200,
          'bound', bound)
    assert rejected/200 >= bound - 0.05


@pytest.mark.mpi_skip()
def test_soundness_error():
    err, bits = audit.soundness_error(0.5, 30)
    npt.assert_allclose(err, 9.3e-10, rtol=0.01)
    npt.assert_allclose(bits, 30.0, rtol=rtol)
    assert audit.soundness_error(0.0, 30) == (1.0, 0.0)
    err, bits = audit.soundness_error(0.3, 30)
    npt.assert_allclose(err, 2.25e-5, rtol=0.01)
    npt.assert_allclose(bits, 15.4, atol=0.05)
    errs = [audit.soundness_error(f, k)[0]
            for f in [0.1, 0.2, 0.4] for k in [5, 10]]
    assert errs[0] > errs[1] and errs[0] > errs[2] > errs[4]
    with pytest.raises(ValueError):
        audit.soundness_error(1.5, 3)


@pytest.mark.mpi_skip()
def test_hypergeometric_bound():
    cases = [(n, m, k) for n in [20, 50, 100, 200] for m, k in
             [(1, 5), (5, 3), (10, 12), (3, 15), (20, 10)] if k <= n]
    assert len(cases) == 20
    for n, m, k in cases:
        exact = audit.hypergeometric_detection(n, m, k)
        bound = 1.0 - (1.0 - m/n)**k
        assert exact >= bound - 1e-12
    assert audit.hypergeometric_detection(10, 0, 5) == 0.0
    assert audit.hypergeometric_detection(10, 10, 1) == 1.0


@pytest.mark.mpi_skip()
def test_transcript_files(tmpdir):
    trail = linear_trail(10)
    transcript = audit.run_round(trail, 0.5, cfg, seed=3)
    path = os.path.join(str(tmpdir), 'transcript.json')
    audit.save_transcript(transcript, path)
    loaded = audit.load_transcript(path)
    assert loaded.root == trail.root
    assert loaded.challenge_set == transcript.challenge_set
    again = audit.verify(loaded.root, loaded.eps_claimed, loaded.responses,
                         cfg, loaded.challenge_set)
    assert again.accepted
    assert open(path).read().count(trail.root.hex()) == 1
    commit_path = os.path.join(str(tmpdir), 'commitment.txt')
    audit.write_commitment(trail.root, trail.eps_claimed, commit_path)
    lines = open(commit_path).read().splitlines()
    assert len(lines) == 1
    root, eps, n = audit.read_commitment(commit_path)
    assert root == trail.root and n is None
    npt.assert_allclose(eps, trail.eps_claimed, rtol=1e-12)
    audit.write_commitment(trail.root, trail.eps_claimed, commit_path, 10)
    assert audit.read_commitment(commit_path)[2] == 10
    with open(commit_path, 'w') as f:
        f.write('deadbeef\n')
    with pytest.raises(ValueError):
        audit.read_commitment(commit_path)


@pytest.mark.mpi_skip()
def test_forged_fiat_shamir_set_rejected():
    trail = linear_trail()
    claim = 0.8*trail.eps_claimed
    honest = [r.index for r in trail.records if r.epsilon <= claim][:12]
    assert len(honest) == 12
    responses = audit.respond(trail.tree, trail.records, honest)
    for forged_set in (honest, None):
        transcript = audit.verify(trail.root, claim, responses, cfg,
                                  forged_set, 'FiatShamir', 100, 0.12)
        assert not transcript.accepted
        expected = audit.challenge(100, 0.12, 'FiatShamir', root=trail.root,
                                   eps_claimed=claim)
        assert transcript.challenge_set == expected
        codes = {c for i, c in transcript.reject_reasons}
        assert 'UNCHALLENGED_RESPONSE' in codes or 'BAD_PROOF' in codes
    transcript = audit.verify(trail.root, claim, responses, cfg, honest,
                              'FiatShamir', 100, 0.12)
    assert (-1, 'BAD_CHALLENGE') in transcript.reject_reasons
    with pytest.raises(ValueError):
        audit.verify(trail.root, claim, responses, cfg, honest, 'FiatShamir')
    with pytest.raises(ValueError):
        audit.verify(trail.root, claim, responses, cfg, honest, 'Oracle')


@pytest.mark.mpi_skip()
def test_unchallenged_response_rejected():
    trail = linear_trail(20)
    S = [2, 5]
    responses = audit.respond(trail.tree, trail.records, [2, 5, 7])
    transcript = audit.verify(trail.root, trail.eps_claimed, responses, cfg,
                              S)
    assert transcript.reject_reasons == [(7, 'UNCHALLENGED_RESPONSE')]
    seeded = audit.challenge(20, 0.25, seed=11)
    responses = audit.respond(trail.tree, trail.records, seeded)
    again = audit.verify(trail.root, trail.eps_claimed, responses, cfg,
                         seeded, 'Interactive', 20, 0.25, seed=11)
    assert again.accepted
    other = audit.verify(trail.root, trail.eps_claimed, responses, cfg,
                         seeded, 'Interactive', 20, 0.25, seed=12)
    assert not other.accepted
    assert (-1, 'BAD_CHALLENGE') in other.reject_reasons


@pytest.mark.mpi_skip()
def test_reverify_transcript(tmpdir):
    trail = linear_trail(40)
    transcript = audit.run_round(trail, 0.25, cfg, mode='FiatShamir')
    assert transcript.accepted
    path = os.path.join(str(tmpdir), 'transcript.json')
    audit.save_transcript(transcript, path)
    loaded = audit.load_transcript(path)
    assert (loaded.mode, loaded.n_records, loaded.ratio) == \
        ('FiatShamir', 40, 0.25)
    assert audit.reverify(loaded, cfg, trail.root, trail.eps_claimed,
                          40).accepted
    # a transcript answered for a lower claim does not match the commitment
    low = audit.run_round(trail, 0.25, cfg, mode='FiatShamir',
                          eps_claimed=0.8*trail.eps_claimed)
    again = audit.reverify(low, cfg, trail.root, trail.eps_claimed, 40)
    assert not again.accepted
    other_root = linear_trail(41).root
    assert not audit.reverify(loaded, cfg, other_root, trail.eps_claimed,
                              40).accepted
