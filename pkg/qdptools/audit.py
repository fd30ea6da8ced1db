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
import json
import math
import numpy as np
import scipy.special

challenge_modes = ('Interactive', 'FiatShamir')

reject_codes = ('BAD_PROOF', 'EPS_EXCEEDS_CLAIM', 'EPS_FORMULA_MISMATCH',
                'BAD_CHALLENGE', 'UNCHALLENGED_RESPONSE')

# Relative tolerance of the epsilon formula check
formula_rtol = 1e-9

pad_leaf = hashlib.sha256(b'PAD').digest()


def sha256(data):
    return hashlib.sha256(data).digest()


def eps_string(eps):
    return '{:.12e}'.format(eps)


class AuditRecord():
    """Per-sample privacy record committed by the prover."""
    def __init__(self, index, lambda_max, epsilon):
        self.index = int(index)
        self.lambda_max = float(lambda_max)
        self.epsilon = float(epsilon)

    def leaf_string(self):
        return '{:d}|{:.12e}|{:.12e}'.format(self.index, self.lambda_max,
                                             self.epsilon)

    def leaf_hash(self):
        return sha256(self.leaf_string().encode('utf-8'))

    def to_dict(self):
        return {'index': self.index, 'lambda_max': self.lambda_max,
                'epsilon': self.epsilon}

    @classmethod
    def from_dict(cls, d):
        return cls(d['index'], d['lambda_max'], d['epsilon'])


def honest_epsilon(lambda_max, cfg):
    return 0.5*cfg.Delta**2*lambda_max*(1.0 - cfg.c_gamma)


def make_records(lambdas, cfg):
    """Honest records epsilon_i = (Delta^2/2) lambda_i (1 - c gamma)."""
    return [AuditRecord(i, lam, honest_epsilon(lam, cfg))
            for i, lam in enumerate(lambdas)]


class InclusionProof():
    """Sibling hashes from leaf to root.

    side is 0 when the sibling sits to the left of the running hash and 1
    when it sits to the right.
    """
    def __init__(self, leaf_index, siblings):
        self.leaf_index = leaf_index
        self.siblings = list(siblings)

    def to_dict(self):
        return {'leaf_index': self.leaf_index,
                'siblings': [[s.hex(), side] for s, side in self.siblings]}

    @classmethod
    def from_dict(cls, d):
        return cls(d['leaf_index'],
                   [(bytes.fromhex(s), side) for s, side in d['siblings']])


class MerkleTree():
    """Binary SHA-256 tree over leaf hashes, padded with H("PAD") to a
    power of two of at least two leaves."""
    def __init__(self, leaves):
        if len(leaves) == 0:
            raise ValueError('MerkleTree: no leaves')
        size = max(2, 1 << (len(leaves) - 1).bit_length())
        self.n_leaves = len(leaves)
        self.leaves = list(leaves) + [pad_leaf]*(size - len(leaves))
        self.levels = [self.leaves]
        level = self.leaves
        while len(level) > 1:
            level = [sha256(level[i] + level[i + 1])
                     for i in range(0, len(level), 2)]
            self.levels.append(level)
        self.root = level[0]

    @property
    def depth(self):
        return len(self.levels) - 1

    def proof(self, index):
        if not 0 <= index < self.n_leaves:
            raise IndexError('MerkleTree: leaf index out of range', index)
        siblings = []
        pos = index
        for level in self.levels[:-1]:
            if pos % 2 == 0:
                siblings.append((level[pos + 1], 1))
            else:
                siblings.append((level[pos - 1], 0))
            pos //= 2
        return InclusionProof(index, siblings)


def verify_proof(leaf, proof, root):
    """Walk a proof from a leaf hash up to the root.

    Returns False for malformed proofs and for side flags that disagree
    with the bits of the leaf index.
    """
    try:
        node = leaf
        pos = int(proof.leaf_index)
        if pos < 0:
            return False
        for sibling, side in proof.siblings:
            if not isinstance(sibling, bytes) or len(sibling) != 32:
                return False
            if side not in (0, 1) or side != 1 - pos % 2:
                return False
            node = sha256(sibling + node) if side == 0 \
                else sha256(node + sibling)
            pos //= 2
        return pos == 0 and node == root
    except (TypeError, ValueError, AttributeError):
        return False


class AuditTrail():
    """Prover-side state: records, tree, root and claimed epsilon."""
    def __init__(self, records):
        self.records = list(records)
        self.tree, self.eps_claimed = commit(self.records)
        self.root = self.tree.root

    @classmethod
    def from_lambdas(cls, lambdas, cfg):
        return cls(make_records(lambdas, cfg))


def commit(records):
    """Merkle tree over the record leaves and eps_claimed = max epsilon."""
    if len(records) == 0:
        raise ValueError('commit: no records')
    tree = MerkleTree([r.leaf_hash() for r in records])
    return tree, max(r.epsilon for r in records)


def challenge_size(n, ratio):
    if not 0.0 < ratio <= 1.0:
        raise ValueError('challenge: ratio outside (0,1] ', ratio)
    return min(n, int(math.ceil(round(ratio*n, 9))))


def challenge(n, ratio, mode='Interactive', seed=None, root=None,
              eps_claimed=None):
    """Challenge set of ceil(ratio n) distinct sorted indices.

    Args:
        n: Number of committed records.
        ratio: Challenged fraction in (0, 1].
        mode (optional): 'Interactive' draws from a PCG64 generator seeded
            with seed. 'FiatShamir' hashes root, the eps_claimed string and
            an 8-byte counter, rejecting repeats. Defaults to 'Interactive'.
        seed (optional): Verifier seed. Defaults to None.
        root (optional): Merkle root, required for FiatShamir.
        eps_claimed (optional): Claimed epsilon, required for FiatShamir.
    """
    if n < 1:
        raise ValueError('challenge: n must be positive ', n)
    k = challenge_size(n, ratio)
    if mode == 'Interactive':
        rng = np.random.Generator(np.random.PCG64(seed))
        return sorted(int(i) for i in rng.choice(n, size=k, replace=False))
    elif mode == 'FiatShamir':
        if root is None or eps_claimed is None:
            raise ValueError('challenge: FiatShamir needs root and '
                             'eps_claimed')
        prefix = root + eps_string(eps_claimed).encode('utf-8')
        chosen = set()
        counter = 0
        while len(chosen) < k:
            digest = sha256(prefix + counter.to_bytes(8, 'big'))
            chosen.add(int.from_bytes(digest, 'big') % n)
            counter += 1
        return sorted(chosen)
    else:
        raise ValueError('Unknown challenge mode ', mode)


def respond(tree, records, S):
    """Records and inclusion proofs of the challenged indices."""
    by_index = {r.index: r for r in records}
    responses = []
    for i in S:
        if i not in by_index:
            raise IndexError('respond: challenged index out of range', i)
        responses.append((by_index[i], tree.proof(i)))
    return responses


class AuditTranscript():
    def __init__(self, root, eps_claimed, challenge_set, responses, verdict,
                 reject_reasons, mode='Interactive', n_records=None,
                 ratio=None):
        self.root = root
        self.eps_claimed = eps_claimed
        self.challenge_set = list(challenge_set)
        self.responses = responses
        self.verdict = verdict
        self.reject_reasons = reject_reasons
        self.mode = mode
        self.n_records = n_records
        self.ratio = ratio

    @property
    def accepted(self):
        return self.verdict == 'accept'

    def to_dict(self):
        return {'root': self.root.hex(),
                'eps_claimed': self.eps_claimed,
                'challenge_set': self.challenge_set,
                'responses': [{'record': r.to_dict(), 'proof': p.to_dict()}
                              for r, p in self.responses],
                'verdict': self.verdict,
                'reject_reasons': [[i, code]
                                   for i, code in self.reject_reasons],
                'mode': self.mode,
                'n_records': self.n_records,
                'ratio': self.ratio}

    @classmethod
    def from_dict(cls, d):
        responses = [(AuditRecord.from_dict(r['record']),
                      InclusionProof.from_dict(r['proof']))
                     for r in d['responses']]
        return cls(bytes.fromhex(d['root']), d['eps_claimed'],
                   d['challenge_set'], responses, d['verdict'],
                   [tuple(x) for x in d['reject_reasons']],
                   d.get('mode', 'Interactive'), d.get('n_records'),
                   d.get('ratio'))


def verify(root, eps_claimed, responses, cfg, challenge_set=None,
           mode='Interactive', n=None, ratio=None, seed=None):
    """Check every response: the proof against the root, epsilon against
    the claim and epsilon against the mechanism formula.

    Args:
        root: Committed Merkle root.
        eps_claimed: Claimed epsilon.
        responses: List of (AuditRecord, InclusionProof).
        cfg: MechanismConfig of the honest epsilon formula.
        challenge_set (optional): Indices the prover had to answer. A
            challenged index without a response is rejected as BAD_PROOF and
            a response outside the set as UNCHALLENGED_RESPONSE.
        mode (optional): Challenge mode. With 'FiatShamir', or
            'Interactive' and a seed, the set is recomputed; a differing
            challenge_set is rejected as BAD_CHALLENGE and the recomputed
            set is enforced. Defaults to 'Interactive'.
        n (optional): Committed record count, required for recomputation.
        ratio (optional): Challenge ratio, required for recomputation.
        seed (optional): Verifier seed of an interactive challenge.
    """
    if mode not in challenge_modes:
        raise ValueError('Unknown challenge mode ', mode)
    reasons = []
    if mode == 'FiatShamir' or seed is not None:
        if n is None or ratio is None:
            raise ValueError('verify: recomputing the challenge needs n '
                             'and ratio')
        expected = challenge(n, ratio, mode, seed, root, eps_claimed)
        if challenge_set is not None and \
           sorted(int(i) for i in challenge_set) != expected:
            reasons.append((-1, 'BAD_CHALLENGE'))
        challenge_set = expected
    allowed = None if challenge_set is None else set(challenge_set)
    answered = set()
    for record, proof in responses:
        try:
            index = record.index
        except AttributeError:
            reasons.append((-1, 'BAD_PROOF'))
            continue
        if allowed is not None and index not in allowed:
            reasons.append((index, 'UNCHALLENGED_RESPONSE'))
            continue
        answered.add(index)
        if getattr(proof, 'leaf_index', None) != index or \
           not verify_proof(record.leaf_hash(), proof, root):
            reasons.append((index, 'BAD_PROOF'))
        if record.epsilon > eps_claimed:
            reasons.append((index, 'EPS_EXCEEDS_CLAIM'))
        eps_formula = honest_epsilon(record.lambda_max, cfg)
        if abs(record.epsilon - eps_formula) > \
           formula_rtol*max(abs(eps_formula), 1e-300):
            reasons.append((index, 'EPS_FORMULA_MISMATCH'))
    if challenge_set is None:
        challenge_set = sorted(answered)
    else:
        for i in challenge_set:
            if i not in answered:
                reasons.append((i, 'BAD_PROOF'))
    verdict = 'reject' if reasons else 'accept'
    return AuditTranscript(root, eps_claimed, challenge_set, responses,
                           verdict, reasons, mode, n, ratio)


def soundness_error(fraud_fraction, challenges):
    """(1 - f)^k and its security level in bits."""
    if not 0.0 <= fraud_fraction <= 1.0:
        raise ValueError('soundness_error: fraction outside [0,1] ',
                         fraud_fraction)
    if challenges < 0:
        raise ValueError('soundness_error: negative challenge count ',
                         challenges)
    error = (1.0 - fraud_fraction)**challenges
    bits = np.inf if error == 0 else abs(-math.log2(error))
    return error, bits


def hypergeometric_detection(n, m, k):
    """Probability that k draws without replacement from n records hit at
    least one of m fraudulent ones."""
    if not 0 <= m <= n or not 0 <= k <= n:
        raise ValueError('hypergeometric_detection: invalid counts ',
                         (n, m, k))
    miss = scipy.special.comb(n - m, k, exact=True) \
        / scipy.special.comb(n, k, exact=True)
    return 1.0 - float(miss)


def run_round(trail, ratio, cfg, mode='Interactive', seed=None,
              eps_claimed=None):
    """One commit-challenge-respond-verify round.

    eps_claimed overrides the committed maximum, which models a prover
    publishing a fraudulent claim.
    """
    claim = trail.eps_claimed if eps_claimed is None else eps_claimed
    n = len(trail.records)
    S = challenge(n, ratio, mode, seed, trail.root, claim)
    responses = respond(trail.tree, trail.records, S)
    return verify(trail.root, claim, responses, cfg, S, mode, n, ratio,
                  seed)


def reverify(transcript, cfg, root=None, eps_claimed=None, n=None,
             ratio=None):
    """Re-run verify on the responses of a saved transcript.

    root, eps_claimed and n default to the transcript values and should be
    taken from the published commitment. ratio defaults to the transcript
    ratio.
    """
    root = transcript.root if root is None else root
    claim = transcript.eps_claimed if eps_claimed is None else eps_claimed
    n = transcript.n_records if n is None else n
    ratio = transcript.ratio if ratio is None else ratio
    again = verify(root, claim, transcript.responses, cfg,
                   transcript.challenge_set, transcript.mode, n, ratio)
    if transcript.root != root:
        again.reject_reasons.append((-1, 'BAD_CHALLENGE'))
        again.verdict = 'reject'
    return again


def save_transcript(transcript, filename):
    with open(filename, 'w') as f:
        json.dump(transcript.to_dict(), f, indent=1)


def load_transcript(filename):
    with open(filename, 'r') as f:
        return AuditTranscript.from_dict(json.load(f))


def write_commitment(root, eps_claimed, filename, n=None):
    """One line: hex root, the claimed epsilon string and, if given, the
    record count."""
    line = '{:s} {:s}'.format(root.hex(), eps_string(eps_claimed))
    if n is not None:
        line += ' {:d}'.format(n)
    with open(filename, 'w') as f:
        f.write(line + '\n')


def read_commitment(filename):
    """(root, eps_claimed, n) with n None when the file has no count."""
    with open(filename, 'r') as f:
        tokens = f.readline().split()
    if len(tokens) not in (2, 3):
        raise ValueError('read_commitment: malformed commitment ', filename)
    n = int(tokens[2]) if len(tokens) == 3 else None
    return bytes.fromhex(tokens[0]), float(tokens[1]), n


def save_records(records, filename):
    with open(filename, 'w') as f:
        json.dump([r.to_dict() for r in records], f, indent=1)


def load_records(filename):
    with open(filename, 'r') as f:
        return [AuditRecord.from_dict(d) for d in json.load(f)]
