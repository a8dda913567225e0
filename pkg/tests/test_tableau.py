from __future__ import annotations

import numpy as np

from artifact.tableau import Tableau

H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def _apply_1q(psi, gate, q, n):
    psi = psi.reshape([2] * n)
    psi = np.moveaxis(np.tensordot(gate, psi, axes=([1], [q])), 0, q)
    return psi.reshape(-1)


def _apply_cnot(psi, c, t, n):
    psi = psi.reshape([2] * n).copy()
    idx = [slice(None)] * n
    idx[c] = 1
    sub = psi[tuple(idx)]
    tt = t if t < c else t - 1
    psi[tuple(idx)] = np.flip(sub, axis=tt)
    return psi.reshape(-1)


def _prob_one(psi, q, n):
    p = np.abs(psi.reshape([2] * n)) ** 2
    return float(np.moveaxis(p, q, 0)[1].sum())


def test_random_circuits_match_statevector():
    rng = np.random.default_rng(5)
    n = 4
    for _ in range(200):
        t = Tableau(n)
        psi = np.zeros(2 ** n, dtype=complex)
        psi[0] = 1
        for _ in range(12):
            if rng.random() < 0.4:
                q = int(rng.integers(n))
                t.h(q)
                psi = _apply_1q(psi, H, q, n)
            else:
                c, tg = (int(x) for x in rng.choice(n, 2, replace=False))
                t.cnot(c, tg)
                psi = _apply_cnot(psi, c, tg, n)
        # measure the first qubit without collapsing the others in the oracle
        p1 = _prob_one(psi, 0, n)
        out, det = t.measure(0)
        if det:
            assert np.isclose(p1, out)
        else:
            assert np.isclose(p1, 0.5)


def test_bell_pair_correlated():
    t = Tableau(2)
    t.h(0)
    t.cnot(0, 1)
    a, det_a = t.measure(0, forced=1)
    b, det_b = t.measure(1)
    assert not det_a and det_b and a == b == 1


def test_reset_returns_zero():
    t = Tableau(1)
    t.h(0)
    t.reset(0)
    assert t.measure(0) == (0, True)
    t.pauli_x(0)
    assert t.measure(0) == (1, True)
