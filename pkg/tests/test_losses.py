import itertools
import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drivesal.autograd import Tensor, grad_check
from drivesal.errors import ArgumentError, ContractError, DegenerateInputError, DimensionError
from drivesal.losses import (
    LossConfig, auc, bce_loss, cc, cc_loss, combined_loss, kl_loss, kld, loss_terms, nss, nss_loss,
    read_metrics_csv, roc_curve, sum_to_one, write_metrics_csv,
)
from oracles import mann_whitney


def col(values):
    return Tensor(np.asarray(values, dtype=float).reshape(-1, 1, 1))


# -- KL ---------------------------------------------------------------------


def test_kl_identical_maps_near_zero(rng):
    p = sum_to_one(Tensor(rng.uniform(0.1, 1, (4, 5, 1))))
    assert abs(kl_loss(p, p).item()) <= 1e-5


def test_kl_hand_value_against_eps_free_oracle():
    yt, yp = col([0.5, 0.5, 0, 0]), col([0.25] * 4)
    oracle = sum(t * math.log(t / q) for t, q in zip([0.5, 0.5, 0, 0], [0.25] * 4) if t > 0)
    assert oracle == pytest.approx(math.log(2), abs=1e-15)
    assert kl_loss(yt, yp, epsilon=1e-7).item() == pytest.approx(oracle, abs=1e-4)


def test_kl_grows_as_predicted_mass_vanishes():
    yt = col([0.5, 0.5])
    vals = [kl_loss(yt, col([1 - m, m])).item() for m in (0.4, 0.1, 1e-2, 1e-4, 1e-6)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 3


def test_kl_is_asymmetric():
    p, q = col([0.7, 0.2, 0.1]), col([0.3, 0.3, 0.4])
    assert abs(kl_loss(p, q).item() - kl_loss(q, p).item()) > 1e-3


def test_kl_contract_and_shape_errors():
    with pytest.raises(ContractError):
        kl_loss(col([1, 2]), col([0.5, 0.5]))
    with pytest.raises(DimensionError):
        kl_loss(col([0.5, 0.5]), col([1 / 3] * 3))


# -- CC ---------------------------------------------------------------------


def test_cc_brute_force_4_pixel_case():
    a, b = [1, 2, 3, 4], [1, 2, 2, 1]
    r = statistics.correlation(a, b)
    assert r == 0.0
    assert cc_loss(col(a), col(b)).item() == pytest.approx(1 - r * r, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.floats(-5, 5).filter(lambda a: abs(a) > 0.05), st.floats(-3, 3))
def test_cc_loss_affine_and_sign_invariance(seed, a, b):
    y = np.random.default_rng(seed).uniform(0, 1, 12)
    assert cc_loss(col(y), col(a * y + b)).item() == pytest.approx(0.0, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_cc_matches_statistics_oracle(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=9), rng.normal(size=9)
    r = statistics.correlation(a.tolist(), b.tolist())
    assert cc(a, b) == pytest.approx(r, abs=1e-9)
    loss = cc_loss(col(a), col(b)).item()
    assert loss == pytest.approx(1 - r * r, abs=1e-9)
    assert 0.0 <= loss <= 1.0
    assert cc_loss(col(a), col(-b)).item() == pytest.approx(loss, abs=1e-12)


def test_cc_degenerate():
    with pytest.raises(DegenerateInputError):
        cc_loss(col([1, 1, 1]), col([1, 2, 3]))


# -- NSS --------------------------------------------------------------------


def test_nss_one_sigma_fixation():
    pred = col([0.0, 2.0])  # mean 1, population std 1
    assert nss(pred, col([0, 1])).item() == pytest.approx(1.0, abs=1e-12)
    assert nss_loss(pred, col([0, 1])).item() == pytest.approx(-1.0, abs=1e-12)


def test_nss_all_fixated_is_zero(rng):
    pred = col(rng.uniform(size=20))
    assert abs(nss(pred, col(np.ones(20))).item()) <= 1e-9
    assert abs(nss_loss(pred, col(np.ones(20))).item()) <= 1e-9


def test_nss_matches_statistics_oracle(rng):
    p = rng.uniform(size=15)
    fix = (rng.uniform(size=15) > 0.6).astype(float)
    fix[3] = 1
    mu, sd = statistics.fmean(p), statistics.pstdev(p)
    oracle = statistics.fmean((v - mu) / sd for v, f in zip(p, fix) if f)
    assert nss(col(p), col(fix)).item() == pytest.approx(oracle, abs=1e-9)


def test_nss_at_max_positive_and_errors(rng):
    p = rng.uniform(size=10)
    fix = np.zeros(10)
    fix[np.argmax(p)] = 1
    assert nss(col(p), col(fix)).item() > 0
    with pytest.raises(DegenerateInputError):
        nss(col([2, 2, 2]), col([1, 0, 0]))
    with pytest.raises(ArgumentError):
        nss(col([1, 2, 3]), col([0, 0, 0]))


def test_nss_positive_affine_invariance(rng):
    p = rng.uniform(size=12)
    fix = np.zeros(12)
    fix[[1, 5, 7]] = 1
    base = nss(col(p), col(fix)).item()
    assert nss(col(3.5 * p + 2.0), col(fix)).item() == pytest.approx(base, abs=1e-9)


def test_descent_on_nss_loss_increases_nss(rng):
    p = Tensor(rng.uniform(0.1, 1, (4, 4, 1)), requires_grad=True)
    fix = Tensor((rng.uniform(size=(4, 4, 1)) > 0.7).astype(float))
    fix.data[0, 0, 0] = 1
    before = nss(p, fix).item()
    for _ in range(100):
        p.zero_grad()
        nss_loss(p, fix).backward()
        p.data = p.data - 0.05 * p.grad
    assert nss(p, fix).item() > before + 0.1


@pytest.mark.parametrize("fn", ["kl", "cc", "nss"])
def test_loss_gradients(rng, fn):
    y = Tensor(rng.uniform(0.1, 1, (3, 4, 1)))
    p = Tensor(rng.uniform(0.1, 1, (3, 4, 1)), requires_grad=True)
    fix = Tensor((np.arange(12) % 3 == 0).astype(float).reshape(3, 4, 1))
    f = {
        "kl": lambda: kl_loss(sum_to_one(y), sum_to_one(p)),
        "cc": lambda: cc_loss(y, p),
        "nss": lambda: nss_loss(p, fix),
    }[fn]
    assert grad_check(f, [p]) <= 1e-4


# -- combination ------------------------------------------------------------


def _maps(rng):
    y = Tensor(rng.uniform(0.05, 1, (5, 6, 1)))
    p = Tensor(rng.uniform(0.05, 1, (5, 6, 1)))
    fix = Tensor((rng.uniform(size=(5, 6, 1)) > 0.7).astype(float))
    fix.data[2, 2, 0] = 1
    return y, p, fix


def test_combined_equals_sum_of_terms(rng):
    y, p, fix = _maps(rng)
    total = combined_loss(y, p, fix, LossConfig()).item()
    parts = kl_loss(sum_to_one(y), sum_to_one(p)).item() + cc_loss(y, p).item() + nss_loss(p, fix).item()
    assert total == pytest.approx(parts, abs=1e-12)


def test_combined_masking(rng):
    y, p, fix = _maps(rng)
    only_kl = LossConfig(w_kl=1, w_cc=0, w_nss=0, nss_enabled=False)
    assert combined_loss(y, p, None, only_kl).item() == kl_loss(sum_to_one(y), sum_to_one(p)).item()
    no_nss = LossConfig(nss_enabled=False)
    assert set(loss_terms(y, p, None, no_nss)) == {"KL", "CC"}
    with pytest.raises(ArgumentError):
        combined_loss(y, p, None, LossConfig())


def test_combined_identical_maps_with_uniform_fixations(rng):
    y = Tensor(rng.uniform(0.05, 1, (4, 4, 1)))
    assert combined_loss(y, y, Tensor(np.ones((4, 4, 1))), LossConfig()).item() <= 1e-5


def test_loss_config_from_terms():
    cfg = LossConfig.from_terms(["cc", "KL"])
    assert (cfg.w_kl, cfg.w_cc, cfg.w_nss, cfg.nss_enabled) == (1.0, 1.0, 0.0, False)
    with pytest.raises(ArgumentError):
        LossConfig.from_terms(["MSE"])
    with pytest.raises(ArgumentError):
        LossConfig(epsilon=0)


# -- BCE --------------------------------------------------------------------


def test_bce_examples():
    assert bce_loss([1.0], Tensor([0.5])).item() == pytest.approx(math.log(2), abs=1e-12)
    assert bce_loss([1.0, 0.0], Tensor([0.9, 0.1])).item() == pytest.approx(-math.log(0.9), abs=1e-12)
    assert bce_loss([1.0, 0.0], Tensor([1.0, 0.0])).item() <= 1e-6
    with pytest.raises(ArgumentError):
        bce_loss([], Tensor(np.zeros(0)))


# -- ROC / AUC --------------------------------------------------------------


def test_auc_examples():
    assert auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert auc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0
    assert auc([0.9, 0.4, 0.4, 0.1], [1, 0, 1, 0]) == pytest.approx(0.875, abs=1e-12)


def test_roc_curve_shapes():
    fpr, tpr, _ = roc_curve([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
    assert (0.0, 1.0) in set(zip(fpr, tpr))
    fpr, tpr, _ = roc_curve([0.5] * 4, [1, 0, 1, 0])
    assert list(zip(fpr, tpr)) == [(0.0, 0.0), (1.0, 1.0)]


def test_roc_curve_matches_threshold_enumeration():
    scores, labels = [0.9, 0.4, 0.4, 0.1], [1, 0, 1, 0]
    fpr, tpr, thr = roc_curve(scores, labels)
    for f, t, th in zip(fpr, tpr, thr):
        pred = [s >= th for s in scores]
        assert t == sum(p and y for p, y in zip(pred, labels)) / 2
        assert f == sum(p and not y for p, y in zip(pred, labels)) / 2
    assert np.all(np.diff(fpr) >= 0) and np.all(np.diff(tpr) >= 0)
    assert (fpr[0], tpr[0], fpr[-1], tpr[-1]) == (0.0, 0.0, 1.0, 1.0)


def test_auc_single_class_rejected():
    with pytest.raises(ArgumentError):
        auc([0.1, 0.2], [1, 1])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 6), st.booleans()), min_size=2, max_size=200))
def test_auc_equals_mann_whitney(pairs):
    scores = [s / 6 for s, _ in pairs]
    labels = [int(y) for _, y in pairs]
    if len(set(labels)) < 2:
        return
    assert auc(scores, labels) == pytest.approx(mann_whitney(scores, labels), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_auc_invariant_to_increasing_transform(seed):
    rng = np.random.default_rng(seed)
    s = rng.normal(size=30).round(1)
    y = np.r_[0, 1, rng.integers(0, 2, 28)]
    assert auc(np.exp(s) ** 3, y) == pytest.approx(auc(s, y), abs=1e-12)


# -- float metrics and CSV ------------------------------------------------


def test_kld_metric_normalizes_inputs(rng):
    y = rng.uniform(0.1, 1, (3, 3, 1))
    assert kld(5 * y, y) == pytest.approx(kld(y, y), abs=1e-12)


def test_metrics_csv_round_trip(tmp_path):
    rows = [
        {"model_id": "CC-KL-NSS-G16", "CC": 0.1 + 0.2, "KLD": 1e-17, "NSS": -2.5, "AUC": None},
        {"model_id": "CC-KL-RBF32", "CC": 0.5, "KLD": 0.25},
    ]
    path = tmp_path / "m.csv"
    write_metrics_csv(rows, path)
    back = read_metrics_csv(path)
    assert back[0] == rows[0]
    assert back[1] == {**rows[1], "NSS": None, "AUC": None}
    assert path.read_text().splitlines()[0] == "model_id,CC,KLD,NSS,AUC"


def test_pairwise_oracle_itself():
    # exhaustive check of the oracle on every labelling of 4 fixed scores
    scores = [0.3, 0.1, 0.3, 0.7]
    for labels in itertools.product([0, 1], repeat=4):
        if 0 < sum(labels) < 4:
            assert auc(scores, labels) == pytest.approx(mann_whitney(scores, list(labels)), abs=1e-12)
