import numpy as np
import pytest

from drivesal.config import RunConfig
from drivesal.data import SynthConfig
from drivesal.data.synth import sample_sequence
from drivesal.errors import ArgumentError, ConfigError, DimensionError
from drivesal.model import SaliencyModel
from drivesal.train import Adam, SGD, Sample, _clip, evaluate, make_optimizer, train_saliency


def make_samples(n, static, seed=0, fixations=True):
    rng = np.random.default_rng(seed)
    cfg = SynthConfig(static=static)
    out = []
    for i in range(n):
        frames, sal, fix, label, _ = sample_sequence(rng, cfg)
        out.append(Sample(f"s{i}", frames, sal, fix if fixations else None, label))
    return out


# -- model --------------------------------------------------------------------


@pytest.mark.parametrize("static, n", [(True, 1), (False, 4)])
def test_one_map_per_input(static, n, rng):
    model = SaliencyModel(RunConfig(static=static))
    assert model.n_frames == n
    m = model.predict([rng.uniform(size=(48, 64, 3)) for _ in range(n)])
    assert m.shape == model.output_shape == (48, 64, 1)
    assert np.all(m >= 0) and np.all(np.isfinite(m))


def test_wrong_frame_count(rng):
    model = SaliencyModel(RunConfig(static=True))
    with pytest.raises(ArgumentError):
        model.predict([rng.uniform(size=(48, 64, 3))] * 2)


def test_variants_change_parameter_sets():
    names = {v: set(SaliencyModel(RunConfig(variant=v)).params()) for v in ("NCB", "G16", "RBF32")}
    assert not any(k.startswith("prior") for k in names["NCB"])
    assert names["NCB"] < names["G16"] and names["NCB"] < names["RBF32"]
    ro = SaliencyModel(RunConfig(variant="RBF32")).readout.kernel
    assert ro.shape == (1, 1, 32 + 32, 1)


def test_load_params_checks(rng):
    a, b = SaliencyModel(RunConfig(seed=1)), SaliencyModel(RunConfig(seed=2))
    frames = [rng.uniform(size=(48, 64, 3))] * 4
    b.load_params({k: v.data for k, v in a.params().items()})
    np.testing.assert_array_equal(a.predict(frames), b.predict(frames))
    with pytest.raises(ConfigError):
        SaliencyModel(RunConfig(variant="NCB")).load_params({k: v.data for k, v in a.params().items()})
    bad = {k: v.data for k, v in a.params().items()}
    bad["readout.bias"] = np.zeros(2)
    with pytest.raises(ConfigError):
        b.load_params(bad)


def test_frozen_backbone():
    m = SaliencyModel(RunConfig(train_backbone=False))
    assert not any(k.startswith("backbone.") for k in m.trainable())
    assert any(k.startswith("backbone.") for k in m.params())


# -- evaluation ---------------------------------------------------------------


def test_perfect_predictor_scores():
    samples = make_samples(3, static=True)
    lookup = {id(s.frames[0]): s.saliency for s in samples}
    m = evaluate(lambda frames: lookup[id(frames[0])], samples)
    assert m["CC"] == pytest.approx(1.0, abs=1e-12)
    assert m["KLD"] <= 1e-5
    assert m["NSS"] > 0


def test_nss_blank_without_fixations():
    samples = make_samples(2, static=False)
    assert all(s.fixation is None for s in samples)
    m = evaluate(lambda frames: frames[-1][:, :, :1], samples)
    assert m["NSS"] is None and np.isfinite(m["KLD"])


def test_evaluate_shape_mismatch():
    samples = make_samples(1, static=True)
    with pytest.raises(DimensionError):
        evaluate(lambda f: np.ones((24, 32, 1)), samples)


# -- optimizers ---------------------------------------------------------------


def test_sgd_and_adam_steps():
    from drivesal.autograd import Tensor
    p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    SGD([p], 0.1).step([np.array([1.0, 1.0])])
    np.testing.assert_allclose(p.data, [0.9, -2.1])
    q = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    Adam([q], 0.1).step([np.array([3.0, -0.5])])
    # bias-corrected first step moves each coordinate by lr against the gradient sign
    np.testing.assert_allclose(q.data, [0.9, -1.9], atol=1e-7)
    with pytest.raises(ConfigError):
        make_optimizer("lbfgs", [q], 0.1)


def test_clip_scales_global_norm():
    g = [np.array([3.0]), np.array([4.0])]
    out = _clip(g, 1.0)
    assert np.hypot(out[0][0], out[1][0]) == pytest.approx(1.0)
    assert _clip(g, 0) is g and _clip(g, 10.0) is g


# -- training -----------------------------------------------------------------


def test_nss_model_on_static_data_logs_all_terms():
    cfg = RunConfig(variant="G16", losses=["CC", "KL", "NSS"], static=True, epochs=2, max_steps=4)
    assert cfg.model_id == "CC-KL-NSS-G16"
    records = []
    _, log = train_saliency(cfg, make_samples(3, static=True), log_fn=records.append)
    assert len(records) == 2 == len(log.records)
    assert set(log.final_losses()) == {"CC", "KL", "NSS", "total"}
    assert all(np.isfinite(v) for r in log.records for v in r.losses.values())
    assert log.records[-1].steps == 4
    assert log.lines()[0].startswith("epoch=0 steps=3 CC=")


def test_rbf_model_on_sequences_runs():
    cfg = RunConfig(variant="RBF32", losses=["CC", "KL"], epochs=1, max_steps=2)
    assert cfg.model_id == "CC-KL-RBF32"
    val = make_samples(2, static=False, seed=9)
    _, log = train_saliency(cfg, make_samples(2, static=False), val_samples=val)
    assert set(log.final_losses()) == {"CC", "KL", "total"}
    assert set(log.records[0].val_metrics) == {"CC", "KLD", "NSS"}
    assert log.records[0].val_metrics["NSS"] is None


def test_same_seed_same_losses():
    samples = make_samples(3, static=True)
    cfg = RunConfig(static=True, epochs=2, seed=5)
    m1, a = train_saliency(cfg, samples)
    m2, b = train_saliency(cfg, samples)
    assert [r.losses for r in a.records] == [r.losses for r in b.records]
    for k, v in m1.params().items():
        np.testing.assert_array_equal(v.data, m2.params()[k].data)


def test_training_lowers_loss():
    samples = make_samples(2, static=True)
    cfg = RunConfig(static=True, optimizer="adam", lr=5e-4, epochs=15)
    _, log = train_saliency(cfg, samples)
    assert log.records[-1].losses["total"] < log.records[0].losses["total"]


def test_training_preconditions():
    static = make_samples(2, static=True)
    with pytest.raises(ConfigError, match="fixation"):
        train_saliency(RunConfig(static=True, losses=["CC", "NSS"]), make_samples(2, static=True, fixations=False))
    with pytest.raises(ConfigError, match="frames"):
        train_saliency(RunConfig(static=False), static)
    with pytest.raises(DimensionError):
        train_saliency(RunConfig(static=True, input_h=40), static)
