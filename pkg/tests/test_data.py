import filecmp
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drivesal.data import (
    BrakeLabelConfig, Manifest, ManifestEntry, SynthConfig, TelemetrySeries, gen_synthetic, label_brakes,
    load_gray_map, load_rgb_image, normalize_map, parse_telemetry, read_manifest, speed_at, write_gray_map,
    write_manifest, write_rgb_image,
)
from drivesal.data.telemetry import format_telemetry, frame_times_at
from drivesal.errors import ArgumentError, DegenerateInputError, FormatError, TelemetryLookupError
from oracles import oracle_labels, random_series


def series(ts, vs):
    return TelemetrySeries(np.asarray(ts, dtype=float), np.asarray(vs, dtype=float))


# -- telemetry parsing --------------------------------------------------------


def test_parse_minimal_and_empty():
    s = parse_telemetry("timestamp_ms,speed_mps\n0,10.0\n16.7,9.9\n")
    assert len(s) == 2 and s.speeds.tolist() == [10.0, 9.9]
    assert len(parse_telemetry("timestamp_ms,speed_mps\n")) == 0
    assert parse_telemetry(io.StringIO(format_telemetry(s))) == s


@pytest.mark.parametrize("body, line", [
    ("0,1\n5,1\n3,1\n", 4),
    ("0,1\n0,1\n", 3),
    ("0,1\n5,-0.1\n", 3),
    ("0,1\n5\n", 3),
    ("0,1\n5,fast\n", 3),
    ("0,nan\n", 2),
])
def test_parse_errors_name_the_line(body, line):
    with pytest.raises(FormatError, match=f"line {line}"):
        parse_telemetry("timestamp_ms,speed_mps\n" + body)


def test_parse_bad_header():
    with pytest.raises(FormatError):
        parse_telemetry("time,speed\n0,1\n")
    with pytest.raises(FormatError):
        parse_telemetry("")


# -- lookup ---------------------------------------------------------------------


def test_speed_lookup_examples():
    s = series([0, 1000, 1040], [10.0, 9.0, 8.0])
    assert speed_at(s, 1.0) == 9.0
    assert speed_at(s, 1.02) == pytest.approx(8.5, abs=1e-12)
    s2 = series([1000, 1050], [10.0, 9.0])
    assert speed_at(s2, 1.025) == pytest.approx(9.5, abs=1e-12)
    assert speed_at(s, 0.04) == 10.0  # nearest sample only on one side
    with pytest.raises(TelemetryLookupError):
        speed_at(s, 1.2)
    with pytest.raises(TelemetryLookupError):
        speed_at(series([], []), 0.0)


# -- labelling ---------------------------------------------------------------


def test_threshold_examples():
    s = series([0, 1000, 2000, 3000], [10.0, 9.4, 10.0, 9.6])
    got = label_brakes(s, [1.0, 3.0]).labels
    assert [l.brake for l in got] == [True, False]
    b = label_brakes(series([0, 1000], [10.0, 9.5]), [1.0]).labels
    assert b[0].brake is False  # equal to the threshold is not braking


def test_threshold_is_a_rate():
    # the default boundary is a deceleration of 0.5 m/s^2
    cfg = BrakeLabelConfig(delta_v=0.5, interval=1.0)
    assert cfg.delta_v / cfg.interval == 0.5
    assert not label_brakes(series([0, 1000], [3.0, 2.5]), [1.0], cfg).labels[0].brake
    assert label_brakes(series([0, 1000], [3.0, 2.49]), [1.0], cfg).labels[0].brake


def test_config_errors():
    for kw in ({"delta_v": 0}, {"interval": -1}, {"match_tolerance": -0.1}):
        with pytest.raises(ArgumentError):
            BrakeLabelConfig(**kw)


def test_labels_match_brute_force_oracle():
    rng = np.random.default_rng(7)
    n_labels = n_skipped = n_brake = 0
    for _ in range(1000):
        s = random_series(rng)
        frames = frame_times_at(s, fps=3.0)
        res = label_brakes(s, frames)
        want, want_skip = oracle_labels(list(s.timestamps_ms), list(s.speeds), frames)
        assert [(l.frame_time, l.brake) for l in res.labels] == want
        assert [f.frame_time for f in res.skipped] == want_skip
        n_labels += len(want)
        n_skipped += len(want_skip)
        n_brake += sum(b for _, b in want)
    # the random series should exercise every branch
    assert n_labels > 1000 and n_skipped > 100 and 0 < n_brake < n_labels


def test_every_dropped_frame_is_listed_with_reason():
    s = series([0, 1000, 5000, 6000], [5.0, 4.0, 3.0, 2.0])
    frames = [1.0, 2.0, 3.0, 6.0]
    res = label_brakes(s, frames)
    kept = {l.frame_time for l in res.labels}
    dropped = {f.frame_time for f in res.skipped}
    assert kept | dropped == set(frames) and not kept & dropped
    assert dropped == {2.0, 3.0}
    assert all(f.reason for f in res.skipped)


def test_frame_times_at():
    s = series([0, 2000], [1.0, 1.0])
    assert frame_times_at(s, 3.0) == pytest.approx([i / 3 for i in range(7)])
    assert frame_times_at(series([], []), 3.0) == []


# -- maps -------------------------------------------------------------------------


def test_normalize_examples():
    np.testing.assert_array_equal(normalize_map([1, 1, 1, 1]), [0.25] * 4)
    np.testing.assert_array_equal(normalize_map([0, 2], "standardize"), [-1, 1])
    np.testing.assert_array_equal(normalize_map([1, 4], "max_to_one"), [0.25, 1])
    with pytest.raises(DegenerateInputError):
        normalize_map(np.zeros(4))
    with pytest.raises(DegenerateInputError):
        normalize_map(np.ones(4), "standardize")
    with pytest.raises(ArgumentError):
        normalize_map([1.0], "softmax")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 12), st.integers(1, 12))
def test_pgm_round_trip_is_lossless(tmp_path_factory, seed, h, w):
    m = np.random.default_rng(seed).integers(0, 256, (h, w, 1)) / 255.0
    p = tmp_path_factory.mktemp("pgm") / "m.pgm"
    write_gray_map(m, p)
    np.testing.assert_array_equal(load_gray_map(p), m)


def test_all_white_and_binarize(tmp_path):
    p = tmp_path / "w.pgm"
    write_gray_map(np.ones((3, 4)), p)
    assert np.all(load_gray_map(p) == 1.0)
    q = tmp_path / "f.pgm"
    write_gray_map(np.array([[0.0, 1 / 255, 0.5, 0.0]]).reshape(1, 4, 1), q)
    assert load_gray_map(q, binarize=True).ravel().tolist() == [0, 1, 1, 0]


def test_pgm_header_with_comment(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# made by hand\n2 1\n255\n\x00\xff")
    assert load_gray_map(p).ravel().tolist() == [0.0, 1.0]


def test_map_format_errors(tmp_path):
    rgb = tmp_path / "c.ppm"
    write_rgb_image(np.zeros((2, 2, 3)), rgb)
    with pytest.raises(FormatError):
        load_gray_map(rgb)
    deep = tmp_path / "d.pgm"
    deep.write_bytes(b"P5\n1 1\n65535\n\x00\x00")
    with pytest.raises(FormatError):
        load_gray_map(deep)
    short = tmp_path / "s.pgm"
    short.write_bytes(b"P5\n4 4\n255\n\x00")
    with pytest.raises(FormatError):
        load_gray_map(short)
    ascii_ = tmp_path / "a.pgm"
    ascii_.write_bytes(b"P2\n1 1\n255\n0\n")
    with pytest.raises(FormatError):
        load_gray_map(ascii_)
    with pytest.raises(ArgumentError):
        write_gray_map(np.full((2, 2), 1.5), tmp_path / "x.pgm")


def test_rgb_round_trip(tmp_path, rng):
    img = rng.integers(0, 256, (5, 6, 3)) / 255.0
    write_rgb_image(img, tmp_path / "i.ppm")
    np.testing.assert_array_equal(load_rgb_image(tmp_path / "i.ppm"), img)


def test_png_round_trip(tmp_path, rng):
    Image = pytest.importorskip("PIL.Image")
    px = rng.integers(0, 256, (4, 5), dtype=np.uint8)
    Image.fromarray(px, "L").save(tmp_path / "m.png")
    np.testing.assert_array_equal(load_gray_map(tmp_path / "m.png")[:, :, 0], px / 255.0)
    Image.fromarray(np.zeros((2, 2, 3), np.uint8), "RGB").save(tmp_path / "rgb.png")
    with pytest.raises(FormatError):
        load_gray_map(tmp_path / "rgb.png")


# -- manifests ------------------------------------------------------------------


def _manifest():
    return Manifest([
        ManifestEntry("a", ["f0.ppm", "f1.ppm"], "s.pgm", "x.pgm", True, 0.333),
        ManifestEntry("b", ["f2.ppm"], "s2.pgm"),
    ])


def test_manifest_round_trip(tmp_path):
    m = _manifest()
    write_manifest(m, tmp_path / "m.jsonl")
    back = read_manifest(tmp_path / "m.jsonl", check_files=False)
    assert back == m
    assert back.root == tmp_path
    write_manifest(back, tmp_path / "m2.jsonl")
    assert filecmp.cmp(tmp_path / "m.jsonl", tmp_path / "m2.jsonl", shallow=False)
    assert not back.has_fixations and not back.has_labels


def test_manifest_errors(tmp_path):
    p = tmp_path / "m.jsonl"
    cases = [
        '{"sequence_id": "a", "frame_paths": ["f"], "saliency_map_path": "s", "extra": 1}',
        '{"sequence_id": "a", "frame_paths": [], "saliency_map_path": "s"}',
        '{"sequence_id": "a", "frame_paths": ["f"]}',
        "{not json",
    ]
    for line in cases:
        p.write_text(line + "\n")
        with pytest.raises(FormatError, match=":1:"):
            read_manifest(p, check_files=False)
    p.write_text(json.dumps({"sequence_id": "a", "frame_paths": ["f.ppm"], "saliency_map_path": "s.pgm"}) + "\n")
    with pytest.raises(FormatError, match="f.ppm"):
        read_manifest(p)


# -- synthetic data ---------------------------------------------------------


def test_synthetic_is_deterministic(tmp_path):
    cfg = SynthConfig(n_train=4, n_val=2, n_test=3)
    gen_synthetic(tmp_path / "a", cfg, seed=3)
    gen_synthetic(tmp_path / "b", cfg, seed=3)
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert len(files) == 3 + 9 * 5  # manifests, then 4 frames + saliency per sample
    for rel in files:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
    gen_synthetic(tmp_path / "c", cfg, seed=4)
    assert (tmp_path / "a/train/train_00000_f0.ppm").read_bytes() != (tmp_path / "c/train/train_00000_f0.ppm").read_bytes()


def test_synthetic_maps_and_manifest(tmp_path):
    ms = gen_synthetic(tmp_path, SynthConfig(n_train=5, n_test=0, static=True), seed=0)
    assert list(ms) == ["train"]
    m = read_manifest(tmp_path / "train.jsonl")
    assert m.has_fixations and m.has_labels
    for e in m:
        assert len(e.frame_paths) == 1
        sal = load_gray_map(m.resolve(e.saliency_map_path))
        assert sal.shape == (48, 64, 1)
        assert normalize_map(sal).sum() == pytest.approx(1.0)
        assert load_gray_map(m.resolve(e.fixation_map_path), binarize=True).sum() >= 1


def test_synthetic_label_balance(tmp_path):
    ms = gen_synthetic(tmp_path, SynthConfig(n_train=200, n_test=0, seq_len=2), seed=0)
    frac = np.mean([e.brake_label for e in ms["train"]])
    assert 0.3 <= frac <= 0.7
