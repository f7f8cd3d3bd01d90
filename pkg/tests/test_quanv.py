import numpy as np
import pytest

from quanvbench import qsim, quanv
from quanvbench.ansatz import AnsatzKind, build_ansatz
from quanvbench.quanv import QuanvConfig, encode_patch, input_gradient, quanvolve_dataset, quanvolve_image


def identity_cfg(k=2, s=2):
    return QuanvConfig(circuit=qsim.Circuit(k * k), kernel_size=k, stride=s)


def ansatz_cfg(kind, seed=31):
    return QuanvConfig(circuit=build_ansatz(kind, 4, seed=seed))


# ---------------------------------------------------------------------------
# encode_patch
# ---------------------------------------------------------------------------

def test_encode_all_zeros():
    s = encode_patch([0, 0, 0, 0])
    assert np.allclose(s.amps, qsim.zero_state(4).amps, atol=1e-12)
    assert all(qsim.expect_z(s, q) == pytest.approx(1.0) for q in range(4))


def test_encode_all_ones():
    s = encode_patch([1, 1, 1, 1])
    expected = np.zeros(16, dtype=complex)
    expected[15] = 1.0  # |1111>
    assert np.allclose(s.amps, expected, atol=1e-12)
    assert all(qsim.expect_z(s, q) == pytest.approx(-1.0) for q in range(4))


def test_encode_half_pixel():
    s = encode_patch([0.5, 0, 0, 0])
    assert abs(qsim.expect_z(s, 0)) < 1e-10
    for q in (1, 2, 3):
        assert qsim.expect_z(s, q) == pytest.approx(1.0, abs=1e-10)


def test_encode_matches_gate_application(rng):
    patch = rng.uniform(0, 1, 4)
    s = encode_patch(patch)
    via_gates = qsim.zero_state(4)
    for q, x in enumerate(patch):
        via_gates = qsim.apply_gate(via_gates, qsim.ry(q, np.pi * x))
    assert np.allclose(s.amps, via_gates.amps, atol=1e-12)


def test_encode_rejects_out_of_range():
    with pytest.raises(ValueError):
        encode_patch([0.2, 1.1, 0.0, 0.0])
    with pytest.raises(ValueError):
        encode_patch([-0.01, 0, 0, 0])


def test_encode_unchecked_accepts_out_of_range():
    s = encode_patch([2.0, 0, 0, 0], validate=False)
    assert abs(s.norm() - 1.0) < 1e-12


# ---------------------------------------------------------------------------
# quanvolve_image
# ---------------------------------------------------------------------------

def test_shape_28x28_to_14x14x4(rng):
    img = rng.uniform(0, 1, (28, 28, 1))
    out = quanvolve_image(img, identity_cfg())
    assert out.shape == (14, 14, 4)


def test_all_zero_image_identity_circuit_gives_ones():
    out = quanvolve_image(np.zeros((6, 6, 1)), identity_cfg())
    assert np.allclose(out, 1.0, atol=1e-12)


def test_single_patch_matches_manual_composition(rng):
    img = rng.uniform(0, 1, (2, 2, 1))
    cfg = ansatz_cfg(AnsatzKind.ZZ_FULL)
    out = quanvolve_image(img, cfg)
    state = qsim.apply_circuit(encode_patch(img.reshape(-1)), cfg.circuit)
    manual = [qsim.expect_z(state, q) for q in range(4)]
    assert np.allclose(out[0, 0], manual, atol=1e-12)


def test_rejects_multichannel_input(rng):
    with pytest.raises(ValueError):
        quanvolve_image(rng.uniform(0, 1, (6, 6, 2)), identity_cfg())


@pytest.mark.parametrize(
    "h,w,k,s,expected",
    [
        (28, 28, 2, 2, (14, 14, 4)),
        (7, 7, 2, 2, (3, 3, 4)),
        (6, 8, 2, 1, (5, 7, 4)),
        (9, 9, 3, 3, (3, 3, 9)),
        (10, 7, 3, 2, (4, 3, 9)),
    ],
)
def test_shape_law(h, w, k, s, expected, rng):
    cfg = QuanvConfig(circuit=qsim.Circuit(k * k), kernel_size=k, stride=s)
    out = quanvolve_image(rng.uniform(0, 1, (h, w, 1)), cfg)
    assert out.shape == expected


def test_feature_values_in_unit_interval(rng):
    cfg = ansatz_cfg(AnsatzKind.RANDOM)
    out = quanvolve_image(rng.uniform(0, 1, (8, 8, 1)), cfg)
    assert np.all(out >= -1 - 1e-12) and np.all(out <= 1 + 1e-12)


def test_locality_one_pixel_touches_one_output_cell(rng):
    cfg = ansatz_cfg(AnsatzKind.ZZ_STAR)
    img = rng.uniform(0.1, 0.9, (8, 8, 1))
    base = quanvolve_image(img, cfg)
    bumped = img.copy()
    bumped[3, 5, 0] += 0.05
    delta = np.abs(quanvolve_image(bumped, cfg) - base).sum(axis=2)
    assert np.count_nonzero(delta > 1e-12) == 1
    assert delta[1, 2] > 0  # patch row 3//2, col 5//2


def test_config_validation():
    with pytest.raises(ValueError):
        QuanvConfig(circuit=qsim.Circuit(4), kernel_size=3)  # 9 != 4
    with pytest.raises(ValueError):
        QuanvConfig(circuit=qsim.Circuit(4), kernel_size=2, stride=0)


# ---------------------------------------------------------------------------
# quanvolve_dataset
# ---------------------------------------------------------------------------

def test_dataset_empty():
    out = quanvolve_dataset(np.zeros((0, 6, 6, 1)), identity_cfg())
    assert len(out) == 0


def test_dataset_order_preserved(rng):
    imgs = rng.uniform(0, 1, (5, 6, 6, 1))
    cfg = ansatz_cfg(AnsatzKind.ZZ_LINEAR)
    batch = quanvolve_dataset(imgs, cfg)
    assert batch.shape == (5, 3, 3, 4)
    for i, img in enumerate(imgs):
        assert np.array_equal(batch[i], quanvolve_image(img, cfg))


# ---------------------------------------------------------------------------
# input_gradient
# ---------------------------------------------------------------------------

def test_gradient_identity_circuit_closed_form():
    # Identity circuit: feature = cos(pi x), so d/dx = -pi sin(pi x).
    cfg = identity_cfg()
    img = np.full((2, 2, 1), 0.5)
    upstream = np.zeros((1, 1, 4))
    upstream[0, 0, 0] = 1.0  # channel 0 reads pixel (0, 0)
    grad = input_gradient(img, cfg, upstream)
    assert grad[0, 0, 0] == pytest.approx(-np.pi, abs=1e-10)
    assert np.allclose(grad.reshape(-1)[1:], 0.0, atol=1e-12)


def test_gradient_zero_upstream():
    cfg = ansatz_cfg(AnsatzKind.ZZ_FULL)
    grad = input_gradient(np.full((4, 4, 1), 0.3), cfg, np.zeros((2, 2, 4)))
    assert np.array_equal(grad, np.zeros((4, 4, 1)))


def test_gradient_upstream_shape_checked(rng):
    with pytest.raises(ValueError):
        input_gradient(rng.uniform(0, 1, (4, 4, 1)), identity_cfg(), np.zeros((3, 3, 4)))


def finite_difference_gradient(img, cfg, upstream, h=1e-5):
    grad = np.zeros_like(img)
    for idx in np.ndindex(img.shape):
        plus, minus = img.copy(), img.copy()
        plus[idx] += h
        minus[idx] -= h
        f_plus = np.sum(upstream * quanvolve_image(plus, cfg, validate=False))
        f_minus = np.sum(upstream * quanvolve_image(minus, cfg, validate=False))
        grad[idx] = (f_plus - f_minus) / (2 * h)
    return grad


def test_rescale_unit_maps_features_and_gradient(rng):
    circuit = build_ansatz(AnsatzKind.ZZ_LINEAR, 4, seed=44)
    raw_cfg = QuanvConfig(circuit=circuit)
    unit_cfg = QuanvConfig(circuit=circuit, rescale_unit=True)
    img = rng.uniform(0, 1, (4, 4, 1))
    raw = quanvolve_image(img, raw_cfg)
    unit = quanvolve_image(img, unit_cfg)
    assert np.allclose(unit, (raw + 1) / 2, atol=1e-14)
    assert np.all(unit >= 0) and np.all(unit <= 1)

    upstream = rng.normal(size=(2, 2, 4))
    exact = input_gradient(img, unit_cfg, upstream)
    fd = finite_difference_gradient_cfg(img, unit_cfg, upstream)
    assert np.allclose(exact, fd, atol=1e-7)


def finite_difference_gradient_cfg(img, cfg, upstream, h=1e-5):
    grad = np.zeros_like(img)
    for idx in np.ndindex(img.shape):
        plus, minus = img.copy(), img.copy()
        plus[idx] += h
        minus[idx] -= h
        f_plus = np.sum(upstream * quanvolve_image(plus, cfg, validate=False))
        f_minus = np.sum(upstream * quanvolve_image(minus, cfg, validate=False))
        grad[idx] = (f_plus - f_minus) / (2 * h)
    return grad


@pytest.mark.parametrize("kind", list(AnsatzKind))
def test_gradient_matches_finite_differences_all_ansatz_kinds(kind, rng):
    cfg = ansatz_cfg(kind, seed=97)
    img = rng.uniform(0.05, 0.95, (6, 6, 1))
    upstream = rng.normal(size=(3, 3, 4))
    exact = input_gradient(img, cfg, upstream)
    fd = finite_difference_gradient(img, cfg, upstream)
    coords = [np.unravel_index(i, img.shape) for i in rng.choice(36, 20, replace=False)]
    for idx in coords:
        assert abs(exact[idx] - fd[idx]) <= 1e-5 * max(1.0, abs(fd[idx]))


# ---------------------------------------------------------------------------
# QNVF container
# ---------------------------------------------------------------------------

def test_qnvf_round_trip(tmp_path, rng):
    maps = rng.uniform(-1, 1, (3, 4, 5, 4)).astype(np.float32)
    path = tmp_path / "maps.qnvf"
    quanv.write_qnvf(path, maps, meta_hash=0xDEADBEEF)
    loaded, meta = quanv.read_qnvf(path)
    assert meta == 0xDEADBEEF
    assert np.array_equal(loaded, maps)


def test_qnvf_write_is_deterministic(tmp_path, rng):
    maps = rng.uniform(-1, 1, (2, 3, 3, 4))
    p1, p2 = tmp_path / "a.qnvf", tmp_path / "b.qnvf"
    quanv.write_qnvf(p1, maps, meta_hash=7)
    quanv.write_qnvf(p2, maps, meta_hash=7)
    assert p1.read_bytes() == p2.read_bytes()


def test_qnvf_rejects_corruption(tmp_path, rng):
    maps = rng.uniform(-1, 1, (2, 3, 3, 4))
    path = tmp_path / "c.qnvf"
    quanv.write_qnvf(path, maps)
    raw = path.read_bytes()

    bad_magic = tmp_path / "bad_magic.qnvf"
    bad_magic.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError, match="magic"):
        quanv.read_qnvf(bad_magic)

    truncated = tmp_path / "trunc.qnvf"
    truncated.write_bytes(raw[:-5])
    with pytest.raises(ValueError):
        quanv.read_qnvf(truncated)
