import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from nvtomo import encoder, recon
from nvtomo.encoder import ProjectionGrid, SignalArray
from nvtomo.phantom import DensityGrid, GridSpec, Molecule, voxelize
from nvtomo.physics import GradientSetting
from nvtomo.recon import FilterSpec, ImageArray

from conftest import OPERATING_DELTA_F, OPERATING_GRADIENT, random_molecule

NV = (0.0, 0.0, -5.0)
Z = (0.0, 0.0, 1.0)


def column_signal(values, dr=0.1):
    v = np.asarray(values, float)
    if v.ndim == 1:
        v = v[:, None, None]
    n_r, nt, npf = v.shape
    return SignalArray(-(n_r // 2) * dr, dr, np.arange(nt) * math.pi / nt, np.arange(npf) * math.pi / npf,
                       v, OPERATING_DELTA_F, OPERATING_GRADIENT)


def encode(m, n_theta=9, n_phi=9, axis=Z):
    return encoder.encode_all(m, ProjectionGrid(n_theta, n_phi), OPERATING_GRADIENT, OPERATING_DELTA_F, NV, axis)


# --- filter -------------------------------------------------------------------------------

@pytest.mark.parametrize("window", ["rectangular", "cosine_rolloff"])
def test_filter_constant_column_is_zero(window):
    out = recon.quadratic_filter(column_signal(np.full((25, 3, 2), 3.7e-8)), FilterSpec(window=window))
    assert np.all(out.values == 0.0)


def test_filter_none_is_identity():
    sig = column_signal(np.random.default_rng(0).random((21, 2, 2)))
    out = recon.quadratic_filter(sig, FilterSpec(kind="none"))
    np.testing.assert_array_equal(out.values, sig.values)


def test_filter_cosine_eigenfunction():
    n, dr = 128, 0.1
    sig = column_signal(np.zeros(n), dr)
    r = sig.r_values
    core = slice(n // 4, 3 * n // 4)

    def gain(k):
        col = np.cos(k * r)
        out = recon.quadratic_filter(sig.with_values(col[:, None, None])).values[:, 0, 0]
        return (out[core] @ col[core]) / (col[core] @ col[core])

    k_nyq = math.pi / dr
    for k1, k2 in [(0.1 * k_nyq, 0.3 * k_nyq), (0.05 * k_nyq, 0.5 * k_nyq)]:
        assert gain(k1) / gain(k2) == pytest.approx((k1 / k2) ** 2, rel=0.02)


def test_filter_response_shape():
    resp = recon.filter_response(64, 0.1, FilterSpec(cutoff_fraction=0.5, window="rectangular"))
    k = 2 * np.pi * np.fft.rfftfreq(64, 0.1)
    assert resp[0] == 0
    below = (k > 0) & (k <= 0.5 * np.pi / 0.1)
    np.testing.assert_allclose(resp[below], k[below] ** 2)
    assert np.all(resp[k > 0.5 * np.pi / 0.1] == 0)


def test_filter_rejects_short_columns_and_bad_specs():
    with pytest.raises(ValueError):
        recon.quadratic_filter(column_signal(np.ones(3)))
    for kwargs in ({"kind": "hann"}, {"window": "gauss"}, {"cutoff_fraction": 0.0}, {"cutoff_fraction": 1.5}):
        with pytest.raises(ValueError):
            FilterSpec(**kwargs)


# --- rotations -----------------------------------------------------------------------------

def test_rotation_identity():
    np.testing.assert_array_equal(recon.rotation_for(0.0, 0.0).matrix, np.eye(4))


def test_printed_matrix_quarter_turn():
    # the first factor rotates the xy-plane by -a; its entries at a = pi/2
    m = recon.zy_rotation(math.pi / 2, 0.0)
    np.testing.assert_allclose(m[:2, :2], [[0, 1], [-1, 0]], atol=1e-15)
    np.testing.assert_allclose(m[:3, :3] @ [1, 0, 0], [0, -1, 0], atol=1e-15)
    np.testing.assert_allclose(recon.rotation_for(math.pi / 2, 0.0).linear @ [0, 0, 1], [1, 0, 0], atol=1e-15)


@given(st.floats(0, math.pi), st.floats(0, 2 * math.pi))
def test_rotation_orthonormal_and_maps_z_to_u(theta, phi):
    op = recon.rotation_for(theta, phi)
    R = op.linear
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
    assert abs(np.linalg.det(R) - 1) < 1e-12
    np.testing.assert_allclose(R @ [0, 0, 1], GradientSetting(theta, phi, 1).direction, atol=1e-12)
    np.testing.assert_array_equal(op.matrix[3], [0, 0, 0, 1])


# --- back-projection -----------------------------------------------------------------------

@pytest.mark.parametrize("mode", recon.MODES)
def test_zero_signal_zero_image(mode):
    img = recon.backproject(column_signal(np.zeros((21, 3, 3))), 24, mode)
    assert np.all(img.values == 0)
    assert img.mode == mode
    assert img.spec == GridSpec.centered(24, 0.1)


def test_image_too_small_for_r_axis():
    with pytest.raises(ValueError):
        recon.backproject(column_signal(np.zeros((41, 2, 2))), 32)
    with pytest.raises(ValueError):
        recon.backproject(column_signal(np.zeros((21, 2, 2))), 32, mode="fourier")


@pytest.mark.parametrize("mode", recon.MODES)
@pytest.mark.parametrize("interpolation", ["linear", "nearest"])
def test_backprojection_linear(mode, interpolation):
    rng = np.random.default_rng(5)
    s1 = column_signal(rng.normal(size=(21, 4, 3)))
    s2 = s1.with_values(rng.normal(size=(21, 4, 3)))
    a, b = 1.7, -0.4
    lhs = recon.backproject(s1.with_values(a * s1.values + b * s2.values), 24, mode, interpolation).values
    rhs = (a * recon.backproject(s1, 24, mode, interpolation).values
           + b * recon.backproject(s2, 24, mode, interpolation).values)
    assert np.max(np.abs(lhs - rhs)) <= 1e-9 * np.max(np.abs(rhs))


def test_gather_invariant_under_projection_reordering():
    rng = np.random.default_rng(8)
    sig = column_signal(rng.normal(size=(21, 5, 4)))
    pt, pp = rng.permutation(5), rng.permutation(4)
    shuffled = SignalArray(sig.r0, sig.dr, sig.thetas[pt], sig.phis[pp], sig.values[:, pt][:, :, pp],
                           sig.delta_f, sig.gradient)
    np.testing.assert_array_equal(recon.backproject(shuffled, 24).values, recon.backproject(sig, 24).values)


@pytest.mark.parametrize("mode, tol", [("gather", 1.0), ("paper", 2.0)])
def test_impulse_response(mode, tol):
    p = np.array([0.31, -0.22, 0.47])
    sig = encode(Molecule.from_arrays("H", [p]))
    img = recon.backproject(recon.quadratic_filter(sig), 64, mode)
    peak = img.spec.coordinates()[np.unravel_index(np.argmax(img.values), img.values.shape)]
    assert np.linalg.norm(peak - p) <= tol * img.spec.voxel_size


def test_rotation_symmetry():
    # a 20 degree turn about z maps the orientation set onto itself (up to u -> -u)
    rng = np.random.default_rng(21)
    pts = rng.uniform(-0.6, 0.6, (12, 3))
    pts[:, 2] = np.abs(pts[:, 2]) + 0.1
    a = math.radians(20)
    Rz = np.array([[math.cos(a), -math.sin(a), 0], [math.sin(a), math.cos(a), 0], [0, 0, 1]])
    n = 48
    filt = recon.quadratic_filter(encode(Molecule.from_arrays("H", pts)))
    img_rot = recon.backproject(recon.quadratic_filter(encode(Molecule.from_arrays("H", pts @ Rz.T))), n)

    # the unrotated reconstruction sampled at R^T x for every voxel centre x
    centres = img_rot.spec.coordinates().reshape(-1, 3)
    turned = recon.sample_backprojection(filt, centres @ Rz).reshape(n, n, n)
    assert recon.correlation(ImageArray(img_rot.spec, turned), img_rot) >= 0.95

    # resampling the voxel image instead loses detail at the one-voxel scale
    img = recon.backproject(filt, n)
    c = n // 2
    idx = np.indices((n, n, n)).reshape(3, -1).astype(float) - c
    src = Rz.T @ np.stack([idx[2], idx[1], idx[0]])
    coords = np.stack([src[2], src[1], src[0]]) + c
    resampled = ndimage.map_coordinates(img.values, coords, order=1).reshape(n, n, n)
    assert recon.correlation(ImageArray(img.spec, resampled), img_rot) >= 0.85


def test_sample_backprojection_matches_voxels():
    sig = recon.quadratic_filter(encode(Molecule.from_arrays("H", [[0.1, 0.2, 0.3]]), 4, 4))
    img = recon.backproject(sig, 32)
    pts = img.spec.coordinates().reshape(-1, 3)
    np.testing.assert_array_equal(recon.sample_backprojection(sig, pts).reshape(img.values.shape), img.values)


# --- PSF hook -------------------------------------------------------------------------------------

def test_psf_identity_and_unknown_mode():
    img = ImageArray(GridSpec.centered(4, 0.1), np.random.default_rng(0).random((4, 4, 4)))
    out = recon.psf_rescale(img, "identity")
    np.testing.assert_array_equal(out.values, img.values)
    with pytest.raises(ValueError, match="not implemented"):
        recon.psf_rescale(img, "richardson_lucy")


# --- metrics ------------------------------------------------------------------------------------

def test_correlation_examples():
    rng = np.random.default_rng(4)
    spec = GridSpec.centered(64, 0.1)
    truth = DensityGrid(spec, rng.random((64, 64, 64)))
    assert recon.correlation(truth, truth) == pytest.approx(1.0, abs=1e-12)
    neg = DensityGrid(spec, -(truth.values - truth.values.mean()))
    assert recon.correlation(neg, truth) == pytest.approx(-1.0, abs=1e-12)
    perm = DensityGrid(spec, rng.permutation(truth.values.ravel()).reshape(truth.values.shape))
    assert abs(recon.correlation(perm, truth)) < 0.1
    with pytest.raises(ValueError):
        recon.correlation(DensityGrid(spec, np.zeros((64, 64, 64))), truth)


def test_correlation_resamples_truth():
    fine = GridSpec.centered(16, 0.05)
    coarse = GridSpec(8, 0.1, fine.origin)
    m = Molecule.from_arrays("H", [[0.0, 0.0, 0.0]])
    # coarse voxel centres coincide with every other fine voxel centre
    truth = voxelize(m, fine)
    img = DensityGrid(coarse, recon.resample(truth, coarse))
    assert img.values.sum() == pytest.approx(1.0)
    assert recon.correlation(img, truth) == pytest.approx(1.0)


def test_contrast_uniform_and_torus():
    spec = GridSpec.centered(32, 0.1)
    assert recon.toroid_contrast(DensityGrid(spec, np.ones((32, 32, 32)))) == pytest.approx(1.0)
    pts = spec.coordinates()
    rho = np.hypot(pts[..., 0], pts[..., 1])
    torus = np.where((rho > 0.45) & (rho < 0.75), 1.0, 1e-3)
    assert recon.toroid_contrast(DensityGrid(spec, torus)) > 100
    with pytest.raises(ValueError):
        recon.toroid_contrast(DensityGrid(spec, torus), annulus=(5.0, 6.0))


def test_contrast_clips_negative_voxels():
    spec = GridSpec.centered(32, 0.1)
    pts = spec.coordinates()
    rho = np.hypot(pts[..., 0], pts[..., 1])
    img = np.where(rho <= 0.3, -5.0, 1.0)
    assert recon.toroid_contrast(DensityGrid(spec, img)) == math.inf
