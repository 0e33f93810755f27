import numpy as np
import pytest

from mvac.errors import BadParameter, CorrespondenceFailure, EmptyInterface
from mvac.grid import Grid
from mvac.interface import (InterfaceCurve, angular_mode_amplitude, curvature_of, default_offset,
                            displacement_velocity, extract_interface, fit_motion_law, majority_filter,
                            measure_velocity, phase_jump, predict_velocity, sign_field_interfaces,
                            total_area)
from mvac.mbo import effective_epsilon

from conftest import strip_field


def circle_sign(N, R, centre=(0.0, 0.0)):
    x1, x2 = Grid(N).coords
    return np.where(np.hypot(x1 - centre[0], x2 - centre[1]) < R, 1.0, -1.0)


def circle_level(N, R):
    x1, x2 = Grid(N).coords
    return R - np.hypot(x1, x2)


def polar_curve(r, M=1000):
    th = np.linspace(0, 2 * np.pi, M, endpoint=False)
    rr = r(th)
    return InterfaceCurve(np.column_stack([rr * np.cos(th), rr * np.sin(th)]))


# -- extraction -----------------------------------------------------------------

def test_disk_length_and_orientation():
    N = 256
    curves = extract_interface(circle_sign(N, 0.25))
    assert len(curves) == 1
    c = curves[0]
    assert c.length == pytest.approx(2 * np.pi * 0.25, rel=0.02)
    assert c.area() > 0                                  # counterclockwise around det+
    assert c.total_turning() == pytest.approx(2 * np.pi, abs=1e-9)
    assert np.all(np.diff(c.arclength) > 0)
    # outward normal points away from the centre
    assert np.all(np.sum(c.normal * c.vertices, axis=1) > 0)


def test_reflection_disk_reverses_orientation():
    c = extract_interface(-circle_sign(128, 0.25))[0]
    assert c.area() < 0
    assert c.total_turning() == pytest.approx(-2 * np.pi, abs=1e-9)


def test_strip_gives_two_straight_lines():
    A = strip_field(256, lambda x1, x2: 2 * np.pi * x1, lambda x1, x2: 2 * np.pi * x1)
    curves = sign_field_interfaces(A)
    assert len(curves) == 2
    for c in curves:
        assert c.winds and c.length == pytest.approx(1.0, abs=1e-12)
        assert np.max(np.abs(c.curvature)) <= 1e-3
        assert c.total_turning() == pytest.approx(0.0, abs=1e-9)
        assert np.isnan(c.area())
    pos = sorted(c.mean_position() for c in curves)
    assert pos == pytest.approx([-0.25, 0.25], abs=1 / 256)


def test_empty_interface():
    with pytest.raises(EmptyInterface):
        extract_interface(np.ones((16, 16)))
    assert sign_field_interfaces(np.broadcast_to(np.eye(2), (16, 16, 2, 2))) == []
    with pytest.raises(BadParameter):
        extract_interface(np.ones((4, 5)))


def test_majority_filter_removes_single_cells():
    s = -np.ones((16, 16))
    s[4, 4] = 1.0
    s[8:12, 8:12] = 1.0
    f = majority_filter(s)
    assert f[4, 4] == -1 and np.all(f[9:11, 9:11] == 1)
    assert len(extract_interface(s, denoise=True)) == 1
    assert len(extract_interface(s, smoothing=None)) == 2
    # the default presmoothing already drowns an isolated cell
    assert len(extract_interface(s)) == 1


def test_saddle_resolved_by_average_corner():
    f = np.array([[1.0, -1.0], [-1.0, 1.0]]) * np.array([[3.0, 1.0], [1.0, 3.0]])
    f = np.tile(f, (4, 4))
    curves = extract_interface(f, smoothing=None)
    for c in curves:
        assert np.all(np.diff(c.arclength) > 0)
    assert sum(abs(c.total_turning()) for c in curves) > 0


# -- curvature ------------------------------------------------------------------------

def test_circle_curvature():
    c = extract_interface(circle_level(256, 0.25))[0]
    assert np.allclose(c.curvature, 4.0, rtol=0.05)
    c = extract_interface(circle_sign(256, 0.25))[0]
    assert np.mean(c.curvature) == pytest.approx(4.0, rel=0.05)


def test_straight_line_curvature():
    x1, x2 = Grid(64).coords
    c = extract_interface(np.sin(2 * np.pi * (x2 + 0.1)))[0]
    assert np.max(np.abs(c.curvature)) <= 1e-3
    with pytest.raises(BadParameter):
        curvature_of(InterfaceCurve(np.zeros((4, 2))))


def test_polar_curvature_oracle():
    a, b, m = 0.15, 0.03, 12
    c = polar_curve(lambda t: a + b * np.sin(m * t), 1000)
    th = np.pi / 24
    r, r1, r2 = a + b * np.sin(m * th), b * m * np.cos(m * th), -b * m * m * np.sin(m * th)
    kappa = (r * r + 2 * r1 * r1 - r * r2) / (r * r + r1 * r1) ** 1.5
    k = np.interp(th, np.linspace(0, 2 * np.pi, 1000, endpoint=False), c.curvature)
    assert k == pytest.approx(kappa, rel=0.05)


# -- phases and motion laws ---------------------------------------------------------

@pytest.mark.parametrize("inner,expected", [(2, 0.0), (4, -12 * np.pi ** 2), (8, -60 * np.pi ** 2)])
def test_phase_jump_on_strip(inner, expected):
    N = 256
    A = strip_field(N, lambda x1, x2: 2 * np.pi * x1, lambda x1, x2: inner * np.pi * x1)
    for c in sign_field_interfaces(A):
        j = phase_jump(A, c)
        assert np.allclose(j, expected, atol=1e-6 * max(1, abs(expected)))
        assert c.eta_plus is not None and len(c.eta_minus) == len(c)


def test_default_offset():
    assert default_offset(0.01) == pytest.approx(0.03)
    assert default_offset(0.01, 0.02) == pytest.approx(0.06)


def test_predict_velocity_laws():
    c = polar_curve(lambda t: 0.25 + 0 * t)
    assert np.allclose(predict_velocity(c), -4.0, rtol=1e-3)
    N = 256
    A = strip_field(N, lambda x1, x2: 2 * np.pi * x1, lambda x1, x2: 2 * np.pi * x1)
    line = sign_field_interfaces(A)[0]
    assert np.allclose(predict_velocity(line, np.zeros(len(line)), "slow", 0.02), 0, atol=1e-3)
    v5 = predict_velocity(line, np.full(len(line), -12 * np.pi ** 2), "slow", 0.02)
    v6 = predict_velocity(line, np.full(len(line), -60 * np.pi ** 2), "slow", 0.02)
    assert np.mean(v6) / np.mean(v5) == pytest.approx(5.0, rel=1e-3)
    assert np.all(v5 > 0)                                   # det+ side gains ground: outward motion
    with pytest.raises(BadParameter):
        predict_velocity(line, scale="slow")
    with pytest.raises(BadParameter):
        predict_velocity(line, scale="medium")


def test_predict_fast_on_extracted_disk():
    c = extract_interface(circle_sign(256, 0.25))[0]
    assert np.mean(predict_velocity(c)) == pytest.approx(-1 / 0.25, rel=0.05)


def test_measure_velocity_identical_and_circle():
    N = 512
    a = extract_interface(circle_level(N, 0.25))
    s = measure_velocity(a, a, 0.01)
    assert np.allclose(np.concatenate(s.velocity), 0, atol=1e-12)
    R0, dt = 0.25, 2e-3
    R1 = np.sqrt(R0 ** 2 - 2 * dt)
    b = extract_interface(circle_level(N, R1))
    s = measure_velocity(a, b, dt)
    # centred in time: the chord speed equals -1/R at the midpoint radius to first order
    assert s.mean_velocity() == pytest.approx(-1 / (0.5 * (R0 + R1)), rel=0.05)
    assert s.radius[0] == pytest.approx(R0, rel=1e-3)


def test_measure_velocity_translation_and_failures():
    N = 256
    h = 1 / N
    x1, x2 = Grid(N).coords
    d, dt = 0.013, 0.01
    a = extract_interface(np.sin(2 * np.pi * x2))
    b = extract_interface(np.sin(2 * np.pi * (x2 - d)))
    s = measure_velocity(a, b, dt)
    for c, v in zip(a, s.velocity):
        # the line moving in +x2 travels along the normal of one curve and against the other
        assert abs(abs(np.nanmean(v)) - d / dt) <= h / dt
    with pytest.raises(CorrespondenceFailure):
        measure_velocity(a, a[:1], dt)
    far = extract_interface(np.sin(2 * np.pi * (x2 - 0.1)))
    assert np.all(np.isnan(np.concatenate(measure_velocity(a, far, dt).velocity)))
    v = displacement_velocity(a, far, dt)
    assert sorted(np.abs(v)) == pytest.approx([0.1 / dt, 0.1 / dt], rel=1e-6)


def test_displacement_velocity_rejects_closed_curves():
    c = extract_interface(circle_level(64, 0.25))
    with pytest.raises(BadParameter):
        displacement_velocity(c, c, 0.1)


def test_total_area_and_mode_amplitude():
    N = 512
    a, b = 0.15, 0.03
    x1, x2 = Grid(N).coords
    th = np.arctan2(x2, x1)
    f = a + b * np.sin(12 * th) - np.hypot(x1, x2)
    c = extract_interface(f)[0]
    assert total_area([c]) == pytest.approx(np.pi * (a * a + b * b / 2), rel=0.01)
    assert angular_mode_amplitude(c, 12) == pytest.approx(b, rel=0.05)
    assert angular_mode_amplitude(c, 5) < 1e-3


def test_fit_motion_law_recovers_coefficients():
    rng = np.random.default_rng(0)
    kappa = rng.uniform(-5, 5, 200)
    jump = rng.uniform(-600, 0, 200)
    eps = 0.02
    v = -2.0 * kappa - 0.5 * eps * jump / (2 * np.sqrt(2) / 3)
    a, b, r2 = fit_motion_law(v, kappa, jump, eps)
    assert (a, b) == pytest.approx((2.0, 0.5)) and r2 == pytest.approx(1.0)


@pytest.mark.slow
def test_pde_strip_speed_follows_slow_law():
    # diffuse strip: the measured speed of the flat fronts matches -eps * jump / gamma
    from mvac.pde import PdeConfig, run_pde
    N, eps = 256, 0.02
    A0 = strip_field(N, lambda x1, x2: 2 * np.pi * x1, lambda x1, x2: 4 * np.pi * x1)
    cfg = PdeConfig(epsilon=eps, dt=0.05 * eps ** 2, t_end=0.004, allow_coarse_grid=True)
    settle = run_pde(A0, cfg, keep_snapshots=False).final
    later = run_pde(settle, PdeConfig(epsilon=eps, dt=0.05 * eps ** 2, t_end=0.004, allow_coarse_grid=True),
                    keep_snapshots=False).final
    a, b = sign_field_interfaces(settle), sign_field_interfaces(later)
    v = np.mean(displacement_velocity(a, b, 0.004))
    predicted = -eps * (-12 * np.pi ** 2) / (2 * np.sqrt(2) / 3)
    assert v == pytest.approx(predicted, rel=0.1)


def test_swapped_phases_reverse_mbo_motion():
    N, tau = 256, 1.5e-3
    from mvac.mbo import mbo_step
    from mvac.spectral import SpectralWorkspace
    ws = SpectralWorkspace(Grid(N))
    f6 = strip_field(N, lambda x1, x2: 2 * np.pi * x1, lambda x1, x2: 8 * np.pi * x1)
    f7 = strip_field(N, lambda x1, x2: 8 * np.pi * x1, lambda x1, x2: 2 * np.pi * x1)
    v = []
    for A in (f6, f7):
        B, _ = mbo_step(A, tau, ws)
        v.append(np.mean(displacement_velocity(sign_field_interfaces(A), sign_field_interfaces(B), tau)))
    assert v[0] > 0 and v[1] == pytest.approx(-v[0], rel=1e-9)
    assert effective_epsilon(tau) > 0
