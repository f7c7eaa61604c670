import numpy as np
import pytest

from twophase import green as gr
from twophase import waves as wv


@pytest.fixture(scope="module")
def grid96():
    return gr.FrequencyGrid(96, 24.0)


def test_envelope_values():
    d = wv.WaveEnvelope("D", 1.5, 1.5)
    assert wv.envelope_eval(d, 0.0, 0.0) == 1.0
    h = wv.WaveEnvelope("H", 2.0, 1.5, c=1.3)
    t = 7.0
    assert wv.envelope_eval(h, 1.3 * t, t) == pytest.approx((1 + t) ** -2.0)
    # D with a = N = 3/2 at r^2 = 1+t
    d2 = wv.WaveEnvelope("D", 1.5, 1.5)
    t = 3.0
    assert wv.envelope_eval(d2, np.sqrt(1 + t), t) == pytest.approx(
        (1 + t) ** -1.5 * 2.0 ** -1.5)


def test_envelope_h_maximized_on_front():
    h = wv.WaveEnvelope("H", 2.0, 1.5, c=1.1)
    t = 5.0
    r = np.linspace(0, 20, 2001)
    vals = wv.envelope_eval(h, r, t)
    assert abs(r[np.argmax(vals)] - 1.1 * t) < 0.02


def test_envelope_validation():
    with pytest.raises(ValueError):
        wv.WaveEnvelope("X", 1.0, 1.0)
    with pytest.raises(ValueError):
        wv.WaveEnvelope("H", 2.0, 1.5)  # H needs c > 0


def test_lp_norm_constant_field(grid96):
    f = gr.SpatialField(values=np.ones((96, 96, 96)), grid=grid96,
                        t=0.0, sigma=0.0, tag="one")
    assert wv.lp_norm(f, 2.0) == pytest.approx(48.0 ** 1.5)
    assert wv.lp_norm(f, np.inf) == 1.0
    with pytest.raises(ValueError):
        wv.lp_norm(f, 1.0)


def test_heat_kernel_norm_slopes(grid96):
    # L2 ~ t^{-3/4}, Linf ~ t^{-3/2} for the heat kernel
    ts = np.array([2.0, 3.0, 4.5, 6.5, 9.0])
    l2, li = [], []
    for t in ts:
        f = gr.synthesize_radial(grid96, lambda s: np.exp(-s * s * t), 0.0, t=t)
        l2.append(wv.lp_norm(f, 2.0))
        li.append(wv.lp_norm(f, np.inf))
    s2 = np.polyfit(np.log(ts), np.log(l2), 1)[0]
    si = np.polyfit(np.log(ts), np.log(li), 1)[0]
    assert s2 == pytest.approx(-0.75, abs=0.01)
    assert si == pytest.approx(-1.5, abs=0.01)


def test_heat_kernel_bound_ratio_known_constant(grid96, dp):
    # mollified heat kernel vs its own D envelope: known closed-form ratio
    t, sigma = 10.0, 0.5
    tau = t + sigma**2 / 2
    f = gr.synthesize_radial(grid96, lambda s: np.exp(-s * s * t), sigma, t=t)
    env = wv.WaveEnvelope("D", 1.5, 1.5)
    measured = wv.bound_ratio(f, [env])
    # the sup of the closed-form ratio (a (4 pi)^{-3/2}-scaled constant whose
    # exact value reflects the envelope's algebraic tail) is reproduced
    r = np.linspace(0, 24, 4001)
    closed = ((4 * np.pi * tau) ** -1.5 * np.exp(-r * r / (4 * tau))
              * (1 + t) ** 1.5 * (1 + r * r / (1 + t)) ** 1.5)
    assert measured == pytest.approx(closed.max(), rel=0.02)


def test_bound_ratio_stable_under_refinement(dp):
    t, sigma = 5.0, 0.5
    envs = [wv.WaveEnvelope("D", 1.5, 1.5), wv.WaveEnvelope("H", 2.0, 1.5, dp.c)]
    sel = gr.GreenBlockSelector("rho", "rho")
    r1 = wv.bound_ratio(gr.synthesize(dp, gr.FrequencyGrid(64, 16.0), t, sigma, sel), envs)
    r2 = wv.bound_ratio(gr.synthesize(dp, gr.FrequencyGrid(128, 16.0), t, sigma, sel), envs)
    assert abs(r2 - r1) / r1 < 0.1


def test_front_tracking_synthetic_wave(grid96):
    # mollified shell kernel sin(c s t)/(c s): recovers the input speed to 1%
    c0 = 0.9
    fields = []
    for t in (8.0, 12.0, 16.0, 20.0):
        def symbol(s, t=t):
            out = np.full_like(s, t)
            nz = s > 0
            out[nz] = np.sin(c0 * s[nz] * t) / (c0 * s[nz])
            return out
        fields.append(gr.synthesize_radial(grid96, symbol, 0.5, t=t))
    fit = wv.front_speed(fields, c_guess=c0)
    assert abs(fit.c_est - c0) / c0 < 0.01


def test_front_tracking_gradient_packet():
    # analytic two-lobed packet: d/dr Gaussian around r = c t
    c0, w = 1.2, 2.0
    pts = []
    for t in (5.0, 8.0, 12.0, 20.0):
        r = np.arange(0.25, 40.0, 0.5)
        m = -(r - c0 * t) / w**2 * np.exp(-(r - c0 * t) ** 2 / (2 * w**2)) / (1 + t) ** 2
        pts.append(wv.track_front(r, m, t, sigma=0.5, spacing=0.5, c_guess=c0))
    fit = wv.front_speed(pts)
    assert fit.c_est == pytest.approx(c0, rel=5e-3)
    exp = wv.amplitude_exponent([p.t for p in pts], [p.amplitude for p in pts])
    assert exp == pytest.approx(-2.0, abs=0.01)


def test_no_front_on_diffusion_profile(grid96):
    f = gr.synthesize_radial(grid96, lambda s: np.exp(-s * s * 6.0), 0.5, t=6.0)
    with pytest.raises(wv.NoFrontError):
        wv.front_radius(f)


def test_amplitude_exponent_validation():
    with pytest.raises(wv.DegenerateFitError):
        wv.amplitude_exponent([1, 2, 3], [1, 1, 1])
    with pytest.raises(wv.DegenerateFitError):
        wv.amplitude_exponent([5, 6, 7, 8], [1, 1, 1, 1])   # span < 4
    with pytest.raises(wv.DegenerateFitError):
        wv.amplitude_exponent([1, 2, 4, 8], [1, 1, -1, 1])
    # exact power law
    t = np.array([2.0, 4.0, 8.0, 16.0])
    a = (1 + t) ** -0.75
    assert wv.amplitude_exponent(t, a) == pytest.approx(-0.75, abs=1e-12)


def test_lp_rate_table():
    table = dict(wv.lp_rate_table([1.25, 2.0, 4.0, np.inf]))
    assert table[2.0] == 0.75
    assert table[1.25] == pytest.approx(2.0 - 5.0 / 2.5)
    assert table[4.0] == pytest.approx(1.5 * 0.75)
    assert table[np.inf] == 1.5
    # the two branch formulas agree at p = 2
    assert 2.0 - 5.0 / 4.0 == 1.5 * (1.0 - 0.5) == 0.75


def test_radial_profile_kinds(dp, grid96):
    f = gr.synthesize(dp, grid96, 3.0, 0.6, gr.GreenBlockSelector("rho", "m"))
    prof_l = wv.radial_profile(f, "longitudinal")
    prof_m = wv.radial_profile(f, "magnitude")
    assert np.all(prof_m.mean >= 0)
    assert np.all(prof_m.mean + 1e-30 >= np.abs(prof_l.mean) * 0.99)
    with pytest.raises(ValueError):
        wv.radial_profile(f, "scalar")
