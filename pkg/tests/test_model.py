import math

import numpy as np
import pytest

from twophase.model import ModelParams, InvalidParams, derive


def test_canonical_derivation():
    dp = derive(ModelParams(rho_bar=1, n_bar=1, a_coef=1, gamma=2, mu=1, lam=0))
    assert dp.alpha1 == 2.0
    assert dp.alpha2 == 1.0
    assert dp.nu == 2.0
    assert dp.c == pytest.approx(math.sqrt(1.5), rel=1e-14)
    assert dp.c == pytest.approx(1.2247449, abs=5e-8)


def test_gamma_one_gives_alpha1_equals_a():
    dp = derive(ModelParams(rho_bar=0.5, n_bar=1.0, a_coef=1.0, gamma=1.0, mu=1.0))
    assert dp.alpha1 == 1.0


def test_vanishing_euler_phase_recovers_ns_sound_speed():
    # rho_bar -> 0 pushes c to sqrt(P'(n_bar))
    dp = derive(ModelParams(rho_bar=1e-10, n_bar=1.0, a_coef=1.0, gamma=2.0, mu=1.0))
    assert dp.c == pytest.approx(math.sqrt(2.0), rel=1e-9)


@pytest.mark.parametrize("bad", [
    dict(rho_bar=-1.0),
    dict(rho_bar=0.0),
    dict(n_bar=-0.1),
    dict(a_coef=0.0),
    dict(gamma=0.9),
    dict(mu=0.0),
    dict(mu=0.3, lam=-0.3),   # 2/3 mu + lam < 0
])
def test_invalid_params_rejected(bad):
    kw = dict(rho_bar=1.0, n_bar=1.0, a_coef=1.0, gamma=2.0, mu=1.0, lam=0.0)
    kw.update(bad)
    with pytest.raises(InvalidParams):
        derive(ModelParams(**kw))


def test_sound_speed_closed_forms_agree(random_param_sets):
    for dp in random_param_sets:
        raw = dp.raw
        alt = math.sqrt((raw.n_bar * raw.pressure_slope(raw.n_bar) + raw.rho_bar)
                        / (raw.n_bar + raw.rho_bar))
        assert dp.c == pytest.approx(alt, rel=1e-12)


def test_sound_speed_forms_agree_many_random():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        mu = float(rng.uniform(0.05, 3.0))
        dp = derive(ModelParams(
            rho_bar=float(rng.uniform(0.05, 5.0)),
            n_bar=float(rng.uniform(0.05, 5.0)),
            a_coef=float(rng.uniform(0.05, 5.0)),
            gamma=float(rng.uniform(1.0, 3.5)),
            mu=mu,
            lam=float(rng.uniform(-0.66 * mu, 2.0)),
        ))
        alt = math.sqrt((dp.alpha1 + dp.alpha2) / (dp.alpha2 + 1.0))
        assert dp.c == pytest.approx(alt, rel=1e-12)


def test_c_monotone_in_alpha1():
    # at fixed alpha2, c increases with alpha1 (sampled via a_coef)
    cs = [derive(ModelParams(rho_bar=1, n_bar=1, a_coef=a, gamma=2, mu=1)).c
          for a in np.linspace(0.2, 4.0, 25)]
    assert np.all(np.diff(cs) > 0)
