import math

import numpy as np
import pytest

from mlmc_weak import gbm
from mlmc_weak.estimators import weak_error_type1
from mlmc_weak.experiments import (ConfigError, ErrorTableRow, ExperimentConfig, Study,
                                   bounds_check_study, fit_rate, level_difference_sampler,
                                   make_testbed, mlmc_weak_study, run_study, strong_error_study,
                                   weak_error_study)
from mlmc_weak.experiments import TestbedKind as Bed
from mlmc_weak.rng import SeedSpec
from mlmc_weak.spde_heat import HeatConfig

STILL = gbm.GbmConfig(mu=-0.5, sigma=0.0, x0=1.0, t_end=0.5)


def cfg(**kw):
    base = dict(testbed=Bed.GBM, study=Study.STRONG, levels=(1, 2), n_samples=64)
    base.update(kw)
    return ExperimentConfig(**base)


def rows_from(ks, errs):
    return [ErrorTableRow(i, k, 0.0, 0, e, 0.0, 1) for i, (k, e) in enumerate(zip(ks, errs))]


@pytest.mark.parametrize("power", [1.0, 0.5])
def test_fit_rate_exact_powers(power):
    ks = 2.0 ** -np.arange(1, 7)
    slope, intercept = fit_rate(rows_from(ks, 3 * ks ** power))
    assert slope == pytest.approx(power, abs=1e-12)
    assert intercept == pytest.approx(math.log2(3), abs=1e-12)


def test_fit_rate_two_points_and_skip():
    slope, _ = fit_rate(rows_from([0.5, 0.25], [0.3, 0.1]))
    assert slope == pytest.approx(math.log2(3))
    ks = [0.5, 0.25, 0.125]
    assert fit_rate(rows_from(ks, [0.5, 0.25, 10.0]), skip_last=1)[0] == pytest.approx(1.0)
    with pytest.warns(UserWarning):
        fit_rate(rows_from(ks, [0.5, 0.25, 0.0]))
    with pytest.raises(ValueError):
        fit_rate(rows_from(ks[:1], [0.5]))


@pytest.mark.parametrize("kw", [
    dict(testbed=Bed.HEAT_G1, study=Study.STRONG),
    dict(testbed=Bed.HEAT_G1, study=Study.STRONG, reference_level=1),
    dict(testbed=Bed.HEAT_G2, study=Study.MLMC_WEAK_TYPE2, reference_level=4),
    dict(testbed=Bed.HEAT_G1, study=Study.MLMC_WEAK_TYPE1, reference_level=4),
    dict(levels=()),
    dict(n_samples=0),
])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        cfg(**kw)


def test_strong_self_comparison_is_zero():
    c = cfg(testbed=Bed.HEAT_G2, levels=(1, 2), reference_level=2, n_samples=8)
    rows = strong_error_study(c)
    assert rows[-1].error_mean == 0.0
    assert rows[0].error_mean > 0


def test_weak_type2_without_noise_is_the_discretisation_bias():
    c = cfg(study=Study.WEAK_TYPE2, gbm=STILL, levels=(1, 2, 3), n_samples=10)
    rows = weak_error_study(c)
    for r in rows:
        assert r.error_mean == pytest.approx(gbm.exact_bias(STILL, gbm.level(STILL, r.level)), rel=1e-12)
        assert r.error_std == 0.0


def test_weak_type1_without_noise_is_the_discretisation_bias():
    c = cfg(study=Study.WEAK_TYPE1, gbm=STILL, levels=(2,), n_samples=10, m_replications=3)
    (row,) = weak_error_study(c)
    assert row.error_mean == pytest.approx(gbm.exact_bias(STILL, gbm.level(STILL, 2)), rel=1e-12)


def test_mlmc_single_level_reduces_to_type1():
    c = cfg(study=Study.MLMC_WEAK_TYPE1, levels=(0,), m_replications=3)
    (row,) = mlmc_weak_study(c)
    tb = make_testbed(c, mlmc=True)
    n0 = math.ceil(gbm.exact_bias(c.gbm, gbm.level(c.gbm, 0)) ** -2)
    assert row.n_used == (n0,)
    ref = np.mean([weak_error_type1(1.0, level_difference_sampler(
        c, tb, 0, SeedSpec(c.master_seed, replicate=r, level=0, tag=1000)), n0) for r in range(3)])
    assert row.error_mean == pytest.approx(ref, rel=1e-12)


def test_mlmc_type2_runs_on_gbm():
    c = cfg(study=Study.MLMC_WEAK_TYPE2, levels=(1, 2), m_replications=2, n_pilot=200)
    rows = mlmc_weak_study(c)
    assert [len(r.n_used) for r in rows] == [2, 3]
    assert all(np.isfinite(r.error_mean) for r in rows)


def test_bounds_check_zero_variance():
    c = cfg(study=Study.BOUNDS_CHECK, gbm=STILL, levels=(3,), n_samples=20, m_replications=5, n_pilot=50)
    rows, report = bounds_check_study(c)
    for r in report:
        # identical samples up to rounding in the mean
        assert r.variance == pytest.approx(0.0, abs=1e-28)
        assert r.upper == pytest.approx(0.0, abs=1e-14)
        assert r.empirical_rms == pytest.approx(0.0, abs=1e-14)


def test_heat_studies_small_and_thread_independent():
    c = cfg(testbed=Bed.HEAT_G1, study=Study.WEAK_TYPE2, levels=(1, 2), reference_level=3,
            n_samples=40, m_replications=2, block_size=16)
    one, _ = run_study(c, workers=1)
    many, _ = run_study(c, workers=4)
    assert one == many
    assert one[0].error_mean > one[1].error_mean > 0


def test_heat_mlmc_with_pilot_schedule():
    c = cfg(testbed=Bed.HEAT_G1, study=Study.MLMC_WEAK_TYPE1, levels=(1,), reference_level=3,
            schedule_source="pilot", normalize_schedule=True, n_pilot=50, sample_cap=100,
            m_replications=2)
    (row,) = mlmc_weak_study(c)
    assert len(row.n_used) == 2 and max(row.n_used) <= 100
    assert np.isfinite(row.error_mean)


def test_heat_g1_exact_mean_is_positive_and_small():
    c = cfg(testbed=Bed.HEAT_G1, study=Study.WEAK_TYPE1, levels=(1,), heat=HeatConfig())
    tb = make_testbed(c)
    assert 0 < tb.exact_mean(c) < 1e-6
