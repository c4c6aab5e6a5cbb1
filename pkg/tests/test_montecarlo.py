import math

import numpy as np
import pytest

from gbcf_edt import bounds as bd
from gbcf_edt.model import DomainError, SystemParams
from gbcf_edt.montecarlo import (
    THREADS_ENV,
    McConfig,
    NonTerminationError,
    default_threads,
    mse_trajectory,
    simulate,
)
from gbcf_edt.olscheme import run_to_distortion, threshold_crossing

M = 100_000


@pytest.fixture(scope="module")
def cfg():
    return McConfig(SystemParams(1.0, 0.9, 1.0, 0.5), power=0.1, distortion=0.5, n_samples=M, seed=7)


@pytest.fixture(scope="module")
def report(cfg):
    return simulate(cfg, threads=1)


def test_report_matches_recursion(cfg, report):
    run = run_to_distortion(cfg.params, cfg.power, cfg.distortion)
    assert report.k_used == run.k_ol
    band = 3 * math.sqrt(2) * run.final.alpha / math.sqrt(M)
    assert abs(report.empirical_mse_1 - run.final.alpha) <= band
    assert abs(report.empirical_mse_2 - run.final.alpha) <= band
    # the reported CI estimates the same quantity from the samples
    assert report.ci_halfwidth_mse == pytest.approx(band, rel=0.05)


def test_report_power_and_energy(cfg, report):
    assert abs(report.empirical_power_per_step - cfg.power) <= 3 * math.sqrt(2) * cfg.power / math.sqrt(M)
    assert report.total_energy_per_sample == report.k_used * report.empirical_power_per_step
    assert report.seed_echo == 7 and report.feedback_consistent


def test_full_distortion_sends_nothing():
    cfg = McConfig(SystemParams(2.0, 0.5, 1.0, 0.0), power=0.3, distortion=2.0, n_samples=20_000)
    r = simulate(cfg, threads=1)
    assert (r.k_used, r.total_energy_per_sample, r.empirical_power_per_step) == (0, 0.0, 0.0)
    assert abs(r.empirical_mse_1 - 2.0) <= r.ci_halfwidth_mse


def test_bitwise_reproducible_across_threads(cfg, report):
    for threads in (2, 3, 8):
        assert simulate(cfg, threads=threads) == report
    assert simulate(cfg, threads=1) == report


def test_seed_changes_the_draws(cfg, report):
    other = simulate(McConfig(cfg.params, cfg.power, cfg.distortion, cfg.n_samples, seed=8), threads=1)
    assert other.empirical_mse_1 != report.empirical_mse_1


def test_sample_paths_do_not_depend_on_chunking():
    from gbcf_edt.montecarlo import _simulate_chunk
    from gbcf_edt.olscheme import gain_schedule

    p = SystemParams(1.0, 0.3, 1.0, 0.2)
    small = McConfig(p, 0.2, 0.6, 10, seed=3)
    large = McConfig(p, 0.2, 0.6, 10_000, seed=3)
    sched = gain_schedule(p, 0.2, 6)
    whole = _simulate_chunk(small, sched, 0, 10)
    parts = [_simulate_chunk(large, sched, lo, hi) for lo, hi in ((0, 4), (4, 5), (5, 10))]
    single = _simulate_chunk(large, sched, 4, 5)
    assert np.array_equal(parts[1].e11, single.e11)
    combined = sum(q.e11 for q in parts)
    assert np.allclose(combined, whole.e11, rtol=1e-13, atol=0)


def test_trajectory_within_bands(cfg):
    rows = mse_trajectory(cfg, threads=2)
    assert rows[0].step == 0
    assert abs(rows[0].empirical_alpha_1 - 1.0) <= 3 * math.sqrt(2) / math.sqrt(M)
    for r in rows:
        band = 4 * math.sqrt(2) * r.analytic_alpha / math.sqrt(M)
        assert abs(r.empirical_alpha_1 - r.analytic_alpha) <= band
        assert abs(r.empirical_alpha_2 - r.analytic_alpha) <= band
        if r.step > 0:
            assert abs(r.empirical_power - cfg.power) <= 4 * math.sqrt(2) * cfg.power / math.sqrt(M)


def test_error_correlation_at_crossing():
    p = SystemParams(1.0, 0.9, 1.0, 0.5)
    cfg = McConfig(p, power=0.1, distortion=0.2, n_samples=M, seed=11)
    run = run_to_distortion(p, 0.1, 0.2)
    crossing = threshold_crossing(run.trace)
    assert crossing is not None
    row = mse_trajectory(cfg)[crossing.step]
    assert abs(row.empirical_rho - row.analytic_rho) <= 4 / math.sqrt(M)
    assert abs(row.empirical_rho) <= 4 / math.sqrt(M) + abs(row.analytic_rho)


def test_config_validation():
    p = SystemParams(1.0, 0.0, 1.0, 0.0)
    with pytest.raises(DomainError):
        McConfig(p, power=0.0, distortion=0.5, n_samples=10)
    with pytest.raises(DomainError):
        McConfig(p, power=0.1, distortion=1.5, n_samples=10)
    with pytest.raises(DomainError):
        McConfig(p, power=0.1, distortion=0.5, n_samples=0)


def test_non_termination_raises():
    p = SystemParams(1.0, 0.0, 1.0, 0.0)
    with pytest.raises(NonTerminationError):
        simulate(McConfig(p, power=0.1, distortion=0.1, n_samples=10, max_steps=3))


def test_thread_env_fallback(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert default_threads() == 3
    monkeypatch.setenv(THREADS_ENV, "many")
    with pytest.raises(DomainError):
        default_threads()
    monkeypatch.delenv(THREADS_ENV)
    assert default_threads() >= 1


def test_energy_tracks_closed_form_at_small_power():
    p = SystemParams(1.0, 0.9, 1.0, 0.5)
    r = simulate(McConfig(p, power=0.01, distortion=0.5, n_samples=20_000, seed=1))
    assert abs(r.total_energy_per_sample / bd.energy_ol_closed(p, 0.5) - 1) <= 0.03
