from types import SimpleNamespace

import numpy as np
import pytest

from geometry.errors import RetractionDomainError
from solvers.line_search import NonmonotoneLineSearch, barzilai_borwein_step, monotone_backtracking


def _scalar_curve(gamma):
    return SimpleNamespace(X=np.array([gamma]))


def _parabola(X):
    return float((X[0] - 1.0) ** 2)


def test_reference_update_follows_recurrence():
    search = NonmonotoneLineSearch(alpha=0.5)
    search.reset(10.0)
    search.update(4.0)
    # Q = 1.5, c = (0.5·1·10 + 4) / 1.5
    assert search.Q == pytest.approx(1.5)
    assert search.reference == pytest.approx(6.0)
    search.update(1.0)
    assert search.Q == pytest.approx(1.75)
    assert search.reference == pytest.approx((0.5 * 1.5 * 6.0 + 1.0) / 1.75)


def test_alpha_zero_tracks_latest_value():
    search = NonmonotoneLineSearch(alpha=0.0)
    search.reset(3.0)
    search.update(2.0)
    assert search.reference == 2.0
    search.update(2.5)
    assert search.reference == 2.5


def test_search_backtracks_to_sufficient_decrease():
    search = NonmonotoneLineSearch(alpha=0.85, beta=1e-4, delta=0.5)
    search.reset(1.0)
    res = search.search(_scalar_curve, _parabola, slope=-2.0, gamma=4.0)
    assert res.accepted
    assert res.step == 1.0
    assert res.trials == 3
    assert res.f == 0.0


def test_nonmonotone_reference_admits_increase():
    search = NonmonotoneLineSearch(alpha=0.85)
    search.reset(5.0)
    # f(γ=2) = 1 exceeds the current value 0 but not the reference 5
    res = search.search(_scalar_curve, _parabola, slope=-1e-3, gamma=2.0)
    assert res.accepted and res.step == 2.0


def test_domain_errors_count_as_rejections():
    def fragile(gamma):
        if gamma > 1.5:
            raise RetractionDomainError("outside")
        return _scalar_curve(gamma)

    search = NonmonotoneLineSearch(delta=0.5)
    search.reset(1.0)
    res = search.search(fragile, _parabola, slope=-2.0, gamma=4.0)
    assert res.accepted
    assert res.domain_errors == 2
    assert res.step == 1.0


def test_step_underflow_is_reported():
    search = NonmonotoneLineSearch(delta=0.5, gamma_min=1e-3)
    search.reset(0.0)
    res = search.search(_scalar_curve, lambda X: 1.0, slope=-1.0, gamma=1.0)
    assert not res.accepted
    assert res.point is None
    assert res.step < 1e-3


def test_monotone_backtracking_tries_unit_step_first():
    res = monotone_backtracking(_scalar_curve, _parabola, f0=1.0, slope=-2.0)
    assert res.accepted and res.step == 1.0 and res.trials == 1
    res = monotone_backtracking(lambda g: _scalar_curve(5.0 * g), _parabola, f0=1.0, slope=-10.0, delta=0.2)
    assert res.step == pytest.approx(0.2)


def test_barzilai_borwein_alternates():
    S = np.array([[1.0, 0.0], [0.0, 2.0]])
    Y = np.array([[2.0, 0.0], [0.0, 1.0]])
    ss, sy, yy = 5.0, 4.0, 5.0
    assert barzilai_borwein_step(S, Y, j=1) == pytest.approx(ss / sy)
    assert barzilai_borwein_step(S, Y, j=2) == pytest.approx(sy / yy)


def test_barzilai_borwein_uses_absolute_curvature():
    S = np.array([[1.0]])
    Y = np.array([[-2.0]])
    assert barzilai_borwein_step(S, Y, j=1) == pytest.approx(0.5)


def test_barzilai_borwein_fallback_and_clipping():
    S = np.array([[1.0, 0.0]])
    Y = np.array([[0.0, 1.0]])
    assert barzilai_borwein_step(S, Y, j=0, gamma_fallback=0.125) == 0.125
    big = barzilai_borwein_step(np.array([[1e4]]), np.array([[1e-4]]), j=1, gamma_max=10.0)
    assert big == 10.0
    small = barzilai_borwein_step(np.array([[1e-4]]), np.array([[1e4]]), j=2, gamma_min=1e-3)
    assert small == 1e-3
