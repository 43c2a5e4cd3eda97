import numpy as np
import pytest

from evidential_nav.distributions import DirichletParams, Discretization, Pmf
from evidential_nav.losses import (
    emd2,
    emd2_array,
    uemd2,
    uemd2_array,
    uemd2_grad_array,
    upi_loss,
    upi_loss_array,
    upi_loss_grad,
    upi_loss_grad_array,
)
from evidential_nav.utils.errors import DomainError


@pytest.fixture
def disc3():
    return Discretization(3, 0.0, 1.0)


@pytest.fixture
def disc12():
    return Discretization(12, 0.0, 1.0)


def _monte_carlo_uemd2(rng, beta, y, n=1_000_000):
    samples = rng.dirichlet(beta, size=n)
    values = emd2_array(samples, y[None, :])
    return values.mean(), values.std() / np.sqrt(n)


class TestEmd2:
    def test_identity(self, disc3):
        p = Pmf([0.2, 0.3, 0.5], disc3)
        assert emd2(p, p) == 0.0

    def test_opposite_corners(self, disc3):
        assert emd2(Pmf([1, 0, 0], disc3), Pmf([0, 0, 1], disc3)) == pytest.approx(2.0)

    def test_hand_evaluated(self, disc3):
        assert emd2(Pmf([0.5, 0.5, 0], disc3), Pmf([0, 0.5, 0.5], disc3)) == pytest.approx(0.5)

    def test_mismatched_bins(self, disc3, disc12):
        with pytest.raises(DomainError):
            emd2(disc3.uniform(), disc12.uniform())

    def test_symmetric_and_non_negative(self, rng):
        p = rng.dirichlet(np.ones(12), size=500)
        y = rng.dirichlet(np.ones(12), size=500)
        np.testing.assert_allclose(emd2_array(p, y), emd2_array(y, p))
        assert np.all(emd2_array(p, y) > 0)


class TestUemd2:
    def test_uniform_dirichlet_against_corner(self):
        disc = Discretization(2, 0.0, 1.0)
        assert uemd2(DirichletParams([1, 1], disc), Pmf([1, 0], disc)) == pytest.approx(1.0 / 3.0)

    def test_concentration_limit(self, disc12):
        y = np.zeros(12)
        y[4] = 1.0
        beta = 1e6 * y + 1e-6
        assert uemd2(DirichletParams(beta, disc12), Pmf(y, disc12)) < 1e-4

    @pytest.mark.slow
    def test_matches_monte_carlo(self, rng):
        for _ in range(3):
            beta = rng.uniform(0.3, 5.0, size=12)
            y = rng.dirichlet(np.ones(12))
            estimate, stderr = _monte_carlo_uemd2(rng, beta, y)
            assert abs(uemd2_array(beta, y) - estimate) < 3.0 * stderr

    def test_dominates_emd2_of_mean(self, rng):
        beta = rng.uniform(0.1, 20.0, size=(1000, 12))
        y = rng.dirichlet(np.ones(12), size=1000)
        mean = beta / beta.sum(axis=1, keepdims=True)
        assert np.all(uemd2_array(beta, y) >= emd2_array(mean, y) - 1e-9)

    def test_tends_to_emd2_of_mean(self, rng):
        mean = rng.dirichlet(np.ones(12))
        y = rng.dirichlet(np.ones(12))
        assert abs(uemd2_array(1e6 * mean, y) - emd2_array(mean, y)) < 1e-3


class TestUpiLoss:
    def test_zero_kappa_is_uemd2(self, disc12, rng):
        q = DirichletParams(rng.uniform(0.5, 3, 12), disc12)
        y = Pmf(rng.dirichlet(np.ones(12)), disc12)
        phys = Pmf(rng.dirichlet(np.ones(12)), disc12)
        assert upi_loss(q, y, phys, 0.0) == pytest.approx(uemd2(q, y))

    def test_identical_targets(self, disc12, rng):
        q = DirichletParams(rng.uniform(0.5, 3, 12), disc12)
        y = Pmf(rng.dirichlet(np.ones(12)), disc12)
        assert upi_loss(q, y, y, 1.0) == pytest.approx(2.0 * uemd2(q, y))

    def test_two_bin_example(self):
        disc = Discretization(2, 0.0, 1.0)
        loss = upi_loss(DirichletParams([1, 1], disc), Pmf([1, 0], disc), Pmf([0, 1], disc), 0.5)
        assert loss == pytest.approx(0.5)

    def test_negative_kappa(self, disc12):
        with pytest.raises(DomainError):
            upi_loss(DirichletParams(np.ones(12), disc12), disc12.uniform(), disc12.uniform(), -0.1)

    def test_affine_in_kappa(self, rng):
        beta = rng.uniform(0.5, 5.0, size=(50, 12))
        y = rng.dirichlet(np.ones(12), size=50)
        phys = rng.dirichlet(np.ones(12), size=50)
        lhs = upi_loss_array(beta, y, phys, 0.3) + upi_loss_array(beta, y, phys, 1.1)
        rhs = upi_loss_array(beta, y, phys, 1.4) + upi_loss_array(beta, y, phys, 0.0)
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)


class TestGradients:
    def test_matches_central_differences(self, rng):
        h = 1e-5
        for _ in range(5):
            beta = rng.uniform(0.5, 10.0, size=12)
            y = rng.dirichlet(np.ones(12))
            phys = rng.dirichlet(np.ones(12))
            kappa = rng.uniform(0.0, 2.0)
            grad = upi_loss_grad_array(beta, y, phys, kappa)
            numeric = np.empty(12)
            for b in range(12):
                step = np.zeros(12)
                step[b] = h
                numeric[b] = (upi_loss_array(beta + step, y, phys, kappa)
                              - upi_loss_array(beta - step, y, phys, kappa)) / (2 * h)
            rel = np.abs(grad - numeric) / np.maximum(np.abs(numeric), 1e-8)
            assert rel.max() < 1e-6 or np.abs(grad - numeric).max() < 1e-10

    def test_symmetric_beta_uniform_target(self, disc12):
        # EMD2 on cumulative sums is invariant to reversing the bin order, not to
        # arbitrary permutations, so the gradient is mirror symmetric
        q = DirichletParams(np.full(12, 2.0), disc12)
        grad = upi_loss_grad(q, disc12.uniform(), disc12.uniform(), 0.0)
        np.testing.assert_allclose(grad, grad[::-1], atol=1e-12)

    def test_batched_rows_are_independent(self, rng):
        beta = rng.uniform(0.5, 5.0, size=(4, 12))
        y = rng.dirichlet(np.ones(12), size=4)
        batched = uemd2_grad_array(beta, y)
        for k in range(4):
            np.testing.assert_allclose(batched[k], uemd2_grad_array(beta[k], y[k]))

    def test_descent_steps_lower_the_loss(self, rng):
        y = rng.dirichlet(np.ones(12))
        phys = rng.dirichlet(np.ones(12))
        beta = rng.uniform(0.5, 5.0, size=12)
        losses = [upi_loss_array(beta, y, phys, 0.5)]
        for _ in range(50):
            beta = np.maximum(beta - 0.05 * upi_loss_grad_array(beta, y, phys, 0.5), 1e-3)
            losses.append(upi_loss_array(beta, y, phys, 0.5))
        assert np.all(np.diff(losses) <= 1e-12)
        assert losses[-1] < losses[0]
