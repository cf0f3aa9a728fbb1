"""Thinning simulator: determinism, distributional checks, serialization."""

import io
import math

import numpy as np
import pytest

from jumplab import coeffs
from jumplab.errors import JumpCapExceeded, RangeError
from jumplab.kernels import (
    BigJumpPowerLaw,
    CompoundPoissonAtoms,
    KernelSpec,
    StableLikeSmall,
)
from jumplab.simulator import (
    SimConfig,
    ThinningSimulator,
    auto_epsilon,
    read_path_csv,
    sample_compound_poisson_direct,
    simulate_ensemble,
    simulate_path,
    state_at,
    states_at,
    write_path_csv,
)

ATOMS = KernelSpec(1, (CompoundPoissonAtoms(
    ((1.0, (0.5,)), (1.0, (-0.5,)))
),))


def stable_kernel(c=1.0, alpha=1.0, d=1):
    return KernelSpec(d, (
        StableLikeSmall(coeffs.constant(c), coeffs.constant(alpha)),
    ))


def cfg(**kw):
    base = dict(t_end=1.0, epsilon=0.1, base_seed=1234)
    base.update(kw)
    return SimConfig(**base)


class TestSimConfig:
    def test_epsilon_bounds(self):
        with pytest.raises(ValueError):
            cfg(epsilon=0.0)
        with pytest.raises(ValueError):
            cfg(epsilon=1.0)

    def test_margin_bound(self):
        with pytest.raises(ValueError):
            cfg(dominating_rate_margin=0.9)


class TestDeterminism:
    def test_same_seed_same_path(self):
        p1 = simulate_path(ATOMS, (0.0,), cfg(), path_index=3)
        p2 = simulate_path(ATOMS, (0.0,), cfg(), path_index=3)
        assert np.array_equal(p1.jump_times, p2.jump_times)
        assert np.array_equal(p1.jump_vectors, p2.jump_vectors)

    def test_different_path_index_differs(self):
        p1 = simulate_path(ATOMS, (0.0,), cfg(t_end=10.0), path_index=0)
        p2 = simulate_path(ATOMS, (0.0,), cfg(t_end=10.0), path_index=1)
        assert not np.array_equal(p1.jump_times, p2.jump_times)

    def test_path_independent_of_ensemble_size(self):
        e_small = simulate_ensemble(ATOMS, (0.0,), cfg(), 3)
        e_large = simulate_ensemble(ATOMS, (0.0,), cfg(), 7)
        for a, b in zip(e_small.paths, e_large.paths[:3]):
            assert np.array_equal(a.jump_times, b.jump_times)
            assert np.array_equal(a.jump_vectors, b.jump_vectors)

    def test_jobs_do_not_change_results(self):
        e1 = simulate_ensemble(ATOMS, (0.0,), cfg(), 20, jobs=1)
        e4 = simulate_ensemble(ATOMS, (0.0,), cfg(), 20, jobs=4)
        for a, b in zip(e1.paths, e4.paths):
            assert np.array_equal(a.jump_times, b.jump_times)
            assert np.array_equal(a.jump_vectors, b.jump_vectors)


class TestPathAccess:
    def test_state_at_is_cadlag(self):
        p = simulate_path(ATOMS, (0.0,), cfg(t_end=5.0))
        if p.n_jumps:
            t0 = p.jump_times[0]
            before = state_at(p, t0 * 0.999999)
            at = state_at(p, t0)
            assert not np.array_equal(before, at)

    def test_time_out_of_range(self):
        p = simulate_path(ATOMS, (0.0,), cfg())
        with pytest.raises(RangeError):
            state_at(p, -0.1)
        with pytest.raises(RangeError):
            state_at(p, 1.5)

    def test_states_at_matches_state_at(self):
        p = simulate_path(ATOMS, (0.0,), cfg(t_end=5.0))
        times = [0.0, 1.0, 2.5, 5.0]
        xs = states_at(p, times)
        for t, x in zip(times, xs):
            assert np.array_equal(x, state_at(p, t))


class TestDistribution:
    def test_jump_count_is_poisson(self):
        # total rate 2, t = 1: counts ~ Poisson(2)
        ens = simulate_ensemble(ATOMS, (0.0,), cfg(base_seed=99), 4000)
        counts = np.array([p.n_jumps for p in ens.paths])
        assert counts.mean() == pytest.approx(2.0, abs=4 * math.sqrt(
            2.0 / 4000
        ))
        assert counts.var(ddof=1) == pytest.approx(2.0, rel=0.15)

    def test_atom_selection_balanced(self):
        ens = simulate_ensemble(ATOMS, (0.0,), cfg(base_seed=7), 2000)
        zs = np.concatenate([p.jump_vectors[:, 0] for p in ens.paths])
        assert set(np.unique(zs)) == {-0.5, 0.5}
        frac = np.mean(zs > 0)
        assert frac == pytest.approx(0.5, abs=4 * 0.5 / math.sqrt(len(zs)))

    def test_matches_direct_sampler(self):
        # endpoint distributions agree between thinning and direct sums
        n = 3000
        ens = simulate_ensemble(ATOMS, (0.0,), cfg(base_seed=3), n)
        thinned = np.array([state_at(p, 1.0)[0] for p in ens.paths])
        direct = np.array([
            state_at(
                sample_compound_poisson_direct(ATOMS, (0.0,), 1.0, 555, k),
                1.0,
            )[0]
            for k in range(n)
        ])
        # same lattice and close moments
        assert thinned.mean() == pytest.approx(direct.mean(), abs=0.06)
        assert thinned.var() == pytest.approx(direct.var(), rel=0.15)

    def test_stable_like_rate_matches_tail_mass(self):
        k = stable_kernel()
        eps = 0.1
        expect = k.total_mass_tail((0.0,), eps).value  # 2*(10-1) = 18
        assert expect == pytest.approx(18.0, rel=1e-8)
        ens = simulate_ensemble(k, (0.0,), cfg(epsilon=eps, base_seed=11),
                                1500)
        counts = np.array([p.n_jumps for p in ens.paths])
        assert counts.mean() == pytest.approx(expect, rel=0.05)

    def test_stable_like_jump_radius_law(self):
        # radial CDF on [eps, 1): F(r) = (eps^-a - r^-a) / (eps^-a - 1)
        k = stable_kernel(alpha=1.0)
        eps = 0.1
        ens = simulate_ensemble(k, (0.0,), cfg(epsilon=eps, base_seed=21),
                                400)
        radii = np.concatenate([
            np.abs(p.jump_vectors[:, 0]) for p in ens.paths
        ])
        assert radii.min() >= eps
        assert radii.max() < 1.0
        med = np.median(radii)
        # closed form: F^{-1}(0.5) for alpha=1, eps=0.1: 1/(10 - 0.5*9)
        assert med == pytest.approx(1.0 / 5.5, rel=0.05)


class TestDroppedVariance:
    def test_fraction_recorded(self):
        k = stable_kernel()
        ens = simulate_ensemble(k, (0.0,), cfg(epsilon=0.01, base_seed=5), 5)
        for p in ens.paths:
            # closed form: dropped variance fraction = eps = 0.01 for alpha=1
            assert p.dropped_variance_fraction == pytest.approx(0.01,
                                                                rel=1e-6)
            assert not p.approximate

    def test_gaussian_substitute_marks_approximate(self):
        k = stable_kernel()
        ens = simulate_ensemble(
            k, (0.0,),
            cfg(epsilon=0.1, base_seed=5,
                small_jump_mode="gaussian_substitute"),
            3,
        )
        for p in ens.paths:
            assert p.approximate

    def test_gaussian_substitute_restores_variance(self):
        k = stable_kernel()
        n = 4000
        drop = simulate_ensemble(k, (0.0,), cfg(epsilon=0.3, base_seed=8), n)
        subst = simulate_ensemble(
            k, (0.0,),
            cfg(epsilon=0.3, base_seed=8,
                small_jump_mode="gaussian_substitute"),
            n,
        )
        var_drop = np.var([state_at(p, 1.0)[0] for p in drop.paths])
        var_subst = np.var([state_at(p, 1.0)[0] for p in subst.paths])
        # substitution adds back roughly the dropped 0.6 of variance
        assert var_subst - var_drop == pytest.approx(0.6, rel=0.25)


class TestAutoEpsilon:
    def test_hits_target_fraction(self):
        k = stable_kernel()
        eps = auto_epsilon(k, [(0.0,)], fraction=0.01)
        dropped = k.dropped_variance((0.0,), eps).value
        total = k.second_moment((0.0,)).value
        assert dropped / total <= 0.01 + 1e-9


class TestJumpCap:
    def test_cap_raises_with_partial(self):
        k = stable_kernel()
        with pytest.raises(JumpCapExceeded) as err:
            simulate_path(k, (0.0,), cfg(epsilon=0.001, t_end=100.0,
                                         max_jumps=50))
        assert err.value.partial is not None


class TestCsv:
    def test_round_trip(self):
        p = simulate_path(ATOMS, (0.0,), cfg(t_end=5.0), path_index=2)
        buf = io.StringIO()
        write_path_csv(p, buf)
        buf.seek(0)
        q = read_path_csv(buf)
        assert q.x0 == p.x0
        assert q.t_end == p.t_end
        assert q.epsilon == p.epsilon
        assert q.seed == p.seed
        assert np.array_equal(q.jump_times, p.jump_times)
        assert np.array_equal(q.jump_vectors, p.jump_vectors)

    def test_shortest_round_trip_floats(self):
        p = simulate_path(stable_kernel(), (0.0,), cfg(), path_index=0)
        buf = io.StringIO()
        write_path_csv(p, buf)
        text = buf.getvalue()
        # payload floats are written with repr: re-parsing is exact
        buf.seek(0)
        q = read_path_csv(buf)
        assert np.array_equal(q.jump_vectors, p.jump_vectors)
        assert "jump_time" in text.splitlines()[-p.n_jumps - 1]
