"""Tests for the exponential time differencing integrators.

Covers the phi-function evaluator against high-precision references, the
stepper configuration contract, the admissibility guard, exactness on the
pure linear flow, observer cadence, determinism, a discrete dilation
symmetry shared by both equations, and the convergence orders of the two
schemes.
"""

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crystalsurf.models import ADL, EXPONENTIAL, ModelConfig, SingularityError
from crystalsurf.spectral import (
    GridSpec,
    SpectralField,
    field_from_modes,
    zero_field,
)
from crystalsurf.stepper import (
    DT_GUARD_HEADROOM,
    SCHEME_ETD1,
    SCHEME_ETDRK4,
    StepperConfig,
    TrajectoryState,
    dt_guard,
    integrate,
    phi_functions,
    step,
)

# Reference values of (phi_0, ..., phi_3) computed with 50-digit arithmetic
# from the defining formulas phi_0 = exp, phi_{m+1}(z) = (phi_m(z) - 1/m!)/z.
# The two arguments straddling -0.25 sit on either side of the evaluator's
# internal series/formula switch, so both branches face the same oracle.
PHI_REFERENCE = [
    (-0.1, (9.04837418035959629e-01, 9.51625819640404269e-01,
            4.83741803595957309e-01, 1.62581964040426824e-01)),
    (-1.0, (3.67879441171442334e-01, 6.32120558828557666e-01,
            3.67879441171442334e-01, 1.32120558828557666e-01)),
    (-10.0, (4.53999297624848542e-05, 9.99954600070237509e-02,
             9.00004539992976249e-02, 4.09999546000702347e-02)),
    (-0.2499999999, (7.78800783149284914e-01, 8.84796867756779015e-01,
                     4.60812529157209161e-01, 1.56749883433863285e-01)),
    (-0.2500000001, (7.78800782993524843e-01, 8.84796867671982068e-01,
                     4.60812529127746617e-01, 1.56749883426313574e-01)),
]


class TestPhiFunctions:
    def test_values_at_zero(self):
        """phi_m(0) = 1/m! exactly, including the scalar return type."""
        values = phi_functions(0.0)
        assert values == (1.0, 1.0, 0.5, 1.0 / 6.0)
        assert all(isinstance(v, float) for v in values)

    @pytest.mark.parametrize("z, expected", PHI_REFERENCE)
    def test_reference_values(self, z, expected):
        """Both evaluation branches match 50-digit references to 1e-13."""
        got = phi_functions(z)
        for g, e in zip(got, expected):
            assert math.isclose(g, e, rel_tol=1e-13)

    def test_scalar_matches_array(self):
        """Scalar and array inputs run the same arithmetic."""
        zs = np.array([-0.7, -0.01, -30.0])
        arrays = phi_functions(zs)
        for i, z in enumerate(zs):
            scalars = phi_functions(float(z))
            for a, s in zip(arrays, scalars):
                assert a[i] == s

    def test_array_shape_preserved(self):
        zs = np.linspace(-2.0, 0.0, 6).reshape(2, 3)
        for arr in phi_functions(zs):
            assert arr.shape == (2, 3)

    @pytest.mark.parametrize("bad", [0.1, np.array([-1.0, 2.0])])
    def test_positive_argument_rejected(self, bad):
        with pytest.raises(ValueError, match="z <= 0"):
            phi_functions(bad)

    @given(z=st.floats(min_value=-50.0, max_value=-0.5))
    @settings(max_examples=100, deadline=None)
    def test_recurrence(self, z):
        """phi_{m+1}(z) = (phi_m(z) - 1/m!)/z away from the origin.

        The subtraction in the recurrence is well conditioned on this
        argument range, so the identity can be checked directly.
        """
        p0, p1, p2, p3 = phi_functions(z)
        assert math.isclose(p1, (p0 - 1.0) / z, rel_tol=1e-12)
        assert math.isclose(p2, (p1 - 1.0) / z, rel_tol=1e-12)
        assert math.isclose(p3, (p2 - 0.5) / z, rel_tol=1e-12)

    @given(z=st.floats(min_value=-1e6, max_value=0.0))
    @settings(max_examples=200, deadline=None)
    def test_range_and_ordering(self, z):
        """On z <= 0 every phi lies in [0, 1] and phi_1 >= phi_2 >= phi_3.

        phi_0 = exp may underflow to zero for very negative z, so only its
        bound is non-strict.
        """
        p0, p1, p2, p3 = phi_functions(z)
        assert 0.0 <= p0 <= 1.0
        assert 0.0 < p3 <= p2 <= p1 <= 1.0


class TestStepperConfig:
    def test_defaults(self):
        cfg = StepperConfig(dt=0.5)
        assert cfg.scheme == SCHEME_ETDRK4
        assert cfg.t_end == 1.0
        assert cfg.sample_every == 1
        assert cfg.max_steps == 10_000_000
        assert cfg.allow_large_dt is False

    @pytest.mark.parametrize(
        "kwargs, match",
        [
            ({"dt": 0.0}, "dt must be positive"),
            ({"dt": -0.1}, "dt must be positive"),
            ({"dt": 0.1, "scheme": "rk4"}, "scheme must be one of"),
            ({"dt": 0.1, "t_end": -1.0}, "t_end must be >= 0"),
            ({"dt": 0.1, "sample_every": 0}, "sample_every must be >= 1"),
            ({"dt": 0.1, "max_steps": 0}, "max_steps must be >= 1"),
        ],
    )
    def test_validation(self, kwargs, match):
        with pytest.raises(ValueError, match=match):
            StepperConfig(**kwargs)

    @pytest.mark.parametrize(
        "dt, t_end, expected",
        [(1e-4, 5.0, 50_000), (0.3, 1.0, 3), (0.1, 0.0, 0), (0.25, 1.0, 4)],
    )
    def test_n_steps_rounds(self, dt, t_end, expected):
        assert StepperConfig(dt=dt, t_end=t_end).n_steps == expected

    def test_frozen(self):
        cfg = StepperConfig(dt=0.1)
        with pytest.raises(dataclasses.FrozenInstanceError):
            cfg.dt = 0.2


class TestDtGuard:
    def test_zero_field_gives_linear_scale(self):
        grid = GridSpec.create(1, 4)
        assert dt_guard(ModelConfig(EXPONENTIAL, grid), zero_field(grid)) == 0.5
        assert dt_guard(ModelConfig(ADL, grid), zero_field(grid)) == 0.5 / 3.0

    def test_shrinks_with_amplitude(self):
        grid = GridSpec.create(1, 8)
        cfg = ModelConfig(EXPONENTIAL, grid)
        small = dt_guard(cfg, field_from_modes(grid, [(1, 0.05, 0.0)]))
        large = dt_guard(cfg, field_from_modes(grid, [(1, 0.6, 0.0)]))
        assert 0.0 < large < small


class TestIntegrate:
    @pytest.mark.parametrize("kind", [EXPONENTIAL, ADL])
    @pytest.mark.parametrize("scheme", [SCHEME_ETD1, SCHEME_ETDRK4])
    def test_linear_flow_exact(self, kind, scheme):
        """With the nonlinearity forced to zero each mode decays by its
        exact propagator, so the discrete flow reproduces exp(-c k^4 t)
        up to accumulated rounding over the steps."""
        grid = GridSpec.create(1, 6)
        v0 = field_from_modes(grid, [(1, 0.2, 0.0), (3, 0.1, 1.1)])
        cfg = ModelConfig(kind, grid)
        dt, n = 0.01, 100
        # The guard probes the real nonlinearity, which the override then
        # silences, so its recommendation is irrelevant here.
        scfg = StepperConfig(dt=dt, scheme=scheme, t_end=dt * n, allow_large_dt=True)
        state = integrate(cfg, scfg, v0, nonlinearity=lambda c: np.zeros_like(c))
        k4 = grid.wavenumbers.astype(float) ** 4
        want = v0.coeffs * np.exp(-cfg.linear_coefficient * k4 * dt) ** n
        assert state.t == pytest.approx(dt * n)
        assert np.all(np.abs(state.v.coeffs - want) <= 1e-12 * np.abs(want) + 1e-300)

    def test_schemes_agree_on_pure_linear_flow(self):
        """Zero nonlinearity reduces both schemes to the same propagator."""
        grid = GridSpec.create(1, 5)
        v0 = field_from_modes(grid, [(2, 0.3, 0.7)])
        cfg = ModelConfig(EXPONENTIAL, grid)
        zero = lambda c: np.zeros_like(c)
        finals = [
            integrate(cfg, StepperConfig(dt=0.02, scheme=s, t_end=0.5), v0,
                      nonlinearity=zero).v.coeffs
            for s in (SCHEME_ETD1, SCHEME_ETDRK4)
        ]
        assert np.array_equal(finals[0], finals[1])

    @pytest.mark.parametrize("kind", [EXPONENTIAL, ADL])
    def test_zero_field_stays_zero(self, kind):
        grid = GridSpec.create(1, 6)
        cfg = ModelConfig(kind, grid)
        state = integrate(cfg, StepperConfig(dt=0.05, t_end=1.0), zero_field(grid))
        assert np.all(state.v.coeffs == 0.0)
        assert state.step_count == 20

    def test_observer_cadence(self):
        """The observer fires at step 0, every sample_every steps, and at
        the final step, with times equal to step index times dt."""
        grid = GridSpec.create(1, 4)
        v0 = field_from_modes(grid, [(1, 0.1, 0.0)])
        cfg = ModelConfig(EXPONENTIAL, grid)
        dt = 0.01
        seen = []
        state = integrate(
            cfg,
            StepperConfig(dt=dt, t_end=1.0, sample_every=7),
            v0,
            observer=lambda t, v: seen.append((t, v)),
        )
        expected_steps = [0] + list(range(7, 99, 7)) + [100]
        assert [t for t, _ in seen] == [i * dt for i in expected_steps]
        assert np.array_equal(seen[0][1].coeffs, v0.coeffs)
        assert np.array_equal(seen[-1][1].coeffs, state.v.coeffs)

    def test_mean_coefficient_stays_exactly_zero(self):
        grid = GridSpec.create(1, 8)
        v0 = field_from_modes(grid, [(1, 0.3, 0.0), (2, 0.1, 0.5)])
        cfg = ModelConfig(EXPONENTIAL, grid)
        state = integrate(cfg, StepperConfig(dt=0.01, t_end=0.5), v0)
        assert state.v.coeffs[grid.index_of(0)] == 0.0

    def test_grid_mismatch_rejected(self):
        cfg = ModelConfig(EXPONENTIAL, GridSpec.create(1, 8))
        other = field_from_modes(GridSpec.create(1, 4), [(1, 0.1, 0.0)])
        with pytest.raises(ValueError, match="does not match the model configuration grid"):
            integrate(cfg, StepperConfig(dt=0.01, t_end=0.1), other)

    def test_nonzero_mean_rejected(self):
        grid = GridSpec.create(1, 4)
        coeffs = np.zeros(grid.coeff_shape, dtype=np.complex128)
        coeffs[grid.index_of(0)] = 0.5
        bad = SpectralField(grid, coeffs)
        cfg = ModelConfig(EXPONENTIAL, grid)
        with pytest.raises(ValueError, match="non-zero mean"):
            integrate(cfg, StepperConfig(dt=0.01, t_end=0.1), bad)

    def test_step_budget_enforced(self):
        grid = GridSpec.create(1, 4)
        v0 = field_from_modes(grid, [(1, 0.1, 0.0)])
        cfg = ModelConfig(EXPONENTIAL, grid)
        with pytest.raises(ValueError, match="exceeding max_steps=1000"):
            integrate(cfg, StepperConfig(dt=1e-5, t_end=1.0, max_steps=1000), v0)

    def test_dt_guard_refusal_and_override(self):
        grid = GridSpec.create(1, 4)
        v0 = field_from_modes(grid, [(1, 0.2, 0.0)])
        cfg = ModelConfig(EXPONENTIAL, grid)
        dt = 1.5 * DT_GUARD_HEADROOM * dt_guard(cfg, v0)
        with pytest.raises(ValueError, match="allow_large_dt"):
            integrate(cfg, StepperConfig(dt=dt, t_end=dt), v0)
        state = integrate(
            cfg, StepperConfig(dt=dt, t_end=dt, allow_large_dt=True), v0
        )
        assert state.step_count == 1

    def test_bitwise_deterministic(self):
        grid = GridSpec.create(1, 10)
        v0 = field_from_modes(grid, [(1, 0.2, 0.0), (4, 0.05, 0.9)])
        cfg = ModelConfig(ADL, grid)
        scfg = StepperConfig(dt=2e-4, t_end=0.01)
        first = integrate(cfg, scfg, v0)
        second = integrate(cfg, scfg, v0)
        assert np.array_equal(first.v.coeffs, second.v.coeffs)

    def test_step_matches_single_step_integrate(self):
        grid = GridSpec.create(1, 6)
        v0 = field_from_modes(grid, [(2, 0.15, 0.3)])
        cfg = ModelConfig(ADL, grid)
        scfg = StepperConfig(dt=1e-3, t_end=1e-3)
        via_step = step(cfg, scfg, TrajectoryState(0.0, v0, 0))
        via_integrate = integrate(cfg, scfg, v0)
        assert via_step.t == via_integrate.t
        assert via_step.step_count == via_integrate.step_count == 1
        assert np.array_equal(via_step.v.coeffs, via_integrate.v.coeffs)

    def test_singular_initial_state_reports_time_zero(self):
        """Initial data touching 1 + v <= 0 fails the admissibility probe
        before the first step, tagged with time zero."""
        grid = GridSpec.create(1, 8)
        v0 = field_from_modes(grid, [(1, 1.5, 0.0)])
        cfg = ModelConfig(ADL, grid)
        with pytest.raises(SingularityError) as exc:
            integrate(cfg, StepperConfig(dt=1e-3, t_end=0.1), v0)
        assert exc.value.time == 0.0

    def test_mid_run_singularity_tagged_with_step_time(self):
        """A blow-up raised inside the loop carries the time of the step
        being advanced."""
        grid = GridSpec.create(1, 4)
        v0 = field_from_modes(grid, [(1, 0.1, 0.0)])
        cfg = ModelConfig(ADL, grid)
        dt = 0.01
        calls = {"n": 0}

        def explode(c):
            calls["n"] += 1
            if calls["n"] > 5:
                raise SingularityError("synthetic blow-up")
            return np.zeros_like(c)

        with pytest.raises(SingularityError) as exc:
            integrate(
                cfg,
                StepperConfig(dt=dt, scheme=SCHEME_ETD1, t_end=1.0),
                v0,
                nonlinearity=explode,
            )
        assert exc.value.time == 5 * dt


class TestDilationSymmetry:
    """Both equations commute with x -> 2x, t -> 16t on the torus.

    Doubling the wavenumber of the initial data, the mode count, and the
    collocation resolution while cutting dt by 16 must reproduce the coarse
    trajectory on the even modes, because every per-mode propagator argument
    and every collocation sample is reproduced exactly.
    """

    @pytest.mark.parametrize("kind", [EXPONENTIAL, ADL])
    def test_half_period_equivalence(self, kind):
        coarse_grid = GridSpec(1, 4, 20, padding_factor=1.0)
        fine_grid = GridSpec(1, 8, 40, padding_factor=1.0)
        amplitude = 0.25
        coarse0 = field_from_modes(coarse_grid, [(1, amplitude, 0.0)])
        fine0 = field_from_modes(fine_grid, [(2, amplitude, 0.0)])
        h, n = 1e-3, 5
        coarse = integrate(
            ModelConfig(kind, coarse_grid),
            StepperConfig(dt=16 * h, t_end=16 * h * n),
            coarse0,
        )
        fine = integrate(
            ModelConfig(kind, fine_grid),
            StepperConfig(dt=h, t_end=h * n),
            fine0,
        )
        for k in range(-4, 5):
            assert abs(fine.v.coeff(2 * k) - coarse.v.coeff(k)) < 1e-15
        for k in range(-7, 8, 2):
            assert abs(fine.v.coeff(k)) < 1e-15


class TestConvergenceOrder:
    """Observed orders against a fine reference on a smooth short run."""

    GRID = GridSpec.create(1, 4)
    MODES = [(1, 0.4, 0.0), (2, 0.1, 0.3)]
    T = 0.25

    def final_state(self, scheme, dt):
        cfg = ModelConfig(EXPONENTIAL, self.GRID)
        v0 = field_from_modes(self.GRID, self.MODES)
        return integrate(cfg, StepperConfig(dt=dt, scheme=scheme, t_end=self.T), v0).v.coeffs

    def observed_orders(self, scheme, dts):
        ref = self.final_state(SCHEME_ETDRK4, self.T / 5120)
        errors = [float(np.max(np.abs(self.final_state(scheme, dt) - ref))) for dt in dts]
        return [math.log2(errors[i] / errors[i + 1]) for i in range(len(errors) - 1)]

    def test_etdrk4_is_fourth_order(self):
        orders = self.observed_orders(SCHEME_ETDRK4, [self.T / 80, self.T / 160, self.T / 320])
        for order in orders:
            assert 3.7 < order < 4.3

    def test_etd1_is_first_order(self):
        orders = self.observed_orders(SCHEME_ETD1, [self.T / 50, self.T / 100, self.T / 200])
        for order in orders:
            assert 0.8 < order < 1.2
