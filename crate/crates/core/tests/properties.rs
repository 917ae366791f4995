use fastlim_core::diagnostics::{fit_rate, lp_norm_spacetime};
use fastlim_core::io::{read_snapshot, write_snapshot};
use fastlim_core::kinetics::{phi, quadratic_residual, reaction_fast, slow_manifold_residual};
use fastlim_core::{
    diffusion_step, fast_reaction_pointwise_solve, DiffusionScheme, FastState, Field, Grid, LimitState, Parameters, PointState,
    Trajectory,
};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = Parameters> {
    (0.1f64..5.0, prop_oneof![Just(0.0), 1e-3f64..20.0], 0.1f64..5.0, 0.0f64..3.0, 0.0f64..3.0, 1e-6f64..1.0).prop_map(
        |(alpha, xi, gamma, big_gamma, mu, eps)| Parameters { alpha, xi, gamma, big_gamma, mu, eps, ..Parameters::default() },
    )
}

fn grid() -> impl Strategy<Value = Grid> {
    prop_oneof![
        (4usize..40, 0.5f64..3.0).prop_map(|(n, l)| Grid::new_1d(l, n).unwrap()),
        (4usize..12, 4usize..12).prop_map(|(nx, ny)| Grid::new_2d([1.0, 1.5], [nx, ny]).unwrap()),
    ]
}

fn field(g: Grid, hi: f64) -> impl Strategy<Value = Field> {
    prop::collection::vec(0.0..hi, g.len()).prop_map(move |v| Field::new(g, v).unwrap())
}

fn fast_state() -> impl Strategy<Value = FastState> {
    grid().prop_flat_map(|g| (field(g, 5.0), field(g, 5.0), field(g, 5.0), 0.0f64..10.0))
        .prop_map(|(n, ps, ph, t)| FastState { t, n, ps, ph })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn phi_is_a_bounded_root(prm in params(), n in 0.0f64..10.0, p in 0.0f64..10.0) {
        let ph = phi(n, p, &prm).unwrap();
        prop_assert!(ph >= 0.0 && ph <= p);
        if prm.xi > 0.0 {
            prop_assert!(ph <= prm.alpha * n / (prm.gamma * prm.xi));
            let r = quadratic_residual(ph, n, p, &prm).unwrap();
            prop_assert!(r.abs() <= 1e-12 * (1.0 + prm.alpha * n * p), "residual {r}");
        } else {
            prop_assert!(quadratic_residual(ph, n, p, &prm).is_err());
        }
    }

    #[test]
    fn manifold_states_have_zero_residual(prm in params(), n in 0.0f64..10.0, p in 0.0f64..10.0) {
        let ph = phi(n, p, &prm).unwrap();
        let r = slow_manifold_residual(PointState::new(n, p - ph, ph), &prm).unwrap();
        prop_assert!(r.abs() <= 1e-12 * (1.0 + prm.alpha * n * p), "residual {r}");
    }

    #[test]
    fn switching_terms_cancel(prm in params(), n in 0.0f64..10.0, ps in 0.0f64..10.0, ph in 0.0f64..10.0) {
        let closed = Parameters { mu: 0.0, big_gamma: 0.0, ..prm };
        let (_, dps, dph) = reaction_fast(PointState::new(n, ps, ph), &closed).unwrap();
        prop_assert_eq!(dps + dph, 0.0);
    }

    #[test]
    fn exchange_stays_in_bracket_and_is_monotone_in_k(
        prm in params(),
        s in 0.0f64..10.0,
        n in 0.0f64..10.0,
        frac in 0.0f64..=1.0,
        k in 0.0f64..1e6,
    ) {
        let ph_old = frac * s;
        let ph = fast_reaction_pointwise_solve(s, n, ph_old, k, &prm).unwrap();
        prop_assert!(ph >= 0.0 && ph <= s);
        let target = fast_reaction_pointwise_solve(s, n, ph_old, f64::INFINITY, &prm).unwrap();
        // Backward Euler moves ph towards the manifold value without overshoot.
        let (lo, hi) = if ph_old <= target { (ph_old, target) } else { (target, ph_old) };
        let slack = 1e-12 * (1.0 + s);
        prop_assert!(ph >= lo - slack && ph <= hi + slack, "{ph} outside [{lo}, {hi}]");
    }

    #[test]
    fn diffusion_keeps_mean_and_sign(
        f in grid().prop_flat_map(|g| field(g, 3.0)),
        d in 0.0f64..1.0,
        dt in 1e-5f64..1e-1,
        implicit in any::<bool>(),
    ) {
        let scheme = if implicit { DiffusionScheme::Implicit } else { DiffusionScheme::CrankNicolson };
        let Ok(u) = diffusion_step(&f, d, dt, scheme) else {
            // Crank-Nicolson refuses steps that could break positivity.
            prop_assert!(!implicit);
            return Ok(());
        };
        let mean = |x: &Field| x.values().iter().sum::<f64>() / x.values().len() as f64;
        prop_assert!((mean(&u) - mean(&f)).abs() <= 1e-13 * (1.0 + mean(&f)));
        prop_assert!(u.min() >= 0.0);
        prop_assert!(u.max() <= f.max() * (1.0 + 1e-14));
    }

    #[test]
    fn spacetime_norm_is_homogeneous_and_monotone(
        values in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 12), 2..8),
        c in -5.0f64..5.0,
        p in 1.0f64..4.0,
    ) {
        let g = Grid::new_1d(1.0, 12).unwrap();
        let traj = Trajectory {
            snapshots: values
                .iter()
                .enumerate()
                .map(|(k, v)| LimitState { t: 0.1 * k as f64, n: Field::new(g, v.clone()).unwrap(), p: Field::constant(g, 0.0) })
                .collect(),
            steps: values.len() - 1,
        };
        let base = lp_norm_spacetime(&traj, |s: &LimitState| s.n.values().to_vec(), p).unwrap();
        let scaled = lp_norm_spacetime(&traj, |s: &LimitState| s.n.values().iter().map(|x| c * x).collect(), p).unwrap();
        prop_assert!((scaled - c.abs() * base).abs() <= 1e-12 * (1.0 + c.abs() * base));
        let bigger = lp_norm_spacetime(&traj, |s: &LimitState| s.n.values().iter().map(|x| x.abs() + 0.1).collect(), p).unwrap();
        prop_assert!(bigger >= base);
    }

    #[test]
    fn rate_slope_ignores_residual_scale(
        slope in 0.05f64..2.0,
        c0 in -3.0f64..3.0,
        noise in prop::collection::vec(-0.05f64..0.05, 5),
        scale in 1e-6f64..1e6,
    ) {
        let samples: Vec<(f64, f64)> = (0..5)
            .map(|i| {
                let eps = 10f64.powi(-(i as i32) - 1);
                (eps, (c0 + slope * eps.ln() + noise[i]).exp())
            })
            .collect();
        let scaled: Vec<(f64, f64)> = samples.iter().map(|&(e, r)| (e, scale * r)).collect();
        let a = fit_rate(&samples, false).unwrap();
        let b = fit_rate(&scaled, false).unwrap();
        prop_assert!((a.slope - b.slope).abs() <= 1e-12, "{} vs {}", a.slope, b.slope);
        prop_assert!((b.intercept - a.intercept - scale.ln()).abs() <= 1e-9);
    }

    #[test]
    fn snapshots_round_trip_bit_exactly(st in fast_state(), bits in prop::collection::vec(any::<u64>(), 3)) {
        // Mix in arbitrary finite nonnegative bit patterns, subnormals included.
        let mut st = st;
        let len = st.n.values().len();
        for (k, b) in bits.iter().enumerate() {
            st.n.values_mut()[k % len] = f64::from_bits(b & 0x7fef_ffff_ffff_ffff);
        }
        let text = write_snapshot(&st, &Parameters::default());
        let (back, header) = read_snapshot::<FastState>(&text).unwrap();
        prop_assert_eq!(back.t.to_bits(), st.t.to_bits());
        prop_assert_eq!(header.grid, *st.n.grid());
        for (a, b) in [(&back.n, &st.n), (&back.ps, &st.ps), (&back.ph, &st.ph)] {
            let x: Vec<u64> = a.values().iter().map(|v| v.to_bits()).collect();
            let y: Vec<u64> = b.values().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(x, y);
        }
    }
}
