use proptest::prelude::*;

use nls_lab::conformal::{free_propagate, from_conformal, to_conformal};
use nls_lab::functionals::{pohozaev_of, CoeffTriple, EnergyBreakdown, ModelParams};
use nls_lab::ground_state::{big_f_of_x, f_from_deltas, lambda_reduction, ordering_check, threshold_from_quotient};
use nls_lab::spectral::{eval_profile, make_grid, AnalyticProfile, Field};

fn gaussian(amplitude: f64, width: f64, chirp: f64) -> Field {
    let g = make_grid(1, 256, 48.0).unwrap();
    eval_profile(&g, &AnalyticProfile::gaussian(amplitude, width).with_chirp(chirp)).unwrap().0
}

/// Admissible `(d, q, p)` with `1 + 2/d < q < p < 1 + 4/d`.
fn admissible() -> impl Strategy<Value = ModelParams> {
    (1usize..=3, 0.02f64..0.98, 0.02f64..0.98).prop_map(|(d, a, b)| {
        let (lo, hi) = (1.0 + 2.0 / d as f64, 1.0 + 4.0 / d as f64);
        let q = lo + (hi - lo) * a;
        let p = q + (hi - q) * b;
        ModelParams::scattering(d, q, p).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gaussian_mass_matches_closed_form(amp in 0.2f64..2.0, w in 1.0f64..3.0) {
        let u = gaussian(amp, w, 0.0);
        let exact = AnalyticProfile::gaussian_mass(1, amp, w);
        prop_assert!((u.mass() - exact).abs() <= 1e-12 * exact);
    }

    #[test]
    fn chirp_and_free_flow_preserve_mass(w in 1.0f64..3.0, c in -0.5f64..0.5, t in -2.0f64..2.0) {
        let u = gaussian(1.0, w, 0.0);
        let m = u.mass();
        prop_assert!((u.chirped(c).mass() - m).abs() <= 1e-12 * m);
        let v = free_propagate(&u, t);
        prop_assert!((v.mass() - m).abs() <= 1e-12 * m);
        prop_assert!(free_propagate(&v, -t).distance(&u) <= 1e-12 * m.sqrt());
    }

    #[test]
    fn breakdown_scales_with_amplitude(w in 1.0f64..3.0, s in 0.3f64..3.0) {
        let p = ModelParams::scattering(1, 4.0, 4.5).unwrap();
        let u = gaussian(1.0, w, 0.0);
        let (b, bs) = (EnergyBreakdown::measure(&u, &p), EnergyBreakdown::measure(&u.scaled(s), &p));
        prop_assert!((bs.mass - s * s * b.mass).abs() <= 1e-12 * bs.mass);
        prop_assert!((bs.kinetic - s * s * b.kinetic).abs() <= 1e-12 * bs.kinetic);
        prop_assert!((bs.nq - s.powf(5.0) * b.nq).abs() <= 1e-12 * bs.nq);
        prop_assert!((bs.np - s.powf(5.5) * b.np).abs() <= 1e-12 * bs.np);
    }

    #[test]
    fn conformal_round_trip(w in 1.5f64..2.5, c in -0.1f64..0.1, t in 0.0f64..1.0) {
        let psi = free_propagate(&gaussian(1.0, w, c), t);
        let pair = to_conformal(&psi, t).unwrap();
        prop_assert!((pair.phi.mass() - psi.mass()).abs() <= 1e-8 * psi.mass());
        let back = from_conformal(&pair.phi, pair.tau).unwrap();
        prop_assert!(back.psi.distance(&psi) <= 1e-8 * psi.mass().sqrt());
    }

    #[test]
    fn lambda_and_threshold_are_scale_invariant(
        params in admissible(), a in 0.1f64..3.0, b in 0.1f64..3.0, g in 0.1f64..3.0, s in 0.05f64..20.0,
    ) {
        let c = CoeffTriple::new(a, b, g).unwrap();
        let (l, ls) = (lambda_reduction(&c, &params), lambda_reduction(&c.scaled(s), &params));
        prop_assert!((l - ls).abs() <= 1e-12 * l);
        let (r, rs) = (
            threshold_from_quotient(0.6, &c, &params).unwrap(),
            threshold_from_quotient(0.6, &c.scaled(s), &params).unwrap(),
        );
        prop_assert!((r - rs).abs() <= 1e-12 * r);
        // raising γ lowers the threshold
        let up = threshold_from_quotient(0.6, &CoeffTriple::new(a, b, 1.5 * g).unwrap(), &params).unwrap();
        prop_assert!(up < r);
    }

    #[test]
    fn f_decreasing_and_big_f_above_one(params in admissible(), u in 0.0f64..1.0, v in 0.0f64..1.0, x in 1.0f64..50.0) {
        let (dq, dp) = (params.delta_q(), params.delta_p());
        let (a1, a2) = (dq + (1.0 - dq) * u.min(v), dq + (1.0 - dq) * u.max(v));
        prop_assume!(a2 - a1 > 1e-6);
        prop_assert!(f_from_deltas(a1, dq, dp) > f_from_deltas(a2, dq, dp));
        let fx = big_f_of_x(x, &params).unwrap();
        prop_assert!(fx > 1.0);
        prop_assert!(big_f_of_x(x + 1.0, &params).unwrap() < fx);
    }

    #[test]
    fn named_lambdas_are_ordered(params in admissible()) {
        let o = ordering_check(&params).unwrap();
        prop_assert!(o.strictly_decreasing);
        prop_assert!(o.lambda_star > o.lambda_sw && o.lambda_sw > o.lambda_e);
    }

    #[test]
    fn pohozaev_is_dilation_derivative(w in 1.0f64..3.0, h in 1e-4f64..1e-3) {
        // G = d/dλ E(λ^{d/2} u(λ·)) at λ = 1, checked by central differences
        let p = ModelParams::scattering(1, 4.0, 4.5).unwrap();
        let c = CoeffTriple::energy(&p);
        let b = EnergyBreakdown::measure(&gaussian(1.0, w, 0.0), &p);
        let dil = |lam: f64| {
            let bq = lam.powf((p.q - 1.0) / 2.0);
            let bp = lam.powf((p.p - 1.0) / 2.0);
            c.alpha * lam * lam * b.kinetic + c.beta * bq * b.nq - c.gamma * bp * b.np
        };
        let fd = (dil(1.0 + h) - dil(1.0 - h)) / (2.0 * h);
        let g = pohozaev_of(&b, &p, &c);
        prop_assert!((fd - g).abs() <= 1e-5 * b.magnitude(&c));
    }
}
