use fredholm::grid::{cell_means, w1_oscillation, w2_modulus};
use fredholm::{CellVector, Function1D, Integrable1D, PiecewiseConstant, UniformGrid};
use proptest::prelude::*;

fn step_function() -> impl Strategy<Value = PiecewiseConstant> {
    (1usize..8)
        .prop_flat_map(|k| {
            (
                prop::collection::vec(0.01f64..1.0, k),
                prop::collection::vec(-5.0f64..5.0, k),
            )
        })
        .prop_map(|(widths, values)| {
            let total: f64 = widths.iter().sum();
            let mut breaks = vec![0.0];
            let mut acc = 0.0;
            for w in &widths[..widths.len() - 1] {
                acc += w / total;
                breaks.push(acc);
            }
            breaks.push(1.0);
            PiecewiseConstant::new(breaks, values).unwrap()
        })
}

fn step_l1(f: &PiecewiseConstant, breaks: &[f64]) -> f64 {
    breaks
        .windows(2)
        .map(|w| (w[1] - w[0]) * f.eval(0.5 * (w[0] + w[1])).abs())
        .sum()
}

fn breaks_of(f: &PiecewiseConstant) -> Vec<f64> {
    let mut b = vec![0.0];
    b.extend(f.jumps());
    b.push(1.0);
    b
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projection_is_idempotent(values in prop::collection::vec(-1e3f64..1e3, 1..40)) {
        let g = UniformGrid::new(-1.0, 2.0, values.len()).unwrap();
        let c = CellVector::new(g, values).unwrap();
        let again = cell_means(&c, &g).unwrap();
        prop_assert_eq!(again.values(), c.values());
    }

    #[test]
    fn projection_contracts_l1(f in step_function(), n in 1usize..60) {
        let g = UniformGrid::new(0.0, 1.0, n).unwrap();
        let proj = cell_means(&f, &g).unwrap();
        prop_assert!(proj.l1_norm() <= step_l1(&f, &breaks_of(&f)) * (1.0 + 1e-12) + 1e-14);
    }

    #[test]
    fn projection_contracts_l1_for_affine(slope in -4.0f64..4.0, icpt in -2.0f64..2.0, n in 1usize..60) {
        let f = Function1D::new(move |s| slope * s + icpt);
        let g = UniformGrid::new(0.0, 1.0, n).unwrap();
        let proj = cell_means(&f, &g).unwrap();
        // ∫_0^1 |slope s + icpt| ds, split at the root
        let prim = |s: f64| 0.5 * slope * s * s + icpt * s;
        let root = if slope != 0.0 { -icpt / slope } else { -1.0 };
        let exact = if root > 0.0 && root < 1.0 {
            (prim(root) - prim(0.0)).abs() + (prim(1.0) - prim(root)).abs()
        } else {
            (prim(1.0) - prim(0.0)).abs()
        };
        prop_assert!(proj.l1_norm() <= exact + 1e-12);
    }

    #[test]
    fn w1_is_monotone_in_h(f in step_function(), h1 in 0.0f64..0.3, r in 0.0f64..1.0) {
        let h2 = h1 * (1.0 + r) + 1e-3;
        let w_small = w1_oscillation(&f, 0.0, 1.0, h1).unwrap();
        let w_large = w1_oscillation(&f, 0.0, 1.0, h2).unwrap();
        prop_assert!(w_small <= w_large * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn w2_is_monotone_in_h(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, h1 in 0.0f64..0.3, r in 0.0f64..1.0) {
        let f = move |s: f64, t: f64| a * s + b * t + c * s * t;
        let h2 = h1 * (1.0 + r) + 1e-3;
        let w_small = w2_modulus(f, 0.0, 1.0, h1).unwrap();
        let w_large = w2_modulus(f, 0.0, 1.0, h2).unwrap();
        prop_assert!(w_small <= w_large * (1.0 + 1e-9) + 1e-12);
    }
}

#[test]
fn moduli_vanish_at_zero_shift() {
    let f = Function1D::new(|s| (3.0 * s).sin());
    assert_eq!(w1_oscillation(&f, 0.0, 1.0, 0.0).unwrap(), 0.0);
    assert_eq!(w2_modulus(|s, t| s * t, 0.0, 1.0, 0.0).unwrap(), 0.0);
    assert!(w1_oscillation(&f, 0.0, 1.0, -0.1).is_err());
}

#[test]
fn smooth_means_match_antiderivative() {
    let f = Function1D::new(|s: f64| s.exp());
    let g = UniformGrid::new(0.0, 2.0, 7).unwrap();
    let m = cell_means(&f, &g).unwrap();
    for i in 0..7 {
        let (lo, hi) = g.cell(i);
        let exact = (hi.exp() - lo.exp()) / (hi - lo);
        assert!((m.values()[i] - exact).abs() <= 1e-12 * exact);
    }
}
