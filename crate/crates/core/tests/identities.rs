mod common;

use common::random_operator;
use eevconv_core::convergence::{
    eev_fluctuation_profile, fit_target, pooled_objective, r_f, weak_eth_statistic, TargetFunction,
};
use eevconv_core::model::mixed_field_ising;
use eevconv_core::pauli::{
    canonicalize, ham2_op_trace, ham_moment, ham_op_trace, obstruction_residual, witness_operator,
    ChainContext, LocalOperator,
};
use eevconv_core::spectra::{eev_table, HamiltonianSpec, Observable, SpectrumTable};
use eevconv_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn table(h: &LocalOperator, n: usize, obs: &[(&str, LocalOperator)]) -> SpectrumTable {
    let spec = HamiltonianSpec::new(h, n).unwrap();
    let obs: Vec<Observable> = obs.iter().map(|(id, op)| Observable::new(*id, op.clone())).collect();
    eev_table(&spec, &obs).unwrap()
}

#[test]
fn traces_do_not_depend_on_chain_length_inside_their_windows() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..6 {
        let k = rng.random_range(1..=3);
        let kp = rng.random_range(1..=3);
        let h = random_operator(&mut rng, k, 3);
        let a = random_operator(&mut rng, kp, 3);
        let lin0 = ChainContext::linear_trace_min_n(k, kp).max(k);
        let quad0 = ChainContext::quadratic_trace_min_n(k, kp).max(k).max(kp);
        let at = |n: usize| ChainContext::new(n, k).unwrap();
        let ref_lin = ham_op_trace(&h, &a, &at(lin0.max(kp))).unwrap();
        let ref_quad = ham2_op_trace(&h, &a, &at(quad0)).unwrap();
        for n in quad0..quad0 + 8 {
            assert!((ham_op_trace(&h, &a, &at(n)).unwrap() - ref_lin).norm() < 1e-12);
            assert!((ham2_op_trace(&h, &a, &at(n)).unwrap() - ref_quad).norm() < 1e-12);
        }
    }
}

#[test]
fn spectral_sums_reproduce_symbolic_traces() {
    let h = mixed_field_ising(1.05, 0.5);
    let a: LocalOperator = "X1 + 0.4*Y1Y2 - 0.7*Z1X2Z3".parse().unwrap();
    let n = 8;
    let t = table(&h, n, &[("a", a.clone())]);
    let ctx = ChainContext::new(n, 2).unwrap();
    assert!((t.weighted_eev_moment("a", 1).unwrap() - ham_op_trace(&h, &a, &ctx).unwrap()).norm() < 1e-10);
    assert!((t.weighted_eev_moment("a", 2).unwrap() - ham2_op_trace(&h, &a, &ctx).unwrap()).norm() < 1e-10);
    for m in 1..=4 {
        let expected = ham_moment(&h, &ctx, m as u32).unwrap();
        assert!((t.energy_moment(m) - expected).abs() < 1e-9 * expected.abs().max(1.0));
    }
    let zero = TargetFunction::zero();
    assert!((r_f(&t, "a", &zero).unwrap().powi(2) - weak_eth_statistic(&t, "a").unwrap()).abs() < 1e-14);
}

#[test]
fn canonical_form_has_identical_eev_in_translation_eigenstates() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = mixed_field_ising(0.9, 0.3);
    for _ in 0..3 {
        let raw = random_operator(&mut rng, 3, 4);
        // Shift every term away from site 1 so canonicalization has work to do.
        let moved: Vec<(Complex64, _)> = raw
            .terms()
            .iter()
            .map(|(c, s)| (*c, s.translate(2, 5)))
            .collect();
        let a = LocalOperator::new(5, moved).unwrap();
        let c = canonicalize(&a);
        let t = table(&h, 7, &[("raw", a), ("canonical", c)]);
        for e in &t.entries {
            assert!((e.eev[0] - e.eev[1]).norm() < 1e-10);
        }
    }
}

#[test]
fn pooled_fit_beats_random_polynomials() {
    let h = mixed_field_ising(1.05, 0.5);
    let a: LocalOperator = "X1".parse().unwrap();
    let tables: Vec<SpectrumTable> = (6..=8).map(|n| table(&h, n, &[("a", a.clone())])).collect();
    let refs: Vec<&SpectrumTable> = tables.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for degree in [1, 3] {
        let best = fit_target(&refs, "a", degree, None).unwrap();
        let best_obj = pooled_objective(&refs, "a", &best, None).unwrap();
        for _ in 0..100 {
            let perturbed: Vec<f64> = best
                .coefficients()
                .iter()
                .map(|c| c + rng.random_range(-0.2..0.2))
                .collect();
            let other = TargetFunction::new(perturbed).unwrap();
            assert!(pooled_objective(&refs, "a", &other, None).unwrap() >= best_obj - 1e-14);
        }
    }
}

#[test]
fn witness_deviations_respect_the_trace_identity_bound() {
    // With δ_j = EEV_j − f(E_j/N), the traces fix Σ E_j δ_j and Σ E_j² δ_j;
    // Cauchy–Schwarz then bounds r_f from below at every size.
    let h = mixed_field_ising(1.05, 0.5);
    let w = witness_operator(&h).unwrap();
    let ctx = ChainContext::new(8, 2).unwrap();
    assert!(obstruction_residual(&h, &w.operator, &ctx).unwrap().norm() > 1.0);
    let c1 = ham_op_trace(&h, &w.operator, &ctx).unwrap().re;
    let c2 = ham2_op_trace(&h, &w.operator, &ctx).unwrap().re;
    let tables: Vec<SpectrumTable> = (8..=11).map(|n| table(&h, n, &[("w", w.operator.clone())])).collect();
    let refs: Vec<&SpectrumTable> = tables.iter().collect();
    let f = fit_target(&refs, "w", 3, None).unwrap();
    for t in &tables {
        let n = t.n as f64;
        let es: Vec<f64> = t.energies().collect();
        let mean = |g: &dyn Fn(f64) -> f64| es.iter().map(|e| g(*e)).sum::<f64>() / es.len() as f64;
        let u = c1 - mean(&|e| e * f.eval(e / n));
        let v = c2 - mean(&|e| e * e * f.eval(e / n));
        let (m2, m3, m4) = (mean(&|e| e * e), mean(&|e| e.powi(3)), mean(&|e| e.powi(4)));
        let lambda = m3 / m2;
        let bound = (v - lambda * u).abs() / (m4 - 2.0 * lambda * m3 + lambda * lambda * m2).sqrt();
        let r = r_f(t, "w", &f).unwrap();
        assert!(r >= bound - 1e-12, "N={}: {r} < {bound}", t.n);
    }
}

#[test]
fn fluctuations_shrink_with_size_in_the_spectral_bulk() {
    let h = mixed_field_ising(1.05, 0.5);
    let a: LocalOperator = "X1".parse().unwrap();
    let central = |n: usize| {
        let t = table(&h, n, &[("a", a.clone())]);
        // Bins of fixed energy-density width.
        let width = 0.1 * n as f64;
        let profile = eev_fluctuation_profile(&t, "a", width).unwrap();
        profile
            .iter()
            .min_by(|x, y| x.0.abs().total_cmp(&y.0.abs()))
            .unwrap()
            .1
    };
    let (small, large) = (central(8), central(12));
    // First-run values: 0.045093 at N = 8, 0.020443 at N = 12.
    assert!((small - 0.045093).abs() < 1e-5, "{small}");
    assert!((large - 0.020443).abs() < 1e-5, "{large}");
    assert!(large < small);
}
