use eevconv_core::convergence::TargetFunction;
use eevconv_core::freefermion::{sample_r_f, Bilinear, TfimChain};
use eevconv_core::spectra::{diagonalize, eev_table, HamiltonianSpec, Observable};

fn clusters(mut v: Vec<(f64, usize, f64)>) -> Vec<(f64, usize, usize, f64)> {
    // (energy, momentum, multiplicity, summed eev)
    v.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.total_cmp(&b.0)));
    let mut out: Vec<(f64, usize, usize, f64)> = Vec::new();
    for (e, p, x) in v {
        match out.last_mut() {
            Some(last) if last.1 == p && (last.0 - e).abs() < 1e-7 => {
                last.2 += 1;
                last.3 += x;
            }
            _ => out.push((e, p, 1, x)),
        }
    }
    out
}

#[test]
fn spectrum_and_momenta_match_spin_diagonalization() {
    for (n, g) in [(6, 0.7), (8, 1.3), (10, 0.45), (8, 1.0)] {
        let chain = TfimChain::new(n, g).unwrap();
        let spec = HamiltonianSpec::new(&chain.local_term(), n).unwrap();
        let table = diagonalize(&spec).unwrap();
        let mut spins: Vec<f64> = table.energies().collect();
        let mut fermions: Vec<f64> = chain
            .enumerate(Bilinear::transverse_field())
            .unwrap()
            .iter()
            .map(|s| s.energy)
            .collect();
        assert_eq!(spins.len(), fermions.len());
        spins.sort_by(f64::total_cmp);
        fermions.sort_by(f64::total_cmp);
        for (a, b) in spins.iter().zip(&fermions) {
            assert!((a - b).abs() < 1e-8, "N={n} g={g}: {a} vs {b}");
        }
        let a = clusters(table.entries.iter().map(|e| (e.energy, e.momentum, 0.0)).collect());
        let b = clusters(
            chain
                .enumerate(Bilinear::transverse_field())
                .unwrap()
                .iter()
                .map(|s| (s.energy, s.momentum, 0.0))
                .collect(),
        );
        assert_eq!(a.len(), b.len(), "N={n} g={g}");
        for (x, y) in a.iter().zip(&b) {
            assert_eq!((x.1, x.2), (y.1, y.2), "N={n} g={g}");
            assert!((x.0 - y.0).abs() < 1e-8);
        }
    }
}

#[test]
fn bilinear_eev_match_spin_diagonalization() {
    let (n, g) = (8, 0.7);
    let chain = TfimChain::new(n, g).unwrap().normalized();
    let spec = HamiltonianSpec::new(&chain.local_term(), n).unwrap();
    for obs in [Bilinear::transverse_field(), Bilinear { zz: 1.0, x: 0.0 }, Bilinear { zz: 0.3, x: -1.2 }] {
        let table = eev_table(&spec, &[Observable::new("a", obs.to_local())]).unwrap();
        let a = clusters(
            table
                .entries
                .iter()
                .map(|e| (e.energy, e.momentum, e.eev[0].re))
                .collect(),
        );
        let b = clusters(
            chain
                .enumerate(obs)
                .unwrap()
                .iter()
                .map(|s| (s.energy, s.momentum, s.eev))
                .collect(),
        );
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!((x.1, x.2), (y.1, y.2));
            assert!((x.3 - y.3).abs() < 1e-9, "{x:?} vs {y:?}");
        }
    }
}

#[test]
fn sampled_estimate_agrees_with_enumeration() {
    let chain = TfimChain::new(12, 0.8).unwrap().normalized();
    let obs = Bilinear::transverse_field();
    let f = TargetFunction::linear(-0.9);
    let (exact, l1, weak) = chain.exact_statistics(obs, &f).unwrap();
    let est = sample_r_f(&chain, obs, &f, 40_000, 11).unwrap();
    assert!((est.estimate - exact).abs() < 3.0 * est.stderr, "{est:?} vs {exact}");
    assert!((est.l1 - l1).abs() < 0.05 * l1);
    assert!((est.weak_eth - weak).abs() < 0.05 * weak);
}

#[test]
fn seeded_sampling_is_reproducible() {
    let chain = TfimChain::new(64, 0.8).unwrap().normalized();
    let obs = Bilinear::transverse_field();
    let f = TargetFunction::zero();
    let a = sample_r_f(&chain, obs, &f, 20_000, 5).unwrap();
    let b = sample_r_f(&chain, obs, &f, 20_000, 5).unwrap();
    assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
    assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    let c = sample_r_f(&chain, obs, &f, 20_000, 6).unwrap();
    assert_ne!(a.estimate.to_bits(), c.estimate.to_bits());
}

#[test]
fn standard_error_shrinks_like_inverse_square_root() {
    let chain = TfimChain::new(40, 1.2).unwrap().normalized();
    let obs = Bilinear::transverse_field();
    let f = TargetFunction::linear(0.5);
    let small = sample_r_f(&chain, obs, &f, 20_000, 1).unwrap();
    let large = sample_r_f(&chain, obs, &f, 80_000, 1).unwrap();
    let ratio = large.stderr / small.stderr;
    assert!((ratio - 0.5).abs() < 0.1, "ratio {ratio}");
}
