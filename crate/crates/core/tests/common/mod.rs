#![allow(dead_code)]

use eevconv_core::pauli::{LocalOperator, Pauli, PauliString};
use eevconv_core::Complex64;
use faer::{c64, Mat};
use rand::Rng;

fn single_site(letter: Option<Pauli>) -> Mat<c64> {
    let z = c64::new(0.0, 0.0);
    let one = c64::new(1.0, 0.0);
    let i = c64::new(0.0, 1.0);
    let entries = match letter {
        None => [[one, z], [z, one]],
        Some(Pauli::X) => [[z, one], [one, z]],
        Some(Pauli::Y) => [[z, -i], [i, z]],
        Some(Pauli::Z) => [[one, z], [z, -one]],
    };
    Mat::from_fn(2, 2, |r, c| entries[r][c])
}

fn kron(a: &Mat<c64>, b: &Mat<c64>) -> Mat<c64> {
    let (br, bc) = (b.nrows(), b.ncols());
    Mat::from_fn(a.nrows() * br, a.ncols() * bc, |r, c| a[(r / br, c / bc)] * b[(r % br, c % bc)])
}

/// Dense matrix of a string on `n` sites, site 1 as the least significant
/// tensor factor.
pub fn dense_string(s: &PauliString, n: usize) -> Mat<c64> {
    let mut out = single_site(s.letter(n));
    for site in (1..n).rev() {
        out = kron(&out, &single_site(s.letter(site)));
    }
    out
}

fn to_c64(c: Complex64) -> c64 {
    c64::new(c.re, c.im)
}

pub fn dense_local(op: &LocalOperator, n: usize) -> Mat<c64> {
    let d = 1usize << n;
    let mut out = Mat::<c64>::zeros(d, d);
    for (c, s) in op.terms() {
        out += dense_string(s, n) * faer::Scale(to_c64(*c));
    }
    out
}

/// `Σ_l T^l h T^-l` built term by term from translated strings.
pub fn dense_hamiltonian(h: &LocalOperator, n: usize) -> Mat<c64> {
    let d = 1usize << n;
    let mut out = Mat::<c64>::zeros(d, d);
    for l in 0..n {
        for (c, s) in h.terms() {
            out += dense_string(&s.translate(l as i64, n), n) * faer::Scale(to_c64(*c));
        }
    }
    out
}

/// tr(AB)/d.
pub fn normalized_trace_product(a: &Mat<c64>, b: &Mat<c64>) -> Complex64 {
    let d = a.nrows();
    let mut t = c64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            t += a[(i, j)] * b[(j, i)];
        }
    }
    Complex64::new(t.re, t.im) / d as f64
}

/// Random Hermitian, traceless operator in window `k` with real weights.
pub fn random_operator<R: Rng>(rng: &mut R, k: usize, terms: usize) -> LocalOperator {
    let letters = [None, Some(Pauli::X), Some(Pauli::Y), Some(Pauli::Z)];
    let mut out = Vec::new();
    while out.len() < terms {
        let sites: Vec<(usize, Pauli)> = (1..=k)
            .filter_map(|site| letters[rng.random_range(0..4)].map(|l| (site, l)))
            .collect();
        if sites.is_empty() {
            continue;
        }
        let s = PauliString::from_sites(sites).unwrap();
        out.push((Complex64::new(rng.random_range(-1.0..1.0), 0.0), s));
    }
    LocalOperator::new(k, out).unwrap()
}
