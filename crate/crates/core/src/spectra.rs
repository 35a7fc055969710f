//! Exact diagonalization of a periodic translation-invariant chain, one
//! momentum sector at a time.
//!
//! Basis state bit `s - 1` holds site `s`. The translation `T` moves site `s`
//! to site `s + 1`, i.e. rotates the bits left by one. A momentum state is
//! `|r, p⟩ = R^{-1/2} Σ_{j<R} e^{-iθj} T^j |r⟩` with `θ = 2πp/N` and `R` the
//! orbit length of the representative `r`; it satisfies `T|r,p⟩ = e^{iθ}|r,p⟩`.
//! Because every eigenvector is also a `T` eigenvector, the resulting basis is
//! translation invariant even inside degenerate multiplets. Within a sector
//! any orthonormal eigenbasis is accepted.

use faer::{c64, Mat, Side};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{ChainContext, LocalOperator, PauliString, PauliSum};

pub const DEFAULT_SIZE_CAP: usize = 14;
/// Whole-space dense matrices are `4^N` complex numbers; 12 sites is 256 MiB.
pub const DEFAULT_DENSE_CAP: usize = 12;

/// The chain Hamiltonian `H = Σ_l T^l h T^-l` on `n` sites.
#[derive(Clone, Debug)]
pub struct HamiltonianSpec {
    h: LocalOperator,
    n: usize,
    dense_cap: usize,
}

impl HamiltonianSpec {
    pub fn new(h: &LocalOperator, n: usize) -> Result<Self> {
        Self::with_caps(h, n, DEFAULT_SIZE_CAP, DEFAULT_DENSE_CAP)
    }

    pub fn with_caps(h: &LocalOperator, n: usize, cap: usize, dense_cap: usize) -> Result<Self> {
        if !h.is_traceless() {
            return Err(Error::NotTraceless);
        }
        if !h.is_hermitian(1e-12) {
            return Err(Error::NotHermitian);
        }
        if n > cap {
            return Err(Error::SizeCap { n, cap });
        }
        if n > 62 {
            return Err(Error::SizeCap { n, cap: 62 });
        }
        ChainContext::for_hamiltonian(h, n)?;
        Ok(Self {
            h: h.clone(),
            n,
            dense_cap,
        })
    }

    pub fn h(&self) -> &LocalOperator {
        &self.h
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1usize << self.n
    }

    pub fn context(&self) -> ChainContext {
        ChainContext::for_hamiltonian(&self.h, self.n).expect("validated at construction")
    }
}

/// A named observable whose EEV are tabulated.
#[derive(Clone, Debug)]
pub struct Observable {
    pub id: String,
    pub op: LocalOperator,
}

impl Observable {
    pub fn new(id: impl Into<String>, op: LocalOperator) -> Self {
        Self { id: id.into(), op }
    }
}

/// `𝔸 = (1/N) Σ_l T^l A T^-l`. Its diagonal elements in any translation
/// eigenbasis coincide with those of `A`.
#[derive(Clone, Debug)]
pub struct SymmetrizedObservable {
    pub op: LocalOperator,
    pub n: usize,
    sum: PauliSum,
}

impl SymmetrizedObservable {
    pub fn new(op: &LocalOperator, n: usize) -> Result<Self> {
        let mut sum = PauliSum::new();
        for (s, c) in PauliSum::translation_sum(op, n)?.iter() {
            sum.add(c / n as f64, *s);
        }
        Ok(Self {
            op: op.clone(),
            n,
            sum,
        })
    }

    pub fn sum(&self) -> &PauliSum {
        &self.sum
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub energy: f64,
    pub momentum: usize,
    pub eev: Vec<Complex64>,
}

/// All `2^N` eigenpairs of one chain, sorted by energy then momentum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTable {
    pub n: usize,
    pub observables: Vec<String>,
    pub entries: Vec<SpectrumEntry>,
}

impl SpectrumTable {
    pub fn new(n: usize, observables: Vec<String>, mut entries: Vec<SpectrumEntry>) -> Self {
        sort_entries(&mut entries);
        Self {
            n,
            observables,
            entries,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn energies(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.energy)
    }

    pub fn observable_index(&self, id: &str) -> Result<usize> {
        self.observables
            .iter()
            .position(|o| o == id)
            .ok_or_else(|| Error::UnknownObservable(id.to_string()))
    }

    /// `(E_j, ⟨j|A|j⟩)` pairs for one observable.
    pub fn column(&self, id: &str) -> Result<Vec<(f64, Complex64)>> {
        let idx = self.observable_index(id)?;
        Ok(self
            .entries
            .iter()
            .map(|e| (e.energy, e.eev[idx]))
            .collect())
    }

    /// (1/d) Σ_j E_j^m.
    pub fn energy_moment(&self, m: i32) -> f64 {
        self.energies().map(|e| e.powi(m)).sum::<f64>() / self.dim() as f64
    }

    /// (1/d) Σ_j E_j^m ⟨j|A|j⟩, which equals tr(H^m A)/d.
    pub fn weighted_eev_moment(&self, id: &str, m: i32) -> Result<Complex64> {
        let col = self.column(id)?;
        let total: Complex64 = col.iter().map(|(e, v)| v * e.powi(m)).sum();
        Ok(total / self.dim() as f64)
    }

    /// Excess kurtosis `m4/m2² − 3` of the energies.
    pub fn excess_kurtosis(&self) -> f64 {
        let mean = self.energy_moment(1);
        let d = self.dim() as f64;
        let m2 = self.energies().map(|e| (e - mean).powi(2)).sum::<f64>() / d;
        let m4 = self.energies().map(|e| (e - mean).powi(4)).sum::<f64>() / d;
        m4 / (m2 * m2) - 3.0
    }
}

fn sort_entries(entries: &mut [SpectrumEntry]) {
    entries.sort_by(|a, b| {
        a.energy
            .total_cmp(&b.energy)
            .then(a.momentum.cmp(&b.momentum))
    });
}

fn rotate_left(state: u64, n: usize) -> u64 {
    let mask = (1u64 << n) - 1;
    ((state << 1) | (state >> (n - 1))) & mask
}

/// Translation orbits of all `2^N` basis states.
struct OrbitTable {
    n: usize,
    /// Smallest member and orbit length per orbit.
    reps: Vec<(u64, usize)>,
    /// For every state: orbit index and shift `j` with `state = T^j rep`.
    lookup: Vec<(u32, u8)>,
}

impl OrbitTable {
    fn new(n: usize) -> Self {
        let dim = 1usize << n;
        let mut lookup = vec![(u32::MAX, 0u8); dim];
        let mut reps = Vec::new();
        for s in 0..dim {
            if lookup[s].0 != u32::MAX {
                continue;
            }
            let idx = reps.len() as u32;
            let mut t = s as u64;
            let mut period = n;
            for j in 0..n {
                if j > 0 && t == s as u64 {
                    period = j;
                    break;
                }
                lookup[t as usize] = (idx, j as u8);
                t = rotate_left(t, n);
            }
            reps.push((s as u64, period));
        }
        Self { n, reps, lookup }
    }

    /// Orbits compatible with momentum `p`, as indices into `reps`.
    fn sector(&self, p: usize) -> Vec<usize> {
        (0..self.reps.len())
            .filter(|&i| (p * self.reps[i].1) % self.n == 0)
            .collect()
    }
}

/// Number of momentum states in each sector `p = 0..N`.
pub fn sector_dims(n: usize) -> Vec<usize> {
    let orbits = OrbitTable::new(n);
    (0..n).map(|p| orbits.sector(p).len()).collect()
}

/// Matrix of a translation-invariant operator in momentum sector `p`.
fn sector_matrix(sum: &PauliSum, orbits: &OrbitTable, sector: &[usize], p: usize) -> Mat<c64> {
    let n = orbits.n;
    let dim = sector.len();
    let mut position = vec![usize::MAX; orbits.reps.len()];
    for (pos, &orb) in sector.iter().enumerate() {
        position[orb] = pos;
    }
    let theta = 2.0 * std::f64::consts::PI * p as f64 / n as f64;
    let phases: Vec<Complex64> = (0..n)
        .map(|j| Complex64::from_polar(1.0, theta * j as f64))
        .collect();
    let terms: Vec<(Complex64, PauliString)> = sum.iter().map(|(s, c)| (*c, *s)).collect();
    let mut m = Mat::<c64>::zeros(dim, dim);
    for (col, &orb) in sector.iter().enumerate() {
        let (rep, period_b) = orbits.reps[orb];
        for (c, s) in &terms {
            let (phase, image) = s.apply(rep);
            let (target, shift) = orbits.lookup[image as usize];
            let row = position[target as usize];
            if row == usize::MAX {
                continue;
            }
            let period_a = orbits.reps[target as usize].1;
            let scale = (period_b as f64 / period_a as f64).sqrt();
            m[(row, col)] += c * phase.to_complex() * phases[shift as usize] * scale;
        }
    }
    m
}

/// Whole-space matrix of `H` (for oracles and small checks).
pub fn build_dense(spec: &HamiltonianSpec) -> Result<Mat<c64>> {
    if spec.n > spec.dense_cap {
        return Err(Error::SizeCap {
            n: spec.n,
            cap: spec.dense_cap,
        });
    }
    let sum = PauliSum::translation_sum(&spec.h, spec.n)?;
    let dim = spec.dim();
    let mut m = Mat::<c64>::zeros(dim, dim);
    for col in 0..dim {
        for (s, c) in sum.iter() {
            let (phase, row) = s.apply(col as u64);
            m[(row as usize, col)] += c * phase.to_complex();
        }
    }
    Ok(m)
}

struct SectorResult {
    p: usize,
    energies: Vec<f64>,
    eev: Vec<Vec<Complex64>>,
}

fn solve_sector(
    ham: &PauliSum,
    observables: &[PauliSum],
    orbits: &OrbitTable,
    p: usize,
) -> Result<SectorResult> {
    let sector = orbits.sector(p);
    if sector.is_empty() {
        return Ok(SectorResult {
            p,
            energies: Vec::new(),
            eev: Vec::new(),
        });
    }
    let hm = sector_matrix(ham, orbits, &sector, p);
    if observables.is_empty() {
        let energies = hm
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|_| Error::Eigen)?;
        let eev = vec![Vec::new(); energies.len()];
        return Ok(SectorResult { p, energies, eev });
    }
    let eig = hm.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigen)?;
    let vectors = eig.U();
    let dim = sector.len();
    let energies: Vec<f64> = (0..dim).map(|i| eig.S()[i].re).collect();
    let mut eev = vec![Vec::with_capacity(observables.len()); dim];
    for obs in observables {
        let am = sector_matrix(obs, orbits, &sector, p);
        let av = &am * vectors;
        for (j, row) in eev.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..dim {
                acc += vectors[(i, j)].conj() * av[(i, j)];
            }
            row.push(acc);
        }
    }
    Ok(SectorResult { p, energies, eev })
}

fn run_sectors(spec: &HamiltonianSpec, observables: &[PauliSum]) -> Result<Vec<SpectrumEntry>> {
    let n = spec.n;
    let orbits = OrbitTable::new(n);
    let ham = PauliSum::translation_sum(&spec.h, n)?;
    let results: Vec<SectorResult> = (0..n)
        .into_par_iter()
        .map(|p| solve_sector(&ham, observables, &orbits, p))
        .collect::<Result<_>>()?;
    let total: usize = results.iter().map(|r| r.energies.len()).sum();
    if total != spec.dim() {
        return Err(Error::SectorBookkeeping {
            got: total,
            expected: spec.dim(),
        });
    }
    let mut entries = Vec::with_capacity(total);
    for r in results {
        for (energy, eev) in r.energies.into_iter().zip(r.eev) {
            entries.push(SpectrumEntry {
                energy,
                momentum: r.p,
                eev,
            });
        }
    }
    Ok(entries)
}

/// All eigenvalues with their momentum labels; no observables.
pub fn diagonalize(spec: &HamiltonianSpec) -> Result<SpectrumTable> {
    let entries = run_sectors(spec, &[])?;
    Ok(SpectrumTable::new(spec.n, Vec::new(), entries))
}

/// Eigenvalues plus `⟨j|A|j⟩` for each observable, evaluated through the
/// symmetrized operator in each sector.
pub fn eev_table(spec: &HamiltonianSpec, observables: &[Observable]) -> Result<SpectrumTable> {
    let k = spec.h.window();
    let mut sums = Vec::with_capacity(observables.len());
    for obs in observables {
        if !obs.op.is_traceless() {
            return Err(Error::NotTraceless);
        }
        if !obs.op.is_hermitian(1e-12) {
            return Err(Error::NotHermitian);
        }
        let min_n = ChainContext::quadratic_trace_min_n(k, obs.op.window());
        if spec.n < min_n {
            return Err(Error::ObservableWindow {
                id: obs.id.clone(),
                window: obs.op.window(),
                min_n,
                n: spec.n,
            });
        }
        sums.push(SymmetrizedObservable::new(&obs.op, spec.n)?.sum);
    }
    let entries = run_sectors(spec, &sums)?;
    let ids = observables.iter().map(|o| o.id.clone()).collect();
    Ok(SpectrumTable::new(spec.n, ids, entries))
}

/// Fraction of eigenstates with `|E_j| >= N ε`.
pub fn concentration_fraction(table: &SpectrumTable, eps: f64) -> f64 {
    let threshold = table.n as f64 * eps;
    let count = table.energies().filter(|e| e.abs() >= threshold).count();
    count as f64 / table.dim() as f64
}

/// `Λ = C sqrt(N log N)`.
pub fn cutoff_lambda(n: f64, c: f64) -> f64 {
    c * (n * n.ln()).sqrt()
}
