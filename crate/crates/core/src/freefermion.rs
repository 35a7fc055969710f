//! Transverse-field Ising chain `H = −Σ_l (Z_l Z_{l+1} + g X_l)` solved as
//! free fermions.
//!
//! With `X_l = 1 − 2 n_l` the Jordan–Wigner map sends the chain to a
//! quadratic fermion Hamiltonian whose boundary condition depends on the
//! fermion parity `P = Π_l X_l`: the even sector uses antiperiodic momenta
//! `k = 2π(m + 1/2)/N`, the odd sector periodic momenta `k = 2πm/N`. Pairs
//! `(k, −k)` become Bogoliubov modes with energy
//! `ε_k = 2 sqrt(1 + g² − 2g cos k)`; the self-conjugate momenta `k ∈ {0, π}`
//! stay bare modes with energy `2(g − cos k)`. A sector's eigenstates are the
//! quasiparticle occupations whose total fermion parity matches the sector.
//!
//! Observables are limited to `a·Z_1Z_2 + b·X_1` (and translates). Their EEV
//! follow from the Hellmann–Feynman relation `⟨Σ_l X_l⟩ = −∂E/∂g`, so they
//! are linear in the occupations.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convergence::TargetFunction;
use crate::error::{Error, Result};
use crate::pauli::{canonicalize, LocalOperator, PauliString};

/// Default largest chain accepted by the sampler.
pub const DEFAULT_MODE_CAP: usize = 4096;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    fn bit(self) -> bool {
        matches!(self, Parity::Odd)
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Mode {
    /// Momentum in `(−π, π]`.
    pub momentum: f64,
    /// Momentum in units of `π/N` (odd integers in the even sector, even
    /// integers in the odd sector).
    pub momentum_units: i64,
    /// Excitation energy, `>= 0`.
    pub energy: f64,
    /// `∂energy/∂g`.
    pub energy_dg: f64,
}

/// One parity sector of the chain, before any global rescaling.
#[derive(Clone, Debug)]
pub struct FermionModel {
    pub n: usize,
    pub g: f64,
    pub parity: Parity,
    pub modes: Vec<Mode>,
    /// Energy of the quasiparticle vacuum of this sector.
    pub ground_energy: f64,
    pub ground_energy_dg: f64,
    /// Parity of the quasiparticle number required for a physical state.
    quasiparticle_parity: bool,
}

/// Single-particle structure of one parity sector.
pub fn tfim_modes(n: usize, g: f64, parity: Parity) -> Result<FermionModel> {
    if n < 2 {
        return Err(Error::InvalidArgument("the chain needs at least 2 sites".into()));
    }
    if !(g >= 0.0) {
        return Err(Error::InvalidArgument("transverse field must be >= 0".into()));
    }
    let ni = n as i64;
    let offset = match parity {
        Parity::Even => 1,
        Parity::Odd => 0,
    };
    // Momentum units u = 2m + offset in (−N, N]: k = u π / N.
    let units: Vec<i64> = (0..ni)
        .map(|m| {
            let u = 2 * m + offset;
            if u > ni {
                u - 2 * ni
            } else {
                u
            }
        })
        .collect();
    let mut modes = Vec::with_capacity(n);
    let mut ground = 0.0;
    let mut ground_dg = 0.0;
    let mut flips = false;
    for &u in &units {
        let k = u as f64 * PI / n as f64;
        let self_conjugate = u == 0 || u == ni;
        if self_conjugate {
            let cos_k = if u == 0 { 1.0 } else { -1.0 };
            let bare = 2.0 * (g - cos_k);
            ground -= g;
            ground_dg -= 1.0;
            if bare >= 0.0 {
                modes.push(Mode {
                    momentum: k,
                    momentum_units: u,
                    energy: bare,
                    energy_dg: 2.0,
                });
            } else {
                // The vacuum fills the bare mode; an excitation empties it.
                ground += bare;
                ground_dg += 2.0;
                flips = !flips;
                modes.push(Mode {
                    momentum: k,
                    momentum_units: u,
                    energy: -bare,
                    energy_dg: -2.0,
                });
            }
        } else {
            let cos_k = k.cos();
            let eps = 2.0 * (1.0 + g * g - 2.0 * g * cos_k).sqrt();
            let eps_dg = if eps > 0.0 { 4.0 * (g - cos_k) / eps } else { 0.0 };
            modes.push(Mode {
                momentum: k,
                momentum_units: u,
                energy: eps,
                energy_dg: eps_dg,
            });
            if u > 0 {
                // The (k, −k) pair contributes −2 cos k − ε_k to the vacuum.
                ground += -2.0 * cos_k - eps;
                ground_dg -= eps_dg;
            }
        }
    }
    Ok(FermionModel {
        n,
        g,
        parity,
        modes,
        ground_energy: ground,
        ground_energy_dg: ground_dg,
        quasiparticle_parity: parity.bit() ^ flips,
    })
}

/// Quasiparticle occupations of one sector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OccupationState {
    pub occupied: Vec<bool>,
}

impl OccupationState {
    pub fn empty(modes: usize) -> Self {
        Self {
            occupied: vec![false; modes],
        }
    }

    pub fn count(&self) -> usize {
        self.occupied.iter().filter(|o| **o).count()
    }
}

impl FermionModel {
    fn check(&self, occ: &OccupationState) -> Result<()> {
        if occ.occupied.len() != self.modes.len() {
            return Err(Error::ModeCount {
                got: occ.occupied.len(),
                expected: self.modes.len(),
            });
        }
        if (occ.count() % 2 == 1) != self.quasiparticle_parity {
            return Err(Error::ParityMismatch);
        }
        Ok(())
    }

    /// Whether `count` quasiparticles form a state of this sector.
    pub fn allows_count(&self, count: usize) -> bool {
        (count % 2 == 1) == self.quasiparticle_parity
    }

    fn sums(&self, occ: &OccupationState) -> (f64, f64) {
        let mut e = self.ground_energy;
        let mut de = self.ground_energy_dg;
        for (m, o) in self.modes.iter().zip(&occ.occupied) {
            if *o {
                e += m.energy;
                de += m.energy_dg;
            }
        }
        (e, de)
    }

    /// Momentum index `p` with translation eigenvalue `e^{2πip/N}`.
    pub fn momentum_index(&self, occ: &OccupationState) -> usize {
        let units: i64 = self
            .modes
            .iter()
            .zip(&occ.occupied)
            .filter(|(_, o)| **o)
            .map(|(m, _)| m.momentum_units)
            .sum();
        // e^{-i Σk}: p = −Σu/2 mod N; Σu is even for every physical state.
        (-(units / 2)).rem_euclid(self.n as i64) as usize
    }
}

/// Unscaled energy of an occupation state.
pub fn state_energy(model: &FermionModel, occ: &OccupationState) -> Result<f64> {
    model.check(occ)?;
    Ok(model.sums(occ).0)
}

/// `a·Z_1Z_2 + b·X_1`: the observables whose EEV are linear in the
/// quasiparticle occupations.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bilinear {
    pub zz: f64,
    pub x: f64,
}

impl Bilinear {
    /// Energy density of the (unscaled) chain term `−Z_1Z_2 − g X_1`.
    pub fn energy_density(g: f64) -> Self {
        Self { zz: -1.0, x: -g }
    }

    pub fn transverse_field() -> Self {
        Self { zz: 0.0, x: 1.0 }
    }

    /// Classifies a local operator; anything outside the class is rejected.
    pub fn from_local(op: &LocalOperator) -> Result<Self> {
        let canonical = canonicalize(op);
        let zz: PauliString = "Z1Z2".parse().expect("valid string");
        let x: PauliString = "X1".parse().expect("valid string");
        let mut out = Self { zz: 0.0, x: 0.0 };
        for (c, s) in canonical.terms() {
            if c.im != 0.0 {
                return Err(Error::NotBilinear(format!("complex coefficient on {s}")));
            }
            if *s == zz {
                out.zz += c.re;
            } else if *s == x {
                out.x += c.re;
            } else {
                return Err(Error::NotBilinear(s.to_string()));
            }
        }
        Ok(out)
    }

    pub fn to_local(self) -> LocalOperator {
        let mut terms = Vec::new();
        if self.zz != 0.0 {
            terms.push((self.zz.into(), "Z1Z2".parse().expect("valid string")));
        }
        if self.x != 0.0 {
            terms.push((self.x.into(), "X1".parse().expect("valid string")));
        }
        LocalOperator::new(2, terms).expect("fits window 2")
    }

    fn value(self, n: usize, g: f64, energy: f64, energy_dg: f64) -> f64 {
        let n = n as f64;
        let x_total = -energy_dg;
        let zz_total = -energy - g * x_total;
        (self.zz * zz_total + self.x * x_total) / n
    }
}

/// `⟨occ|A|occ⟩` for a bilinear observable.
pub fn eev_bilinear(model: &FermionModel, occ: &OccupationState, obs: Bilinear) -> Result<f64> {
    model.check(occ)?;
    let (e, de) = model.sums(occ);
    Ok(obs.value(model.n, model.g, e, de))
}

/// Both parity sectors of the chain, with energies multiplied by `scale`.
#[derive(Clone, Debug)]
pub struct TfimChain {
    pub n: usize,
    pub g: f64,
    pub even: FermionModel,
    pub odd: FermionModel,
    /// Factor applied to energies (`1/‖h‖` when normalized, else 1).
    pub scale: f64,
}

/// One eigenstate of the full chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainState {
    pub energy: f64,
    pub momentum: usize,
    pub eev: f64,
}

impl TfimChain {
    pub fn new(n: usize, g: f64) -> Result<Self> {
        Self::with_cap(n, g, DEFAULT_MODE_CAP)
    }

    pub fn with_cap(n: usize, g: f64, cap: usize) -> Result<Self> {
        if n > cap {
            return Err(Error::SizeCap { n, cap });
        }
        Ok(Self {
            n,
            g,
            even: tfim_modes(n, g, Parity::Even)?,
            odd: tfim_modes(n, g, Parity::Odd)?,
            scale: 1.0,
        })
    }

    /// Energies in units of `‖h‖`; `‖−Z_1Z_2 − gX_1‖ = sqrt(1 + g²)`.
    pub fn normalized(mut self) -> Self {
        self.scale = 1.0 / (1.0 + self.g * self.g).sqrt();
        self
    }

    /// The spin-side term `−Z_1Z_2 − g X_1`, scaled like the energies.
    pub fn local_term(&self) -> LocalOperator {
        Bilinear::energy_density(self.g).to_local().scaled(self.scale)
    }

    pub fn sector(&self, parity: Parity) -> &FermionModel {
        match parity {
            Parity::Even => &self.even,
            Parity::Odd => &self.odd,
        }
    }

    fn state(&self, model: &FermionModel, occ: &OccupationState, obs: Bilinear) -> ChainState {
        let (e, de) = model.sums(occ);
        ChainState {
            energy: self.scale * e,
            momentum: model.momentum_index(occ),
            eev: obs.value(self.n, self.g, e, de),
        }
    }

    /// Every eigenstate of both sectors (`2^N` in total).
    pub fn enumerate(&self, obs: Bilinear) -> Result<Vec<ChainState>> {
        if self.n > 24 {
            return Err(Error::SizeCap { n: self.n, cap: 24 });
        }
        let mut out = Vec::with_capacity(1 << self.n);
        for model in [&self.even, &self.odd] {
            for bits in 0u64..(1u64 << self.n) {
                if !model.allows_count(bits.count_ones() as usize) {
                    continue;
                }
                let occ = OccupationState {
                    occupied: (0..self.n).map(|i| bits >> i & 1 == 1).collect(),
                };
                out.push(self.state(model, &occ, obs));
            }
        }
        Ok(out)
    }

    /// Exact `(r_f, r_f_l1, weak_eth)` by enumerating all eigenstates.
    pub fn exact_statistics(&self, obs: Bilinear, f: &TargetFunction) -> Result<(f64, f64, f64)> {
        let states = self.enumerate(obs)?;
        let d = states.len() as f64;
        let n = self.n as f64;
        let mut sq = 0.0;
        let mut abs = 0.0;
        let mut weak = 0.0;
        for s in &states {
            let dev = s.eev - f.eval(s.energy / n);
            sq += dev * dev;
            abs += dev.abs();
            weak += s.eev * s.eev;
        }
        Ok(((sq / d).sqrt(), abs / d, weak / d))
    }
}

/// Monte-Carlo estimate of `r_f` and companions from uniformly sampled
/// eigenstates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub l1: f64,
    pub weak_eth: f64,
    pub samples: usize,
}

/// Samples per independently seeded stream.
const STREAM_LEN: usize = 4096;

#[derive(Clone, Copy, Default)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
    abs_sum: f64,
    weak_sum: f64,
}

impl Moments {
    fn push(&mut self, sq: f64, abs: f64, weak: f64) {
        self.count += 1.0;
        let delta = sq - self.mean;
        self.mean += delta / self.count;
        self.m2 += delta * (sq - self.mean);
        self.abs_sum += abs;
        self.weak_sum += weak;
    }

    fn merge(self, other: Moments) -> Moments {
        if self.count == 0.0 {
            return other;
        }
        if other.count == 0.0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        Moments {
            count,
            mean: self.mean + delta * other.count / count,
            m2: self.m2 + other.m2 + delta * delta * self.count * other.count / count,
            abs_sum: self.abs_sum + other.abs_sum,
            weak_sum: self.weak_sum + other.weak_sum,
        }
    }
}

/// Estimates `r_f` by drawing eigenstates uniformly: a sector with
/// probability proportional to its dimension (one half each), then a uniform
/// occupation of the right parity. The standard error uses the delta method
/// on the mean squared deviation. Streams are seeded from `(seed, index)` and
/// merged in order, so results are reproducible bit for bit.
pub fn sample_r_f(
    chain: &TfimChain,
    obs: Bilinear,
    f: &TargetFunction,
    samples: usize,
    seed: u64,
) -> Result<SampleEstimate> {
    if samples < 100 {
        return Err(Error::TooFew {
            what: "samples",
            needed: 100,
            got: samples,
        });
    }
    let streams = samples.div_ceil(STREAM_LEN);
    let parts: Vec<Moments> = (0..streams)
        .into_par_iter()
        .map(|s| {
            let len = STREAM_LEN.min(samples - s * STREAM_LEN);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let mut acc = Moments::default();
            let mut occ = OccupationState::empty(chain.n);
            let n = chain.n as f64;
            for _ in 0..len {
                let model = if rng.random_bool(0.5) {
                    &chain.even
                } else {
                    &chain.odd
                };
                let mut odd = false;
                for slot in occ.occupied.iter_mut().take(chain.n - 1) {
                    *slot = rng.random_bool(0.5);
                    odd ^= *slot;
                }
                occ.occupied[chain.n - 1] = odd != model.quasiparticle_parity;
                let st = chain.state(model, &occ, obs);
                let dev = st.eev - f.eval(st.energy / n);
                acc.push(dev * dev, dev.abs(), st.eev * st.eev);
            }
            acc
        })
        .collect();
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);
    let mean_sq = total.mean.max(0.0);
    let estimate = mean_sq.sqrt();
    let var = total.m2 / (total.count - 1.0);
    let se_mean = (var / total.count).sqrt();
    let stderr = if estimate > 0.0 {
        se_mean / (2.0 * estimate)
    } else {
        0.0
    };
    Ok(SampleEstimate {
        estimate,
        stderr,
        l1: total.abs_sum / total.count,
        weak_eth: total.weak_sum / total.count,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dispersion_values() {
        let m = tfim_modes(8, 1.0, Parity::Odd).unwrap();
        let pi_mode = m.modes.iter().find(|m| m.momentum_units == 8).unwrap();
        assert!((pi_mode.energy - 4.0).abs() < 1e-15);
        for parity in [Parity::Even, Parity::Odd] {
            let m = tfim_modes(7, 0.0, parity).unwrap();
            for mode in &m.modes {
                assert!((mode.energy - 2.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn modes_come_in_symmetric_pairs() {
        for parity in [Parity::Even, Parity::Odd] {
            let m = tfim_modes(9, 0.6, parity).unwrap();
            assert_eq!(m.modes.len(), 9);
            for mode in &m.modes {
                assert!(mode.energy >= 0.0);
                if let Some(partner) = m.modes.iter().find(|o| o.momentum_units == -mode.momentum_units) {
                    assert_eq!(partner.energy, mode.energy);
                }
            }
        }
    }

    #[test]
    fn occupation_energies() {
        let m = tfim_modes(8, 0.7, Parity::Even).unwrap();
        let empty = OccupationState::empty(8);
        assert_eq!(state_energy(&m, &empty).unwrap(), m.ground_energy);
        let full = OccupationState { occupied: vec![true; 8] };
        assert!((state_energy(&m, &full).unwrap() + m.ground_energy).abs() < 1e-12);
        let mut one = OccupationState::empty(8);
        one.occupied[3] = true;
        assert!(matches!(state_energy(&m, &one), Err(Error::ParityMismatch)));
        // Above g = 1 the odd sector needs an odd number of quasiparticles;
        // below it the k = 0 mode is filled in the vacuum.
        let odd = tfim_modes(8, 1.3, Parity::Odd).unwrap();
        assert!((state_energy(&odd, &one).unwrap() - odd.ground_energy - odd.modes[3].energy).abs() < 1e-12);
        assert!(matches!(
            state_energy(&m, &OccupationState::empty(7)),
            Err(Error::ModeCount { .. })
        ));
        let odd_low = tfim_modes(8, 0.7, Parity::Odd).unwrap();
        assert!(odd_low.allows_count(0));
        assert!(!odd_low.allows_count(1));
    }

    #[test]
    fn bilinear_classification() {
        let op: LocalOperator = "0.5*Z2Z3 + X4".parse().unwrap();
        assert_eq!(Bilinear::from_local(&op).unwrap(), Bilinear { zz: 0.5, x: 1.0 });
        assert!(Bilinear::from_local(&"Z1".parse().unwrap()).is_err());
        assert!(Bilinear::from_local(&"Y1Y2".parse().unwrap()).is_err());
    }

    #[test]
    fn energy_density_observable_is_energy_over_n() {
        let chain = TfimChain::new(6, 0.8).unwrap().normalized();
        let obs = Bilinear::from_local(&chain.local_term()).unwrap();
        for s in chain.enumerate(obs).unwrap() {
            assert!((s.eev - s.energy / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_field_ground_state_has_no_transverse_magnetization() {
        let m = tfim_modes(8, 0.0, Parity::Even).unwrap();
        let empty = OccupationState::empty(8);
        assert!((state_energy(&m, &empty).unwrap() + 8.0).abs() < 1e-12);
        let x = eev_bilinear(&m, &empty, Bilinear::transverse_field()).unwrap();
        assert!(x.abs() < 1e-12);
        let zz = eev_bilinear(&m, &empty, Bilinear { zz: 1.0, x: 0.0 }).unwrap();
        assert!((zz - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampler_edge_cases() {
        let chain = TfimChain::new(10, 0.5).unwrap();
        let obs = Bilinear::energy_density(0.5);
        let f = TargetFunction::linear(1.0);
        let est = sample_r_f(&chain, obs, &f, 500, 3).unwrap();
        assert!(est.estimate < 1e-12);
        assert!(est.stderr < 1e-12);
        assert!(sample_r_f(&chain, obs, &f, 99, 3).is_err());
        assert!(matches!(TfimChain::with_cap(2048, 0.5, 1024), Err(Error::SizeCap { .. })));
        assert!(TfimChain::new(2048, 0.5).is_ok());
    }
}
