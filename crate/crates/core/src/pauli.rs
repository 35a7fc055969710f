//! Pauli-string algebra on a periodic qubit chain.
//!
//! Strings are stored as a pair of bit masks (`x`, `z`), with site `s`
//! (1-based) at bit `s - 1`. Each site carries `i^(x z) X^x Z^z`, so
//! `(1, 0) = X`, `(1, 1) = Y` and `(0, 1) = Z`. All traces are normalized by
//! the Hilbert-space dimension and are assembled from exact `±1`/`±i` phases,
//! so nothing of size `2^N` is ever built here.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use faer::{c64, Mat};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest chain the symbolic algebra can address.
pub const MAX_SITES: usize = 128;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Option<Self> {
        match (x, z) {
            (false, false) => None,
            (true, false) => Some(Pauli::X),
            (true, true) => Some(Pauli::Y),
            (false, true) => Some(Pauli::Z),
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'X' | 'x' => Some(Pauli::X),
            'Y' | 'y' => Some(Pauli::Y),
            'Z' | 'z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// A power of `i`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_power(power: u32) -> Self {
        Phase((power % 4) as u8)
    }

    pub fn power(self) -> u32 {
        self.0 as u32
    }

    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

/// A tensor product of single-site Pauli matrices. Identity sites are not
/// stored; the empty string is the identity operator.
#[derive(Copy, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct PauliString {
    x: u128,
    z: u128,
}

fn site_bit(site: usize) -> Result<u128> {
    if site == 0 || site > MAX_SITES {
        return Err(Error::SiteOutOfRange(site));
    }
    Ok(1u128 << (site - 1))
}

fn mask(n: usize) -> u128 {
    if n >= 128 {
        u128::MAX
    } else {
        (1u128 << n) - 1
    }
}

impl PauliString {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn single(site: usize, letter: Pauli) -> Result<Self> {
        Self::from_sites([(site, letter)])
    }

    /// Builds a string from `(site, letter)` pairs. Later entries for the same
    /// site replace earlier ones.
    pub fn from_sites<I>(sites: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, Pauli)>,
    {
        let mut out = Self::identity();
        for (site, letter) in sites {
            let bit = site_bit(site)?;
            let (x, z) = letter.bits();
            out.x &= !bit;
            out.z &= !bit;
            if x {
                out.x |= bit;
            }
            if z {
                out.z |= bit;
            }
        }
        Ok(out)
    }

    pub fn letter(&self, site: usize) -> Option<Pauli> {
        if site == 0 || site > MAX_SITES {
            return None;
        }
        let bit = 1u128 << (site - 1);
        Pauli::from_bits(self.x & bit != 0, self.z & bit != 0)
    }

    fn support_mask(&self) -> u128 {
        self.x | self.z
    }

    pub fn is_identity(&self) -> bool {
        self.support_mask() == 0
    }

    pub fn weight(&self) -> usize {
        self.support_mask().count_ones() as usize
    }

    /// `(site, letter)` pairs in ascending site order.
    pub fn sites(&self) -> impl Iterator<Item = (usize, Pauli)> + '_ {
        let mut rest = self.support_mask();
        std::iter::from_fn(move || {
            if rest == 0 {
                return None;
            }
            let bit = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let site = bit + 1;
            Some((site, self.letter(site).expect("support bit carries a letter")))
        })
    }

    pub fn support(&self) -> Vec<usize> {
        self.sites().map(|(s, _)| s).collect()
    }

    pub fn contains(&self, site: usize) -> bool {
        self.letter(site).is_some()
    }

    pub fn min_site(&self) -> Option<usize> {
        let m = self.support_mask();
        (m != 0).then(|| m.trailing_zeros() as usize + 1)
    }

    pub fn max_site(&self) -> Option<usize> {
        let m = self.support_mask();
        (m != 0).then(|| 128 - m.leading_zeros() as usize)
    }

    /// `max(support) - min(support) + 1`, or 0 for the identity. A string is
    /// exactly κ-local when its extent is κ.
    pub fn extent(&self) -> usize {
        match (self.min_site(), self.max_site()) {
            (Some(lo), Some(hi)) => hi - lo + 1,
            _ => 0,
        }
    }

    /// Operator product `self · other = phase · result`.
    pub fn multiply(&self, other: &PauliString) -> (Phase, PauliString) {
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        let power = (self.x & self.z).count_ones()
            + (other.x & other.z).count_ones()
            + 2 * (self.z & other.x).count_ones()
            + 3 * (x & z).count_ones();
        (Phase::from_power(power), PauliString { x, z })
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// `T^l P T^-l` on a periodic chain of `n` sites: site `s` moves to
    /// `((s - 1 + l) mod n) + 1`.
    ///
    /// # Panics
    /// If `n` is zero or larger than [`MAX_SITES`], or the string acts beyond
    /// site `n`.
    pub fn translate(&self, l: i64, n: usize) -> PauliString {
        assert!(n >= 1 && n <= MAX_SITES, "chain length {n} out of range");
        assert!(
            self.max_site().is_none_or(|m| m <= n),
            "string {self} does not fit on {n} sites"
        );
        let shift = l.rem_euclid(n as i64) as u32;
        let rot = |v: u128| -> u128 {
            if shift == 0 {
                v
            } else {
                ((v << shift) | (v >> (n as u32 - shift))) & mask(n)
            }
        };
        PauliString {
            x: rot(self.x),
            z: rot(self.z),
        }
    }

    /// Shift so the lowest occupied site becomes site 1 (open-chain shift,
    /// valid for strings that do not wrap).
    pub fn shifted_to_origin(&self) -> PauliString {
        match self.min_site() {
            None => *self,
            Some(lo) => PauliString {
                x: self.x >> (lo - 1),
                z: self.z >> (lo - 1),
            },
        }
    }

    /// Action on a computational basis state (bit `s - 1` = site `s`, bit set
    /// means spin down). Returns `(phase, image)`.
    pub fn apply(&self, basis: u64) -> (Phase, u64) {
        debug_assert!(self.max_site().is_none_or(|m| m <= 64));
        let x = self.x as u64;
        let z = self.z as u64;
        let power = (x & z).count_ones() + 2 * (z & basis).count_ones();
        (Phase::from_power(power), basis ^ x)
    }
}

fn letter_code(p: &PauliString, bit: u128) -> u8 {
    match (p.x & bit != 0, p.z & bit != 0) {
        (false, false) => 0,
        (true, false) => 1,
        (true, true) => 2,
        (false, true) => 3,
    }
}

/// Lexicographic by site, with letters ordered `I < X < Y < Z`.
impl Ord for PauliString {
    fn cmp(&self, other: &Self) -> Ordering {
        let diff = (self.x ^ other.x) | (self.z ^ other.z);
        if diff == 0 {
            return Ordering::Equal;
        }
        let bit = 1u128 << diff.trailing_zeros();
        letter_code(self, bit).cmp(&letter_code(other, bit))
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "I");
        }
        for (site, letter) in self.sites() {
            write!(f, "{letter}{site}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self})")
    }
}

impl From<PauliString> for String {
    fn from(s: PauliString) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for PauliString {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Parses `Z1Z2X4`-style strings; `I` (or an empty string) is the
    /// identity. Whitespace between factors is ignored.
    fn from_str(s: &str) -> Result<Self> {
        let err = |reason: &str| Error::Parse {
            expr: s.to_string(),
            reason: reason.to_string(),
        };
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() || compact == "I" {
            return Ok(Self::identity());
        }
        let mut sites = Vec::new();
        let mut chars = compact.chars().peekable();
        while let Some(c) = chars.next() {
            let letter = Pauli::from_char(c).ok_or_else(|| err(&format!("unexpected `{c}`")))?;
            let mut digits = String::new();
            while let Some(d) = chars.peek().filter(|d| d.is_ascii_digit()) {
                digits.push(*d);
                chars.next();
            }
            if digits.is_empty() {
                return Err(err(&format!("letter `{c}` has no site index")));
            }
            let site: usize = digits.parse().map_err(|_| err("bad site index"))?;
            if sites.iter().any(|&(s, _)| s == site) {
                return Err(err(&format!("site {site} appears twice")));
            }
            sites.push((site, letter));
        }
        Self::from_sites(sites)
    }
}

/// Number of sites and Hamiltonian window `k` of a periodic chain.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct ChainContext {
    pub n: usize,
    pub k: usize,
}

impl ChainContext {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n == 0 || n > MAX_SITES {
            return Err(Error::SiteOutOfRange(n));
        }
        if k == 0 {
            return Err(Error::EmptyWindow);
        }
        if k > n {
            return Err(Error::ChainTooShort { n, window: k });
        }
        Ok(Self { n, k })
    }

    pub fn for_hamiltonian(h: &LocalOperator, n: usize) -> Result<Self> {
        Self::new(n, h.window())
    }

    /// Smallest N from which tr(HA)/d is N-independent for an observable of
    /// window `kp`.
    pub fn linear_trace_min_n(k: usize, kp: usize) -> usize {
        k + kp - 1
    }

    /// Smallest N from which tr(H²A)/d is N-independent.
    pub fn quadratic_trace_min_n(k: usize, kp: usize) -> usize {
        2 * k + kp - 2
    }

    fn check_fits(&self, window: usize) -> Result<()> {
        if window > self.n {
            return Err(Error::ChainTooShort {
                n: self.n,
                window,
            });
        }
        Ok(())
    }
}

/// A complex-weighted sum of Pauli strings supported in sites `1..=window`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalOperator {
    terms: Vec<(Complex64, PauliString)>,
    window: usize,
}

impl LocalOperator {
    pub fn new(window: usize, terms: Vec<(Complex64, PauliString)>) -> Result<Self> {
        if window == 0 {
            return Err(Error::EmptyWindow);
        }
        for (_, s) in &terms {
            if s.max_site().is_some_and(|m| m > window) {
                return Err(Error::OutsideWindow {
                    string: s.to_string(),
                    window,
                });
            }
        }
        Ok(Self { terms, window })
    }

    /// Window chosen as the largest occupied site (at least 1).
    pub fn from_terms(terms: Vec<(Complex64, PauliString)>) -> Result<Self> {
        let window = terms
            .iter()
            .filter_map(|(_, s)| s.max_site())
            .max()
            .unwrap_or(1);
        Self::new(window, terms)
    }

    pub fn from_string(string: PauliString) -> Self {
        Self::from_terms(vec![(Complex64::new(1.0, 0.0), string)])
            .expect("a single string always fits its own window")
    }

    pub fn terms(&self) -> &[(Complex64, PauliString)] {
        &self.terms
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of each distinct string, with duplicates merged.
    pub fn merged(&self) -> BTreeMap<PauliString, Complex64> {
        let mut map = BTreeMap::new();
        for (c, s) in &self.terms {
            *map.entry(*s).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        map
    }

    pub fn identity_coefficient(&self) -> Complex64 {
        self.terms
            .iter()
            .filter(|(_, s)| s.is_identity())
            .map(|(c, _)| *c)
            .sum()
    }

    pub fn is_traceless(&self) -> bool {
        self.identity_coefficient() == Complex64::new(0.0, 0.0)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.merged().values().all(|c| c.im.abs() <= tol)
    }

    /// Every term acts on site 1.
    pub fn is_canonical(&self) -> bool {
        self.terms.iter().all(|(_, s)| s.contains(1))
    }

    /// Largest extent over terms: the operator is exactly κ-local for this κ.
    pub fn locality(&self) -> usize {
        self.terms.iter().map(|(_, s)| s.extent()).max().unwrap_or(0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|(c, s)| (c * factor, *s)).collect(),
            window: self.window,
        }
    }

    pub fn to_sum(&self) -> PauliSum {
        let mut sum = PauliSum::new();
        for (c, s) in &self.terms {
            sum.add(*c, *s);
        }
        sum
    }

    /// Dense matrix on `n_sites` qubits (no translation).
    pub fn to_dense(&self, n_sites: usize) -> Result<Mat<c64>> {
        if self.window > n_sites {
            return Err(Error::ChainTooShort {
                n: n_sites,
                window: self.window,
            });
        }
        if n_sites > 16 {
            return Err(Error::SizeCap { n: n_sites, cap: 16 });
        }
        let dim = 1usize << n_sites;
        let mut m = Mat::<c64>::zeros(dim, dim);
        for col in 0..dim {
            for (c, s) in &self.terms {
                let (phase, row) = s.apply(col as u64);
                m[(row as usize, col)] += c * phase.to_complex();
            }
        }
        Ok(m)
    }

    /// Operator norm, computed densely on the window.
    pub fn operator_norm(&self) -> Result<f64> {
        let m = self.to_dense(self.window)?;
        let sv = m.singular_values().map_err(|_| Error::Eigen)?;
        Ok(sv.into_iter().fold(0.0, f64::max))
    }

    /// Rescaled to unit operator norm; returns the operator and the norm it
    /// was divided by.
    pub fn normalized(&self) -> Result<(Self, f64)> {
        let norm = self.operator_norm()?;
        if norm == 0.0 {
            return Err(Error::ZeroOperator);
        }
        Ok((self.scaled(1.0 / norm), norm))
    }
}

impl fmt::Display for LocalOperator {
    /// Real weights print as `Z1Z2 - 0.5*X1`, which parses back to the same
    /// operator; complex weights print as `(a+bi)*P`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (c, s)) in self.terms.iter().enumerate() {
            if c.im != 0.0 {
                if i > 0 {
                    write!(f, " + ")?;
                }
                write!(f, "({}{:+}i)*{}", c.re, c.im, s)?;
                continue;
            }
            let magnitude = c.re.abs();
            match (i, c.re.is_sign_negative()) {
                (0, false) => {}
                (0, true) => write!(f, "-")?,
                (_, false) => write!(f, " + ")?,
                (_, true) => write!(f, " - ")?,
            }
            if magnitude == 1.0 {
                write!(f, "{s}")?;
            } else {
                write!(f, "{magnitude}*{s}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for LocalOperator {
    type Err = Error;

    /// Parses real-coefficient sums such as `Z1Z2 + 1.05*X1 - 0.5 Z1`.
    fn from_str(s: &str) -> Result<Self> {
        let err = |reason: String| Error::Parse {
            expr: s.to_string(),
            reason,
        };
        let mut pieces: Vec<(f64, String)> = Vec::new();
        let mut current = String::new();
        let mut sign = 1.0;
        let mut prev: Option<char> = None;
        for c in s.chars() {
            let exponent_sign = matches!(prev, Some('e') | Some('E'))
                && current.trim_end().len() >= 2
                && current
                    .trim_end()
                    .chars()
                    .rev()
                    .nth(1)
                    .is_some_and(|d| d.is_ascii_digit() || d == '.');
            if (c == '+' || c == '-') && !exponent_sign {
                if !current.trim().is_empty() {
                    pieces.push((sign, std::mem::take(&mut current)));
                    sign = 1.0;
                } else {
                    current.clear();
                }
                if c == '-' {
                    sign = -sign;
                }
            } else {
                current.push(c);
            }
            if !c.is_whitespace() {
                prev = Some(c);
            }
        }
        if !current.trim().is_empty() {
            pieces.push((sign, current));
        } else if pieces.is_empty() {
            return Err(err("empty expression".into()));
        } else {
            return Err(err("dangling sign".into()));
        }

        let mut terms = Vec::new();
        for (sign, piece) in pieces {
            let piece = piece.trim();
            let split = piece
                .find(|c: char| Pauli::from_char(c).is_some() || c == 'I')
                .ok_or_else(|| err(format!("term `{piece}` has no Pauli string")))?;
            let (coef, string) = piece.split_at(split);
            let coef = coef.trim().trim_end_matches('*').trim();
            let value = if coef.is_empty() {
                1.0
            } else {
                coef.parse::<f64>()
                    .map_err(|_| err(format!("bad coefficient `{coef}`")))?
            };
            let string: PauliString = string.parse()?;
            terms.push((Complex64::new(sign * value, 0.0), string));
        }
        Self::from_terms(terms)
    }
}

/// A sparse operator on a chain: Pauli string to coefficient.
#[derive(Clone, Debug, Default)]
pub struct PauliSum {
    terms: HashMap<PauliString, Complex64>,
}

impl PauliSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, coeff: Complex64, string: PauliString) {
        *self
            .terms
            .entry(string)
            .or_insert(Complex64::new(0.0, 0.0)) += coeff;
    }

    pub fn get(&self, string: &PauliString) -> Complex64 {
        self.terms
            .get(string)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PauliString, &Complex64)> {
        self.terms.iter()
    }

    pub fn product(&self, other: &PauliSum) -> PauliSum {
        let mut out = PauliSum::new();
        for (p, a) in &self.terms {
            for (q, b) in &other.terms {
                let (phase, r) = p.multiply(q);
                out.add(a * b * phase.to_complex(), r);
            }
        }
        out
    }

    /// tr(self · other)/d. Distinct Pauli strings are trace-orthogonal and
    /// square to the identity, so only matching strings contribute.
    pub fn trace_product(&self, other: &PauliSum) -> Complex64 {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .terms
            .iter()
            .map(|(p, a)| a * large.get(p))
            .sum()
    }

    /// tr(self)/d.
    pub fn normalized_trace(&self) -> Complex64 {
        self.get(&PauliString::identity())
    }

    /// Σ_l T^l A T^-l on a chain of `n` sites.
    pub fn translation_sum(op: &LocalOperator, n: usize) -> Result<PauliSum> {
        if op.window() > n {
            return Err(Error::ChainTooShort {
                n,
                window: op.window(),
            });
        }
        if n > MAX_SITES {
            return Err(Error::SiteOutOfRange(n));
        }
        let mut sum = PauliSum::new();
        for l in 0..n {
            for (c, s) in op.terms() {
                sum.add(*c, s.translate(l as i64, n));
            }
        }
        Ok(sum)
    }
}

fn require_traceless(a: &LocalOperator) -> Result<()> {
    if a.is_traceless() {
        Ok(())
    } else {
        Err(Error::NotTraceless)
    }
}

/// tr(HA)/d with `H = Σ_l T^l h T^-l` on `ctx.n` sites.
///
/// Exact for every chain that holds both windows; it is N-independent once
/// `N >= k + k' - 1`.
pub fn ham_op_trace(h: &LocalOperator, a: &LocalOperator, ctx: &ChainContext) -> Result<Complex64> {
    require_traceless(a)?;
    ctx.check_fits(h.window().max(a.window()))?;
    let mut total = Complex64::new(0.0, 0.0);
    // Only offsets whose translate of an h-term coincides with an A-term survive.
    for l in 0..ctx.n {
        for (ch, p) in h.terms() {
            let moved = p.translate(l as i64, ctx.n);
            for (ca, q) in a.terms() {
                if moved == *q {
                    total += ch * ca;
                }
            }
        }
    }
    Ok(total)
}

/// tr(H²A)/d; N-independent once `N >= 2k + k' - 2`.
pub fn ham2_op_trace(h: &LocalOperator, a: &LocalOperator, ctx: &ChainContext) -> Result<Complex64> {
    require_traceless(a)?;
    ctx.check_fits(h.window().max(a.window()))?;
    let ham = PauliSum::translation_sum(h, ctx.n)?;
    // tr(H H A) = tr(H B) with B = H A; only products overlapping A are formed.
    let b = ham.product(&a.to_sum());
    Ok(ham.trace_product(&b))
}

/// tr(H^m)/d for `m <= 4`.
pub fn ham_moment(h: &LocalOperator, ctx: &ChainContext, m: u32) -> Result<f64> {
    if m > 4 {
        return Err(Error::MomentOrder(m));
    }
    ctx.check_fits(h.window())?;
    if m == 0 {
        return Ok(1.0);
    }
    let ham = PauliSum::translation_sum(h, ctx.n)?;
    let value = match m {
        1 => ham.normalized_trace(),
        2 => ham.trace_product(&ham),
        _ => {
            let sq = ham.product(&ham);
            if m == 3 {
                sq.trace_product(&ham)
            } else {
                sq.trace_product(&sq)
            }
        }
    };
    Ok(value.re)
}

/// Canonical form: each term translated so it starts on site 1, equal strings
/// merged, exact zeros dropped. Terms come out in string order.
pub fn canonicalize(a: &LocalOperator) -> LocalOperator {
    let mut merged: BTreeMap<PauliString, Complex64> = BTreeMap::new();
    for (c, s) in a.terms() {
        *merged
            .entry(s.shifted_to_origin())
            .or_insert(Complex64::new(0.0, 0.0)) += c;
    }
    let terms: Vec<_> = merged
        .into_iter()
        .filter(|(_, c)| *c != Complex64::new(0.0, 0.0))
        .map(|(s, c)| (c, s))
        .collect();
    LocalOperator::from_terms(terms).expect("shifted strings fit their own extent")
}

/// Dimension of the space of canonical traceless `kp`-local operators on
/// `d_loc`-level sites.
pub fn parameter_space_dim(d_loc: u64, kp: u32) -> u64 {
    assert!(d_loc >= 2 && kp >= 1);
    (d_loc * d_loc - 1) * d_loc.pow(2 * kp - 2)
}

/// All canonical qubit strings with support in `1..=kp` (each contains site 1).
pub fn canonical_basis(kp: usize) -> Vec<PauliString> {
    assert!(kp >= 1 && kp <= 8);
    let letters = [None, Some(Pauli::X), Some(Pauli::Y), Some(Pauli::Z)];
    let mut out = Vec::new();
    let count = 4usize.pow(kp as u32 - 1);
    for first in [Pauli::X, Pauli::Y, Pauli::Z] {
        for code in 0..count {
            let mut sites = vec![(1, first)];
            let mut rest = code;
            for site in 2..=kp {
                if let Some(l) = letters[rest % 4] {
                    sites.push((site, l));
                }
                rest /= 4;
            }
            out.push(PauliString::from_sites(sites).expect("sites within range"));
        }
    }
    out.sort();
    out
}

/// tr(Hh)·tr(H²A)/d² − tr(H²h)·tr(HA)/d².
pub fn obstruction_residual(h: &LocalOperator, a: &LocalOperator, ctx: &ChainContext) -> Result<Complex64> {
    let hh = ham_op_trace(h, h, ctx)?;
    let h2a = ham2_op_trace(h, a, ctx)?;
    let h2h = ham2_op_trace(h, h, ctx)?;
    let ha = ham_op_trace(h, a, ctx)?;
    Ok(hh * h2a - h2h * ha)
}

/// Observable built from the `H_0 H_{2k-1}` cross term of `H²`.
#[derive(Clone, Debug)]
pub struct Witness {
    pub operator: LocalOperator,
    pub string: PauliString,
    /// tr(G₁A)/d, where `G₁ = 2 Σ_l H_l H_{l+2k-1}`.
    pub g1_overlap: Complex64,
}

/// Picks the exactly (3k−1)-local string of `G₁` that covers sites
/// `1, k, 2k, 3k−1`; ties go to the smallest string in site/letter order.
pub fn witness_operator(h: &LocalOperator) -> Result<Witness> {
    if !h.is_traceless() {
        return Err(Error::NotTraceless);
    }
    if !h.is_hermitian(1e-12) {
        return Err(Error::NotHermitian);
    }
    if !h.is_canonical() {
        return Err(Error::NotCanonical);
    }
    let k = h.locality();
    if k == 0 {
        return Err(Error::ZeroOperator);
    }
    let span = 3 * k - 1;
    // Large enough that H_0 and H_{2k-1} do not wrap.
    let n = 4 * k;
    if n > MAX_SITES {
        return Err(Error::SiteOutOfRange(n));
    }
    let h0 = h.to_sum();
    let mut shifted = PauliSum::new();
    for (c, s) in h.terms() {
        shifted.add(*c, s.translate((2 * k - 1) as i64, n));
    }
    let cross = h0.product(&shifted);
    let required = [1, k, 2 * k, span];
    let string = cross
        .iter()
        .filter(|(s, c)| {
            **c != Complex64::new(0.0, 0.0)
                && s.min_site() == Some(1)
                && s.max_site() == Some(span)
                && required.iter().all(|&site| s.contains(site))
        })
        .map(|(s, _)| *s)
        .min()
        .ok_or(Error::NoWitness { span })?;
    let g1_overlap = cross.get(&string) * 2.0;
    let operator = LocalOperator::new(span, vec![(Complex64::new(1.0, 0.0), string)])?;

    let ctx = ChainContext::new(
        ChainContext::quadratic_trace_min_n(h.window(), span),
        h.window(),
    )?;
    let linear = ham_op_trace(h, &operator, &ctx)?;
    if linear != Complex64::new(0.0, 0.0) {
        return Err(Error::WitnessCheck(format!("tr(HA)/d = {linear}")));
    }
    let residual = obstruction_residual(h, &operator, &ctx)?;
    if residual.norm() == 0.0 {
        return Err(Error::WitnessCheck("residual vanishes".into()));
    }
    Ok(Witness {
        operator,
        string,
        g1_overlap,
    })
}
