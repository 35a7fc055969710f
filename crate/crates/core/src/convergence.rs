//! Deviation of eigenstate expectation values from a target function of the
//! energy density, and the statistics built on it.

use faer::prelude::SolveLstsq;
use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{ham_op_trace, ChainContext, LocalOperator};
use crate::spectra::SpectrumTable;

pub const MAX_DEGREE: usize = 5;

/// A real polynomial `f(x) = Σ c_i x^i` of degree at most 5, evaluated at the
/// energy density `x = E/N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetFunction {
    coefficients: Vec<f64>,
}

impl TargetFunction {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() > MAX_DEGREE + 1 {
            return Err(Error::Degree(coefficients.len() - 1));
        }
        let coefficients = if coefficients.is_empty() {
            vec![0.0]
        } else {
            coefficients
        };
        Ok(Self { coefficients })
    }

    pub fn zero() -> Self {
        Self {
            coefficients: vec![0.0],
        }
    }

    pub fn linear(slope: f64) -> Self {
        Self {
            coefficients: vec![0.0, slope],
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn value_at_zero(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn slope_at_zero(&self) -> f64 {
        self.coefficients.get(1).copied().unwrap_or(0.0)
    }

    pub fn curvature_at_zero(&self) -> f64 {
        2.0 * self.coefficients.get(2).copied().unwrap_or(0.0)
    }

    /// Largest `|f(x)|` on a uniform grid over `[-1, 1]`; values above one
    /// leave the unit disk and are only worth a warning.
    pub fn max_abs_on_unit_interval(&self) -> f64 {
        (0..=200)
            .map(|i| self.eval(-1.0 + i as f64 / 100.0).abs())
            .fold(0.0, f64::max)
    }
}

fn deviations<'a>(
    table: &'a SpectrumTable,
    id: &str,
    f: &'a TargetFunction,
) -> Result<impl Iterator<Item = f64> + 'a> {
    let idx = table.observable_index(id)?;
    let n = table.n as f64;
    Ok(table
        .entries
        .iter()
        .map(move |e| (e.eev[idx] - Complex64::new(f.eval(e.energy / n), 0.0)).norm()))
}

/// `sqrt((1/d) Σ_j |⟨j|A|j⟩ − f(E_j/N)|²)`.
pub fn r_f(table: &SpectrumTable, id: &str, f: &TargetFunction) -> Result<f64> {
    let sum: f64 = deviations(table, id, f)?.map(|d| d * d).sum();
    Ok((sum / table.dim() as f64).sqrt())
}

/// `(1/d) Σ_j |⟨j|A|j⟩ − f(E_j/N)|`.
pub fn r_f_l1(table: &SpectrumTable, id: &str, f: &TargetFunction) -> Result<f64> {
    let sum: f64 = deviations(table, id, f)?.sum();
    Ok(sum / table.dim() as f64)
}

/// `(1/d) Σ_j |⟨j|A|j⟩|²`.
pub fn weak_eth_statistic(table: &SpectrumTable, id: &str) -> Result<f64> {
    let idx = table.observable_index(id)?;
    let sum: f64 = table.entries.iter().map(|e| e.eev[idx].norm_sqr()).sum();
    Ok(sum / table.dim() as f64)
}

/// Running maximum from the largest size downwards: `max_{n >= N} r(n)` over
/// the sizes that were actually computed. A stand-in for the supremum over
/// all larger sizes, which is not computable.
pub fn r_f_proxy(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::TooFew {
            what: "sizes",
            needed: 2,
            got: values.len(),
        });
    }
    let mut out = vec![0.0; values.len()];
    let mut running = f64::NEG_INFINITY;
    for (i, v) in values.iter().enumerate().rev() {
        running = running.max(*v);
        out[i] = running;
    }
    Ok(out)
}

/// `Σ_N w_N r_f(N)²`, the quantity minimized by [`fit_target`].
pub fn pooled_objective(
    tables: &[&SpectrumTable],
    id: &str,
    f: &TargetFunction,
    weights: Option<&[f64]>,
) -> Result<f64> {
    let mut total = 0.0;
    for (i, t) in tables.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        total += w * r_f(t, id, f)?.powi(2);
    }
    Ok(total)
}

/// Least-squares polynomial over the pooled `(E_j/N, ⟨j|A|j⟩)` points of all
/// tables, minimizing `Σ_N w_N r_f(N)²` (uniform `w_N = 1` unless weights are
/// given). Each point of size `N` carries weight `w_N / 2^N`, so every size
/// counts equally regardless of its dimension. The imaginary part of the EEV
/// (zero for Hermitian observables) is fitted by nothing and simply adds to
/// the objective.
pub fn fit_target(
    tables: &[&SpectrumTable],
    id: &str,
    degree: usize,
    weights: Option<&[f64]>,
) -> Result<TargetFunction> {
    if tables.len() < 2 {
        return Err(Error::TooFew {
            what: "sizes",
            needed: 2,
            got: tables.len(),
        });
    }
    fit_pooled(tables, id, degree, weights)
}

/// Least-squares polynomial for a single size: an estimate of the
/// size-dependent smooth part `g_N` of the EEV.
pub fn fit_per_size(table: &SpectrumTable, id: &str, degree: usize) -> Result<TargetFunction> {
    fit_pooled(&[table], id, degree, None)
}

fn fit_pooled(
    tables: &[&SpectrumTable],
    id: &str,
    degree: usize,
    weights: Option<&[f64]>,
) -> Result<TargetFunction> {
    if degree > MAX_DEGREE {
        return Err(Error::Degree(degree));
    }
    if let Some(w) = weights {
        if w.len() != tables.len() || w.iter().any(|x| !(*x > 0.0)) {
            return Err(Error::InvalidArgument(
                "one positive weight per size is required".into(),
            ));
        }
    }
    let rows: usize = tables.iter().map(|t| t.dim()).sum();
    let cols = degree + 1;
    if rows < cols {
        return Err(Error::RankDeficient);
    }
    let mut design = Mat::<f64>::zeros(rows, cols);
    let mut rhs = Mat::<f64>::zeros(rows, 1);
    let mut row = 0;
    for (i, t) in tables.iter().enumerate() {
        let idx = t.observable_index(id)?;
        let w = weights.map_or(1.0, |w| w[i]);
        let scale = (w / t.dim() as f64).sqrt();
        let n = t.n as f64;
        for e in &t.entries {
            let x = e.energy / n;
            let mut power = scale;
            for c in 0..cols {
                design[(row, c)] = power;
                power *= x;
            }
            rhs[(row, 0)] = scale * e.eev[idx].re;
            row += 1;
        }
    }
    let qr = design.qr();
    let r = qr.thin_R();
    let diag_max = (0..cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if diag_max == 0.0 || (0..cols).any(|i| r[(i, i)].abs() <= 1e-10 * diag_max) {
        return Err(Error::RankDeficient);
    }
    let solution = qr.solve_lstsq(&rhs);
    TargetFunction::new((0..cols).map(|i| solution[(i, 0)]).collect())
}

/// Slope `tr(HA)/tr(Hh)` and the linear target `f(x) = slope · x`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearPredictor {
    pub slope: f64,
    pub function: TargetFunction,
}

pub fn eth_linear_predictor(
    h: &LocalOperator,
    a: &LocalOperator,
    ctx: &ChainContext,
) -> Result<LinearPredictor> {
    let ha = ham_op_trace(h, a, ctx)?;
    let hh = ham_op_trace(h, h, ctx)?;
    if hh.re <= 0.0 {
        return Err(Error::ZeroOperator);
    }
    let slope = ha.re / hh.re;
    Ok(LinearPredictor {
        slope,
        function: TargetFunction::linear(slope),
    })
}

/// Least-squares line through `(log N, log value)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
}

pub fn scaling_exponent(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::TooFew {
            what: "points",
            needed: 3,
            got: points.len(),
        });
    }
    for &(n, value) in points {
        if !(value > 0.0) || !(n > 0.0) {
            return Err(Error::NonPositive { n, value });
        }
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(n, v)| (n.ln(), v.ln())).collect();
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all sizes coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = logs
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let stderr = (ssr / (m - 2.0) / sxx).sqrt();
    Ok(ScalingFit {
        slope,
        stderr,
        intercept,
    })
}

/// EEV spread inside energy bins of width `window`: `(bin center, std)` for
/// each non-empty bin, ordered by energy.
pub fn eev_fluctuation_profile(
    table: &SpectrumTable,
    id: &str,
    window: f64,
) -> Result<Vec<(f64, f64)>> {
    if !(window > 0.0) {
        return Err(Error::InvalidArgument("bin width must be positive".into()));
    }
    let idx = table.observable_index(id)?;
    let mut bins: std::collections::BTreeMap<i64, Vec<Complex64>> = Default::default();
    for e in &table.entries {
        let bin = (e.energy / window).floor() as i64;
        bins.entry(bin).or_default().push(e.eev[idx]);
    }
    Ok(bins
        .into_iter()
        .map(|(bin, values)| {
            let m = values.len() as f64;
            let mean: Complex64 = values.iter().sum::<Complex64>() / m;
            let var = values.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / m;
            ((bin as f64 + 0.5) * window, var.sqrt())
        })
        .collect())
}

/// One row of a convergence report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeRecord {
    #[serde(rename = "N")]
    pub n: usize,
    pub r_f: f64,
    pub r_f_l1: f64,
    pub weak_eth: f64,
    #[serde(rename = "R_f_proxy")]
    pub r_f_proxy: f64,
}

/// Values at or below this are treated as exact zeros when fitting exponents.
pub const ZERO_DEVIATION: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub observable: String,
    pub target: TargetFunction,
    pub records: Vec<SizeRecord>,
    /// Log–log exponent of `r_f`; `None` when fewer than three sizes are
    /// present or some `r_f` vanishes (exponent undefined).
    pub exponent: Option<ScalingFit>,
}

/// Evaluates one target function over tables of increasing size.
pub fn convergence_report(
    tables: &[&SpectrumTable],
    id: &str,
    f: &TargetFunction,
) -> Result<ConvergenceReport> {
    let mut tables: Vec<&SpectrumTable> = tables.to_vec();
    tables.sort_by_key(|t| t.n);
    let mut rs = Vec::with_capacity(tables.len());
    let mut records = Vec::with_capacity(tables.len());
    for t in &tables {
        let r = r_f(t, id, f)?;
        rs.push(r);
        records.push(SizeRecord {
            n: t.n,
            r_f: r,
            r_f_l1: r_f_l1(t, id, f)?,
            weak_eth: weak_eth_statistic(t, id)?,
            r_f_proxy: r,
        });
    }
    let proxy = r_f_proxy(&rs)?;
    for (rec, p) in records.iter_mut().zip(proxy) {
        rec.r_f_proxy = p;
    }
    let exponent = if rs.len() >= 3 && rs.iter().all(|r| *r > ZERO_DEVIATION) {
        let points: Vec<_> = records.iter().map(|r| (r.n as f64, r.r_f)).collect();
        Some(scaling_exponent(&points)?)
    } else {
        None
    };
    Ok(ConvergenceReport {
        observable: id.to_string(),
        target: f.clone(),
        records,
        exponent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::SpectrumEntry;

    fn toy(n: usize, points: &[(f64, f64)]) -> SpectrumTable {
        let entries = points
            .iter()
            .map(|&(energy, v)| SpectrumEntry {
                energy,
                momentum: 0,
                eev: vec![Complex64::new(v, 0.0)],
            })
            .collect();
        SpectrumTable::new(n, vec!["a".into()], entries)
    }

    #[test]
    fn toy_deviation_statistics() {
        let t = toy(4, &[(2.0, 0.5)]);
        assert_eq!(r_f(&t, "a", &TargetFunction::linear(1.0)).unwrap(), 0.0);
        let a = 0.3;
        let t = toy(4, &[(0.0, a), (0.0, -a)]);
        assert!((r_f_l1(&t, "a", &TargetFunction::zero()).unwrap() - a).abs() < 1e-15);
        let w = weak_eth_statistic(&t, "a").unwrap();
        let r0 = r_f(&t, "a", &TargetFunction::zero()).unwrap();
        assert!((r0 * r0 - w).abs() < 1e-15);
        assert_eq!(weak_eth_statistic(&toy(4, &[(1.0, 0.0), (2.0, 0.0)]), "a").unwrap(), 0.0);
        assert!(matches!(r_f(&t, "b", &TargetFunction::zero()), Err(Error::UnknownObservable(_))));
    }

    #[test]
    fn proxy_is_running_max_from_above() {
        assert_eq!(r_f_proxy(&[0.3, 0.2, 0.25]).unwrap(), vec![0.3, 0.25, 0.25]);
        assert_eq!(r_f_proxy(&[0.4, 0.2, 0.1]).unwrap(), vec![0.4, 0.2, 0.1]);
        assert_eq!(r_f_proxy(&[0.2, 0.2, 0.2]).unwrap(), vec![0.2, 0.2, 0.2]);
        assert!(r_f_proxy(&[0.2]).is_err());
    }

    #[test]
    fn exponents_of_exact_power_laws() {
        let fit = scaling_exponent(&[(1.0, 1.0), (2.0, 0.5), (4.0, 0.25)]).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-14);
        assert!(fit.stderr < 1e-14);
        let fit = scaling_exponent(&[(1.0, 3.0), (2.0, 3.0), (4.0, 3.0)]).unwrap();
        assert!(fit.slope.abs() < 1e-14);
        let fit = scaling_exponent(&[(1.0, 1.0), (2.0, 0.25), (4.0, 0.0625)]).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-14);
        assert!(scaling_exponent(&[(1.0, 1.0), (2.0, 0.0), (4.0, 1.0)]).is_err());
        assert!(scaling_exponent(&[(1.0, 1.0), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn stderr_matches_textbook_formula() {
        // Residuals of ±δ around a slope −1 line in log space.
        let d = 0.01f64;
        let pts = [(1.0, 1.0), (2.0, 0.5 * d.exp()), (4.0, 0.25)];
        let fit = scaling_exponent(&pts).unwrap();
        let xs = [0.0, 2f64.ln(), 4f64.ln()];
        let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
        let mx = xs.iter().sum::<f64>() / 3.0;
        let my = ys.iter().sum::<f64>() / 3.0;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let b: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
        let a = my - b * mx;
        let ssr: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
        assert!((fit.slope - b).abs() < 1e-14);
        assert!((fit.stderr - (ssr / sxx).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn fit_recovers_exact_line() {
        let a = toy(2, &[(-1.0, -1.0), (0.5, 0.5), (1.0, 1.0)]);
        let b = toy(4, &[(-2.0, -1.0), (2.0, 1.0), (3.0, 1.5)]);
        let f = fit_target(&[&a, &b], "a", 3, None).unwrap();
        let c = f.coefficients();
        assert!(c[0].abs() < 1e-12 && (c[1] - 2.0).abs() < 1e-12);
        assert!(c[2].abs() < 1e-10 && c[3].abs() < 1e-10);
    }

    #[test]
    fn degree_zero_fit_is_weighted_mean() {
        let a = toy(2, &[(0.0, 0.2), (1.0, -0.4)]);
        let b = toy(4, &[(0.0, 0.1), (1.0, 0.1), (2.0, 0.1), (3.0, -0.3)]);
        let f = fit_target(&[&a, &b], "a", 0, None).unwrap();
        // Normal equation: Σ_N mean_N / #sizes with equal size weights.
        let expected = ((0.2 - 0.4) / 2.0 + (0.1 + 0.1 + 0.1 - 0.3) / 4.0) / 2.0;
        assert!((f.value_at_zero() - expected).abs() < 1e-14);
    }

    #[test]
    fn fit_errors() {
        let a = toy(2, &[(1.0, 0.2), (1.0, -0.4), (1.0, 0.3)]);
        let b = toy(4, &[(2.0, 0.1), (2.0, 0.0)]);
        assert!(matches!(fit_target(&[&a, &b], "a", 1, None), Err(Error::RankDeficient)));
        assert!(matches!(fit_target(&[&a], "a", 1, None), Err(Error::TooFew { .. })));
        assert!(matches!(fit_target(&[&a, &b], "a", 6, None), Err(Error::Degree(6))));
    }

    #[test]
    fn fluctuation_profile_of_a_function_of_energy() {
        let t = toy(4, &[(0.1, 0.025), (0.2, 0.05), (1.1, 0.275), (1.5, 0.375)]);
        for (_, std) in eev_fluctuation_profile(&t, "a", 1.0).unwrap() {
            assert!(std <= 0.05 + 1e-12);
        }
        let t = toy(4, &[(0.1, 0.3), (0.2, 0.3), (5.0, 0.3)]);
        let prof = eev_fluctuation_profile(&t, "a", 1.0).unwrap();
        assert_eq!(prof.len(), 2);
        assert!(prof.iter().all(|(_, s)| *s == 0.0));
        assert_eq!(prof[0].0, 0.5);
        assert!(eev_fluctuation_profile(&t, "a", 0.0).is_err());
    }

    #[test]
    fn target_function_basics() {
        let f = TargetFunction::new(vec![0.1, 2.0, 3.0]).unwrap();
        assert_eq!(f.eval(2.0), 0.1 + 4.0 + 12.0);
        assert_eq!(f.curvature_at_zero(), 6.0);
        assert!(TargetFunction::new(vec![0.0; 7]).is_err());
        assert_eq!(TargetFunction::linear(0.5).max_abs_on_unit_interval(), 0.5);
    }
}
