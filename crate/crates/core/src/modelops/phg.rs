//! Fitting polyhomogeneous expansions `Σ a_{z,k} t^{−z} logᵏ t` to samples.

use serde::Serialize;

use super::index::index_order;
use crate::error::{check_len, Error, Result};
use crate::linalg::least_squares;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitConfig {
    /// Candidate exponents `z`.
    pub exponents: Vec<f64>,
    /// Largest log power tried for each exponent.
    pub max_log: usize,
    /// Largest number of terms in the expansion.
    pub max_terms: usize,
    /// Expected rms of the sample noise.
    pub noise: f64,
    /// A fit is accepted once its rms residual is at most `kappa · noise`.
    pub kappa: f64,
    /// Fits whose design matrix exceeds this condition number are skipped.
    pub max_condition: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            exponents: (2..=16).map(|i| i as f64 * 0.5).collect(),
            max_log: 2,
            max_terms: 3,
            noise: 1e-9,
            kappa: 3.0,
            max_condition: 1e12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhgFitTerm {
    pub z: f64,
    pub k: usize,
    pub coefficient: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhgExpansion {
    /// Terms sorted by the index order, leading term first.
    pub terms: Vec<PhgFitTerm>,
    /// Rms of the fit residual.
    pub remainder: f64,
    pub condition: f64,
    /// Whether the residual reached the noise floor.
    pub converged: bool,
}

impl PhgExpansion {
    pub fn eval(&self, t: f64) -> f64 {
        self.terms.iter().map(|s| s.coefficient * basis(s.z, s.k, t)).sum()
    }

    pub fn leading(&self) -> Option<&PhgFitTerm> {
        self.terms.first()
    }
}

fn basis(z: f64, k: usize, t: f64) -> f64 {
    t.powf(-z) * t.ln().powi(k as i32)
}

struct Fit {
    coeffs: Vec<f64>,
    rms: f64,
    cond: f64,
}

fn fit_subset(t: &[f64], y: &[f64], cands: &[(f64, usize)], subset: &[usize]) -> Option<Fit> {
    let cols: Vec<Vec<f64>> = subset.iter().map(|&i| t.iter().map(|&t| basis(cands[i].0, cands[i].1, t)).collect()).collect();
    let norms: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    if norms.iter().any(|&n| !(n > 0.0 && n.is_finite())) {
        return None;
    }
    let rows: Vec<Vec<f64>> = (0..t.len()).map(|i| cols.iter().zip(&norms).map(|(c, n)| c[i] / n).collect()).collect();
    let (c, cond) = least_squares(&rows, y).ok()?;
    let rms = (rows
        .iter()
        .zip(y)
        .map(|(r, y)| {
            let f: f64 = r.iter().zip(&c).map(|(a, b)| a * b).sum();
            (y - f).powi(2)
        })
        .sum::<f64>()
        / t.len() as f64)
        .sqrt();
    Some(Fit { coeffs: c.iter().zip(&norms).map(|(c, n)| c / n).collect(), rms, cond })
}

fn for_each_subset(n: usize, m: usize, f: &mut impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..m).collect();
    if m > n {
        return;
    }
    loop {
        f(&idx);
        let mut i = m;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < n - m + i {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..m {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Fits `y(t) ≈ Σ a_{z,k} t^{−z} logᵏ t` by least squares over subsets of the
/// candidate terms, returning the smallest subset whose residual reaches the
/// noise floor (or the best subset of the largest size if none does).
pub fn phg_fit(t: &[f64], y: &[f64], cfg: &FitConfig) -> Result<PhgExpansion> {
    check_len(t.len(), y.len())?;
    if t.iter().any(|&t| !(t > 1.0)) {
        return Err(Error::Domain("fit times must exceed 1".into()));
    }
    if cfg.max_terms == 0 || cfg.exponents.is_empty() {
        return Err(Error::Parameter("fit needs at least one candidate term".into()));
    }
    if t.len() < 3 * cfg.max_terms {
        return Err(Error::Precondition(format!(
            "{} samples is fewer than 3 per term for {} terms",
            t.len(),
            cfg.max_terms
        )));
    }
    let cands: Vec<(f64, usize)> =
        cfg.exponents.iter().flat_map(|&z| (0..=cfg.max_log).map(move |k| (z, k))).collect();
    let mut best: Option<(Vec<usize>, Fit)> = None;
    let mut skipped = f64::NAN;
    for m in 1..=cfg.max_terms.min(cands.len()) {
        let mut level: Option<(Vec<usize>, Fit)> = None;
        for_each_subset(cands.len(), m, &mut |s| {
            let Some(fit) = fit_subset(t, y, &cands, s) else { return };
            if fit.cond > cfg.max_condition {
                skipped = fit.cond;
                return;
            }
            if level.as_ref().is_none_or(|(_, b)| fit.rms < b.rms) {
                level = Some((s.to_vec(), fit));
            }
        });
        let done = level.as_ref().is_some_and(|(_, f)| f.rms <= cfg.kappa * cfg.noise);
        if level.is_some() {
            best = level;
        }
        if done {
            break;
        }
    }
    let Some((subset, fit)) = best else {
        return Err(Error::Conditioning { what: "every candidate fit is collinear".into(), cond: skipped });
    };
    let mut terms: Vec<PhgFitTerm> = subset
        .iter()
        .zip(&fit.coeffs)
        .map(|(&i, &c)| PhgFitTerm { z: cands[i].0, k: cands[i].1, coefficient: c })
        .collect();
    terms.sort_by(|a, b| index_order((a.z, a.k), (b.z, b.k)));
    Ok(PhgExpansion { terms, remainder: fit.rms, condition: fit.cond, converged: fit.rms <= cfg.kappa * cfg.noise })
}

/// Applies `Π (t∂_t + z)` to samples on a uniform grid in `log t`, using the
/// shift form `(y_{j+1} − e^{−zh}y_j)/h`, which annihilates `t^{−z}` times any
/// polynomial in `log t` of degree below the multiplicity of `z`. Each
/// factor drops the last sample.
pub fn annihilate(t: &[f64], y: &[f64], factors: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len(t.len(), y.len())?;
    if t.len() <= factors.len() + 1 {
        return Err(Error::Precondition(format!("{} samples for {} factors", t.len(), factors.len())));
    }
    let h = (t[1] / t[0]).ln();
    let uniform = t.windows(2).all(|w| w[0] > 0.0 && ((w[1] / w[0]).ln() - h).abs() < 1e-9 * h.abs().max(1.0));
    if !(h > 0.0) || !uniform {
        return Err(Error::Precondition("annihilator needs increasing samples uniform in log t".into()));
    }
    let mut v = y.to_vec();
    for &z in factors {
        let q = (-z * h).exp();
        v = v.windows(2).map(|w| (w[1] - q * w[0]) / h).collect();
    }
    Ok((t[..v.len()].to_vec(), v))
}
