//! Mean-square and higher-moment error analysis of truncated expansions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::basis::{OrthonormalBasis, WeightFunction};
use crate::coefficients::{max_dense_truncation, CoefficientTable, RESIDUAL_FLOOR};
use crate::error::{domain, Error, Result};
use crate::expansion::ComponentIndex;
use crate::sampling::time_component_warning;

/// Largest truncation `select_truncation` will try.
pub const MAX_SELECTED_TRUNCATION: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub k: usize,
    pub p: usize,
    pub residual: f64,
    pub mse_bound: f64,
    pub exact_mse: Option<f64>,
    /// Moment order `n` to `C_{n,k} · residual^n`.
    pub moment_bounds: BTreeMap<u32, f64>,
    pub selected_p: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ErrorReport {
    /// Residual, bound, moment bounds and, where available, the exact error.
    pub fn build(table: &CoefficientTable, icomp: &ComponentIndex, moment_orders: &[u32]) -> Result<Self> {
        if icomp.k() != table.k() {
            return Err(Error::Contract(format!(
                "table multiplicity {} does not match {} components",
                table.k(),
                icomp.k()
            )));
        }
        let exact_mse =
            if icomp.has_time_component() || table.k() > 3 { None } else { Some(exact_mse_theorem5(table, icomp)?) };
        let moment_bounds =
            moment_orders.iter().map(|&n| moment_bound(table, n).map(|b| (n, b))).collect::<Result<_>>()?;
        let warnings = time_component_warning(&table.basis().interval, icomp.indices()).into_iter().collect();
        Ok(Self {
            k: table.k(),
            p: table.p(),
            residual: table.residual(),
            mse_bound: mse_upper_bound(table),
            exact_mse,
            moment_bounds,
            selected_p: None,
            warnings,
        })
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `k! · residual`.
pub fn mse_upper_bound(table: &CoefficientTable) -> f64 {
    factorial(table.k()) * table.residual()
}

/// `C_{n,k} = (k!)^{2n} (n(2n−1))^{n(k−1)} (2n−1)!!`.
pub fn moment_constant(n: u32, k: usize) -> f64 {
    let nf = n as f64;
    let double_fact: f64 = (1..=n).map(|s| (2 * s - 1) as f64).product();
    factorial(k).powi(2 * n as i32) * (nf * (2.0 * nf - 1.0)).powi((n as usize * (k - 1)) as i32) * double_fact
}

/// `C_{n,k} · residual^n`, a bound on the `2n`-th moment of the error.
pub fn moment_bound(table: &CoefficientTable, n: u32) -> Result<f64> {
    if n == 0 {
        return domain("moment order must be at least 1");
    }
    Ok(moment_constant(n, table.k()) * table.residual().powi(n as i32))
}

/// Exact mean-square error for pairwise-distinct nonzero components.
pub fn exact_mse_distinct(table: &CoefficientTable) -> f64 {
    table.residual()
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    match k {
        1 => vec![vec![0]],
        2 => vec![vec![0, 1], vec![1, 0]],
        3 => vec![vec![0, 1, 2], vec![0, 2, 1], vec![1, 0, 2], vec![1, 2, 0], vec![2, 0, 1], vec![2, 1, 0]],
        _ => unreachable!("checked by caller"),
    }
}

/// Exact mean-square error for `k ≤ 3` and nonzero components:
/// `‖K‖² − Σ_j C_j Σ_σ C_{j∘σ}` over permutations `σ` with `i∘σ = i`.
pub fn exact_mse_theorem5(table: &CoefficientTable, icomp: &ComponentIndex) -> Result<f64> {
    let k = table.k();
    if k > 3 {
        return Err(Error::Unsupported(format!("exact mean-square error is implemented for k <= 3, got {k}")));
    }
    if icomp.k() != k {
        return Err(Error::Contract(format!("table multiplicity {k} does not match {} components", icomp.k())));
    }
    if icomp.has_time_component() {
        return Err(Error::Unsupported("exact mean-square error needs nonzero components".into()));
    }
    let comps = icomp.indices();
    let sigmas: Vec<Vec<usize>> =
        permutations(k).into_iter().filter(|s| (0..k).all(|l| comps[s[l]] == comps[l])).collect();
    let mut captured = 0.0;
    let mut permuted = vec![0usize; k];
    for (md, c) in table.entries() {
        if c == 0.0 {
            continue;
        }
        let mut inner = 0.0;
        for s in &sigmas {
            for l in 0..k {
                permuted[l] = md.0[s[l]];
            }
            inner += table.get(&permuted).expect("permuted indices stay within p");
        }
        captured += c * inner;
    }
    let value = table.parseval_norm() - captured;
    Ok(if value < RESIDUAL_FLOOR { 0.0 } else { value })
}

fn selection_cap(k: usize) -> usize {
    MAX_SELECTED_TRUNCATION.min(max_dense_truncation(k))
}

/// Smallest `p` whose error measure is within `tol`, with the table that
/// achieves it. The measure is the residual for pairwise-distinct nonzero
/// components and `k! · residual` otherwise.
pub fn select_truncation_with_table(
    icomp: &ComponentIndex,
    basis: &OrthonormalBasis,
    weights: &[WeightFunction],
    tol: f64,
) -> Result<(usize, CoefficientTable)> {
    if !tol.is_finite() || tol <= 0.0 {
        return domain(format!("tolerance must be positive and finite, got {tol}"));
    }
    let k = icomp.k();
    if weights.len() != k {
        return Err(Error::Contract(format!("{} weights for {k} components", weights.len())));
    }
    let scale = if icomp.pairwise_distinct() && !icomp.has_time_component() { 1.0 } else { factorial(k) };
    let cap = selection_cap(k);
    let accept = |residual: f64| scale * residual <= tol * (1.0 + 1e-9);
    let mut table = CoefficientTable::compute(*basis, weights.to_vec(), 0)?;
    let mut next = 0;
    loop {
        let shells = table.shell_sums();
        let mut captured: f64 = shells[..next].iter().sum();
        for (q, shell) in shells.iter().enumerate().skip(next) {
            captured += shell;
            let residual = table.parseval_norm() - captured;
            let residual = if residual < RESIDUAL_FLOOR { 0.0 } else { residual };
            if accept(residual) {
                return Ok((q, table.truncated(q)?));
            }
        }
        if table.p() >= cap {
            return Err(Error::Capacity {
                message: format!("tolerance {tol} not reached by p = {cap}"),
                p: cap,
                achieved: scale * table.residual(),
            });
        }
        next = table.p() + 1;
        table = table.extend_to((2 * table.p() + 1).clamp(1, cap))?;
    }
}

/// Smallest truncation meeting `tol`; see [`select_truncation_with_table`].
pub fn select_truncation(
    icomp: &ComponentIndex,
    basis: &OrthonormalBasis,
    weights: &[WeightFunction],
    tol: f64,
) -> Result<usize> {
    select_truncation_with_table(icomp, basis, weights, tol).map(|(p, _)| p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateProbe {
    pub p_values: Vec<usize>,
    pub residuals: Vec<f64>,
    /// Least-squares slope of `ln residual` against `ln p`; `None` when exact.
    pub slope: Option<f64>,
    /// `max p · residual(p)`.
    pub g_proxy: f64,
    /// All residuals vanish.
    pub exact: bool,
}

/// Fits the decay rate of the residual in `p`.
pub fn convergence_rate_probe(
    k: usize,
    basis: &OrthonormalBasis,
    weights: &[WeightFunction],
    p_values: &[usize],
) -> Result<RateProbe> {
    if p_values.len() < 4 {
        return domain(format!("rate probe needs at least 4 truncations, got {}", p_values.len()));
    }
    if weights.len() != k {
        return Err(Error::Contract(format!("{} weights for k = {k}", weights.len())));
    }
    let top = *p_values.iter().max().expect("non-empty");
    let table = CoefficientTable::compute(*basis, weights.to_vec(), top)?;
    let residuals = p_values.iter().map(|&p| table.residual_at(p)).collect::<Result<Vec<f64>>>()?;
    let g_proxy = p_values.iter().zip(&residuals).map(|(&p, r)| p as f64 * r).fold(0.0, f64::max);
    let points: Vec<(f64, f64)> = p_values
        .iter()
        .zip(&residuals)
        .filter(|&(&p, &r)| p > 0 && r > 0.0)
        .map(|(&p, &r)| ((p as f64).ln(), r.ln()))
        .collect();
    let exact = residuals.iter().all(|&r| r == 0.0);
    let slope = if points.len() >= 2 { Some(least_squares_slope(&points)) } else { None };
    Ok(RateProbe { p_values: p_values.to_vec(), residuals, slope, g_proxy, exact })
}

/// Slope of the ordinary least-squares line through `points`.
pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
