//! Brute-force fine-grid oracle: simulated Wiener paths, left-point iterated
//! sums, pathwise ζ̂ and empirical error moments.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{IntegrationInterval, OrthonormalBasis, WeightFunction};
use crate::coefficients::{CoefficientTable, MultiDegree};
use crate::error::{domain, Error, Result};
use crate::expansion::{evaluate_expansion, ComponentIndex};
use crate::sampling::{zeta_time_row, SeedSpec, ZetaMatrix};

/// Largest number of tuples `multiple_sum_check` enumerates.
pub const MULTIPLE_SUM_LIMIT: usize = 1 << 20;

/// Increments of `m` independent Wiener components on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WienerPath {
    interval: IntegrationInterval,
    n: usize,
    /// `increments[i - 1][l]` = Δw_l^{(i)}
    increments: Vec<Vec<f64>>,
}

impl WienerPath {
    /// Wraps given increments; every row must have the same length.
    pub fn from_increments(interval: IntegrationInterval, increments: Vec<Vec<f64>>) -> Result<Self> {
        let n = increments.first().map_or(0, |r| r.len());
        if n == 0 || increments.iter().any(|r| r.len() != n) {
            return Err(Error::Contract("increment rows must be non-empty and of equal length".into()));
        }
        Ok(Self { interval, n, increments })
    }

    pub fn interval(&self) -> IntegrationInterval {
        self.interval
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.increments.len()
    }

    pub fn step(&self) -> f64 {
        self.interval.length() / self.n as f64
    }

    pub fn node(&self, l: usize) -> f64 {
        if l == self.n {
            self.interval.end()
        } else {
            self.interval.start() + l as f64 * self.step()
        }
    }

    /// Δw_l^{(i)}, with Δτ for `i = 0`.
    pub fn increment(&self, i: usize, l: usize) -> f64 {
        if i == 0 {
            self.step()
        } else {
            self.increments[i - 1][l]
        }
    }

    pub fn increments(&self, i: usize) -> &[f64] {
        &self.increments[i - 1]
    }

    /// `W_T − W_t` for component `i ≥ 1`.
    pub fn total(&self, i: usize) -> f64 {
        self.increments[i - 1].iter().sum()
    }
}

pub fn simulate_path(seed: SeedSpec, m: usize, n: usize, interval: IntegrationInterval) -> Result<WienerPath> {
    if n == 0 || m == 0 {
        return domain(format!("need N >= 1 and m >= 1, got N = {n}, m = {m}"));
    }
    let mut rng = seed.rng();
    let scale = (interval.length() / n as f64).sqrt();
    let increments = (0..m)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    scale * z
                })
                .collect()
        })
        .collect();
    Ok(WienerPath { interval, n, increments })
}

fn check_components(path: &WienerPath, icomp: &[usize]) -> Result<()> {
    match icomp.iter().find(|&&i| i > path.m()) {
        Some(bad) => domain(format!("component {bad} exceeds the {} simulated components", path.m())),
        None => Ok(()),
    }
}

/// Left-point iterated sum over `l_1 < … < l_k` by a k-pass prefix recursion.
pub fn iterated_integral_on_path(path: &WienerPath, icomp: &[usize], weights: &[WeightFunction]) -> Result<f64> {
    if icomp.is_empty() || icomp.len() != weights.len() {
        return Err(Error::Contract(format!("{} components with {} weights", icomp.len(), weights.len())));
    }
    check_components(path, icomp)?;
    let n = path.n();
    let nodes: Vec<f64> = (0..n).map(|l| path.node(l)).collect();
    let mut prev = vec![1.0; n];
    let mut total = 0.0;
    for (&i, w) in icomp.iter().zip(weights) {
        let mut running = 0.0;
        for l in 0..n {
            let before = running;
            running += prev[l] * w.eval(nodes[l]) * path.increment(i, l);
            prev[l] = before;
        }
        total = running;
    }
    Ok(total)
}

/// `φ_j(τ_l)` for `j ≤ p` and the left nodes `l < N`, row-major in `j`.
#[derive(Debug, Clone)]
pub struct BasisGrid {
    p: usize,
    n: usize,
    values: Vec<f64>,
}

impl BasisGrid {
    pub fn new(basis: &OrthonormalBasis, p: usize, n: usize) -> Self {
        let step = basis.interval.length() / n as f64;
        let mut values = vec![0.0; (p + 1) * n];
        for l in 0..n {
            let row = basis.eval_all(p, basis.interval.start() + l as f64 * step);
            for (j, v) in row.into_iter().enumerate() {
                values[j * n + l] = v;
            }
        }
        Self { p, n, values }
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.n..(j + 1) * self.n]
    }
}

/// ζ̂_j^{(i)} = Σ_l φ_j(τ_l) Δw_l^{(i)}; row 0 is the exact time row.
pub fn zeta_from_path(path: &WienerPath, basis: &OrthonormalBasis, p: usize) -> ZetaMatrix {
    zeta_from_grid(path, basis, &BasisGrid::new(basis, p, path.n()))
}

/// As [`zeta_from_path`] with precomputed basis values.
pub fn zeta_from_grid(path: &WienerPath, basis: &OrthonormalBasis, grid: &BasisGrid) -> ZetaMatrix {
    assert_eq!(grid.n, path.n(), "basis grid built for a different N");
    let mut rows = Vec::with_capacity(path.m() + 1);
    rows.push(zeta_time_row(basis, grid.p));
    for i in 1..=path.m() {
        let inc = path.increments(i);
        rows.push((0..=grid.p).map(|j| grid.row(j).iter().zip(inc).map(|(a, b)| a * b).sum()).collect());
    }
    ZetaMatrix::from_rows(rows).expect("rows share the grid truncation")
}

/// Monte Carlo moments of the expansion error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseEstimate {
    pub estimate: f64,
    pub std_error: f64,
    /// Mean of `(e − ē)^4`.
    pub fourth_moment: f64,
    pub fourth_std_error: f64,
    pub trials: usize,
    pub n: usize,
}

impl MseEstimate {
    pub fn from_errors(errors: &[f64], n: usize) -> Self {
        let t = errors.len() as f64;
        let squares: Vec<f64> = errors.iter().map(|e| e * e).collect();
        let (estimate, std_error) = mean_and_std_error(&squares);
        let mean = errors.iter().sum::<f64>() / t;
        let fourths: Vec<f64> = errors.iter().map(|e| (e - mean).powi(4)).collect();
        let (fourth_moment, fourth_std_error) = mean_and_std_error(&fourths);
        Self { estimate, std_error, fourth_moment, fourth_std_error, trials: errors.len(), n }
    }
}

/// Sample mean and its standard error, summed in order.
pub fn mean_and_std_error(xs: &[f64]) -> (f64, f64) {
    let t = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / t;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (t - 1.0);
    (mean, (var / t).sqrt())
}

/// Pathwise errors `J_path − J^p(ζ̂)` for each trial, in trial order.
pub fn expansion_errors(
    table: &CoefficientTable,
    icomp: &ComponentIndex,
    trials: usize,
    n: usize,
    seed: SeedSpec,
) -> Result<Vec<f64>> {
    if table.k() != icomp.k() {
        return Err(Error::Contract(format!(
            "table multiplicity {} does not match {} components",
            table.k(),
            icomp.k()
        )));
    }
    if n == 0 {
        return domain("N must be at least 1");
    }
    let basis = *table.basis();
    let m = icomp.indices().iter().copied().max().unwrap_or(0).max(1);
    let grid = BasisGrid::new(&basis, table.p(), n);
    (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let path = simulate_path(seed.with_stream(trial), m, n, basis.interval)?;
            let exact = iterated_integral_on_path(&path, icomp.indices(), table.weights())?;
            let zeta = zeta_from_grid(&path, &basis, &grid);
            Ok(exact - evaluate_expansion(table, icomp, &zeta)?)
        })
        .collect()
}

/// Mean-square error of the expansion against the fine-grid oracle, with
/// standard error and the fourth central moment.
pub fn empirical_mse(
    table: &CoefficientTable,
    icomp: &ComponentIndex,
    trials: usize,
    n: usize,
    seed: SeedSpec,
) -> Result<MseEstimate> {
    if trials < 100 {
        return domain(format!("empirical_mse needs at least 100 trials, got {trials}"));
    }
    let errors = expansion_errors(table, icomp, trials, n, seed)?;
    Ok(MseEstimate::from_errors(&errors, n))
}

/// Σ over pairwise-distinct `(l_1, …, l_k)` of Π φ_{j_s}(τ_{l_s}) Δw_{l_s}^{(i_s)}.
///
/// `Π ζ̂` minus this sum is the part of the product carried by coinciding
/// grid indices.
pub fn multiple_sum_check(
    path: &WienerPath,
    basis: &OrthonormalBasis,
    jtuple: &MultiDegree,
    icomp: &[usize],
) -> Result<f64> {
    let k = jtuple.k();
    if icomp.len() != k {
        return Err(Error::Contract(format!("{} components for {k} indices", icomp.len())));
    }
    check_components(path, icomp)?;
    let n = path.n();
    let tuples = (n as f64).powi(k as i32);
    if k > 3 || tuples > MULTIPLE_SUM_LIMIT as f64 {
        return Err(Error::Unsupported(format!(
            "multiple sum enumerates N^k tuples; limited to k <= 3 and N^k <= {MULTIPLE_SUM_LIMIT}"
        )));
    }
    // f[s][l] = φ_{j_s}(τ_l) Δw_l^{(i_s)}
    let f: Vec<Vec<f64>> = (0..k)
        .map(|s| {
            (0..n).map(|l| basis.eval_unchecked(jtuple.0[s], path.node(l)) * path.increment(icomp[s], l)).collect()
        })
        .collect();
    let mut total = 0.0;
    match k {
        1 => total = f[0].iter().sum(),
        2 => {
            for a in 0..n {
                for b in (0..n).filter(|&b| b != a) {
                    total += f[0][a] * f[1][b];
                }
            }
        }
        _ => {
            for a in 0..n {
                for b in (0..n).filter(|&b| b != a) {
                    let ab = f[0][a] * f[1][b];
                    for c in (0..n).filter(|&c| c != a && c != b) {
                        total += ab * f[2][c];
                    }
                }
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit() -> IntegrationInterval {
        IntegrationInterval::unit()
    }

    fn ones(k: usize) -> Vec<WeightFunction> {
        vec![WeightFunction::ConstantOne; k]
    }

    #[test]
    fn simulation_is_reproducible() {
        let a = simulate_path(SeedSpec::new(3, 9), 2, 64, unit()).unwrap();
        let b = simulate_path(SeedSpec::new(3, 9), 2, 64, unit()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.increments(1), a.increments(2));
        assert_eq!(a.node(0), 0.0);
        assert_eq!(a.node(64), 1.0);
        assert!(simulate_path(SeedSpec::new(3, 9), 1, 0, unit()).is_err());
    }

    #[test]
    fn small_iterated_sums() {
        let path = WienerPath::from_increments(unit(), vec![vec![0.3, -0.7], vec![1.1, 0.4]]).unwrap();
        let v = iterated_integral_on_path(&path, &[1, 2], &ones(2)).unwrap();
        assert_abs_diff_eq!(v, 0.3 * 0.4, epsilon = 1e-16);
        let one = iterated_integral_on_path(&path, &[1], &ones(1)).unwrap();
        assert_abs_diff_eq!(one, path.total(1), epsilon = 1e-16);
        let time = iterated_integral_on_path(&path, &[0, 0], &ones(2)).unwrap();
        assert_abs_diff_eq!(time, 0.25, epsilon = 1e-16);
        assert!(iterated_integral_on_path(&path, &[3], &ones(1)).is_err());
    }

    #[test]
    fn repeated_double_sum_identity() {
        for s in 0..20 {
            let path = simulate_path(SeedSpec::new(5, s), 1, 500, unit()).unwrap();
            let v = iterated_integral_on_path(&path, &[1, 1], &ones(2)).unwrap();
            let total = path.total(1);
            let quad: f64 = path.increments(1).iter().map(|x| x * x).sum();
            assert_abs_diff_eq!(v, (total * total - quad) / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn weighted_sums_use_left_nodes() {
        let path = WienerPath::from_increments(unit(), vec![vec![1.0, 2.0, 3.0, 4.0]]).unwrap();
        let tau = WeightFunction::polynomial(vec![0.0, 1.0]).unwrap();
        let v = iterated_integral_on_path(&path, &[1], &[tau]).unwrap();
        assert_abs_diff_eq!(v, 0.25 * 2.0 + 0.5 * 3.0 + 0.75 * 4.0, epsilon = 1e-15);
    }

    #[test]
    fn multiple_sum_small_cases() {
        let b = OrthonormalBasis::legendre(unit());
        let path = WienerPath::from_increments(unit(), vec![vec![0.3, -0.7], vec![1.1, 0.4]]).unwrap();
        let (j1, j2) = (1, 2);
        let md = MultiDegree(vec![j1, j2]);
        let phi = |j: usize, l: usize| b.eval(j, path.node(l)).unwrap();
        let expect = phi(j1, 0) * 0.3 * phi(j2, 1) * 0.4 + phi(j1, 1) * -0.7 * phi(j2, 0) * 1.1;
        assert_abs_diff_eq!(multiple_sum_check(&path, &b, &md, &[1, 2]).unwrap(), expect, epsilon = 1e-14);
        let single = WienerPath::from_increments(unit(), vec![vec![0.5]]).unwrap();
        assert_eq!(multiple_sum_check(&single, &b, &md, &[1, 1]).unwrap(), 0.0);
        let big = simulate_path(SeedSpec::new(1, 1), 1, 2048, unit()).unwrap();
        assert!(matches!(multiple_sum_check(&big, &b, &md, &[1, 1]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn multiple_sum_matches_product_minus_diagonals() {
        let b = OrthonormalBasis::trigonometric(unit());
        let path = simulate_path(SeedSpec::new(8, 2), 3, 24, unit()).unwrap();
        let md = MultiDegree(vec![2, 0, 3]);
        let comps = [1, 1, 2];
        let f: Vec<Vec<f64>> = (0..3)
            .map(|s| (0..24).map(|l| b.eval(md.0[s], path.node(l)).unwrap() * path.increment(comps[s], l)).collect())
            .collect();
        let sum = |v: &[f64]| v.iter().sum::<f64>();
        let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
        let triple: f64 = (0..24).map(|l| f[0][l] * f[1][l] * f[2][l]).sum();
        // inclusion–exclusion over coincidences
        let distinct = sum(&f[0]) * sum(&f[1]) * sum(&f[2])
            - dot(&f[0], &f[1]) * sum(&f[2])
            - dot(&f[0], &f[2]) * sum(&f[1])
            - dot(&f[1], &f[2]) * sum(&f[0])
            + 2.0 * triple;
        let got = multiple_sum_check(&path, &b, &md, &comps).unwrap();
        assert_abs_diff_eq!(got, distinct, epsilon = 1e-12);
    }

    #[test]
    fn zeta_hat_rows() {
        let b = OrthonormalBasis::legendre(IntegrationInterval::new(0.0, 2.0).unwrap());
        let n = 1000;
        let step = 2.0 / n as f64;
        let path = WienerPath::from_increments(b.interval, vec![vec![step; n]]).unwrap();
        let z = zeta_from_path(&path, &b, 3);
        assert_eq!(z.row(0), &zeta_time_row(&b, 3)[..]);
        assert!((z.get(1, 0) - 2f64.sqrt()).abs() < 1e-12);
        assert!(z.get(1, 1).abs() < 10.0 / n as f64);
    }

    #[test]
    fn empirical_mse_contract() {
        let b = OrthonormalBasis::legendre(unit());
        let t = CoefficientTable::unit_weights(b, 2, 1).unwrap();
        let c = ComponentIndex::new(vec![1, 2], 2).unwrap();
        assert!(empirical_mse(&t, &c, 50, 64, SeedSpec::new(1, 0)).is_err());
        let a = empirical_mse(&t, &c, 200, 64, SeedSpec::new(1, 0)).unwrap();
        let again = empirical_mse(&t, &c, 200, 64, SeedSpec::new(1, 0)).unwrap();
        assert_eq!(a, again);
        assert!(a.estimate > 0.0 && a.std_error > 0.0 && a.fourth_moment > 0.0);
    }
}
