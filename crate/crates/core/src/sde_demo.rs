//! Milstein scheme for the two-noise system
//!
//! ```text
//! dX₁ = dW₁,   dX₂ = X₁ dW₂,   X(0) = 0   on [0, 1]
//! ```
//!
//! whose `X₂` increment over a step is `X₁ ΔW₂ + J_{(11)}^{(1,2)}`. The scheme
//! replaces `J_{(11)}` by its truncated Legendre expansion and is compared
//! against a left-point reference on a fine grid driven by the same path.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{IntegrationInterval, OrthonormalBasis, WeightFunction};
use crate::coefficients::CoefficientTable;
use crate::error::{domain, Result};
use crate::error_analysis::{least_squares_slope, select_truncation_with_table};
use crate::expansion::{evaluate_expansion, ComponentIndex};
use crate::path_oracle::{iterated_integral_on_path, mean_and_std_error, simulate_path, BasisGrid, WienerPath};
use crate::sampling::{zeta_time_row, SeedSpec, ZetaMatrix};

/// Fine grid size of the reference path on [0, 1].
pub const FINE_STEPS: usize = 1 << 14;

/// Time horizon.
pub const HORIZON: f64 = 1.0;

pub const MIN_TRIALS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub x1: f64,
    pub x2: f64,
}

/// One step from `state` given `(ΔW₁, ΔW₂)` and the approximation of
/// `J_{(11)}^{(1,2)}` over the step. The system has no drift.
pub fn milstein_step(state: State, increments: [f64; 2], j11: f64) -> State {
    State { x1: state.x1 + increments[0], x2: state.x2 + state.x1 * increments[1] + j11 }
}

/// How the per-step truncation is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TruncationRule {
    Fixed(usize),
    /// Smallest `q` with mean-square error of `J_{(11)}` on the step at most
    /// `Δ³ / T`, so the accumulated budget over `[0, T]` is `Δ²`.
    Selected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeRun {
    pub step_sizes: Vec<f64>,
    pub truncations: Vec<usize>,
    pub trials: usize,
    pub mean_errors: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Least-squares slope of `ln error` against `ln Δ`.
    pub fitted_order: f64,
}

impl SchemeRun {
    /// `(Δ, q, mean strong error, standard error)` per step size.
    pub fn rows(&self) -> Vec<(f64, usize, f64, f64)> {
        (0..self.step_sizes.len())
            .map(|s| (self.step_sizes[s], self.truncations[s], self.mean_errors[s], self.std_errors[s]))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta,q,mean_error,std_error\n");
        for (d, q, e, s) in self.rows() {
            out.push_str(&format!("{d},{q},{e},{s}\n"));
        }
        out
    }
}

/// Coarse increments `(ΔW₁, ΔW₂)` of a fine path over `steps` equal steps.
pub fn coarse_increments(path: &WienerPath, steps: usize) -> Vec<[f64; 2]> {
    let per = path.n() / steps;
    (0..steps)
        .map(|s| {
            let range = s * per..(s + 1) * per;
            [path.increments(1)[range.clone()].iter().sum(), path.increments(2)[range].iter().sum()]
        })
        .collect()
}

/// Everything needed to run the scheme at one step size.
struct Level {
    steps: usize,
    table: CoefficientTable,
    grid: BasisGrid,
    time_row: Vec<f64>,
}

impl Level {
    fn new(steps: usize, rule: TruncationRule) -> Result<Self> {
        let delta = HORIZON / steps as f64;
        let basis = OrthonormalBasis::legendre(IntegrationInterval::new(0.0, delta)?);
        let ones = vec![WeightFunction::ConstantOne; 2];
        let table = match rule {
            TruncationRule::Fixed(q) => CoefficientTable::compute(basis, ones, q)?,
            TruncationRule::Selected => {
                let icomp = ComponentIndex::new(vec![1, 2], 2)?;
                select_truncation_with_table(&icomp, &basis, &ones, delta.powi(3) / HORIZON)?.1
            }
        };
        let grid = BasisGrid::new(&basis, table.p(), FINE_STEPS / steps);
        let time_row = zeta_time_row(&basis, table.p());
        Ok(Self { steps, table, grid, time_row })
    }

    fn terminal(&self, path: &WienerPath) -> Result<State> {
        let per = FINE_STEPS / self.steps;
        let p = self.table.p();
        let icomp = ComponentIndex::new(vec![1, 2], 2)?;
        let mut state = State::default();
        for (s, inc) in coarse_increments(path, self.steps).into_iter().enumerate() {
            let range = s * per..(s + 1) * per;
            let mut rows = vec![self.time_row.clone()];
            for i in 1..=2 {
                let dw = &path.increments(i)[range.clone()];
                rows.push((0..=p).map(|j| self.grid.row(j).iter().zip(dw).map(|(a, b)| a * b).sum()).collect());
            }
            let zeta = ZetaMatrix::from_rows(rows)?;
            let j11 = evaluate_expansion(&self.table, &icomp, &zeta)?;
            state = milstein_step(state, inc, j11);
        }
        Ok(state)
    }
}

/// Strong errors `E|X_T − X̂_T|` for each step count (steps on `[0, 1]`),
/// every count a power of two not exceeding [`FINE_STEPS`].
pub fn run_strong_convergence(
    seed: SeedSpec,
    step_counts: &[usize],
    rule: TruncationRule,
    trials: usize,
) -> Result<SchemeRun> {
    if trials < MIN_TRIALS {
        return domain(format!("need at least {MIN_TRIALS} trials, got {trials}"));
    }
    if step_counts.is_empty() || step_counts.windows(2).any(|w| w[0] >= w[1]) {
        return domain("step counts must be non-empty and strictly increasing");
    }
    if let Some(bad) = step_counts.iter().find(|&&n| !n.is_power_of_two() || n > FINE_STEPS) {
        return domain(format!("step count {bad} must be a power of two <= {FINE_STEPS}"));
    }
    let levels = step_counts.iter().map(|&n| Level::new(n, rule)).collect::<Result<Vec<_>>>()?;
    let interval = IntegrationInterval::new(0.0, HORIZON)?;
    let ones = vec![WeightFunction::ConstantOne; 2];
    let per_trial: Vec<Vec<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let path = simulate_path(seed.with_stream(trial), 2, FINE_STEPS, interval)?;
            let exact = State { x1: path.total(1), x2: iterated_integral_on_path(&path, &[1, 2], &ones)? };
            levels
                .iter()
                .map(|level| {
                    let approx = level.terminal(&path)?;
                    Ok((exact.x1 - approx.x1).hypot(exact.x2 - approx.x2))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut mean_errors = Vec::with_capacity(levels.len());
    let mut std_errors = Vec::with_capacity(levels.len());
    for s in 0..levels.len() {
        let column: Vec<f64> = per_trial.iter().map(|row| row[s]).collect();
        let (m, se) = mean_and_std_error(&column);
        mean_errors.push(m);
        std_errors.push(se);
    }
    let step_sizes: Vec<f64> = step_counts.iter().map(|&n| HORIZON / n as f64).collect();
    let points: Vec<(f64, f64)> = step_sizes.iter().zip(&mean_errors).map(|(d, e)| (d.ln(), e.ln())).collect();
    let fitted_order = if points.len() >= 2 { least_squares_slope(&points) } else { f64::NAN };
    Ok(SchemeRun {
        step_sizes,
        truncations: levels.iter().map(|l| l.table.p()).collect(),
        trials,
        mean_errors,
        std_errors,
        fitted_order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisKind;
    use crate::expansion::{closed_form_low_order, LowOrderCase};

    #[test]
    fn step_examples() {
        let s = State { x1: 0.4, x2: -1.0 };
        assert_eq!(milstein_step(s, [0.0, 0.0], 0.0), s);
        let one = milstein_step(State::default(), [0.7, -0.2], 0.31);
        assert_eq!(one, State { x1: 0.7, x2: 0.31 });
    }

    #[test]
    fn single_step_equals_expansion() {
        let seed = SeedSpec::new(4, 1);
        let path = simulate_path(seed, 2, FINE_STEPS, IntegrationInterval::unit()).unwrap();
        let level = Level::new(1, TruncationRule::Fixed(12)).unwrap();
        let state = level.terminal(&path).unwrap();
        let zeta = crate::path_oracle::zeta_from_path(
            &path,
            &OrthonormalBasis::new(BasisKind::Legendre, IntegrationInterval::unit()),
            12,
        );
        let j11 = closed_form_low_order(LowOrderCase::J11, &[1, 2], &zeta, &IntegrationInterval::unit(), 12).unwrap();
        assert!((state.x2 - j11).abs() < 1e-12);
    }

    #[test]
    fn coarse_sums_are_shared() {
        let seed = SeedSpec::new(10, 3);
        let a = simulate_path(seed, 2, FINE_STEPS, IntegrationInterval::unit()).unwrap();
        let b = simulate_path(seed, 2, FINE_STEPS, IntegrationInterval::unit()).unwrap();
        assert_eq!(coarse_increments(&a, 8), coarse_increments(&b, 8));
        let total: f64 = coarse_increments(&a, 16).iter().map(|c| c[0]).sum();
        assert!((total - a.total(1)).abs() < 1e-12);
    }

    #[test]
    fn runs_are_reproducible() {
        let seed = SeedSpec::new(2, 0);
        let a = run_strong_convergence(seed, &[2, 4], TruncationRule::Fixed(1), 500).unwrap();
        let b = run_strong_convergence(seed, &[2, 4], TruncationRule::Fixed(1), 500).unwrap();
        assert_eq!(a, b);
        assert!(a.mean_errors.iter().all(|&e| e >= 0.0));
        assert!(a.to_csv().starts_with("delta,q,mean_error,std_error\n0.5,1,"));
        assert!(run_strong_convergence(seed, &[4, 2], TruncationRule::Fixed(1), 500).is_err());
        assert!(run_strong_convergence(seed, &[2, 4], TruncationRule::Fixed(1), 499).is_err());
        assert!(run_strong_convergence(seed, &[3], TruncationRule::Fixed(1), 500).is_err());
    }

    #[test]
    fn selected_truncations_grow_as_steps_shrink() {
        let qs: Vec<usize> =
            [4, 8, 16, 32, 64].iter().map(|&n| Level::new(n, TruncationRule::Selected).unwrap().table.p()).collect();
        assert_eq!(qs, vec![0, 1, 2, 4, 8]);
    }
}
