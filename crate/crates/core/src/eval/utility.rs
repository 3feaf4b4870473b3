//! Transfer-utility estimation: accuracy-vs-class-count curves for random,
//! context-guided, and task-specific feature banks, and the normalized
//! area-between-curves score.
//!
//! For each class count on the grid and each trial, one fresh contextual
//! task is built and split once; all three banks are scored on identical
//! data. The utility score integrates the mean curves over the grid by the
//! trapezoid rule: `U = (S_cg - S_random) / (S_specific - S_random)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ConvFeatureBank;
use crate::rng::derive_rng;
use crate::sampler::{build_task, split_em, SampleSource, SamplerConfig};
use crate::trainer::HeadTrainConfig;

use super::probe::{eval_frozen_on_split, eval_specific_on_split, JointTrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BankKind {
    Random,
    ContextGuided,
    Specific,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityPoint {
    pub classes: usize,
    pub mean_accuracy: f64,
    pub std_dev: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityCurve {
    pub kind: BankKind,
    pub points: Vec<UtilityPoint>,
}

impl UtilityCurve {
    pub fn mean_accuracies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean_accuracy).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityReport {
    pub random: UtilityCurve,
    pub cg: UtilityCurve,
    pub specific: UtilityCurve,
    pub utility: f64,
    /// Task-specific trials dropped for divergence.
    pub failed_trials: usize,
}

impl UtilityReport {
    pub fn c_grid(&self) -> Vec<usize> {
        self.cg.points.iter().map(|p| p.classes).collect()
    }

    /// One row per (C, bank kind): `classes,bank,mean_accuracy,std_dev,trials`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "classes,bank,mean_accuracy,std_dev,trials")?;
        for (curve, name) in [
            (&self.random, "random"),
            (&self.cg, "cg"),
            (&self.specific, "specific"),
        ] {
            for p in &curve.points {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    p.classes, name, p.mean_accuracy, p.std_dev, p.trials
                )?;
            }
        }
        writeln!(out, "utility,,{},,", self.utility)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UtilityConfig {
    /// Strictly increasing class counts to evaluate.
    pub c_grid: Vec<usize>,
    pub trials_per_c: usize,
    /// Patches per group in evaluation tasks.
    pub per_group: usize,
    pub split_fraction: f64,
    pub head: HeadTrainConfig,
    pub joint: JointTrainConfig,
}

impl Default for UtilityConfig {
    fn default() -> Self {
        Self {
            c_grid: vec![1, 2, 4, 8, 16, 32, 64],
            trials_per_c: 10,
            per_group: 30,
            split_fraction: 0.5,
            head: HeadTrainConfig::default(),
            joint: JointTrainConfig::default(),
        }
    }
}

/// Trapezoid-rule transfer utility over a common class-count grid.
pub fn transfer_utility(
    grid: &[usize],
    random: &[f64],
    cg: &[f64],
    specific: &[f64],
) -> Result<f64> {
    if grid.len() < 2 {
        return Err(Error::Config("utility grid needs at least 2 points".into()));
    }
    if random.len() != grid.len() || cg.len() != grid.len() || specific.len() != grid.len() {
        return Err(Error::Config("curves must cover the full grid".into()));
    }
    if !grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Config("grid must be strictly increasing".into()));
    }
    let area = |ys: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..grid.len() - 1 {
            let width = (grid[i + 1] - grid[i]) as f64;
            s += width * (ys[i] + ys[i + 1]) / 2.0;
        }
        s
    };
    let s_random = area(random);
    let s_cg = area(cg);
    let s_specific = area(specific);
    let denom = s_specific - s_random;
    if denom == 0.0 {
        return Err(Error::Config(
            "degenerate utility: specific and random curves have equal area".into(),
        ));
    }
    Ok((s_cg - s_random) / denom)
}

/// Full curve sweep; see the module docs. Randomness derives from
/// `(seed, grid index, trial)` so trials are order-independent.
pub fn utility_curves(
    cg_bank: &ConvFeatureBank,
    source: SampleSource,
    base_sampler: &SamplerConfig,
    cfg: &UtilityConfig,
    seed: u64,
) -> Result<UtilityReport> {
    if cfg.c_grid.is_empty() || !cfg.c_grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Config("c_grid must be nonempty and increasing".into()));
    }
    if cfg.trials_per_c == 0 {
        return Err(Error::Config("trials_per_c must be >= 1".into()));
    }
    let shape = cg_bank.shape();

    struct TrialOutcome {
        grid_idx: usize,
        random: f64,
        cg: f64,
        specific: Option<f64>,
    }

    let jobs: Vec<(usize, usize)> = (0..cfg.c_grid.len())
        .flat_map(|gi| (0..cfg.trials_per_c).map(move |t| (gi, t)))
        .collect();

    let outcomes: Vec<Result<TrialOutcome>> = jobs
        .par_iter()
        .map(|&(grid_idx, trial)| {
            let classes = cfg.c_grid[grid_idx];
            let mut rng = derive_rng(seed, (grid_idx * cfg.trials_per_c + trial) as u64 + 1);
            let sampler = SamplerConfig {
                groups: classes,
                per_group: cfg.per_group,
                ..base_sampler.clone()
            };
            let task = build_task(source, &sampler, &mut rng)?;
            let (train, test) = split_em(&task, cfg.split_fraction, &mut rng)?;

            let random_bank = ConvFeatureBank::random(shape, cg_bank.channels(), &mut rng);
            let random = eval_frozen_on_split(&random_bank, &train, &test, &cfg.head, &mut rng)?;
            let cg = eval_frozen_on_split(cg_bank, &train, &test, &cfg.head, &mut rng)?;
            let specific = match eval_specific_on_split(&train, &test, shape, &cfg.joint, &mut rng)
            {
                Ok(a) => Some(a),
                Err(Error::Diverged(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(TrialOutcome { grid_idx, random, cg, specific })
        })
        .collect();

    let mut per_c: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> =
        vec![(Vec::new(), Vec::new(), Vec::new()); cfg.c_grid.len()];
    let mut failed = 0usize;
    for outcome in outcomes {
        let o = outcome?;
        per_c[o.grid_idx].0.push(o.random);
        per_c[o.grid_idx].1.push(o.cg);
        match o.specific {
            Some(a) => per_c[o.grid_idx].2.push(a),
            None => failed += 1,
        }
    }

    let stats = |vals: &[f64]| -> (f64, f64) {
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let std = if vals.len() > 1 {
            (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        (mean, std)
    };

    let mut curves: Vec<Vec<UtilityPoint>> = vec![Vec::new(); 3];
    for (gi, (rand_accs, cg_accs, spec_accs)) in per_c.iter().enumerate() {
        if spec_accs.is_empty() {
            return Err(Error::InsufficientData(format!(
                "every task-specific trial diverged at C={}",
                cfg.c_grid[gi]
            )));
        }
        for (ci, accs) in [rand_accs, cg_accs, spec_accs].into_iter().enumerate() {
            let (mean, std) = stats(accs);
            curves[ci].push(UtilityPoint {
                classes: cfg.c_grid[gi],
                mean_accuracy: mean,
                std_dev: std,
                trials: accs.len(),
            });
        }
    }
    let mut it = curves.into_iter();
    let random = UtilityCurve { kind: BankKind::Random, points: it.next().unwrap() };
    let cg = UtilityCurve { kind: BankKind::ContextGuided, points: it.next().unwrap() };
    let specific = UtilityCurve { kind: BankKind::Specific, points: it.next().unwrap() };

    let utility = transfer_utility(
        &cfg.c_grid,
        &random.mean_accuracies(),
        &cg.mean_accuracies(),
        &specific.mean_accuracies(),
    )?;
    Ok(UtilityReport { random, cg, specific, utility, failed_trials: failed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_cg_and_specific_gives_one() {
        let grid = [1, 2, 4, 8];
        let random = [1.0, 0.6, 0.35, 0.2];
        let upper = [1.0, 0.9, 0.8, 0.7];
        let u = transfer_utility(&grid, &random, &upper, &upper).unwrap();
        assert!((u - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_cg_and_random_gives_zero() {
        let grid = [1, 2, 4, 8];
        let random = [1.0, 0.6, 0.35, 0.2];
        let upper = [1.0, 0.9, 0.8, 0.7];
        let u = transfer_utility(&grid, &random, &random, &upper).unwrap();
        assert!(u.abs() < 1e-12);
    }

    #[test]
    fn exact_midpoint_gives_half() {
        let grid = [1, 2, 4, 8, 16];
        let random = [1.0, 0.5, 0.25, 0.125, 0.0625];
        let upper = [1.0, 0.9, 0.75, 0.625, 0.5625];
        let mid: Vec<f64> = random
            .iter()
            .zip(upper.iter())
            .map(|(r, s)| (r + s) / 2.0)
            .collect();
        let u = transfer_utility(&grid, &random, &mid, &upper).unwrap();
        assert!((u - 0.5).abs() < 1e-12, "got {u}");
    }

    #[test]
    fn degenerate_curves_are_rejected() {
        let grid = [1, 2];
        let flat = [0.5, 0.5];
        assert!(transfer_utility(&grid, &flat, &flat, &flat).is_err());
        assert!(transfer_utility(&[2, 1], &flat, &flat, &flat).is_err());
        assert!(transfer_utility(&[1], &[1.0], &[1.0], &[1.0]).is_err());
    }
}
