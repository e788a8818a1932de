//! Gate error under static noise over a grid of noise strengths, and the
//! log-log slope fitted to it.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::propagation::{interaction_error, ControlSystem, NoiseModel, PulseSequence};
use crate::random::{random_unit_vector, seeded};

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub eps_min: f64,
    pub eps_max: f64,
    pub points: usize,
    pub trials: usize,
    pub seed: u64,
}

impl SweepConfig {
    fn validate(&self) -> Result<()> {
        if !(self.eps_min > 0.0 && self.eps_max > 0.0) || !self.eps_min.is_finite() || !self.eps_max.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "noise bounds must be positive and finite, got [{}, {}]",
                self.eps_min, self.eps_max
            )));
        }
        if self.eps_min > self.eps_max {
            return Err(Error::InvalidArgument("eps_min must not exceed eps_max".into()));
        }
        if self.points == 0 || self.trials == 0 {
            return Err(Error::InvalidArgument("points and trials must be >= 1".into()));
        }
        if self.points == 1 && self.eps_min != self.eps_max {
            return Err(Error::InvalidArgument("a single point needs eps_min == eps_max".into()));
        }
        Ok(())
    }

    /// Log-spaced strengths from `eps_min` to `eps_max`, endpoints exact.
    pub fn grid(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.eps_min];
        }
        let (lo, hi) = (self.eps_min.ln(), self.eps_max.ln());
        let last = self.points - 1;
        (0..self.points)
            .map(|k| match k {
                0 => self.eps_min,
                k if k == last => self.eps_max,
                k => (lo + (hi - lo) * k as f64 / last as f64).exp(),
            })
            .collect()
    }

    /// Geometric midpoint of the range; slopes are fitted at or below it.
    pub fn midpoint(&self) -> f64 {
        (self.eps_min * self.eps_max).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub trial: usize,
    pub noise_seed: u64,
    pub error_protected: f64,
    pub error_unprotected: Option<f64>,
}

/// Noise direction of one trial: a uniform unit vector of `su(N)` coordinates.
pub fn trial_direction(sys: &ControlSystem, noise_seed: u64) -> Vec<f64> {
    random_unit_vector(sys.basis().len(), &mut seeded(noise_seed))
}

/// Gate error of `seq` (and optionally `baseline`) for every strength and
/// trial. Trial `t` uses the direction drawn from seed `seed + t` at every
/// strength. Rows are ordered by strength, then trial.
pub fn run_sweep(
    sys: &ControlSystem,
    seq: &PulseSequence,
    baseline: Option<&PulseSequence>,
    cfg: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let grid = cfg.grid();
    let directions: Vec<Vec<f64>> = (0..cfg.trials)
        .map(|t| trial_direction(sys, cfg.seed.wrapping_add(t as u64)))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|e| (0..cfg.trials).map(move |t| (e, t)))
        .collect();
    jobs.par_iter()
        .map(|&(e, t)| {
            let eps = grid[e];
            let coeffs = directions[t].iter().map(|d| eps * d).collect();
            let noise = NoiseModel::new(sys.basis(), coeffs)?;
            let error_unprotected = match baseline {
                Some(b) => Some(interaction_error(b, sys, &noise)?),
                None => None,
            };
            Ok(SweepRow {
                epsilon: eps,
                trial: t,
                noise_seed: cfg.seed.wrapping_add(t as u64),
                error_protected: interaction_error(seq, sys, &noise)?,
                error_unprotected,
            })
        })
        .collect()
}

/// Least-squares slope of `ln(error)` against `ln(ε)` over points with
/// `ε ≤ max_eps` and positive error. `None` with fewer than two distinct ε.
pub fn fit_loglog_slope(points: &[(f64, f64)], max_eps: f64) -> Option<f64> {
    let used: Vec<(f64, f64)> = points
        .iter()
        .filter(|(e, err)| *e > 0.0 && *e <= max_eps * (1.0 + 1e-12) && *err > 0.0 && err.is_finite())
        .map(|(e, err)| (e.ln(), err.ln()))
        .collect();
    let n = used.len() as f64;
    if used.len() < 2 {
        return None;
    }
    let mx = used.iter().map(|p| p.0).sum::<f64>() / n;
    let my = used.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Fitted slopes of a sweep over the lower half of its range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepSlopes {
    pub protected: Option<f64>,
    pub unprotected: Option<f64>,
}

pub fn sweep_slopes(rows: &[SweepRow], cfg: &SweepConfig) -> SweepSlopes {
    let mid = cfg.midpoint();
    let prot: Vec<(f64, f64)> = rows.iter().map(|r| (r.epsilon, r.error_protected)).collect();
    let unprot: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.error_unprotected.map(|e| (r.epsilon, e)))
        .collect();
    SweepSlopes {
        protected: fit_loglog_slope(&prot, mid),
        unprotected: if unprot.is_empty() { None } else { fit_loglog_slope(&unprot, mid) },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_and_spacing() {
        let cfg = SweepConfig {
            eps_min: 1e-4,
            eps_max: 1e-2,
            points: 9,
            trials: 1,
            seed: 0,
        };
        let g = cfg.grid();
        assert_eq!(g.len(), 9);
        assert_eq!((g[0], g[8]), (1e-4, 1e-2));
        assert!((g[4] - 1e-3).abs() < 1e-15);
        assert!((cfg.midpoint() - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn exact_power_laws() {
        let pts: Vec<(f64, f64)> = [1e-4, 1e-3, 1e-2].iter().map(|&e| (e, 3.0 * e * e)).collect();
        assert!((fit_loglog_slope(&pts, 1.0).unwrap() - 2.0).abs() < 1e-12);
        // Zero errors are skipped.
        let mut with_zero = pts.clone();
        with_zero.push((1e-3, 0.0));
        assert!((fit_loglog_slope(&with_zero, 1.0).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(fit_loglog_slope(&pts[..1], 1.0), None);
        // Points above the cutoff are ignored.
        let mut bent = pts.clone();
        bent.push((1.0, 1.0));
        assert!((fit_loglog_slope(&bent, 1e-2).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_bounds_rejected() {
        let cfg = SweepConfig {
            eps_min: 0.0,
            eps_max: 1e-2,
            points: 3,
            trials: 1,
            seed: 0,
        };
        assert!(cfg.validate().is_err());
    }
}
