//! Per-trial vertex-estimation data: ingestion, outlier removal with
//! Hotelling's T-squared statistic, and aggregation into per-condition
//! cognitive factors (bias and spread along/across the off-screen axis).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{is_valid, WedgeParams};

/// One estimate of the invisible vertex under a given wedge shape.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub participant: String,
    pub params: WedgeParams,
    /// Estimate along the +x (off-screen) axis, meters.
    pub estimate_x: f64,
    /// Lateral estimate, meters.
    pub estimate_y: f64,
    pub repetition: u32,
}

impl TrialRecord {
    pub fn new(
        participant: impl Into<String>,
        params: WedgeParams,
        estimate_x: f64,
        estimate_y: f64,
        repetition: u32,
    ) -> Result<Self> {
        if !estimate_x.is_finite() || !estimate_y.is_finite() {
            return Err(Error::Domain(format!(
                "trial estimate must be finite, got ({estimate_x}, {estimate_y})"
            )));
        }
        Ok(Self {
            participant: participant.into(),
            params,
            estimate_x,
            estimate_y,
            repetition,
        })
    }
}

/// Bias and spread summary for one parameter condition.
#[derive(Debug, Clone, PartialEq)]
pub struct CognitiveFactors {
    pub params: WedgeParams,
    /// Signed mean offset of estimates past the vertex: `mean(x) - d`.
    pub bias: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub n_used: usize,
    pub n_removed: usize,
}

/// Upper-alpha quantile of the chi-square distribution with 2 degrees of
/// freedom; closed form `-2 ln(alpha)` (the 2-df CDF is `1 - exp(-x/2)`).
pub fn chi2_quantile_2df(alpha: f64) -> f64 {
    -2.0 * alpha.ln()
}

/// Result of a single filtering pass: the retained and removed points, with
/// their positions in the input.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<[f64; 2]>,
    pub removed: Vec<[f64; 2]>,
    pub kept_indices: Vec<usize>,
    pub removed_indices: Vec<usize>,
}

/// Single-pass multivariate outlier removal: a point is dropped iff its
/// Mahalanobis statistic `(x - mean)' S^-1 (x - mean)` under the sample mean
/// and covariance of *all* points exceeds the upper-alpha chi-square(2)
/// quantile (5.9915 at alpha = 0.05).
///
/// Needs at least 3 points and a nonsingular sample covariance.
pub fn hotelling_filter(points: &[[f64; 2]], alpha: f64) -> Result<FilterOutcome> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "outlier filtering needs at least 3 points, got {}",
            points.len()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "significance level must be in (0, 1), got {alpha}"
        )));
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p[1]).sum::<f64>() / n;

    // Sample covariance (n-1 denominator).
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for p in points {
        let dx = p[0] - mean_x;
        let dy = p[1] - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    sxx /= n - 1.0;
    syy /= n - 1.0;
    sxy /= n - 1.0;

    let det = sxx * syy - sxy * sxy;
    let scale = (sxx.abs().max(syy.abs())).max(1e-300);
    if det <= scale * scale * 1e-12 {
        return Err(Error::DegenerateSample(format!(
            "sample covariance is singular (det = {det:.3e}); cannot filter"
        )));
    }

    let threshold = chi2_quantile_2df(alpha);
    let mut outcome = FilterOutcome {
        kept: Vec::new(),
        removed: Vec::new(),
        kept_indices: Vec::new(),
        removed_indices: Vec::new(),
    };
    for (i, p) in points.iter().enumerate() {
        let dx = p[0] - mean_x;
        let dy = p[1] - mean_y;
        let stat = (syy * dx * dx - 2.0 * sxy * dx * dy + sxx * dy * dy) / det;
        if stat > threshold {
            outcome.removed.push(*p);
            outcome.removed_indices.push(i);
        } else {
            outcome.kept.push(*p);
            outcome.kept_indices.push(i);
        }
    }
    Ok(outcome)
}

fn sample_std(values: impl Iterator<Item = f64> + Clone, mean: f64, n: usize) -> f64 {
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n as f64 - 1.0)).sqrt()
}

/// Aggregate the trials of one condition (all records must share identical
/// parameters) into cognitive factors, removing outliers first.
///
/// Conditions whose estimates carry zero variance in either axis have a
/// singular covariance; they bypass the filter and report the degenerate
/// spread directly.
pub fn extract_factors(trials: &[TrialRecord], alpha: f64) -> Result<CognitiveFactors> {
    if trials.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "factor extraction needs at least 3 trials per condition, got {}",
            trials.len()
        )));
    }
    let params = trials[0].params;
    if trials.iter().any(|t| t.params != params) {
        return Err(Error::Domain(
            "factor extraction requires trials from a single condition".into(),
        ));
    }

    let points: Vec<[f64; 2]> = trials.iter().map(|t| [t.estimate_x, t.estimate_y]).collect();
    let (kept, n_removed) = match hotelling_filter(&points, alpha) {
        Ok(outcome) => (outcome.kept, outcome.removed.len()),
        Err(Error::DegenerateSample(_)) => (points, 0),
        Err(e) => return Err(e),
    };

    if kept.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "condition reduced to {} samples after outlier removal (need >= 2)",
            kept.len()
        )));
    }

    let n = kept.len();
    let mean_x = kept.iter().map(|p| p[0]).sum::<f64>() / n as f64;
    let mean_y = kept.iter().map(|p| p[1]).sum::<f64>() / n as f64;
    Ok(CognitiveFactors {
        params,
        bias: mean_x - params.vertex_dist(),
        sigma_x: sample_std(kept.iter().map(|p| p[0]), mean_x, n),
        sigma_y: sample_std(kept.iter().map(|p| p[1]), mean_y, n),
        n_used: n,
        n_removed,
    })
}

/// Condition skipped during bulk extraction, with the reason.
#[derive(Debug, Clone)]
pub struct SkippedCondition {
    pub params: WedgeParams,
    pub reason: String,
}

/// Group trials by identical parameters and extract factors per condition.
/// Conditions that fail (too few samples) are reported, not fatal.
pub fn extract_all_factors(
    trials: &[TrialRecord],
    alpha: f64,
) -> (Vec<CognitiveFactors>, Vec<SkippedCondition>) {
    let mut groups: BTreeMap<(u64, u64, u64), Vec<&TrialRecord>> = BTreeMap::new();
    for t in trials {
        let key = (
            t.params.theta().to_bits(),
            t.params.leg().to_bits(),
            t.params.vertex_dist().to_bits(),
        );
        groups.entry(key).or_default().push(t);
    }
    let mut factors = Vec::new();
    let mut skipped = Vec::new();
    for group in groups.values() {
        let owned: Vec<TrialRecord> = group.iter().map(|t| (*t).clone()).collect();
        match extract_factors(&owned, alpha) {
            Ok(f) => factors.push(f),
            Err(e) => skipped.push(SkippedCondition {
                params: owned[0].params,
                reason: e.to_string(),
            }),
        }
    }
    (factors, skipped)
}

const TRIALS_HEADER: &str = "participant,theta_rad,leg_m,dist_m,est_x_m,est_y_m,rep";
const FACTORS_HEADER: &str = "theta_rad,leg_m,dist_m,b_m,sigma_x_m,sigma_y_m,n_used,n_removed";

/// Load trials from CSV (`participant,theta_rad,leg_m,dist_m,est_x_m,est_y_m,rep`).
pub fn load_trials(path: &Path) -> Result<Vec<TrialRecord>> {
    let mut reader = csv::ReaderBuilder::new().from_path(path)?;
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 1; // 1-based data line, excluding the header
        let row = row.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        if row.len() != 7 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 7 fields, got {}", row.len()),
            });
        }
        let parse_f = |idx: usize, name: &str| -> Result<f64> {
            row[idx].trim().parse::<f64>().map_err(|e| Error::Parse {
                line,
                msg: format!("bad {name} value {:?}: {e}", &row[idx]),
            })
        };
        let theta = parse_f(1, "theta_rad")?;
        let leg = parse_f(2, "leg_m")?;
        let dist = parse_f(3, "dist_m")?;
        if !is_valid(theta, leg, dist) {
            return Err(Error::Validation {
                row: line,
                msg: format!(
                    "wedge parameters out of domain: theta={theta} rad, leg={leg} m, dist={dist} m"
                ),
            });
        }
        let params = WedgeParams::new(theta, leg, dist)?;
        let est_x = parse_f(4, "est_x_m")?;
        let est_y = parse_f(5, "est_y_m")?;
        let rep: u32 = row[6].trim().parse().map_err(|e| Error::Parse {
            line,
            msg: format!("bad rep value {:?}: {e}", &row[6]),
        })?;
        out.push(
            TrialRecord::new(row[0].to_string(), params, est_x, est_y, rep).map_err(|e| {
                Error::Validation {
                    row: line,
                    msg: e.to_string(),
                }
            })?,
        );
    }
    Ok(out)
}

pub fn save_trials(trials: &[TrialRecord], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{TRIALS_HEADER}")?;
    for t in trials {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            t.participant,
            t.params.theta(),
            t.params.leg(),
            t.params.vertex_dist(),
            t.estimate_x,
            t.estimate_y,
            t.repetition
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_factors(factors: &[CognitiveFactors], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{FACTORS_HEADER}")?;
    for f in factors {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            f.params.theta(),
            f.params.leg(),
            f.params.vertex_dist(),
            f.bias,
            f.sigma_x,
            f.sigma_y,
            f.n_used,
            f.n_removed
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_factors(path: &Path) -> Result<Vec<CognitiveFactors>> {
    let mut reader = csv::ReaderBuilder::new().from_path(path)?;
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 1;
        let row = row.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        if row.len() != 8 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 8 fields, got {}", row.len()),
            });
        }
        let parse_f = |idx: usize, name: &str| -> Result<f64> {
            row[idx].trim().parse::<f64>().map_err(|e| Error::Parse {
                line,
                msg: format!("bad {name} value {:?}: {e}", &row[idx]),
            })
        };
        let parse_u = |idx: usize, name: &str| -> Result<usize> {
            row[idx].trim().parse::<usize>().map_err(|e| Error::Parse {
                line,
                msg: format!("bad {name} value {:?}: {e}", &row[idx]),
            })
        };
        let theta = parse_f(0, "theta_rad")?;
        let leg = parse_f(1, "leg_m")?;
        let dist = parse_f(2, "dist_m")?;
        if !is_valid(theta, leg, dist) {
            return Err(Error::Validation {
                row: line,
                msg: format!(
                    "wedge parameters out of domain: theta={theta} rad, leg={leg} m, dist={dist} m"
                ),
            });
        }
        out.push(CognitiveFactors {
            params: WedgeParams::new(theta, leg, dist)?,
            bias: parse_f(3, "b_m")?,
            sigma_x: parse_f(4, "sigma_x_m")?,
            sigma_y: parse_f(5, "sigma_y_m")?,
            n_used: parse_u(6, "n_used")?,
            n_removed: parse_u(7, "n_removed")?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params() -> WedgeParams {
        WedgeParams::new(1.0, 8.0, 3.0).unwrap()
    }

    fn trial(x: f64, y: f64) -> TrialRecord {
        TrialRecord::new("p0", params(), x, y, 1).unwrap()
    }

    #[test]
    fn chi2_threshold_value() {
        assert_relative_eq!(chi2_quantile_2df(0.05), 5.991464547107982, epsilon = 1e-12);
    }

    #[test]
    fn filter_removes_exactly_the_far_point() {
        // 100 deterministic points on the unit circle plus one at (50, 50).
        let mut points: Vec<[f64; 2]> = (0..100)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / 100.0;
                [a.cos(), a.sin()]
            })
            .collect();
        points.push([50.0, 50.0]);
        let outcome = hotelling_filter(&points, 0.05).unwrap();
        assert_eq!(outcome.removed_indices, vec![100]);
        assert_eq!(outcome.kept.len(), 100);
    }

    #[test]
    fn filter_rejects_identical_points() {
        let points = vec![[1.0, 2.0]; 5];
        let err = hotelling_filter(&points, 0.05).unwrap_err();
        assert!(matches!(err, Error::DegenerateSample(_)));
    }

    #[test]
    fn filter_keeps_symmetric_clusters() {
        // Two clusters mirrored about the origin; all statistics stay below
        // the 5.9915 threshold (verified by computing them here).
        let points = vec![
            [1.0, 0.1],
            [1.1, -0.1],
            [0.9, 0.05],
            [-1.0, -0.1],
            [-1.1, 0.1],
            [-0.9, -0.05],
        ];
        let outcome = hotelling_filter(&points, 0.05).unwrap();
        assert!(outcome.removed.is_empty());
        assert_eq!(outcome.kept, points);
        assert_eq!(outcome.kept_indices, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn filter_needs_three_points() {
        let err = hotelling_filter(&[[0.0, 0.0], [1.0, 1.0]], 0.05).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn factors_of_point_mass_are_zero() {
        let d = params().vertex_dist();
        let trials = vec![trial(d, 0.0), trial(d, 0.0), trial(d, 0.0)];
        let f = extract_factors(&trials, 0.05).unwrap();
        assert_eq!(f.bias, 0.0);
        assert_eq!(f.sigma_x, 0.0);
        assert_eq!(f.sigma_y, 0.0);
        assert_eq!(f.n_used, 3);
        assert_eq!(f.n_removed, 0);
    }

    #[test]
    fn factors_pure_x_spread() {
        let d = params().vertex_dist();
        let trials = vec![trial(d + 1.0, 0.0), trial(d - 1.0, 0.0), trial(d, 0.0)];
        let f = extract_factors(&trials, 0.05).unwrap();
        assert_relative_eq!(f.bias, 0.0, epsilon = 1e-12);
        assert_relative_eq!(f.sigma_x, 1.0, epsilon = 1e-12);
        assert_eq!(f.sigma_y, 0.0);
    }

    #[test]
    fn factors_pure_y_spread_with_bias() {
        let d = params().vertex_dist();
        let trials = vec![
            trial(d + 2.0, 1.0),
            trial(d + 2.0, -1.0),
            trial(d + 2.0, 0.0),
        ];
        let f = extract_factors(&trials, 0.05).unwrap();
        assert_relative_eq!(f.bias, 2.0, epsilon = 1e-12);
        assert_eq!(f.sigma_x, 0.0);
        assert_relative_eq!(f.sigma_y, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn factors_require_single_condition() {
        let other = WedgeParams::new(0.5, 8.0, 3.0).unwrap();
        let mut trials = vec![trial(3.0, 0.0), trial(3.1, 0.0)];
        trials.push(TrialRecord::new("p1", other, 3.0, 0.0, 1).unwrap());
        assert!(extract_factors(&trials, 0.05).is_err());
    }

    #[test]
    fn trials_roundtrip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trials.csv");

        // Empty file with header only.
        std::fs::write(&path, format!("{TRIALS_HEADER}\n")).unwrap();
        assert!(load_trials(&path).unwrap().is_empty());

        // Round trip of one record.
        let t = vec![trial(3.25, -0.125)];
        save_trials(&t, &path).unwrap();
        let loaded = load_trials(&path).unwrap();
        assert_eq!(loaded, t);

        // Out-of-domain aperture names the row.
        let theta_200 = 200f64.to_radians();
        std::fs::write(
            &path,
            format!("{TRIALS_HEADER}\np0,{theta_200},8.0,3.0,3.0,0.0,1\n"),
        )
        .unwrap();
        match load_trials(&path).unwrap_err() {
            Error::Validation { row, .. } => assert_eq!(row, 1),
            other => panic!("expected validation error, got {other:?}"),
        }

        // Malformed numeric field names the line.
        std::fs::write(&path, format!("{TRIALS_HEADER}\np0,1.0,8.0,3.0,oops,0.0,1\n")).unwrap();
        match load_trials(&path).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn factors_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("factors.csv");
        let fs = vec![CognitiveFactors {
            params: params(),
            bias: -0.25,
            sigma_x: 0.5,
            sigma_y: 0.125,
            n_used: 18,
            n_removed: 2,
        }];
        save_factors(&fs, &path).unwrap();
        assert_eq!(load_factors(&path).unwrap(), fs);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn translation_equivariance(
                shift in -5.0f64..5.0,
                xs in proptest::collection::vec(-2.0f64..2.0, 5..20),
            ) {
                let d = params().vertex_dist();
                let base: Vec<TrialRecord> = xs
                    .iter()
                    .enumerate()
                    .map(|(i, x)| trial(d + x, (i as f64 * 0.37).sin()))
                    .collect();
                let shifted: Vec<TrialRecord> = base
                    .iter()
                    .map(|t| TrialRecord::new(
                        t.participant.clone(), t.params, t.estimate_x + shift,
                        t.estimate_y, t.repetition,
                    ).unwrap())
                    .collect();
                if let (Ok(f0), Ok(f1)) = (
                    extract_factors(&base, 0.05),
                    extract_factors(&shifted, 0.05),
                ) {
                    // The filter's statistic is translation invariant, so the
                    // same points survive and the bias shifts exactly.
                    prop_assert!((f1.bias - f0.bias - shift).abs() < 1e-9);
                    prop_assert!((f1.sigma_x - f0.sigma_x).abs() < 1e-9);
                    prop_assert!((f1.sigma_y - f0.sigma_y).abs() < 1e-9);
                }
            }

            #[test]
            fn y_reflection_invariance(
                xs in proptest::collection::vec(-2.0f64..2.0, 5..20),
            ) {
                let d = params().vertex_dist();
                let base: Vec<TrialRecord> = xs
                    .iter()
                    .enumerate()
                    .map(|(i, x)| trial(d + x, (i as f64 * 0.61).cos()))
                    .collect();
                let flipped: Vec<TrialRecord> = base
                    .iter()
                    .map(|t| TrialRecord::new(
                        t.participant.clone(), t.params, t.estimate_x,
                        -t.estimate_y, t.repetition,
                    ).unwrap())
                    .collect();
                if let (Ok(f0), Ok(f1)) = (
                    extract_factors(&base, 0.05),
                    extract_factors(&flipped, 0.05),
                ) {
                    prop_assert!((f1.bias - f0.bias).abs() < 1e-9);
                    prop_assert!((f1.sigma_x - f0.sigma_x).abs() < 1e-9);
                    prop_assert!((f1.sigma_y - f0.sigma_y).abs() < 1e-9);
                }
            }

            #[test]
            fn filter_partitions_input(
                pts in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 4..30),
            ) {
                let points: Vec<[f64; 2]> = pts.iter().map(|&(x, y)| [x, y]).collect();
                if let Ok(outcome) = hotelling_filter(&points, 0.05) {
                    prop_assert_eq!(
                        outcome.kept.len() + outcome.removed.len(),
                        points.len()
                    );
                    // Indices partition 0..n and preserve input order.
                    let mut all: Vec<usize> = outcome
                        .kept_indices.iter().chain(&outcome.removed_indices)
                        .copied().collect();
                    all.sort_unstable();
                    prop_assert_eq!(all, (0..points.len()).collect::<Vec<_>>());
                    if outcome.removed.is_empty() {
                        prop_assert_eq!(outcome.kept, points);
                    }
                }
            }
        }
    }
}
