use std::fmt::Write as _;

use crate::numerics::{mean, Normalization};
use crate::signal::Condition;
use crate::{Error, Result};

/// Names of the three regression targets, in output order.
pub const TARGETS: [&str; 3] = ["d_emg", "d_torque", "d_angle"];

/// Errors of one target on one condition.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub target: String,
    pub condition: Condition,
    pub samples: usize,
    /// Mean squared error in normalized target units.
    pub mse: f64,
    /// RMSE divided by the range of the truth; `None` for constant truth.
    pub nrmse: Option<f64>,
    /// Root mean squared error in physical units.
    pub rmse: f64,
    pub r2: Option<f64>,
    /// RMS of the predictions in physical units.
    pub pred_rms: f64,
}

/// Scores one prediction series against the truth.
pub fn regression_metrics(
    target: &str,
    condition: Condition,
    pred: &[f64],
    truth: &[f64],
    norm: Normalization,
) -> Result<MetricsRow> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} truth values",
            pred.len(),
            truth.len()
        )));
    }
    if pred.len() < 2 {
        return Err(Error::EmptyData(format!("{} samples, need at least 2", pred.len())));
    }
    let n = pred.len() as f64;
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    let rmse = (ss_res / n).sqrt();
    let mse = ss_res / n / (norm.std * norm.std);
    let m = mean(truth);
    let ss_tot: f64 = truth.iter().map(|t| (t - m).powi(2)).sum();
    let (lo, hi) = truth.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| {
        (lo.min(t), hi.max(t))
    });
    let constant = hi - lo <= 0.0;
    Ok(MetricsRow {
        target: target.to_string(),
        condition,
        samples: pred.len(),
        mse,
        nrmse: (!constant).then(|| rmse / (hi - lo)),
        rmse,
        r2: (!constant && ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot),
        pred_rms: (pred.iter().map(|p| p * p).sum::<f64>() / n).sqrt(),
    })
}

/// Metrics table of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub method: String,
    pub arch: String,
    pub seed: u64,
    pub config_digest: String,
    pub train_participants: Vec<u32>,
    pub val_participant: u32,
    pub test_participant: u32,
    pub updates: usize,
    pub best_val_mse: f64,
    pub rows: Vec<MetricsRow>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6e}"))
}

impl MetricsReport {
    pub fn row(&self, target: &str, condition: Condition) -> Option<&MetricsRow> {
        self.rows
            .iter()
            .find(|r| r.target == target && r.condition == condition)
    }

    /// Comma-separated table with a commented header describing the run.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# method={} arch={}", self.method, self.arch);
        let _ = writeln!(s, "# seed={} config_digest={}", self.seed, self.config_digest);
        let train: Vec<String> = self.train_participants.iter().map(u32::to_string).collect();
        let _ = writeln!(
            s,
            "# train={} val={} test={}",
            train.join(" "),
            self.val_participant,
            self.test_participant
        );
        let _ = writeln!(s, "# updates={} best_val_mse={:.6e}", self.updates, self.best_val_mse);
        let _ = writeln!(
            s,
            "# targets are per-frame deltas; mse in training-normalized units; rmse in physical units; nrmse = rmse / (max(truth) - min(truth)); '-' marks constant truth"
        );
        s.push_str("target,condition,samples,mse,nrmse,rmse,r2,pred_rms\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{:.6e},{},{:.6e},{},{:.6e}",
                r.target,
                r.condition,
                r.samples,
                r.mse,
                opt(r.nrmse),
                r.rmse,
                opt(r.r2),
                r.pred_rms
            );
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Vec<MetricsRow>> {
        let bad = |m: String| Error::CorruptDataset(format!("metrics table: {m}"));
        let mut rows = Vec::new();
        for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(bad(format!("expected 8 fields in {line:?}")));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number {s:?}")));
            let optn = |s: &str| if s == "-" { Ok(None) } else { num(s).map(Some) };
            rows.push(MetricsRow {
                target: f[0].to_string(),
                condition: f[1].parse().map_err(|_| bad(format!("bad condition {:?}", f[1])))?,
                samples: f[2].parse().map_err(|_| bad(format!("bad count {:?}", f[2])))?,
                mse: num(f[3])?,
                nrmse: optn(f[4])?,
                rmse: num(f[5])?,
                r2: optn(f[6])?,
                pred_rms: num(f[7])?,
            });
        }
        Ok(rows)
    }
}
