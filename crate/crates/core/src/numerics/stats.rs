use crate::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (divisor n-1).
pub fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() as f64 - 1.0)).sqrt()
}

/// Affine normalization constants `z = (x - mean) / std`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub mean: f64,
    pub std: f64,
}

impl Normalization {
    pub const IDENTITY: Normalization = Normalization { mean: 0.0, std: 1.0 };

    /// Constants for a series; errors on fewer than two values or zero spread.
    pub fn fit(xs: &[f64]) -> Result<Self> {
        if xs.len() < 2 {
            return Err(Error::DegenerateSignal(format!(
                "need at least 2 values, got {}",
                xs.len()
            )));
        }
        let std = sample_std(xs);
        if !(std > 0.0) || !std.is_finite() {
            return Err(Error::DegenerateSignal("series has zero variance".into()));
        }
        Ok(Self { mean: mean(xs), std })
    }

    /// Like [`Normalization::fit`] but falls back to unit scale for a constant
    /// series (used for feature columns that are legitimately constant).
    pub fn fit_or_unit(xs: &[f64]) -> Self {
        match Self::fit(xs) {
            Ok(n) => n,
            Err(_) if xs.is_empty() => Self::IDENTITY,
            Err(_) => Self {
                mean: mean(xs),
                std: 1.0,
            },
        }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    #[inline]
    pub fn invert(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// Zero mean / unit sample-variance normalization of a series.
pub fn zscore_normalize(series: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
    let n = Normalization::fit(series)?;
    Ok((series.iter().map(|&x| n.apply(x)).collect(), n.mean, n.std))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationKind {
    Pearson,
    Spearman,
}

/// 1-based ranks with ties given their average rank.
pub fn rank_average(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateSignal("constant input to correlation".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn correlation(x: &[f64], y: &[f64], kind: CorrelationKind) -> Result<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::DegenerateSignal(format!(
            "correlation needs equal lengths >= 3, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    match kind {
        CorrelationKind::Pearson => pearson(x, y),
        CorrelationKind::Spearman => pearson(&rank_average(x), &rank_average(y)),
    }
}
