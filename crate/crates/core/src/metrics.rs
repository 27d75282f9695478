//! Regression metrics: RMSE, MAE, CCC, PCC, SCC and r².
//!
//! Variances are population (divide by `n`). Correlations of a constant
//! vector are undefined and come back as `None`.

use std::fmt;
use std::str::FromStr;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_pair<T>(pred: &[T], truth: &[T], min: usize) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::Contract(format!(
            "metric inputs differ in length: {} vs {}",
            pred.len(),
            truth.len()
        )));
    }
    if pred.len() < min {
        return Err(Error::Contract(format!(
            "metric needs at least {min} values, got {}",
            pred.len()
        )));
    }
    Ok(())
}

fn count<T: Float>(n: usize) -> T {
    T::from(n).unwrap()
}

fn mean<T: Float>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |a, &v| a + v) / count(x.len())
}

/// `(rmse, mae)`.
pub fn error_metrics<T: Float>(pred: &[T], truth: &[T]) -> Result<(T, T)> {
    check_pair(pred, truth, 1)?;
    let n = count::<T>(pred.len());
    let (sq, abs) = pred
        .iter()
        .zip(truth)
        .fold((T::zero(), T::zero()), |(s, a), (&p, &t)| {
            let e = p - t;
            (s + e * e, a + e.abs())
        });
    Ok(((sq / n).sqrt(), abs / n))
}

/// Population moments of a pair: means, variances and covariance.
struct Moments<T> {
    mp: T,
    mt: T,
    vp: T,
    vt: T,
    cov: T,
}

fn moments<T: Float>(pred: &[T], truth: &[T]) -> Moments<T> {
    let (mp, mt) = (mean(pred), mean(truth));
    let n = count::<T>(pred.len());
    let (mut vp, mut vt, mut cov) = (T::zero(), T::zero(), T::zero());
    for (&p, &t) in pred.iter().zip(truth) {
        let (dp, dt) = (p - mp, t - mt);
        vp = vp + dp * dp;
        vt = vt + dt * dt;
        cov = cov + dp * dt;
    }
    Moments {
        mp,
        mt,
        vp: vp / n,
        vt: vt / n,
        cov: cov / n,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correlations<T> {
    pub pcc: Option<T>,
    pub ccc: Option<T>,
    pub r2: Option<T>,
}

/// Pearson, Lin's concordance and the coefficient of determination of
/// `pred` against `truth`.
pub fn correlation_metrics<T: Float>(pred: &[T], truth: &[T]) -> Result<Correlations<T>> {
    check_pair(pred, truth, 2)?;
    let m = moments(pred, truth);
    let zero = T::zero();
    let pcc = (m.vp > zero && m.vt > zero).then(|| clamp_unit(m.cov / (m.vp * m.vt).sqrt()));
    let bias = m.mp - m.mt;
    let denom = m.vp + m.vt + bias * bias;
    let ccc =
        (m.vp > zero && m.vt > zero).then(|| clamp_unit(T::from(2.0).unwrap() * m.cov / denom));
    let r2 = (m.vt > zero).then(|| {
        let ss_res = pred
            .iter()
            .zip(truth)
            .fold(zero, |a, (&p, &t)| a + (t - p) * (t - p));
        T::one() - ss_res / (m.vt * count(pred.len()))
    });
    Ok(Correlations { pcc, ccc, r2 })
}

fn clamp_unit<T: Float>(x: T) -> T {
    x.max(-T::one()).min(T::one())
}

/// Fractional ranks starting at 1; tied values share their average rank.
pub fn fractional_ranks<T: Float>(x: &[T]) -> Vec<T> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![T::zero(); x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && x[order[j]] == x[order[i]] {
            j += 1;
        }
        // Positions i..j (0-based) hold ranks i+1..=j.
        let avg = T::from(i + j + 1).unwrap() / T::from(2.0).unwrap();
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Spearman's rank correlation.
pub fn spearman<T: Float>(pred: &[T], truth: &[T]) -> Result<Option<T>> {
    check_pair(pred, truth, 2)?;
    let (rp, rt) = (fractional_ranks(pred), fractional_ranks(truth));
    let m = moments(&rp, &rt);
    let zero = T::zero();
    Ok((m.vp > zero && m.vt > zero).then(|| clamp_unit(m.cov / (m.vp * m.vt).sqrt())))
}

/// All six metrics for one prediction set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub rmse: f64,
    pub mae: f64,
    pub ccc: Option<f64>,
    pub pcc: Option<f64>,
    pub scc: Option<f64>,
    pub r2: Option<f64>,
}

impl MetricsReport {
    pub fn compute(pred: &[f64], truth: &[f64]) -> Result<Self> {
        let (rmse, mae) = error_metrics(pred, truth)?;
        let (corr, scc) = if pred.len() >= 2 {
            (correlation_metrics(pred, truth)?, spearman(pred, truth)?)
        } else {
            (
                Correlations {
                    pcc: None,
                    ccc: None,
                    r2: None,
                },
                None,
            )
        };
        Ok(Self {
            n: pred.len(),
            rmse,
            mae,
            ccc: corr.ccc,
            pcc: corr.pcc,
            scc,
            r2: corr.r2,
        })
    }

    /// `metric=value` lines; undefined values print as `undefined`.
    pub fn to_kv(&self) -> String {
        self.to_string()
    }
}

const UNDEFINED: &str = "undefined";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |x| format!("{x}"))
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n={}", self.n)?;
        writeln!(f, "rmse={}", self.rmse)?;
        writeln!(f, "mae={}", self.mae)?;
        writeln!(f, "ccc={}", opt(self.ccc))?;
        writeln!(f, "pcc={}", opt(self.pcc))?;
        writeln!(f, "scc={}", opt(self.scc))?;
        writeln!(f, "r2={}", opt(self.r2))
    }
}

impl FromStr for MetricsReport {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut r = MetricsReport {
            n: 0,
            rmse: f64::NAN,
            mae: f64::NAN,
            ccc: None,
            pcc: None,
            scc: None,
            r2: None,
        };
        let bad = |line: &str| Error::Config(format!("bad metrics line `{line}`"));
        for line in s.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line.split_once('=').ok_or_else(|| bad(line))?;
            let num = || v.parse::<f64>().map_err(|_| bad(line));
            let maybe = || {
                if v == UNDEFINED {
                    Ok(None)
                } else {
                    num().map(Some)
                }
            };
            match k {
                "n" => r.n = v.parse().map_err(|_| bad(line))?,
                "rmse" => r.rmse = num()?,
                "mae" => r.mae = num()?,
                "ccc" => r.ccc = maybe()?,
                "pcc" => r.pcc = maybe()?,
                "scc" => r.scc = maybe()?,
                "r2" => r.r2 = maybe()?,
                _ => return Err(bad(line)),
            }
        }
        Ok(r)
    }
}
