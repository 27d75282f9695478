//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use fuznet::rng::SeededRng;

/// Direct textbook formulas, kept free of any code shared with the library.
pub mod oracle {
    pub fn mean(x: &[f64]) -> f64 {
        x.iter().sum::<f64>() / x.len() as f64
    }

    pub fn var(x: &[f64]) -> f64 {
        let m = mean(x);
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
    }

    pub fn cov(x: &[f64], y: &[f64]) -> f64 {
        let (mx, my) = (mean(x), mean(y));
        x.iter()
            .zip(y)
            .map(|(a, b)| (a - mx) * (b - my))
            .sum::<f64>()
            / x.len() as f64
    }

    pub fn rmse(p: &[f64], t: &[f64]) -> f64 {
        (p.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / p.len() as f64).sqrt()
    }

    pub fn mae(p: &[f64], t: &[f64]) -> f64 {
        p.iter().zip(t).map(|(a, b)| (a - b).abs()).sum::<f64>() / p.len() as f64
    }

    pub fn pcc(p: &[f64], t: &[f64]) -> Option<f64> {
        let d = (var(p) * var(t)).sqrt();
        (d > 0.0).then(|| cov(p, t) / d)
    }

    pub fn ccc(p: &[f64], t: &[f64]) -> Option<f64> {
        if var(p) == 0.0 || var(t) == 0.0 {
            return None;
        }
        let rho = cov(p, t) / (var(p).sqrt() * var(t).sqrt());
        let num = 2.0 * rho * var(p).sqrt() * var(t).sqrt();
        Some(num / (var(p) + var(t) + (mean(p) - mean(t)).powi(2)))
    }

    pub fn r2(p: &[f64], t: &[f64]) -> Option<f64> {
        let m = mean(t);
        let ss_tot: f64 = t.iter().map(|v| (v - m).powi(2)).sum();
        let ss_res: f64 = p.iter().zip(t).map(|(a, b)| (b - a).powi(2)).sum();
        (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot)
    }

    /// Rank = 1 + (# strictly smaller) + (# equal others) / 2.
    pub fn ranks(x: &[f64]) -> Vec<f64> {
        x.iter()
            .map(|&v| {
                let less = x.iter().filter(|&&w| w < v).count() as f64;
                let eq = x.iter().filter(|&&w| w == v).count() as f64;
                1.0 + less + (eq - 1.0) / 2.0
            })
            .collect()
    }

    pub fn scc(p: &[f64], t: &[f64]) -> Option<f64> {
        pcc(&ranks(p), &ranks(t))
    }
}

pub fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= tol,
        (None, None) => true,
        _ => false,
    }
}

pub fn random_pair(rng: &mut SeededRng, case: usize) -> (Vec<f64>, Vec<f64>) {
    let n = 2 + rng.below(199) as usize;
    let draw = |rng: &mut SeededRng, tied: bool| -> f64 {
        if tied {
            rng.below(5) as f64
        } else {
            rng.uniform_in(-3.0, 3.0) * 8.0 + 12.0
        }
    };
    let tied = case.is_multiple_of(4);
    let t: Vec<f64> = (0..n).map(|_| draw(rng, tied)).collect();
    let p: Vec<f64> = if case.is_multiple_of(3) {
        t.iter().map(|v| 0.7 * v + rng.normal() * 2.0).collect()
    } else {
        (0..n)
            .map(|_| draw(rng, tied || case.is_multiple_of(5)))
            .collect()
    };
    (p, t)
}
