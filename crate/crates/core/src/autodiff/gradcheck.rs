//! Central-difference verification of tape gradients.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::autodiff::{BackwardFault, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_EPS: f64 = 1e-5;

/// Outcome of a gradient check.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(param index, flat entry)` where the maximum occurred.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
}

/// Gradient checker configuration.
#[derive(Clone, Debug)]
pub struct GradCheck {
    pub eps: f64,
    /// Check at most this many randomly chosen entries per parameter tensor.
    pub max_entries: Option<usize>,
    pub seed: u64,
    pub fault: BackwardFault,
}

impl Default for GradCheck {
    fn default() -> Self {
        Self {
            eps: DEFAULT_EPS,
            max_entries: None,
            seed: 0,
            fault: BackwardFault::None,
        }
    }
}

/// `|a − b| / max(|a|, |b|, 1e-8)`
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

impl GradCheck {
    pub fn sampled(max_entries: usize, seed: u64) -> Self {
        Self {
            max_entries: Some(max_entries),
            seed,
            ..Self::default()
        }
    }

    /// Compares tape gradients of `f` against central differences.
    ///
    /// `f` receives a fresh tape and one leaf per entry of `params`, and must
    /// return a scalar node.
    pub fn run<T, F>(&self, params: &[Tensor<T>], f: F) -> Result<GradCheckReport>
    where
        T: Scalar,
        F: Fn(&mut Tape<T>, &[Var]) -> Result<Var>,
    {
        let eval = |ps: &[Tensor<T>]| -> Result<f64> {
            let mut tape = Tape::new();
            let vars: Vec<Var> = ps.iter().map(|p| tape.param(p.clone())).collect();
            let out = f(&mut tape, &vars)?;
            let v = tape.value(out);
            if v.len() != 1 {
                return Err(Error::Contract(
                    "gradient check needs a scalar function".into(),
                ));
            }
            let x = v.data()[0].to_f64_lossy();
            if !x.is_finite() {
                return Err(Error::domain("grad_check", "function value is not finite"));
            }
            Ok(x)
        };

        let mut tape = Tape::with_fault(self.fault);
        let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
        let out = f(&mut tape, &vars)?;
        if !tape.value(out).data()[0].to_f64_lossy().is_finite() {
            return Err(Error::domain("grad_check", "function value is not finite"));
        }
        let grads = tape.backward(out)?;

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut report = GradCheckReport {
            max_rel_error: 0.0,
            worst: None,
            checked: 0,
        };
        let mut probe = params.to_vec();
        for (pi, p) in params.iter().enumerate() {
            let analytic = grads.get(vars[pi]).map(|g| g.to_f64_vec());
            let entries: Vec<usize> = match self.max_entries {
                Some(k) if k < p.len() => (0..k)
                    .map(|_| (rng.next_u64() % p.len() as u64) as usize)
                    .collect(),
                _ => (0..p.len()).collect(),
            };
            for idx in entries {
                let orig = p.data()[idx];
                probe[pi].data_mut()[idx] = orig + T::of(self.eps);
                let plus = eval(&probe)?;
                probe[pi].data_mut()[idx] = orig - T::of(self.eps);
                let minus = eval(&probe)?;
                probe[pi].data_mut()[idx] = orig;

                let fd = (plus - minus) / (2.0 * self.eps);
                let ad = analytic.as_ref().map_or(0.0, |g| g[idx]);
                let err = relative_error(ad, fd);
                report.checked += 1;
                if err > report.max_rel_error || report.worst.is_none() {
                    report.max_rel_error = err.max(report.max_rel_error);
                    report.worst = Some((pi, idx));
                }
            }
        }
        Ok(report)
    }
}

/// Checks every entry of every parameter with the default step.
pub fn grad_check<T, F>(params: &[Tensor<T>], f: F) -> Result<f64>
where
    T: Scalar,
    F: Fn(&mut Tape<T>, &[Var]) -> Result<Var>,
{
    GradCheck::default().run(params, f).map(|r| r.max_rel_error)
}
