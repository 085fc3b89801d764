//! Central finite-difference verification of tape gradients.

use crate::error::Result;

use super::tape::{Scalar, Tape, Var};

/// Denominator floor of the relative error: coordinates where both
/// gradients are smaller than this are compared absolutely.
pub const REL_ERROR_FLOOR: f64 = 1e-4;

/// A scalar function of several tensor inputs that can be built on a tape
/// of either precision.
pub trait ScalarFn {
    fn eval<T: Scalar>(&self, tape: &mut Tape<T>, inputs: &[Var]) -> Result<Var>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(input, coordinate)` of the worst error.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
    /// Coordinates whose `±eps` probes change a branch decision (ReLU mask
    /// or cosine guard); the function is not differentiable across them.
    pub skipped: usize,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tol
    }
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

fn build<T: Scalar, F: ScalarFn>(f: &F, inputs: &[(Vec<usize>, Vec<T>)], track: bool) -> Result<(Tape<T>, Vec<Var>, Var)> {
    let mut tape = if track { Tape::with_kink_tracking() } else { Tape::new() };
    let vars = inputs
        .iter()
        .map(|(s, v)| tape.leaf(s, v.clone()))
        .collect::<Result<Vec<_>>>()?;
    let out = f.eval(&mut tape, &vars)?;
    Ok((tape, vars, out))
}

/// Gradients of `f` at `inputs` from an `f32` tape.
pub fn analytic_grads<F: ScalarFn>(f: &F, inputs: &[(Vec<usize>, Vec<f32>)]) -> Result<Vec<Vec<f32>>> {
    let (mut tape, vars, out) = build(f, inputs, false)?;
    tape.backward(out)?;
    Ok(vars.iter().map(|&v| tape.grad(v)).collect())
}

/// Compares `f32` analytic gradients with `f64` central differences of
/// step `eps`, over every coordinate of every input.
pub fn grad_check<F: ScalarFn>(f: &F, inputs: &[(Vec<usize>, Vec<f32>)], eps: f64, tol: f64) -> Result<GradCheckReport> {
    let analytic = analytic_grads(f, inputs)?;
    let mut x64: Vec<(Vec<usize>, Vec<f64>)> = inputs
        .iter()
        .map(|(s, v)| (s.clone(), v.iter().map(|&a| a as f64).collect()))
        .collect();
    let center_sig = build(f, &x64, true)?.0.kink_signature();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        skipped: 0,
        tol,
    };
    for j in 0..x64.len() {
        for (i, &a) in analytic[j].iter().enumerate() {
            let orig = x64[j].1[i];
            let probe = |x: f64, x64: &mut Vec<(Vec<usize>, Vec<f64>)>| -> Result<(f64, u64)> {
                x64[j].1[i] = x;
                let (tape, _, out) = build(f, x64, true)?;
                Ok((tape.value(out)[0], tape.kink_signature()))
            };
            let (fp, sp) = probe(orig + eps, &mut x64)?;
            let (fm, sm) = probe(orig - eps, &mut x64)?;
            x64[j].1[i] = orig;
            if sp != center_sig || sm != center_sig {
                report.skipped += 1;
                continue;
            }
            let numeric = (fp - fm) / (2.0 * eps);
            let e = rel_error(a as f64, numeric);
            report.checked += 1;
            if e > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(e);
                report.worst = Some((j, i));
            }
        }
    }
    Ok(report)
}
