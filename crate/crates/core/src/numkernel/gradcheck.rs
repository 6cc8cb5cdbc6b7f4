use super::{KernelError, Tape, Tensor, Var};
use crate::Scalar;

/// Outcome of a central-difference gradient comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// `max |analytic − numeric| / max(|analytic|, |numeric|, 1e-8)`.
    pub max_relative_error: f64,
    /// `(input index, element index)` where the maximum occurred.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
}

/// Compares the tape gradient of `f` at `x` with central differences.
///
/// `f` records a scalar-valued computation on a fresh tape given the leaf
/// holding `x`. Every coordinate is probed at `x ± eps·e_i`.
pub fn grad_check<T, E, F>(f: F, x: &Tensor<T>, eps: T) -> Result<GradCheckReport, E>
where
    T: Scalar,
    E: From<KernelError>,
    F: Fn(&mut Tape<T>, Var) -> Result<Var, E>,
{
    grad_check_many(|tape, vars| f(tape, vars[0]), std::slice::from_ref(x), eps)
}

/// [`grad_check`] over several independent inputs at once, e.g. every
/// parameter tensor of a model.
pub fn grad_check_many<T, E, F>(f: F, xs: &[Tensor<T>], eps: T) -> Result<GradCheckReport, E>
where
    T: Scalar,
    E: From<KernelError>,
    F: Fn(&mut Tape<T>, &[Var]) -> Result<Var, E>,
{
    let eval = |inputs: &[Tensor<T>]| -> Result<T, E> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        let v = tape.scalar(out);
        if !v.is_finite() {
            return Err(KernelError::NonFinite {
                op: "grad_check probe",
            }
            .into());
        }
        Ok(v)
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = xs.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let grads = tape.backward(out)?;

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        coordinates: 0,
    };
    let mut probe: Vec<Tensor<T>> = xs.to_vec();
    for (t, var) in vars.iter().enumerate() {
        let analytic = grads.wrt(*var);
        for k in 0..xs[t].len() {
            let orig = xs[t].data()[k];
            probe[t].data_mut()[k] = orig + eps;
            let plus = eval(&probe)?;
            probe[t].data_mut()[k] = orig - eps;
            let minus = eval(&probe)?;
            probe[t].data_mut()[k] = orig;

            let numeric = ((plus - minus) / (eps + eps)).as_f64();
            let a = analytic.data()[k].as_f64();
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            let rel = (a - numeric).abs() / denom;
            report.coordinates += 1;
            if rel > report.max_relative_error || report.coordinates == 1 {
                report.max_relative_error = rel;
                report.worst = (t, k);
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
