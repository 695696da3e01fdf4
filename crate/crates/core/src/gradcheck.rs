//! Central finite-difference verification of tape gradients.

use crate::error::Result;
use crate::param::{ParamId, ParamSet};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Finite-difference step `h`.
    pub step: f64,
    /// Maximum admissible relative error.
    pub tol: f64,
    /// Denominator floor so entries that are zero in both routes compare absolutely.
    pub floor: f64,
}

impl GradCheckOptions {
    pub fn with_tol(tol: f64) -> Self {
        GradCheckOptions {
            step: 1e-5,
            tol,
            floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_err: f64,
    /// Flat index of the worst entry.
    pub worst: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.max_rel_err)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.max_rel_err < self.tol)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ParamCheck> {
        self.params.iter().filter(|p| p.max_rel_err >= self.tol)
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares tape gradients of `forward` with central differences for every
/// entry of the parameters in `ids`. `forward` must be deterministic.
pub fn grad_check<F>(
    params: &mut ParamSet,
    ids: &[ParamId],
    mut forward: F,
    opts: GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, &ParamSet) -> Result<Var>,
{
    let analytic = {
        let mut tape = Tape::new();
        let loss = forward(&mut tape, params)?;
        tape.backward_into(loss, params)?;
        ids.iter()
            .map(|&id| params.get(id).grad.clone().expect("populated by backward"))
            .collect::<Vec<_>>()
    };
    compare(params, ids, forward, analytic, opts)
}

/// As [`grad_check`], but with the analytic gradients supplied by the caller.
pub fn grad_check_with<F, G>(
    params: &mut ParamSet,
    ids: &[ParamId],
    forward: F,
    mut analytic: G,
    opts: GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, &ParamSet) -> Result<Var>,
    G: FnMut(&mut ParamSet) -> Result<Vec<Tensor>>,
{
    let grads = analytic(params)?;
    compare(params, ids, forward, grads, opts)
}

fn compare<F>(
    params: &mut ParamSet,
    ids: &[ParamId],
    mut forward: F,
    analytic: Vec<Tensor>,
    opts: GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, &ParamSet) -> Result<Var>,
{
    let mut eval = |params: &ParamSet| -> Result<f64> {
        let mut tape = Tape::new();
        let loss = forward(&mut tape, params)?;
        Ok(tape.value(loss)[(0, 0)])
    };
    let mut report = Vec::with_capacity(ids.len());
    for (&id, grad) in ids.iter().zip(&analytic) {
        let mut check = ParamCheck {
            name: params.get(id).name.clone(),
            max_rel_err: 0.0,
            worst: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for k in 0..grad.len() {
            let orig = params.get(id).value.as_slice()[k];
            params.get_mut(id).value.as_mut_slice()[k] = orig + opts.step;
            let plus = eval(params)?;
            params.get_mut(id).value.as_mut_slice()[k] = orig - opts.step;
            let minus = eval(params)?;
            params.get_mut(id).value.as_mut_slice()[k] = orig;
            let numeric = (plus - minus) / (2.0 * opts.step);
            let a = grad.as_slice()[k];
            let err = relative_error(a, numeric, opts.floor);
            if err > check.max_rel_err || k == 0 {
                check.max_rel_err = err;
                check.worst = k;
                check.analytic = a;
                check.numeric = numeric;
            }
        }
        report.push(check);
    }
    Ok(GradCheckReport {
        params: report,
        tol: opts.tol,
    })
}
