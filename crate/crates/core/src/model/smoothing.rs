use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Degree-aware row variance of `h`, relative to its total energy.
///
/// Rows are rescaled by `1/sqrt(d_i + 1)` and their variance is taken with
/// weights `d_i + 1`. This equals the energy of `h` outside the dominant
/// eigenvector of `Ã` (proportional to `sqrt(d_i + 1)`), so it is zero
/// exactly when repeated propagation has nothing left to smooth.
pub fn row_variance(h: &Tensor, degrees: &[f64]) -> Result<f64> {
    if degrees.len() != h.rows() {
        return Err(Error::dim("row_variance", h.shape(), (degrees.len(), 1)));
    }
    let u: Vec<f64> = degrees.iter().map(|d| (d + 1.0).sqrt()).collect();
    let unorm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut residual = 0.0;
    let mut total = 0.0;
    for j in 0..h.cols() {
        let proj: f64 = (0..h.rows()).map(|i| h[(i, j)] * u[i]).sum::<f64>() / unorm;
        let energy: f64 = (0..h.rows()).map(|i| h[(i, j)] * h[(i, j)]).sum();
        residual += energy - proj * proj;
        total += energy;
    }
    if total == 0.0 {
        return Ok(0.0);
    }
    Ok((residual / total).max(0.0))
}
