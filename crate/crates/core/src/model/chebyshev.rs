//! Dense Chebyshev filtering, kept as a reference for verifying the
//! high-order approximation. Not used on the training path.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Largest operator handled by the dense reference.
pub const CHEBYSHEV_GUARD: usize = 200;

fn check(op: &Tensor) -> Result<()> {
    if op.rows() != op.cols() {
        return Err(Error::dim("chebyshev", op.shape(), op.shape()));
    }
    if op.rows() > CHEBYSHEV_GUARD {
        return Err(Error::Capability(format!(
            "dense Chebyshev reference limited to {CHEBYSHEV_GUARD} nodes, got {}",
            op.rows()
        )));
    }
    Ok(())
}

/// `T_0 … T_order` of a square operator via `T_i = 2 L T_{i-1} − T_{i-2}`.
pub fn chebyshev_basis(op: &Tensor, order: usize) -> Result<Vec<Tensor>> {
    check(op)?;
    let n = op.rows();
    let mut basis = vec![Tensor::identity(n)];
    if order >= 1 {
        basis.push(op.clone());
    }
    for i in 2..=order {
        let mut next = op.matmul(&basis[i - 1])?.scale(2.0);
        for (a, b) in next.as_mut_slice().iter_mut().zip(basis[i - 2].as_slice()) {
            *a -= b;
        }
        basis.push(next);
    }
    Ok(basis)
}

/// `Σ_i θ_i T_i(op) x`.
pub fn chebyshev_truncation_reference(op: &Tensor, x: &Tensor, thetas: &[f64]) -> Result<Tensor> {
    if thetas.is_empty() {
        return Err(Error::Usage("at least one coefficient is required".into()));
    }
    let basis = chebyshev_basis(op, thetas.len() - 1)?;
    let mut out = Tensor::zeros(x.rows(), x.cols());
    for (t, &theta) in basis.iter().zip(thetas) {
        out.add_assign(&t.matmul(x)?.scale(theta));
    }
    Ok(out)
}

/// Coefficients `θ_0 … θ_3` tied to two free parameters by
/// `θ⁽⁰⁾ = θ_0 − θ_2 = −θ_1 + 3θ_3` and `θ⁽¹⁾ = 2θ_2 = −4θ_3`.
pub fn tied_thetas(theta_hat0: f64, theta_hat1: f64) -> [f64; 4] {
    let t2 = theta_hat1 / 2.0;
    let t3 = -theta_hat1 / 4.0;
    let t0 = theta_hat0 + t2;
    let t1 = 3.0 * t3 - theta_hat0;
    [t0, t1, t2, t3]
}

/// Two-term form of the tied cubic filter on the operator `L = I − Ã`:
/// `θ⁽⁰⁾ Ã x + L² θ⁽¹⁾ Ã x`.
pub fn tied_two_term_form(
    adj: &Tensor,
    x: &Tensor,
    theta_hat0: f64,
    theta_hat1: f64,
) -> Result<Tensor> {
    check(adj)?;
    let ax = adj.matmul(x)?;
    let lap = Tensor::identity(adj.rows()).add(&adj.scale(-1.0))?;
    let lap2 = lap.matmul(&lap)?;
    ax.scale(theta_hat0)
        .add(&lap2.matmul(&ax)?.scale(theta_hat1))
}
