//! Non-negative least squares on a few small problems.

use gtp::nnls::{kkt_violation, solve_nnls_default};
use nalgebra::DMatrix;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // unconstrained optimum has a negative entry
    let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    let b = [2.0, -1.0, 1.0];
    let fit = solve_nnls_default(&a, &b)?;
    println!("w = {:?}, residual {:.4}, kkt {:.1e}", fit.weights, fit.residual_norm, kkt_violation(&a, &b, &fit.weights));

    // an exact duplicate gets no weight
    let a = DMatrix::from_column_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    let fit = solve_nnls_default(&a, &[3.0, 2.0])?;
    println!("duplicated column: w = {:?}", fit.weights);

    // orthonormal columns: w = max(Aᵀb, 0)
    let a = DMatrix::from_column_slice(3, 2, &[0.6, 0.8, 0.0, -0.8, 0.6, 0.0]);
    let b = [1.0, 2.0, 0.5];
    let fit = solve_nnls_default(&a, &b)?;
    let closed: Vec<f64> = (a.transpose() * nalgebra::DVector::from_column_slice(&b)).iter().map(|v| v.max(0.0)).collect();
    println!("orthonormal: w = {:?}, closed form {:?}", fit.weights, closed);
    Ok(())
}
