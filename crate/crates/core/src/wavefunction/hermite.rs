//! Physicists' Hermite polynomials via the three-term recurrence.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Largest order whose normalization constant is computed (`n!` fits in f64).
pub const MAX_NORMALIZED_ORDER: usize = 170;

/// `[H₀(y), …, H_max_order(y)]` from `H_{n+1} = 2yH_n − 2nH_{n−1}`.
pub fn hermite_sequence(y: f64, max_order: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(max_order + 1);
    hermite_into(y, max_order, &mut out);
    out
}

/// Fills `out` with `H₀(y) … H_max_order(y)`, reusing its allocation.
pub(crate) fn hermite_into(y: f64, max_order: usize, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if max_order == 0 {
        return;
    }
    out.push(2.0 * y);
    for n in 1..max_order {
        let next = 2.0 * y * out[n] - 2.0 * n as f64 * out[n - 1];
        out.push(next);
    }
}

/// `√(2ⁿ n! √π)`, the constant making `∫ e^{−y²} Ĥ_n(y)² dy = 1`.
pub fn normalization_constant(order: usize) -> Result<f64> {
    if order > MAX_NORMALIZED_ORDER {
        return Err(Error::OrderOverflow(order));
    }
    // accumulate √(2k) factors so 2ⁿ n! never materializes
    let mut c = PI.sqrt().sqrt();
    for k in 1..=order {
        c *= (2.0 * k as f64).sqrt();
    }
    Ok(c)
}

/// Divides each `values[i]` (an `H_{orders[i]}` value) by its normalization
/// constant.
pub fn hermite_normalized(values: &[f64], orders: &[usize]) -> Result<Vec<f64>> {
    if values.len() != orders.len() {
        return Err(Error::Domain(format!(
            "{} hermite values but {} orders",
            values.len(),
            orders.len()
        )));
    }
    values
        .iter()
        .zip(orders)
        .map(|(&v, &n)| Ok(v / normalization_constant(n)?))
        .collect()
}
