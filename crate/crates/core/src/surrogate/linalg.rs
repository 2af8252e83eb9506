use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::{Error, Result};

/// Factorizes `matrix + jitter·I`, starting from `base_jitter` and growing by
/// 10x up to `1e4 · base_jitter` before giving up. Returns the jitter used.
pub(crate) fn cholesky_with_jitter(
    matrix: &DMatrix<f64>,
    base_jitter: f64,
) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let mut jitter = base_jitter;
    for _ in 0..5 {
        let mut m = matrix.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(m) {
            return Ok((c, jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::Numeric(format!(
        "Cholesky factorization of a {n}x{n} matrix failed even with jitter {:e}",
        jitter / 10.0,
        n = matrix.nrows()
    )))
}
