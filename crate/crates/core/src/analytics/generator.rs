use nalgebra::DMatrix;

use crate::model::Composition;

/// Group-level linear system `d ybar = M ybar dt + N^{-1/2} R^{-1/2} dW`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorTriple {
    /// `M_ij = -alpha_i (delta_ij - rho_j)`; a CTMC generator.
    pub m: DMatrix<f64>,
    /// Diagonal of `R^{-1}`: `sigma_k^2 / rho_k`.
    pub rinv_diag: Vec<f64>,
    pub rho: Vec<f64>,
}

impl GeneratorTriple {
    pub fn k(&self) -> usize {
        self.rho.len()
    }

    pub fn rinv(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.rinv_diag))
    }
}

pub fn build_generator(composition: &Composition) -> GeneratorTriple {
    let k = composition.n_groups();
    let alpha = composition.alpha();
    let rho = composition.rho();
    let m = DMatrix::from_fn(k, k, |i, j| {
        let kron = if i == j { 1.0 } else { 0.0 };
        -alpha[i] * (kron - rho[j])
    });
    let rinv_diag = composition
        .sigma()
        .iter()
        .zip(rho)
        .map(|(s, r)| s * s / r)
        .collect();
    GeneratorTriple {
        m,
        rinv_diag,
        rho: rho.to_vec(),
    }
}
