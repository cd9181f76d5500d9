//! Wootters concurrence of a two-qubit density matrix.
//!
//! With `ρ̃ = (σʸ⊗σʸ) ρ* (σʸ⊗σʸ)` the concurrence is
//! `max(0, λ₁ - λ₂ - λ₃ - λ₄)` where `λᵢ` are the square roots of the
//! eigenvalues of `ρρ̃` in decreasing order. Writing `ρ = W W†`, those `λᵢ`
//! are exactly the singular values of the complex-symmetric matrix
//! `τ = Wᵀ (σʸ⊗σʸ) W`. Singular values are read off as the positive
//! eigenvalues of the Hermitian dilation `[[0, τ], [τ†, 0]]`, so no square
//! root of a round-off-sized eigenvalue is ever taken.

use crate::error::{Error, Result};
use crate::linalg::{herm_eigen, kron, trace, ComplexMatrix, DensityState, C64, HERMITIAN_TOL, TRACE_TOL, ZERO};

/// Most negative eigenvalue a valid two-qubit state may have.
pub const PSD_TOL: f64 = 1e-8;

/// Factor by which a state may exceed the tolerances and still be repaired.
const REPAIR_FACTOR: f64 = 10.0;

/// Eigenvalues of ρ this small relative to the largest are eigensolver noise.
const RANK_CUTOFF: f64 = 64.0 * f64::EPSILON;

/// A 4x4 density matrix in the basis `{|ee⟩, |eg⟩, |ge⟩, |gg⟩}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoQubitState {
    matrix: ComplexMatrix,
    repaired: bool,
}

impl TwoQubitState {
    /// Validates a two-qubit density matrix.
    ///
    /// States that miss the trace, Hermiticity or positivity tolerance by at
    /// most a factor of ten are symmetrized, clamped and renormalized, and
    /// flagged via [`TwoQubitState::repaired`]. Anything worse is an error.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if matrix.rows() != 4 || matrix.cols() != 4 {
            return Err(Error::Dimension(format!(
                "two-qubit state must be 4x4, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        if !matrix.is_finite() {
            return Err(Error::InvalidState("two-qubit state has non-finite entries".into()));
        }
        let asym = matrix.hermiticity_error();
        let trace_err = (trace(&matrix)? - C64::new(1.0, 0.0)).norm();
        let sym = matrix.hermitian_part();
        let eig = herm_eigen(&sym)?;
        let min_eig = eig.values[3];

        if asym <= HERMITIAN_TOL && trace_err <= TRACE_TOL && min_eig >= -PSD_TOL {
            return Ok(TwoQubitState {
                matrix,
                repaired: false,
            });
        }
        if asym <= REPAIR_FACTOR * HERMITIAN_TOL
            && trace_err <= REPAIR_FACTOR * TRACE_TOL
            && min_eig >= -REPAIR_FACTOR * PSD_TOL
        {
            let clamped = eig.map(|x| C64::new(x.max(0.0), 0.0));
            let tr = trace(&clamped)?.re;
            return Ok(TwoQubitState {
                matrix: clamped.scale_real(1.0 / tr),
                repaired: true,
            });
        }
        Err(Error::InvalidState(format!(
            "not a two-qubit density matrix: |A - A^dagger| = {asym:e}, |tr - 1| = {trace_err:e}, min eigenvalue = {min_eig:e}"
        )))
    }

    pub fn from_density(rho: &DensityState) -> Result<Self> {
        Self::new(rho.matrix().clone())
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Whether construction had to nudge the input back onto the state space.
    pub fn repaired(&self) -> bool {
        self.repaired
    }
}

/// `σʸ ⊗ σʸ`
pub fn sigma_yy() -> ComplexMatrix {
    let sy = ComplexMatrix::from_vec(2, 2, vec![ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO]).expect("2x2");
    kron(&sy, &sy)
}

/// Singlet `|ψ⁻⟩⟨ψ⁻|` with `|ψ⁻⟩ = (|eg⟩ - |ge⟩)/√2`.
pub fn psi_minus() -> ComplexMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::outer(&[ZERO, C64::new(h, 0.0), C64::new(-h, 0.0), ZERO])
}

/// `ρ̃ = (σʸ⊗σʸ) ρ* (σʸ⊗σʸ)` with `ρ*` the entrywise conjugate.
pub fn spin_flip(rho: &TwoQubitState) -> ComplexMatrix {
    let s = sigma_yy();
    s.matmul(&rho.matrix().conj()).matmul(&s)
}

/// The four `λᵢ`, sorted descending.
pub fn wootters_lambdas(rho: &TwoQubitState) -> Result<[f64; 4]> {
    let eig = herm_eigen(&rho.matrix().hermitian_part())?;
    let top = eig.values[0].max(0.0);
    let floor = RANK_CUTOFF * top;

    // W = V diag(√μ), dropping eigenvalues at the noise floor.
    let kept: Vec<usize> = (0..4).filter(|&i| eig.values[i] > floor).collect();
    let w = ComplexMatrix::from_fn(4, kept.len().max(1), |r, c| match kept.get(c) {
        Some(&i) => eig.vectors[(r, i)] * eig.values[i].sqrt(),
        None => ZERO,
    });
    let tau = w.transpose().matmul(&sigma_yy()).matmul(&w);

    let k = tau.rows();
    let mut dilation = ComplexMatrix::zeros(2 * k, 2 * k);
    for r in 0..k {
        for c in 0..k {
            dilation[(r, k + c)] = tau[(r, c)];
            dilation[(k + c, r)] = tau[(r, c)].conj();
        }
    }
    let singular = herm_eigen(&dilation.hermitian_part())?;
    let mut lambdas = [0.0; 4];
    for (slot, &s) in lambdas.iter_mut().zip(singular.values.iter().take(k)) {
        *slot = s.max(0.0);
    }
    Ok(lambdas)
}

/// Wootters concurrence, in `[0, 1]`. Pure and mixed inputs take the same path.
pub fn concurrence(rho: &TwoQubitState) -> Result<f64> {
    let l = wootters_lambdas(rho)?;
    Ok((l[0] - l[1] - l[2] - l[3]).clamp(0.0, 1.0))
}

/// Concurrence of a raw 4x4 matrix, validating it first.
pub fn concurrence_of(matrix: &ComplexMatrix) -> Result<f64> {
    concurrence(&TwoQubitState::new(matrix.clone())?)
}
