//! Physical ingredients: coupling parametrization, the resonant two-atom
//! interaction Hamiltonian in the rotating-wave approximation, the truncated
//! thermal field and product initial states.
//!
//! Units: ħ = 1, and time is measured in units of 1/g.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{kron, ComplexMatrix, DensityState, FactorDims, C64, ONE, ZERO};

/// Index of the excited level in a single-atom factor.
pub const EXCITED: usize = 0;
/// Index of the ground level in a single-atom factor.
pub const GROUND: usize = 1;

/// Largest thermal probability mass the Fock truncation may discard.
pub const THERMAL_TAIL_LIMIT: f64 = 1e-6;

/// Model parameters. `g` is the mean coupling and `gamma` the relative
/// coupling difference, so that atom 1 couples with `g(1+γ)` and atom 2 with
/// `g(1-γ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub g: f64,
    pub gamma: f64,
    pub nbar: f64,
    pub kappa: f64,
    pub cutoff: usize,
}

impl ModelParams {
    pub fn new(g: f64, gamma: f64, nbar: f64, kappa: f64, cutoff: usize) -> Result<Self> {
        let p = ModelParams {
            g,
            gamma,
            nbar,
            kappa,
            cutoff,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        couplings_from(self.g, self.gamma)?;
        if !(self.nbar.is_finite() && self.nbar >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "nbar must be finite and >= 0, got {}",
                self.nbar
            )));
        }
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kappa must be finite and >= 0, got {}",
                self.kappa
            )));
        }
        FactorDims::new(self.cutoff)?;
        Ok(())
    }

    pub fn g1(&self) -> f64 {
        self.g * (1.0 + self.gamma)
    }

    pub fn g2(&self) -> f64 {
        self.g * (1.0 - self.gamma)
    }

    pub fn dims(&self) -> FactorDims {
        FactorDims {
            atom1: 2,
            atom2: 2,
            field: self.cutoff,
        }
    }
}

/// Individual couplings `(g₁, g₂) = (g(1+γ), g(1-γ))`.
pub fn couplings_from(g: f64, gamma: f64) -> Result<(f64, f64)> {
    if !(g.is_finite() && g > 0.0) {
        return Err(Error::InvalidParameter(format!("mean coupling g must be > 0, got {g}")));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!(
            "gamma must lie in [0, 1], got {gamma}"
        )));
    }
    Ok((g * (1.0 + gamma), g * (1.0 - gamma)))
}

/// Inverse of [`couplings_from`]: `g = (g₁+g₂)/2`, `γ = (g₁-g₂)/(g₁+g₂)`.
pub fn coupling_parameters(g1: f64, g2: f64) -> (f64, f64) {
    ((g1 + g2) / 2.0, (g1 - g2) / (g1 + g2))
}

/// Initial two-atom pure state.
#[derive(Clone, Debug, PartialEq)]
pub enum AtomStateLabel {
    EE,
    EG,
    GE,
    GG,
    /// Amplitudes in the basis `{|ee⟩, |eg⟩, |ge⟩, |gg⟩}`.
    Vector([C64; 4]),
}

impl AtomStateLabel {
    pub fn vector(amplitudes: [C64; 4]) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!(
                "two-atom vector has squared norm {norm}, expected 1"
            )));
        }
        Ok(AtomStateLabel::Vector(amplitudes))
    }

    pub fn amplitudes(&self) -> [C64; 4] {
        let mut amps = [ZERO; 4];
        match self {
            AtomStateLabel::EE => amps[0] = ONE,
            AtomStateLabel::EG => amps[1] = ONE,
            AtomStateLabel::GE => amps[2] = ONE,
            AtomStateLabel::GG => amps[3] = ONE,
            AtomStateLabel::Vector(v) => amps = *v,
        }
        amps
    }

    /// Largest number of atomic excitations carried by any component.
    pub fn max_excitations(&self) -> usize {
        self.amplitudes()
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm() > 0.0)
            .map(|(i, _)| atom_excitations(i))
            .max()
            .unwrap_or(0)
    }
}

impl fmt::Display for AtomStateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AtomStateLabel::EE => write!(f, "ee"),
            AtomStateLabel::EG => write!(f, "eg"),
            AtomStateLabel::GE => write!(f, "ge"),
            AtomStateLabel::GG => write!(f, "gg"),
            AtomStateLabel::Vector(v) => {
                write!(f, "vector(")?;
                for (i, z) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{}{:+}i", z.re, z.im)?;
                }
                write!(f, ")")
            }
        }
    }
}

impl FromStr for AtomStateLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ee" => Ok(AtomStateLabel::EE),
            "eg" => Ok(AtomStateLabel::EG),
            "ge" => Ok(AtomStateLabel::GE),
            "gg" => Ok(AtomStateLabel::GG),
            other => Err(Error::Usage(format!(
                "unknown atomic state '{other}', expected ee, eg, ge or gg"
            ))),
        }
    }
}

/// Number of excited atoms in two-atom basis state `i` of `{ee, eg, ge, gg}`.
pub fn atom_excitations(i: usize) -> usize {
    usize::from(i / 2 == EXCITED) + usize::from(i % 2 == EXCITED)
}

/// Field temperature, either directly as a mean photon number or as the
/// ratio ħω/(k_B T).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThermalSpec {
    Nbar(f64),
    BetaRatio(f64),
}

impl ThermalSpec {
    pub fn nbar(&self) -> Result<f64> {
        match *self {
            ThermalSpec::Nbar(n) if n.is_finite() && n >= 0.0 => Ok(n),
            ThermalSpec::Nbar(n) => Err(Error::InvalidParameter(format!("nbar must be >= 0, got {n}"))),
            ThermalSpec::BetaRatio(b) => nbar_from_temperature(b),
        }
    }
}

/// Bose–Einstein occupation `1/(e^x - 1)` for `x = ħω/(k_B T)`.
pub fn nbar_from_temperature(beta_ratio: f64) -> Result<f64> {
    if beta_ratio.is_nan() || beta_ratio <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "hbar*omega/(k_B*T) must be positive, got {beta_ratio}"
        )));
    }
    Ok(1.0 / beta_ratio.exp_m1())
}

/// Annihilator and the two atomic lowering operators embedded in the joint
/// space.
#[derive(Clone, Debug)]
pub struct LadderOps {
    pub a: ComplexMatrix,
    pub sigma1_minus: ComplexMatrix,
    pub sigma2_minus: ComplexMatrix,
}

/// Field annihilator `a|n⟩ = √n|n-1⟩` truncated to `levels` Fock states.
pub fn field_annihilator(levels: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(levels, levels, |r, c| {
        if c == r + 1 {
            C64::new((c as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    })
}

/// Single-atom `σ⁻ = |g⟩⟨e|`.
pub fn atom_lowering() -> ComplexMatrix {
    let mut s = ComplexMatrix::zeros(2, 2);
    s[(GROUND, EXCITED)] = ONE;
    s
}

pub fn lowering_ops(dims: FactorDims) -> LadderOps {
    let id2 = ComplexMatrix::identity(2);
    let id_field = ComplexMatrix::identity(dims.field);
    let id_atoms = ComplexMatrix::identity(dims.atoms());
    let sm = atom_lowering();
    LadderOps {
        a: kron(&id_atoms, &field_annihilator(dims.field)),
        sigma1_minus: kron(&kron(&sm, &id2), &id_field),
        sigma2_minus: kron(&kron(&id2, &sm), &id_field),
    }
}

/// Interaction Hamiltonian
/// `g₁(aσ₁⁺ + a†σ₁⁻) + g₂(aσ₂⁺ + a†σ₂⁻)` on the truncated joint space.
pub fn hamiltonian(params: &ModelParams) -> Result<ComplexMatrix> {
    params.validate()?;
    let dims = params.dims();
    let (g1, g2) = (params.g1(), params.g2());
    let mut h = ComplexMatrix::zeros(dims.joint(), dims.joint());
    for n in 1..dims.field {
        let amp = (n as f64).sqrt();
        for other in [EXCITED, GROUND] {
            // aσ₁⁺ : |g, x, n⟩ → √n |e, x, n-1⟩
            let from = dims.index(GROUND, other, n);
            let to = dims.index(EXCITED, other, n - 1);
            h[(to, from)] += C64::new(g1 * amp, 0.0);
            h[(from, to)] += C64::new(g1 * amp, 0.0);
            // aσ₂⁺ : |x, g, n⟩ → √n |x, e, n-1⟩
            let from = dims.index(other, GROUND, n);
            let to = dims.index(other, EXCITED, n - 1);
            h[(to, from)] += C64::new(g2 * amp, 0.0);
            h[(from, to)] += C64::new(g2 * amp, 0.0);
        }
    }
    Ok(h)
}

/// Excitation number of joint basis state `j`: photons plus excited atoms.
pub fn excitation_of(dims: FactorDims, j: usize) -> usize {
    let (a1, a2, n) = dims.split(j);
    n + usize::from(a1 == EXCITED) + usize::from(a2 == EXCITED)
}

/// `𝒩 = a†a + σ₁⁺σ₁⁻ + σ₂⁺σ₂⁻`, diagonal in the joint basis.
pub fn excitation_operator(dims: FactorDims) -> ComplexMatrix {
    let diag: Vec<f64> = (0..dims.joint()).map(|j| excitation_of(dims, j) as f64).collect();
    ComplexMatrix::from_real_diagonal(&diag)
}

/// Permutation exchanging the two atom factors.
pub fn atom_swap(dims: FactorDims) -> ComplexMatrix {
    let mut p = ComplexMatrix::zeros(dims.joint(), dims.joint());
    for j in 0..dims.joint() {
        let (a1, a2, n) = dims.split(j);
        p[(dims.index(a2, a1, n), j)] = ONE;
    }
    p
}

/// Unnormalized thermal weights `n̄ⁿ/(1+n̄)ⁿ⁺¹` for `n < levels`.
pub fn thermal_weights(nbar: f64, levels: usize) -> Vec<f64> {
    let ratio = nbar / (1.0 + nbar);
    (0..levels).map(|n| ratio.powi(n as i32) / (1.0 + nbar)).collect()
}

/// Probability mass above the cutoff, `(n̄/(1+n̄))^N`.
pub fn thermal_tail(nbar: f64, levels: usize) -> f64 {
    if nbar == 0.0 {
        return 0.0;
    }
    (nbar / (1.0 + nbar)).powi(levels as i32)
}

/// Smallest cutoff (at least 2) whose discarded thermal mass is within
/// [`THERMAL_TAIL_LIMIT`].
pub fn thermal_cutoff(nbar: f64) -> usize {
    let mut levels = 2;
    while thermal_tail(nbar, levels) > THERMAL_TAIL_LIMIT {
        levels += 1;
    }
    levels
}

/// Cutoff large enough for the thermal tail and for the excitations carried
/// by the initial atoms.
pub fn auto_cutoff(nbar: f64, atoms: &AtomStateLabel) -> usize {
    thermal_cutoff(nbar).max(atoms.max_excitations() + 4)
}

/// Thermal field state truncated to `levels` Fock states and renormalized.
pub fn thermal_state(nbar: f64, levels: usize) -> Result<DensityState> {
    if !(nbar.is_finite() && nbar >= 0.0) {
        return Err(Error::InvalidParameter(format!("nbar must be >= 0, got {nbar}")));
    }
    if levels < 2 {
        return Err(Error::InvalidParameter(format!(
            "Fock cutoff must be at least 2, got {levels}"
        )));
    }
    let tail = thermal_tail(nbar, levels);
    if tail > THERMAL_TAIL_LIMIT {
        return Err(Error::CutoffTooSmall {
            nbar,
            cutoff: levels,
            tail,
            limit: THERMAL_TAIL_LIMIT,
            required: thermal_cutoff(nbar),
        });
    }
    let mut p = thermal_weights(nbar, levels);
    let kept: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= kept);
    Ok(DensityState::new_unchecked(
        ComplexMatrix::from_real_diagonal(&p),
        vec![levels],
    ))
}

/// `|atoms⟩⟨atoms| ⊗ field` on the joint space.
pub fn initial_state(atoms: &AtomStateLabel, field: &DensityState) -> Result<DensityState> {
    if field.factors().len() != 1 {
        return Err(Error::Dimension(format!(
            "field state must have a single factor, got {:?}",
            field.factors()
        )));
    }
    let atomic = ComplexMatrix::outer(&atoms.amplitudes());
    let joint = kron(&atomic, field.matrix());
    DensityState::new(joint, vec![2, 2, field.dim()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{herm_eigen, trace};

    fn params(gamma: f64, cutoff: usize) -> ModelParams {
        ModelParams::new(1.0, gamma, 0.0, 0.0, cutoff).unwrap()
    }

    #[test]
    fn coupling_examples() {
        assert_eq!(couplings_from(1.0, 0.0).unwrap(), (1.0, 1.0));
        assert_eq!(couplings_from(1.0, 1.0).unwrap(), (2.0, 0.0));
        let (g1, g2) = couplings_from(1.0, 0.4).unwrap();
        assert!((g1 - 1.4).abs() < 1e-15 && (g2 - 0.6).abs() < 1e-15);
        assert!(couplings_from(1.0, 1.2).is_err());
        assert!(couplings_from(1.0, -0.1).is_err());
        assert!(couplings_from(0.0, 0.5).is_err());
    }

    #[test]
    fn ladder_matrix_elements() {
        let dims = FactorDims::new(5).unwrap();
        let a = field_annihilator(5);
        for r in 0..5 {
            for c in 0..5 {
                let expected = if c == r + 1 { (c as f64).sqrt() } else { 0.0 };
                assert_eq!(a[(r, c)], C64::new(expected, 0.0));
            }
        }
        let ops = lowering_ops(dims);
        let mut ket = vec![ZERO; dims.joint()];
        ket[dims.index(EXCITED, EXCITED, 0)] = ONE;
        let out = ops.sigma1_minus.mul_vec(&ket);
        let mut expected = vec![ZERO; dims.joint()];
        expected[dims.index(GROUND, EXCITED, 0)] = ONE;
        assert_eq!(out, expected);
        let comm = ops.sigma1_minus.commutator(&ops.sigma2_minus);
        assert_eq!(comm.max_abs(), 0.0);
    }

    #[test]
    fn truncated_commutator_has_corner_defect() {
        let n = 6;
        let a = field_annihilator(n);
        let comm = a.commutator(&a.dagger());
        let mut expected = ComplexMatrix::identity(n);
        expected[(n - 1, n - 1)] = C64::new(1.0 - n as f64, 0.0);
        assert!(comm.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn hamiltonian_matches_operator_products() {
        for gamma in [0.0, 0.4, 1.0] {
            let p = ModelParams::new(1.3, gamma, 0.0, 0.0, 5).unwrap();
            let h = hamiltonian(&p).unwrap();
            let ops = lowering_ops(p.dims());
            let term = |s: &ComplexMatrix| &ops.a.matmul(&s.dagger()) + &ops.a.dagger().matmul(s);
            let reference = &term(&ops.sigma1_minus).scale_real(p.g1()) + &term(&ops.sigma2_minus).scale_real(p.g2());
            assert!(h.max_abs_diff(&reference) < 1e-14);
        }
    }

    #[test]
    fn hamiltonian_single_element_and_hermiticity() {
        let p = params(0.4, 4);
        let h = hamiltonian(&p).unwrap();
        let dims = p.dims();
        let eg0 = dims.index(EXCITED, GROUND, 0);
        let gg1 = dims.index(GROUND, GROUND, 1);
        assert!((h[(eg0, gg1)] - C64::new(1.4, 0.0)).norm() < 1e-15);
        assert!(h.hermiticity_error() <= 1e-12);
    }

    #[test]
    fn hamiltonian_commutes_with_excitation_number() {
        let p = params(0.7, 6);
        let h = hamiltonian(&p).unwrap();
        let n_op = excitation_operator(p.dims());
        assert!(h.commutator(&n_op).max_abs() < 1e-10);
    }

    #[test]
    fn decoupled_atom_two_is_untouched() {
        let p = params(1.0, 5);
        let dims = p.dims();
        let h = hamiltonian(&p).unwrap();
        for r in 0..dims.joint() {
            for c in 0..dims.joint() {
                if dims.split(r).1 != dims.split(c).1 {
                    assert_eq!(h[(r, c)], ZERO);
                }
            }
        }
    }

    #[test]
    fn equal_couplings_are_swap_symmetric() {
        let p = params(0.0, 5);
        let h = hamiltonian(&p).unwrap();
        let swap = atom_swap(p.dims());
        assert!(h.commutator(&swap).max_abs() < 1e-12);
        let p = params(0.5, 5);
        assert!(hamiltonian(&p).unwrap().commutator(&swap).max_abs() > 0.1);
    }

    #[test]
    fn thermal_examples() {
        let vac = thermal_state(0.0, 4).unwrap();
        assert_eq!(vac.matrix(), &ComplexMatrix::from_real_diagonal(&[1.0, 0.0, 0.0, 0.0]));

        let w = thermal_weights(1.0, 3);
        assert_eq!(w, vec![0.5, 0.25, 0.125]);

        assert_eq!(thermal_cutoff(5.0), 76);
        assert!(thermal_state(5.0, 76).is_ok());
        match thermal_state(5.0, 75) {
            Err(Error::CutoffTooSmall { required, .. }) => assert_eq!(required, 76),
            other => panic!("expected CutoffTooSmall, got {other:?}"),
        }

        let rho = thermal_state(1.0, thermal_cutoff(1.0)).unwrap();
        assert!((trace(rho.matrix()).unwrap() - ONE).norm() < 1e-14);
    }

    #[test]
    fn temperature_conversion() {
        assert!((nbar_from_temperature(2f64.ln()).unwrap() - 1.0).abs() < 1e-14);
        assert!((nbar_from_temperature((6.0f64 / 5.0).ln()).unwrap() - 5.0).abs() < 1e-12);
        assert!(nbar_from_temperature(800.0).unwrap() < 1e-300);
        assert!(nbar_from_temperature(0.0).is_err());
        assert!(nbar_from_temperature(-1.0).is_err());
        assert_eq!(
            ThermalSpec::BetaRatio(2f64.ln()).nbar().unwrap(),
            nbar_from_temperature(2f64.ln()).unwrap()
        );
    }

    #[test]
    fn initial_state_products() {
        let vac = thermal_state(0.0, 3).unwrap();
        let rho = initial_state(&AtomStateLabel::EE, &vac).unwrap();
        let dims = FactorDims::new(3).unwrap();
        let mut ket = vec![ZERO; dims.joint()];
        ket[dims.index(EXCITED, EXCITED, 0)] = ONE;
        assert_eq!(rho.matrix(), &ComplexMatrix::outer(&ket));

        let field = thermal_state(1.0, thermal_cutoff(1.0)).unwrap();
        let rho = initial_state(&AtomStateLabel::EG, &field).unwrap();
        let n = field.dim();
        // only the |eg⟩⟨eg| atom block is populated, and it carries the field
        for r in 0..rho.dim() {
            for c in 0..rho.dim() {
                let block = (r / n, c / n);
                let v = rho.matrix()[(r, c)];
                if block == (1, 1) {
                    assert_eq!(v, field.matrix()[(r % n, c % n)]);
                } else {
                    assert_eq!(v, ZERO);
                }
            }
        }
    }

    #[test]
    fn initial_states_are_normalized_on_a_grid() {
        for label in [
            AtomStateLabel::EE,
            AtomStateLabel::EG,
            AtomStateLabel::GE,
            AtomStateLabel::GG,
        ] {
            for nbar in [0.0, 0.5, 1.0, 2.0, 3.0] {
                let field = thermal_state(nbar, thermal_cutoff(nbar)).unwrap();
                let rho = initial_state(&label, &field).unwrap();
                assert!((trace(rho.matrix()).unwrap() - ONE).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn labels_parse_and_count_excitations() {
        assert_eq!("EE".parse::<AtomStateLabel>().unwrap(), AtomStateLabel::EE);
        assert!("xx".parse::<AtomStateLabel>().is_err());
        assert_eq!(AtomStateLabel::EE.max_excitations(), 2);
        assert_eq!(AtomStateLabel::GE.max_excitations(), 1);
        assert_eq!(AtomStateLabel::GG.max_excitations(), 0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = AtomStateLabel::vector([C64::new(h, 0.0), ZERO, ZERO, C64::new(h, 0.0)]).unwrap();
        assert_eq!(bell.max_excitations(), 2);
        assert!(AtomStateLabel::vector([ONE, ONE, ZERO, ZERO]).is_err());
        assert_eq!(auto_cutoff(0.0, &AtomStateLabel::EE), 6);
        assert_eq!(auto_cutoff(5.0, &AtomStateLabel::EE), 76);
    }

    #[test]
    fn hamiltonian_spectrum_is_symmetric() {
        // every term changes the photon number by one, so photon parity anticommutes with H
        let h = hamiltonian(&params(0.3, 4)).unwrap();
        let eig = herm_eigen(&h).unwrap();
        let n = eig.values.len();
        for i in 0..n {
            assert!((eig.values[i] + eig.values[n - 1 - i]).abs() < 1e-10);
        }
    }
}
