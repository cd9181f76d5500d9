//! Time evolution of the atoms + cavity system.
//!
//! The closed system is propagated exactly with the spectral propagator
//! `exp(-iHt) = V exp(-iΛt) V†`, either on the whole joint space
//! ([`evolve_closed`]) or one excitation sector at a time
//! ([`evolve_closed_blocked`]). The leaky cavity follows the thermal-bath
//! master equation
//!
//! ```text
//! dρ/dt = i[ρ, H] + κ(n̄+1)(2aρa† - a†aρ - ρa†a) + κn̄(2a†ρa - aa†ρ - ρaa†)
//! ```
//!
//! integrated with fixed-step RK4 on sector blocks ([`evolve_open`]).
//! [`lindblad_rhs`] evaluates the same generator on dense matrices and serves
//! as the reference for the blocked one.

use crate::entanglement::{concurrence, TwoQubitState};
use crate::error::{Error, Result};
use crate::linalg::{
    herm_eigen, kron, partial_trace_field, trace, ComplexMatrix, DensityState, FactorDims, HermEigen, C64, I, ONE, ZERO,
};
use crate::model::{excitation_operator, field_annihilator, hamiltonian, ModelParams};
use crate::sectors::{gemm_acc, BlockLayout, SectorBasis};

/// Tolerance on trace error, negative eigenvalues and excitation drift at
/// every output time.
pub const INVARIANT_TOL: f64 = 1e-8;

/// Trace drift beyond which an RK4 run is declared unstable.
pub const UNSTABLE_TRACE_DRIFT: f64 = 1e-6;

/// Default RK4 step in units of 1/g.
pub const DEFAULT_STEP: f64 = 0.005;

/// Largest Hamiltonian entry allowed to couple different excitation sectors
/// before the blocked propagator refuses the Hamiltonian.
const SECTOR_LEAK_TOL: f64 = 1e-12;

/// Per-output-time health of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDiagnostics {
    /// `|tr ρ - 1|` of the joint state.
    pub trace_error: f64,
    /// Smallest eigenvalue of the joint state.
    pub min_eigenvalue: f64,
    /// `⟨𝒩⟩(t) - ⟨𝒩⟩(0)`; closed evolution only.
    pub excitation_drift: Option<f64>,
    /// The reduced state needed a small repair before its concurrence was taken.
    pub repaired: bool,
}

/// Two-atom reduced states and their concurrence along a time grid.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub reduced_states: Vec<DensityState>,
    pub concurrences: Vec<f64>,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_concurrence(&self) -> f64 {
        self.concurrences.iter().copied().fold(0.0, f64::max)
    }

    pub fn worst_trace_error(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.trace_error).fold(0.0, f64::max)
    }

    pub fn worst_min_eigenvalue(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|d| d.min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn worst_excitation_drift(&self) -> Option<f64> {
        self.diagnostics
            .iter()
            .map(|d| d.excitation_drift.map(f64::abs))
            .try_fold(0.0, |acc, d| d.map(|d| f64::max(acc, d)))
    }

    /// Concurrences at times inside `[from, to]`.
    pub fn window(&self, from: f64, to: f64) -> Vec<f64> {
        self.times
            .iter()
            .zip(&self.concurrences)
            .filter(|(&t, _)| t >= from - 1e-12 && t <= to + 1e-12)
            .map(|(_, &c)| c)
            .collect()
    }

    fn push(&mut self, time: f64, reduced: ComplexMatrix, mut diag: StepDiagnostics) -> Result<()> {
        if diag.trace_error > INVARIANT_TOL {
            return Err(Error::Invariant {
                time,
                what: format!("trace error {:e} exceeds {INVARIANT_TOL:e}", diag.trace_error),
            });
        }
        if diag.min_eigenvalue < -INVARIANT_TOL {
            return Err(Error::Invariant {
                time,
                what: format!("negative eigenvalue {:e}", diag.min_eigenvalue),
            });
        }
        if let Some(drift) = diag.excitation_drift {
            if drift.abs() > INVARIANT_TOL {
                return Err(Error::Invariant {
                    time,
                    what: format!("excitation number drifted by {drift:e}"),
                });
            }
        }
        let two = TwoQubitState::new(reduced)?;
        let c = concurrence(&two)?;
        diag.repaired = two.repaired();
        self.times.push(time);
        self.reduced_states
            .push(DensityState::new_unchecked(two.matrix().clone(), vec![2, 2]));
        self.concurrences.push(c);
        self.diagnostics.push(diag);
        Ok(())
    }
}

/// Checks that `times` starts at 0 and increases strictly.
pub fn validate_times(times: &[f64]) -> Result<()> {
    match times.first() {
        None => return Err(Error::InvalidParameter("time grid is empty".into())),
        Some(&t0) if t0 != 0.0 => return Err(Error::InvalidParameter(format!("time grid must start at 0, got {t0}"))),
        _ => {}
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "time grid must be finite and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// `n + 1` equally spaced times on `[0, t_max]`.
pub fn uniform_times(t_max: f64, intervals: usize) -> Vec<f64> {
    (0..=intervals).map(|i| t_max * i as f64 / intervals as f64).collect()
}

fn joint_dims(rho: &DensityState) -> Result<FactorDims> {
    match *rho.factors() {
        [2, 2, n] => FactorDims::new(n),
        ref other => Err(Error::Dimension(format!(
            "expected factors [2, 2, N] for the joint state, got {other:?}"
        ))),
    }
}

fn check_operator_dim(h: &ComplexMatrix, dims: FactorDims) -> Result<()> {
    if h.rows() != dims.joint() || h.cols() != dims.joint() {
        return Err(Error::Dimension(format!(
            "Hamiltonian is {}x{} but the state lives in dimension {}",
            h.rows(),
            h.cols(),
            dims.joint()
        )));
    }
    Ok(())
}

/// Exact propagator `exp(-iHt)` from one diagonalization of `H`.
#[derive(Clone, Debug)]
pub struct SpectralPropagator {
    eig: HermEigen,
}

impl SpectralPropagator {
    pub fn new(h: &ComplexMatrix) -> Result<Self> {
        Ok(SpectralPropagator { eig: herm_eigen(h)? })
    }

    pub fn unitary(&self, t: f64) -> ComplexMatrix {
        self.eig.map(|x| (-I * x * t).exp())
    }

    /// `V† ρ V`, the input to [`SpectralPropagator::state_at`].
    pub fn to_eigenbasis(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let v = &self.eig.vectors;
        v.dagger().matmul(rho).matmul(v)
    }

    /// `ρ(t)` given the initial state in the eigenbasis.
    pub fn state_at(&self, rotated: &ComplexMatrix, t: f64) -> ComplexMatrix {
        let phases: Vec<C64> = self.eig.values.iter().map(|&x| (-I * x * t).exp()).collect();
        let n = phases.len();
        let evolved = ComplexMatrix::from_fn(n, n, |r, c| rotated[(r, c)] * phases[r] * phases[c].conj());
        let v = &self.eig.vectors;
        v.matmul(&evolved).matmul(&v.dagger())
    }
}

/// Closed evolution `ρ(t) = U(t) ρ₀ U†(t)` on the full joint space.
pub fn evolve_closed(rho0: &DensityState, h: &ComplexMatrix, times: &[f64]) -> Result<Trajectory> {
    let dims = joint_dims(rho0)?;
    check_operator_dim(h, dims)?;
    validate_times(times)?;
    let prop = SpectralPropagator::new(h)?;
    let rotated = prop.to_eigenbasis(rho0.matrix());
    let n_op = excitation_operator(dims);
    let n0 = trace(&n_op.matmul(rho0.matrix()))?.re;

    let mut traj = Trajectory::default();
    for &t in times {
        let rho = if t == 0.0 {
            rho0.matrix().clone()
        } else {
            prop.state_at(&rotated, t).hermitian_part()
        };
        let state = DensityState::new_unchecked(rho, dims.factors());
        let diag = StepDiagnostics {
            trace_error: (trace(state.matrix())? - ONE).norm(),
            min_eigenvalue: state.min_eigenvalue()?,
            excitation_drift: Some(trace(&n_op.matmul(state.matrix()))?.re - n0),
            repaired: false,
        };
        let reduced = partial_trace_field(&state, dims)?;
        traj.push(t, reduced.into_matrix(), diag)?;
    }
    Ok(traj)
}

/// Spectral propagator built sector by sector for a Hamiltonian that
/// conserves excitation number.
#[derive(Clone, Debug)]
pub struct SectorPropagator {
    basis: SectorBasis,
    sectors: Vec<HermEigen>,
}

impl SectorPropagator {
    pub fn new(h: &ComplexMatrix, dims: FactorDims) -> Result<Self> {
        check_operator_dim(h, dims)?;
        let basis = SectorBasis::new(dims);
        let sectors = basis
            .operator_blocks(h, 0, SECTOR_LEAK_TOL)?
            .into_iter()
            .map(|b| herm_eigen(&b.expect("diagonal blocks always exist")))
            .collect::<Result<Vec<_>>>()?;
        Ok(SectorPropagator { basis, sectors })
    }

    /// Splits `rho0` into sector blocks and rotates each into the local
    /// eigenbases.
    pub fn prepare(&self, rho0: &ComplexMatrix) -> Result<SectorEvolution<'_>> {
        let (layout, data) = BlockLayout::from_dense(self.basis.clone(), rho0)?;
        let mut rotated = vec![ZERO; layout.len()];
        for slot in layout.slots() {
            let block = ComplexMatrix::from_vec(slot.rows, slot.cols, data[slot.range()].to_vec())?;
            let vr = &self.sectors[slot.row].vectors;
            let vc = &self.sectors[slot.col].vectors;
            let r = vr.dagger().matmul(&block).matmul(vc);
            rotated[slot.range()].copy_from_slice(r.as_slice());
        }
        Ok(SectorEvolution {
            prop: self,
            layout,
            initial: data,
            rotated,
        })
    }
}

/// A prepared initial state for [`SectorPropagator`].
#[derive(Clone, Debug)]
pub struct SectorEvolution<'a> {
    prop: &'a SectorPropagator,
    layout: BlockLayout,
    initial: Vec<C64>,
    rotated: Vec<C64>,
}

impl SectorEvolution<'_> {
    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn initial(&self) -> &[C64] {
        &self.initial
    }

    /// Blocks of `ρ(t)`, laid out as [`SectorEvolution::layout`].
    pub fn state_at(&self, t: f64) -> Vec<C64> {
        if t == 0.0 {
            return self.initial.clone();
        }
        let mut out = vec![ZERO; self.layout.len()];
        let mut scratch = Vec::new();
        for slot in self.layout.slots() {
            let er = &self.prop.sectors[slot.row];
            let ec = &self.prop.sectors[slot.col];
            let pr: Vec<C64> = er.values.iter().map(|&x| (-I * x * t).exp()).collect();
            let pc: Vec<C64> = ec.values.iter().map(|&x| (I * x * t).exp()).collect();
            let (m, n) = (slot.rows, slot.cols);
            let src = &self.rotated[slot.range()];
            let phased: Vec<C64> = (0..m * n).map(|i| src[i] * pr[i / n] * pc[i % n]).collect();

            scratch.clear();
            scratch.resize(m * n, ZERO);
            gemm_acc(ONE, er.vectors.as_slice(), &phased, m, m, n, &mut scratch);
            let vc_dag = ec.vectors.dagger();
            gemm_acc(ONE, &scratch, vc_dag.as_slice(), m, n, n, &mut out[slot.range()]);
        }
        out
    }
}

/// Closed evolution one excitation sector at a time. Agrees with
/// [`evolve_closed`] and costs `O(N)` per time instead of `O(N³)`.
pub fn evolve_closed_blocked(rho0: &DensityState, h: &ComplexMatrix, times: &[f64]) -> Result<Trajectory> {
    let dims = joint_dims(rho0)?;
    validate_times(times)?;
    let prop = SectorPropagator::new(h, dims)?;
    let evo = prop.prepare(rho0.matrix())?;
    let layout = evo.layout();
    let n0 = layout.mean_excitation(evo.initial());

    let mut traj = Trajectory::default();
    for &t in times {
        let mut data = evo.state_at(t);
        layout.symmetrize(&mut data);
        let diag = StepDiagnostics {
            trace_error: (layout.trace(&data) - ONE).norm(),
            min_eigenvalue: layout.min_eigenvalue(&data)?,
            excitation_drift: Some(layout.mean_excitation(&data) - n0),
            repaired: false,
        };
        traj.push(t, layout.reduce_atoms(&data), diag)?;
    }
    Ok(traj)
}

/// Master-equation right-hand side on dense matrices. The cavity mode is the
/// last tensor factor of `rho`; the annihilator acts on it with identities on
/// the other factors.
pub fn lindblad_rhs(rho: &DensityState, h: &ComplexMatrix, kappa: f64, nbar: f64) -> Result<ComplexMatrix> {
    let d = rho.dim();
    if h.rows() != d || h.cols() != d {
        return Err(Error::Dimension(format!(
            "Hamiltonian is {}x{} but the state has dimension {d}",
            h.rows(),
            h.cols()
        )));
    }
    let levels = *rho.factors().last().expect("at least one factor");
    let a = kron(&ComplexMatrix::identity(d / levels), &field_annihilator(levels));
    let ad = a.dagger();
    let r = rho.matrix();

    let mut out = (&r.matmul(h) - &h.matmul(r)).scale(I);
    if kappa != 0.0 {
        let ada = ad.matmul(&a);
        let aad = a.matmul(&ad);
        let loss = &(&a.matmul(r).matmul(&ad).scale_real(2.0) - &ada.matmul(r)) - &r.matmul(&ada);
        let gain = &(&ad.matmul(r).matmul(&a).scale_real(2.0) - &aad.matmul(r)) - &r.matmul(&aad);
        out += &loss.scale_real(kappa * (nbar + 1.0));
        out += &gain.scale_real(kappa * nbar);
    }
    Ok(out)
}

/// Sparse entries `(row, col, value)` of a block of `a`.
type Triplets = Vec<(usize, usize, f64)>;

/// The master-equation generator acting on sector blocks.
///
/// Per block `(k, k')` it evaluates
/// `-K_k B - B K_k'† + 2κ(n̄+1) A_k B₊ A_k'† + 2κn̄ A_{k-1}† B₋ A_{k'-1}`
/// with `K = iH + κ(n̄+1)a†a + κn̄ aa†` restricted to a sector, `A_k` the
/// block of `a` from sector `k+1` to `k`, and `B₊`, `B₋` the blocks one
/// sector up and down.
#[derive(Clone, Debug)]
pub struct LindbladGenerator {
    layout: BlockLayout,
    k: Vec<ComplexMatrix>,
    k_dag: Vec<ComplexMatrix>,
    lower: Vec<Option<Triplets>>,
    loss: f64,
    gain: f64,
}

impl LindbladGenerator {
    pub fn new(params: &ModelParams, layout: BlockLayout) -> Result<Self> {
        params.validate()?;
        let dims = params.dims();
        if layout.basis().dims() != dims {
            return Err(Error::Dimension(
                "block layout does not match the model dimensions".into(),
            ));
        }
        let basis = layout.basis().clone();
        let h = hamiltonian(params)?;
        let a = kron(&ComplexMatrix::identity(dims.atoms()), &field_annihilator(dims.field));
        let ad = a.dagger();
        let (loss, gain) = (params.kappa * (params.nbar + 1.0), params.kappa * params.nbar);
        let damp = &ad.matmul(&a).scale_real(loss) + &a.matmul(&ad).scale_real(gain);
        let generator = &h.scale(I) + &damp;

        let k: Vec<ComplexMatrix> = basis
            .operator_blocks(&generator, 0, 0.0)?
            .into_iter()
            .map(|b| b.expect("diagonal blocks always exist"))
            .collect();
        let k_dag = k.iter().map(ComplexMatrix::dagger).collect();
        let lower = basis
            .operator_blocks(&a, 1, 0.0)?
            .into_iter()
            .map(|b| {
                b.map(|b| {
                    let mut t = Vec::new();
                    for r in 0..b.rows() {
                        for c in 0..b.cols() {
                            if b[(r, c)] != ZERO {
                                t.push((r, c, b[(r, c)].re));
                            }
                        }
                    }
                    t
                })
            })
            .collect();
        Ok(LindbladGenerator {
            layout,
            k,
            k_dag,
            lower,
            loss: 2.0 * loss,
            gain: 2.0 * gain,
        })
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    /// `out = L(y)`.
    pub fn apply(&self, y: &[C64], out: &mut [C64]) {
        out.fill(ZERO);
        let minus = C64::new(-1.0, 0.0);
        for slot in self.layout.slots() {
            let (m, n) = (slot.rows, slot.cols);
            let b = &y[slot.range()];
            let dst = &mut out[slot.range()];
            gemm_acc(minus, self.k[slot.row].as_slice(), b, m, m, n, dst);
            gemm_acc(minus, b, self.k_dag[slot.col].as_slice(), m, n, n, dst);

            if self.loss != 0.0 {
                if let (Some(up), Some(ar), Some(ac)) = (slot.up, &self.lower[slot.row], &self.lower[slot.col]) {
                    let src = &self.layout.slots()[up];
                    let bu = &y[src.range()];
                    for &(r, i, v) in ar {
                        for &(c, j, w) in ac {
                            dst[r * n + c] += self.loss * v * w * bu[i * src.cols + j];
                        }
                    }
                }
            }
            if self.gain != 0.0 && slot.row > 0 && slot.col > 0 {
                if let (Some(down), Some(ar), Some(ac)) =
                    (slot.down, &self.lower[slot.row - 1], &self.lower[slot.col - 1])
                {
                    let src = &self.layout.slots()[down];
                    let bd = &y[src.range()];
                    // (A_{k-1}† B A_{k'-1})[r][c] = Σ A[i][r] B[i][j] A[j][c]
                    for &(i, r, v) in ar {
                        for &(j, c, w) in ac {
                            dst[r * n + c] += self.gain * v * w * bd[i * src.cols + j];
                        }
                    }
                }
            }
        }
    }
}

/// Crude step bound `0.1 / (κ(2n̄+1)N + 2g√N)` for RK4 on this generator.
pub fn stability_bound(params: &ModelParams) -> f64 {
    let n = params.cutoff as f64;
    0.1 / (params.kappa * (2.0 * params.nbar + 1.0) * n + 2.0 * params.g * n.sqrt())
}

/// [`DEFAULT_STEP`], reduced to the stability bound when that is smaller.
pub fn default_step(params: &ModelParams) -> f64 {
    DEFAULT_STEP.min(stability_bound(params))
}

/// Fixed-step RK4 integration of the master equation on sector blocks.
#[derive(Clone, Debug)]
pub struct OpenEvolution {
    generator: LindbladGenerator,
    step: f64,
    time: f64,
    state: Vec<C64>,
    work: [Vec<C64>; 5],
}

impl OpenEvolution {
    pub fn new(rho0: &DensityState, params: &ModelParams, step: f64) -> Result<Self> {
        params.validate()?;
        let dims = joint_dims(rho0)?;
        if dims != params.dims() {
            return Err(Error::Dimension(format!(
                "state cutoff {} differs from model cutoff {}",
                dims.field, params.cutoff
            )));
        }
        let bound = stability_bound(params);
        if step.is_nan() || step <= 0.0 || step > bound * (1.0 + 1e-12) {
            return Err(Error::StepTooLarge { step, bound });
        }
        let (layout, state) = BlockLayout::from_dense(SectorBasis::new(dims), rho0.matrix())?;
        let len = layout.len();
        Ok(OpenEvolution {
            generator: LindbladGenerator::new(params, layout)?,
            step,
            time: 0.0,
            state,
            work: std::array::from_fn(|_| vec![ZERO; len]),
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn layout(&self) -> &BlockLayout {
        self.generator.layout()
    }

    pub fn blocks(&self) -> &[C64] {
        &self.state
    }

    pub fn dense_state(&self) -> ComplexMatrix {
        self.layout().to_dense(&self.state)
    }

    /// Integrates up to `target` in equal substeps no longer than the
    /// configured step, so that `target` is hit exactly.
    pub fn advance_to(&mut self, target: f64) {
        let span = target - self.time;
        if span <= 0.0 {
            return;
        }
        let count = (span / self.step - 1e-9).ceil().max(1.0) as usize;
        let h = span / count as f64;
        for _ in 0..count {
            self.rk4_step(h);
        }
        self.time = target;
    }

    fn rk4_step(&mut self, h: f64) {
        let [k1, k2, k3, k4, tmp] = &mut self.work;
        let y = &mut self.state;
        let g = &self.generator;
        g.apply(y, k1);
        for ((t, a), b) in tmp.iter_mut().zip(y.iter()).zip(k1.iter()) {
            *t = a + b * (0.5 * h);
        }
        g.apply(tmp, k2);
        for ((t, a), b) in tmp.iter_mut().zip(y.iter()).zip(k2.iter()) {
            *t = a + b * (0.5 * h);
        }
        g.apply(tmp, k3);
        for ((t, a), b) in tmp.iter_mut().zip(y.iter()).zip(k3.iter()) {
            *t = a + b * h;
        }
        g.apply(tmp, k4);
        let w = h / 6.0;
        for i in 0..y.len() {
            y[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * w;
        }
        g.layout().symmetrize(y);
    }
}

/// Open evolution with [`default_step`].
pub fn evolve_open(rho0: &DensityState, params: &ModelParams, times: &[f64]) -> Result<Trajectory> {
    evolve_open_with_step(rho0, params, times, default_step(params))
}

/// Open evolution with an explicit RK4 step, which must respect
/// [`stability_bound`].
pub fn evolve_open_with_step(
    rho0: &DensityState,
    params: &ModelParams,
    times: &[f64],
    step: f64,
) -> Result<Trajectory> {
    validate_times(times)?;
    let mut evo = OpenEvolution::new(rho0, params, step)?;
    let mut traj = Trajectory::default();
    for &t in times {
        evo.advance_to(t);
        let layout = evo.layout();
        let data = evo.blocks();
        let trace_error = (layout.trace(data) - ONE).norm();
        if trace_error > UNSTABLE_TRACE_DRIFT {
            return Err(Error::Invariant {
                time: t,
                what: format!(
                    "trace drifted by {trace_error:e}; the integration is unstable, retry with a step below {:e}",
                    step / 2.0
                ),
            });
        }
        let diag = StepDiagnostics {
            trace_error,
            min_eigenvalue: layout.min_eigenvalue(data)?,
            excitation_drift: None,
            repaired: false,
        };
        traj.push(t, layout.reduce_atoms(data), diag)?;
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{initial_state, thermal_cutoff, thermal_state, AtomStateLabel, EXCITED, GROUND};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn joint(label: AtomStateLabel, nbar: f64, cutoff: usize) -> DensityState {
        initial_state(&label, &thermal_state(nbar, cutoff).unwrap()).unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng, dims: FactorDims) -> DensityState {
        let d = dims.joint();
        let x = ComplexMatrix::from_fn(d, d, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let m = x.matmul(&x.dagger());
        let tr = trace(&m).unwrap().re;
        DensityState::new(m.scale_real(1.0 / tr).hermitian_part(), dims.factors()).unwrap()
    }

    #[test]
    fn time_grid_validation() {
        assert!(validate_times(&[]).is_err());
        assert!(validate_times(&[0.1, 0.2]).is_err());
        assert!(validate_times(&[0.0, 0.2, 0.2]).is_err());
        assert!(validate_times(&[0.0, 0.5, 1.0]).is_ok());
        assert_eq!(uniform_times(2.0, 4), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn closed_t0_is_identity() {
        let p = ModelParams::new(1.0, 0.4, 1.0, 0.0, thermal_cutoff(1.0)).unwrap();
        let rho0 = joint(AtomStateLabel::EE, 1.0, p.cutoff);
        let h = hamiltonian(&p).unwrap();
        let traj = evolve_closed(&rho0, &h, &[0.0]).unwrap();
        let expected = partial_trace_field(&rho0, p.dims()).unwrap();
        assert_eq!(traj.reduced_states[0].matrix(), expected.matrix());
        let traj = evolve_closed_blocked(&rho0, &h, &[0.0]).unwrap();
        assert_eq!(traj.reduced_states[0].matrix(), expected.matrix());
    }

    #[test]
    fn single_excitation_rabi_oscillation() {
        // γ = 1: only atom 1 couples, with g₁ = 2g; |eg,0⟩ ↔ |gg,1⟩
        let p = ModelParams::new(1.0, 1.0, 0.0, 0.0, 4).unwrap();
        let rho0 = joint(AtomStateLabel::EG, 0.0, 4);
        let h = hamiltonian(&p).unwrap();
        let times = uniform_times(5.0, 50);
        for traj in [
            evolve_closed(&rho0, &h, &times).unwrap(),
            evolve_closed_blocked(&rho0, &h, &times).unwrap(),
        ] {
            for (i, &t) in times.iter().enumerate() {
                let pop_eg = traj.reduced_states[i].matrix()[(1, 1)].re;
                assert!((pop_eg - (2.0 * t).cos().powi(2)).abs() < 1e-10, "t = {t}");
                assert!(traj.concurrences[i] <= 1e-12);
            }
        }
    }

    #[test]
    fn equal_couplings_never_entangle_doubly_excited_atoms() {
        for nbar in [0.0, 1.0] {
            let cutoff = thermal_cutoff(nbar).max(6);
            let p = ModelParams::new(1.0, 0.0, nbar, 0.0, cutoff).unwrap();
            let rho0 = joint(AtomStateLabel::EE, nbar, cutoff);
            let h = hamiltonian(&p).unwrap();
            let traj = evolve_closed_blocked(&rho0, &h, &uniform_times(25.0, 500)).unwrap();
            assert!(
                traj.max_concurrence() <= 1e-9,
                "nbar = {nbar}: {}",
                traj.max_concurrence()
            );
        }
    }

    #[test]
    fn closed_evolution_conserves_spectrum_and_excitations() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = ModelParams::new(1.0, 0.35, 0.0, 0.0, 4).unwrap();
        let rho0 = random_state(&mut rng, p.dims());
        let h = hamiltonian(&p).unwrap();
        let prop = SpectralPropagator::new(&h).unwrap();
        let u = prop.unitary(1.7);
        assert!(u.dagger().matmul(&u).max_abs_diff(&ComplexMatrix::identity(16)) < 1e-10);

        let ev0 = herm_eigen(rho0.matrix()).unwrap().values;
        let rotated = prop.to_eigenbasis(rho0.matrix());
        for t in [0.3, 2.0, 7.5] {
            let rho = prop.state_at(&rotated, t).hermitian_part();
            let ev = herm_eigen(&rho).unwrap().values;
            for (a, b) in ev.iter().zip(&ev0) {
                assert!((a - b).abs() < 1e-8);
            }
        }
        let traj = evolve_closed(&rho0, &h, &uniform_times(5.0, 10)).unwrap();
        assert!(traj.worst_excitation_drift().unwrap() < 1e-8);
        assert!(traj.worst_trace_error() < 1e-10);
    }

    #[test]
    fn blocked_closed_matches_dense_on_coherent_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = ModelParams::new(1.0, 0.6, 0.0, 0.0, 5).unwrap();
        let rho0 = random_state(&mut rng, p.dims());
        let h = hamiltonian(&p).unwrap();
        let dense = SpectralPropagator::new(&h).unwrap();
        let rotated = dense.to_eigenbasis(rho0.matrix());
        let blocked = SectorPropagator::new(&h, p.dims()).unwrap();
        let evo = blocked.prepare(rho0.matrix()).unwrap();
        for t in [0.0, 0.9, 4.2, 13.0] {
            let a = if t == 0.0 {
                rho0.matrix().clone()
            } else {
                dense.state_at(&rotated, t)
            };
            let b = evo.layout().to_dense(&evo.state_at(t));
            assert!(a.max_abs_diff(&b) < 1e-10, "t = {t}: {}", a.max_abs_diff(&b));
        }
    }

    #[test]
    fn blocked_propagator_rejects_sector_mixing_hamiltonians() {
        let dims = FactorDims::new(3).unwrap();
        let a = kron(&ComplexMatrix::identity(4), &field_annihilator(3));
        let drive = &a + &a.dagger();
        assert!(SectorPropagator::new(&drive, dims).is_err());
    }

    #[test]
    fn rhs_decay_of_one_photon() {
        let one = ComplexMatrix::from_real_diagonal(&[0.0, 1.0, 0.0]);
        let rho = DensityState::new(one, vec![3]).unwrap();
        let kappa = 0.7;
        let out = lindblad_rhs(&rho, &ComplexMatrix::zeros(3, 3), kappa, 0.0).unwrap();
        let expected = ComplexMatrix::from_real_diagonal(&[2.0 * kappa, -2.0 * kappa, 0.0]);
        assert!(out.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn rhs_without_decay_is_von_neumann() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = ModelParams::new(1.0, 0.4, 1.0, 0.0, 4).unwrap();
        let rho = random_state(&mut rng, p.dims());
        let h = hamiltonian(&p).unwrap();
        let out = lindblad_rhs(&rho, &h, 0.0, 1.0).unwrap();
        let expected = (&rho.matrix().matmul(&h) - &h.matmul(rho.matrix())).scale(I);
        assert!(out.max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn thermal_field_is_stationary_away_from_the_cutoff() {
        let levels = 40;
        let nbar = 1.0;
        let rho = thermal_state(nbar, levels).unwrap();
        let out = lindblad_rhs(&rho, &ComplexMatrix::zeros(levels, levels), 0.4, nbar).unwrap();
        for n in 0..levels - 1 {
            assert!(out[(n, n)].norm() <= 1e-10, "level {n}: {}", out[(n, n)]);
        }
        assert!(out.max_abs() < 1e-10 || out[(levels - 1, levels - 1)].norm() > 0.0);
    }

    #[test]
    fn rhs_is_traceless_and_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let p = ModelParams::new(1.0, 0.4, 1.5, 0.4, 5).unwrap();
        let rho = random_state(&mut rng, p.dims());
        let out = lindblad_rhs(&rho, &hamiltonian(&p).unwrap(), p.kappa, p.nbar).unwrap();
        assert!(trace(&out).unwrap().norm() < 1e-12);
        assert!(out.hermiticity_error() < 1e-12);
    }

    #[test]
    fn blocked_generator_matches_dense_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let p = ModelParams::new(1.0, 0.4, 1.5, 0.4, 5).unwrap();
        let h = hamiltonian(&p).unwrap();
        // fully coherent state: every sector offset present
        let rho = random_state(&mut rng, p.dims());
        let (layout, data) = BlockLayout::from_dense(SectorBasis::new(p.dims()), rho.matrix()).unwrap();
        let gen = LindbladGenerator::new(&p, layout).unwrap();
        let mut out = vec![ZERO; data.len()];
        gen.apply(&data, &mut out);
        let dense = lindblad_rhs(&rho, &h, p.kappa, p.nbar).unwrap();
        assert!(gen.layout().to_dense(&out).max_abs_diff(&dense) < 1e-12);

        // sector-diagonal state: only diagonal blocks stored
        let rho = joint(AtomStateLabel::EG, 0.0, p.cutoff);
        let (layout, data) = BlockLayout::from_dense(SectorBasis::new(p.dims()), rho.matrix()).unwrap();
        assert!(layout.slots().iter().all(|s| s.row == s.col));
        let gen = LindbladGenerator::new(&p, layout).unwrap();
        let mut out = vec![ZERO; data.len()];
        gen.apply(&data, &mut out);
        let dense = lindblad_rhs(&rho, &h, p.kappa, p.nbar).unwrap();
        assert!(gen.layout().to_dense(&out).max_abs_diff(&dense) < 1e-12);
    }

    #[test]
    fn step_above_bound_is_rejected() {
        let p = ModelParams::new(1.0, 0.4, 1.0, 0.4, thermal_cutoff(1.0)).unwrap();
        let rho0 = joint(AtomStateLabel::EE, 1.0, p.cutoff);
        let bound = stability_bound(&p);
        match evolve_open_with_step(&rho0, &p, &[0.0, 1.0], 2.0 * bound) {
            Err(Error::StepTooLarge { bound: b, .. }) => assert_eq!(b, bound),
            other => panic!("expected StepTooLarge, got {other:?}"),
        }
        assert!(default_step(&p) <= bound);
    }

    #[test]
    fn open_evolution_preserves_trace_and_positivity() {
        let p = ModelParams::new(1.0, 0.4, 1.0, 0.4, thermal_cutoff(1.0)).unwrap();
        let rho0 = joint(AtomStateLabel::EE, 1.0, p.cutoff);
        let traj = evolve_open(&rho0, &p, &uniform_times(3.0, 30)).unwrap();
        assert!(traj.worst_trace_error() <= 1e-8);
        assert!(traj.worst_min_eigenvalue() >= -1e-8);
        assert!(traj.concurrences.iter().all(|c| (0.0..=1.0).contains(c)));
    }

    #[test]
    fn open_with_zero_kappa_tracks_the_spectral_propagator() {
        let p = ModelParams::new(1.0, 0.4, 0.0, 0.0, 6).unwrap();
        let rho0 = joint(AtomStateLabel::EE, 0.0, 6);
        let times = uniform_times(5.0, 10);
        let closed = evolve_closed_blocked(&rho0, &hamiltonian(&p).unwrap(), &times).unwrap();
        let open = evolve_open_with_step(&rho0, &p, &times, 0.002).unwrap();
        for (a, b) in closed.reduced_states.iter().zip(&open.reduced_states) {
            assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-6);
        }
    }

    #[test]
    fn vacuum_decay_empties_a_single_excitation_into_the_dark_state() {
        // |eg,0⟩ with strong loss: population left in the dark combination
        // g₂|eg⟩ - g₁|ge⟩ is |g₂|²/(g₁²+g₂²).
        let p = ModelParams::new(1.0, 0.4, 0.0, 2.0, 6).unwrap();
        let rho0 = joint(AtomStateLabel::EG, 0.0, 6);
        let traj = evolve_open(&rho0, &p, &[0.0, 40.0]).unwrap();
        let (g1, g2) = (p.g1(), p.g2());
        let dark = [ZERO, C64::new(g2, 0.0), C64::new(-g1, 0.0), ZERO];
        let norm2 = g1 * g1 + g2 * g2;
        let reduced = traj.reduced_states[1].matrix();
        let overlap: f64 = (0..4)
            .flat_map(|r| (0..4).map(move |c| (r, c)))
            .map(|(r, c)| (dark[r].conj() * reduced[(r, c)] * dark[c]).re)
            .sum::<f64>()
            / norm2;
        let expected = g2 * g2 / norm2;
        assert!((overlap - expected).abs() < 1e-6, "{overlap} vs {expected}");
        let _ = (EXCITED, GROUND);
    }
}
