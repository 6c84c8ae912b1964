//! Dense complex linear algebra for 1- to 4-qubit density matrices.
//!
//! Qubit ordering convention: qubit 0 is the leftmost tensor factor (most
//! significant bit of the computational-basis index). For the composite
//! schemes the order is Alice, repeater carbon, repeater electron, Bob.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const EIGENVALUE_TOL: f64 = 1e-10;

/// Trace-one Hermitian matrix on 1..=4 qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMat,
}

fn is_power_of_two_dim(dim: usize) -> bool {
    matches!(dim, 2 | 4 | 8 | 16)
}

fn hermitian_deviation(mat: &CMat) -> f64 {
    let mut max = 0.0f64;
    for i in 0..mat.nrows() {
        for j in 0..mat.ncols() {
            let d = (mat[(i, j)] - mat[(j, i)].conj()).norm();
            if d > max {
                max = d;
            }
        }
    }
    max
}

fn real_trace(mat: &CMat) -> f64 {
    (0..mat.nrows()).map(|i| mat[(i, i)].re).sum()
}

impl DensityMatrix {
    /// Validates dimension, Hermiticity and unit trace.
    pub fn new(mat: CMat) -> Result<Self> {
        let dim = mat.nrows();
        if mat.ncols() != dim || !is_power_of_two_dim(dim) {
            return Err(Error::BadDimension(dim));
        }
        let dev = hermitian_deviation(&mat);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = real_trace(&mat);
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::NotNormalized(tr));
        }
        let rho = Self { mat };
        #[cfg(debug_assertions)]
        debug_assert!(
            rho.min_eigenvalue() >= -EIGENVALUE_TOL,
            "density matrix has eigenvalue {} below tolerance",
            rho.min_eigenvalue()
        );
        Ok(rho)
    }

    /// |psi><psi| from a (normalized) state vector.
    pub fn pure(ket: &CVec) -> Result<Self> {
        let norm = ket.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized(norm * norm));
        }
        let mat = ket * ket.adjoint();
        Self::new(mat)
    }

    /// Maximally mixed state I/dim.
    pub fn maximally_mixed(dim: usize) -> Self {
        let mat = CMat::identity(dim, dim) * C64::new(1.0 / dim as f64, 0.0);
        Self { mat }
    }

    /// Convex mixture; weights must sum to 1.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let dim = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty mixture".into()))?
            .1
            .dim();
        let mut mat = CMat::zeros(dim, dim);
        for (w, rho) in parts {
            mat += rho.matrix() * C64::new(*w, 0.0);
        }
        Self::new(mat)
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn num_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn trace(&self) -> f64 {
        real_trace(&self.mat)
    }

    /// Tr(O rho), returned as a complex number.
    pub fn expectation(&self, op: &CMat) -> C64 {
        let prod = op * &self.mat;
        (0..prod.nrows()).map(|i| prod[(i, i)]).sum()
    }

    /// <psi| rho |psi>.
    pub fn fidelity_with_pure(&self, ket: &CVec) -> f64 {
        (ket.adjoint() * &self.mat * ket)[(0, 0)].re
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix {
            mat: self.mat.kronecker(&other.mat),
        }
    }

    /// Traces out all qubits not listed in `keep`. Output qubit order follows `keep`.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let n = self.num_qubits();
        if keep.is_empty() {
            return Err(Error::InvalidArgument("keep list is empty".into()));
        }
        for &q in keep {
            if q >= n {
                return Err(Error::IndexOutOfRange { index: q, qubits: n });
            }
        }
        let mut seen = [false; 4];
        for &q in keep {
            if seen[q] {
                return Err(Error::InvalidArgument(format!("duplicate index {q}")));
            }
            seen[q] = true;
        }
        let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
        let kd = 1usize << keep.len();
        let ed = 1usize << traced.len();
        let full_index = |kept_bits: usize, env_bits: usize| -> usize {
            let mut idx = 0usize;
            for (pos, &q) in keep.iter().enumerate() {
                let bit = (kept_bits >> (keep.len() - 1 - pos)) & 1;
                idx |= bit << (n - 1 - q);
            }
            for (pos, &q) in traced.iter().enumerate() {
                let bit = (env_bits >> (traced.len() - 1 - pos)) & 1;
                idx |= bit << (n - 1 - q);
            }
            idx
        };
        let mut out = CMat::zeros(kd, kd);
        for a in 0..kd {
            for b in 0..kd {
                let mut acc = C64::new(0.0, 0.0);
                for e in 0..ed {
                    acc += self.mat[(full_index(a, e), full_index(b, e))];
                }
                out[(a, b)] = acc;
            }
        }
        DensityMatrix::new(out)
    }

    /// Smallest eigenvalue (Hermitian eigendecomposition).
    pub fn min_eigenvalue(&self) -> f64 {
        let eig = self.mat.clone().symmetric_eigen();
        eig.eigenvalues.iter().fold(f64::INFINITY, |m, &x| m.min(x))
    }
}

/// Single- or multi-qubit noise channels.
#[derive(Debug, Clone)]
pub enum QuantumChannel {
    /// rho -> lambda rho + (1 - lambda) Z rho Z on one qubit.
    Dephasing(f64),
    /// rho -> lambda rho + (1 - lambda) I/dim on the targeted subsystem.
    Depolarizing { lambda: f64, dim: usize },
    /// Photon-loss channel on presence/absence encoding; gamma is the loss probability.
    AmplitudeDamping(f64),
    /// Deterministic Z gate (classical frame correction).
    PauliZCorrection,
    /// Arbitrary Kraus decomposition on the targeted qubits.
    CustomKraus(Vec<CMat>),
}

fn bit_of(index: usize, qubit: usize, n: usize) -> usize {
    (index >> (n - 1 - qubit)) & 1
}

/// Embeds an operator acting on `targets` (in the given order) into the full space.
pub fn lift_operator(op: &CMat, targets: &[usize], num_qubits: usize) -> Result<CMat> {
    let t = targets.len();
    if op.nrows() != (1 << t) || op.ncols() != (1 << t) {
        return Err(Error::InvalidArgument(format!(
            "operator dim {} does not match {} target qubits",
            op.nrows(),
            t
        )));
    }
    for &q in targets {
        if q >= num_qubits {
            return Err(Error::IndexOutOfRange { index: q, qubits: num_qubits });
        }
    }
    let dim = 1usize << num_qubits;
    let mut out = CMat::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            let mut rest_equal = true;
            for q in 0..num_qubits {
                if !targets.contains(&q) && bit_of(i, q, num_qubits) != bit_of(j, q, num_qubits) {
                    rest_equal = false;
                    break;
                }
            }
            if !rest_equal {
                continue;
            }
            let mut ti = 0usize;
            let mut tj = 0usize;
            for (pos, &q) in targets.iter().enumerate() {
                ti |= bit_of(i, q, num_qubits) << (t - 1 - pos);
                tj |= bit_of(j, q, num_qubits) << (t - 1 - pos);
            }
            out[(i, j)] = op[(ti, tj)];
        }
    }
    Ok(out)
}

fn check_kraus_completeness(kraus: &[CMat]) -> Result<()> {
    let dim = kraus
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty Kraus list".into()))?
        .nrows();
    let mut sum = CMat::zeros(dim, dim);
    for k in kraus {
        sum += k.adjoint() * k;
    }
    let mut dev = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            let expect = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            dev = dev.max((sum[(i, j)] - expect).norm());
        }
    }
    if dev > TRACE_TOL {
        return Err(Error::NotCptp(dev));
    }
    Ok(())
}

fn apply_kraus(rho: &DensityMatrix, kraus: &[CMat], targets: &[usize]) -> Result<DensityMatrix> {
    let n = rho.num_qubits();
    let dim = rho.dim();
    let mut out = CMat::zeros(dim, dim);
    for k in kraus {
        let full = lift_operator(k, targets, n)?;
        out += &full * rho.matrix() * full.adjoint();
    }
    DensityMatrix::new(out)
}

/// Applies a channel to the listed qubits of `rho`.
pub fn apply_channel(
    rho: &DensityMatrix,
    channel: &QuantumChannel,
    targets: &[usize],
) -> Result<DensityMatrix> {
    let n = rho.num_qubits();
    for &q in targets {
        if q >= n {
            return Err(Error::IndexOutOfRange { index: q, qubits: n });
        }
    }
    match channel {
        QuantumChannel::Dephasing(lambda) => {
            require_single_target(targets)?;
            let l = *lambda;
            let kraus = vec![
                identity(2) * C64::new(l.sqrt(), 0.0),
                pauli_z() * C64::new((1.0 - l).sqrt(), 0.0),
            ];
            apply_kraus(rho, &kraus, targets)
        }
        QuantumChannel::Depolarizing { lambda, dim } => {
            if *dim != (1usize << targets.len()) {
                return Err(Error::InvalidArgument(format!(
                    "depolarizing dim {} does not match {} target qubits",
                    dim,
                    targets.len()
                )));
            }
            apply_depolarizing(rho, *lambda, targets)
        }
        QuantumChannel::AmplitudeDamping(gamma) => {
            require_single_target(targets)?;
            let g = *gamma;
            let mut k0 = identity(2);
            k0[(1, 1)] = C64::new((1.0 - g).sqrt(), 0.0);
            let mut k1 = CMat::zeros(2, 2);
            k1[(0, 1)] = C64::new(g.sqrt(), 0.0);
            apply_kraus(rho, &[k0, k1], targets)
        }
        QuantumChannel::PauliZCorrection => {
            require_single_target(targets)?;
            apply_kraus(rho, &[pauli_z()], targets)
        }
        QuantumChannel::CustomKraus(kraus) => {
            check_kraus_completeness(kraus)?;
            apply_kraus(rho, kraus, targets)
        }
    }
}

fn require_single_target(targets: &[usize]) -> Result<()> {
    if targets.len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "channel acts on one qubit, got {} targets",
            targets.len()
        )));
    }
    Ok(())
}

/// lambda rho + (1 - lambda) Tr_targets(rho) (x) I/D, with I/D inserted at the target slots.
fn apply_depolarizing(rho: &DensityMatrix, lambda: f64, targets: &[usize]) -> Result<DensityMatrix> {
    let n = rho.num_qubits();
    let dim = rho.dim();
    let d_sub = 1usize << targets.len();
    let mut out = rho.matrix() * C64::new(lambda, 0.0);
    if targets.len() == n {
        // Fully depolarized subsystem is the whole state.
        let w = (1.0 - lambda) / d_sub as f64;
        for i in 0..dim {
            out[(i, i)] += C64::new(w, 0.0);
        }
        return DensityMatrix::new(out);
    }
    let keep: Vec<usize> = (0..n).filter(|q| !targets.contains(q)).collect();
    let marginal = rho.partial_trace(&keep)?;
    let w = (1.0 - lambda) / d_sub as f64;
    // Embed marginal (x) I/D back into the original qubit ordering.
    let md = marginal.dim();
    for a in 0..md {
        for b in 0..md {
            let val = marginal.matrix()[(a, b)] * C64::new(w, 0.0);
            if val.norm() == 0.0 {
                continue;
            }
            for t in 0..d_sub {
                let mut i = 0usize;
                let mut j = 0usize;
                for (pos, &q) in keep.iter().enumerate() {
                    i |= ((a >> (keep.len() - 1 - pos)) & 1) << (n - 1 - q);
                    j |= ((b >> (keep.len() - 1 - pos)) & 1) << (n - 1 - q);
                }
                for (pos, &q) in targets.iter().enumerate() {
                    let bit = (t >> (targets.len() - 1 - pos)) & 1;
                    i |= bit << (n - 1 - q);
                    j |= bit << (n - 1 - q);
                }
                out[(i, j)] += val;
            }
        }
    }
    DensityMatrix::new(out)
}

/// Post-selects on a projector / POVM element. Returns the renormalized state and
/// the selection weight Tr(P rho P^dag). A weight below 1e-300 yields `None` state.
pub fn project_and_renormalize(
    rho: &DensityMatrix,
    projector: &CMat,
) -> Result<(Option<DensityMatrix>, f64)> {
    let dim = rho.dim();
    if projector.nrows() != dim || projector.ncols() != dim {
        return Err(Error::InvalidPovm(format!(
            "projector dim {}x{} does not match state dim {}",
            projector.nrows(),
            projector.ncols(),
            dim
        )));
    }
    let dev = hermitian_deviation(projector);
    if dev > TRACE_TOL {
        return Err(Error::InvalidPovm(format!("not Hermitian (dev {dev:.3e})")));
    }
    let eig = projector.clone().symmetric_eigen();
    for &ev in eig.eigenvalues.iter() {
        if !(-EIGENVALUE_TOL..=1.0 + EIGENVALUE_TOL).contains(&ev) {
            return Err(Error::InvalidPovm(format!("eigenvalue {ev} outside [0,1]")));
        }
    }
    let sandwiched = projector * rho.matrix() * projector.adjoint();
    let weight = real_trace(&sandwiched);
    if weight < 1e-300 {
        return Ok((None, 0.0));
    }
    let state = DensityMatrix::new(sandwiched / C64::new(weight, 0.0))?;
    Ok((Some(state), weight))
}

// ---- constant operators and states ----

pub fn identity(dim: usize) -> CMat {
    CMat::identity(dim, dim)
}

pub fn pauli_x() -> CMat {
    CMat::from_row_slice(2, 2, &[
        C64::new(0.0, 0.0), C64::new(1.0, 0.0),
        C64::new(1.0, 0.0), C64::new(0.0, 0.0),
    ])
}

pub fn pauli_y() -> CMat {
    CMat::from_row_slice(2, 2, &[
        C64::new(0.0, 0.0), C64::new(0.0, -1.0),
        C64::new(0.0, 1.0), C64::new(0.0, 0.0),
    ])
}

pub fn pauli_z() -> CMat {
    CMat::from_row_slice(2, 2, &[
        C64::new(1.0, 0.0), C64::new(0.0, 0.0),
        C64::new(0.0, 0.0), C64::new(-1.0, 0.0),
    ])
}

/// Computational-basis ket |index> in the given dimension.
pub fn basis_ket(dim: usize, index: usize) -> CVec {
    let mut v = CVec::zeros(dim);
    v[index] = C64::new(1.0, 0.0);
    v
}

fn two_qubit_ket(amps: [(usize, f64); 2]) -> CVec {
    let mut v = CVec::zeros(4);
    for (i, a) in amps {
        v[i] = C64::new(a, 0.0);
    }
    v
}

pub fn phi_plus() -> CVec {
    two_qubit_ket([(0, std::f64::consts::FRAC_1_SQRT_2), (3, std::f64::consts::FRAC_1_SQRT_2)])
}

pub fn phi_minus() -> CVec {
    two_qubit_ket([(0, std::f64::consts::FRAC_1_SQRT_2), (3, -std::f64::consts::FRAC_1_SQRT_2)])
}

pub fn psi_plus() -> CVec {
    two_qubit_ket([(1, std::f64::consts::FRAC_1_SQRT_2), (2, std::f64::consts::FRAC_1_SQRT_2)])
}

pub fn psi_minus() -> CVec {
    two_qubit_ket([(1, std::f64::consts::FRAC_1_SQRT_2), (2, -std::f64::consts::FRAC_1_SQRT_2)])
}

/// X-basis eigenstates |+>, |->.
pub fn x_kets() -> (CVec, CVec) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut plus = CVec::zeros(2);
    plus[0] = C64::new(s, 0.0);
    plus[1] = C64::new(s, 0.0);
    let mut minus = CVec::zeros(2);
    minus[0] = C64::new(s, 0.0);
    minus[1] = C64::new(-s, 0.0);
    (plus, minus)
}

/// Y-basis eigenstates |0_y>, |1_y>.
pub fn y_kets() -> (CVec, CVec) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut zero = CVec::zeros(2);
    zero[0] = C64::new(s, 0.0);
    zero[1] = C64::new(0.0, s);
    let mut one = CVec::zeros(2);
    one[0] = C64::new(s, 0.0);
    one[1] = C64::new(0.0, -s);
    (zero, one)
}

pub fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    let mut out = CVec::zeros(a.len() * b.len());
    for i in 0..a.len() {
        for j in 0..b.len() {
            out[i * b.len() + j] = a[i] * b[j];
        }
    }
    out
}

pub fn projector(ket: &CVec) -> CMat {
    ket * ket.adjoint()
}
