use crate::error::{Error, Result};
use crate::states::PureQubit;

use super::matrix::{tensor, CMatrix, C64};
use super::STATE_TOL;

/// A validated density matrix over a register of subsystems.
///
/// Construction checks Hermiticity, unit trace and positive
/// semidefiniteness (eigenvalues of the Hermitian part ≥ −[`STATE_TOL`]).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    mat: CMatrix,
    dims: Vec<usize>,
}

impl DensityMatrix {
    pub fn new(mat: CMatrix, dims: Vec<usize>) -> Result<Self> {
        check_dims(&mat, &dims)?;
        validate_state(&mat)?;
        Ok(Self { mat, dims })
    }

    /// Single register of side `mat.rows()`.
    pub fn single(mat: CMatrix) -> Result<Self> {
        let n = mat.rows();
        Self::new(mat, vec![n])
    }

    /// `|ψ⟩⟨ψ|` from a ket; the ket is normalized first.
    pub fn from_ket(ket: &CMatrix, dims: Vec<usize>) -> Result<Self> {
        let norm = ket.norm();
        if ket.cols() != 1 || norm < STATE_TOL {
            return Err(Error::InvalidState("not a nonzero ket".into()));
        }
        let k = ket.scale_re(1.0 / norm);
        Self::new(CMatrix::projector(&k), dims)
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let n: usize = dims.iter().product();
        Self {
            mat: CMatrix::identity(n).scale_re(1.0 / n as f64),
            dims,
        }
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn from_trusted(mat: CMatrix, dims: Vec<usize>) -> Self {
        debug_assert!(check_dims(&mat, &dims).is_ok());
        Self { mat, dims }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Side length of the matrix.
    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.mat.get(i, j)
    }

    /// `self ⊗ other`, subsystem lists concatenated.
    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self::from_trusted(tensor(&self.mat, &other.mat), dims)
    }

    /// `U ρ U†` for a unitary acting on the whole register.
    pub fn evolve(&self, u: &CMatrix) -> Result<DensityMatrix> {
        if u.rows() != self.dim() || !u.is_square() {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0} unitary", self.dim()),
                found: format!("{}x{}", u.rows(), u.cols()),
            });
        }
        Self::new(self.mat.conjugate_by(u), self.dims.clone())
    }

    /// `op` on subsystem `index`, identity elsewhere.
    pub fn lift(&self, op: &CMatrix, index: usize) -> Result<CMatrix> {
        lift_operator(op, index, &self.dims)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.mat.hermitian_eigenvalues()[0]
    }

    /// Re-run every invariant check; used by tests and the verification suite.
    pub fn check(&self) -> Result<()> {
        check_dims(&self.mat, &self.dims)?;
        validate_state(&self.mat)
    }
}

fn check_dims(mat: &CMatrix, dims: &[usize]) -> Result<()> {
    if !mat.is_square() {
        return Err(Error::NotSquare {
            rows: mat.rows(),
            cols: mat.cols(),
        });
    }
    let prod: usize = dims.iter().product();
    if dims.is_empty() || dims.contains(&0) || prod != mat.rows() {
        return Err(Error::DimensionMismatch {
            expected: format!("subsystem dims with product {}", mat.rows()),
            found: format!("{:?}", dims),
        });
    }
    Ok(())
}

fn validate_state(mat: &CMatrix) -> Result<()> {
    let herm = mat.hermiticity_deviation();
    if herm > STATE_TOL {
        return Err(Error::InvalidState(format!(
            "not Hermitian (deviation {herm:.3e})"
        )));
    }
    let tr = mat.trace();
    if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
        return Err(Error::InvalidState(format!(
            "trace {:.12} + {:.3e}i is not 1",
            tr.re, tr.im
        )));
    }
    let min_ev = mat.hermitian_eigenvalues()[0];
    if min_ev < -STATE_TOL {
        return Err(Error::InvalidState(format!(
            "negative eigenvalue {min_ev:.3e}"
        )));
    }
    Ok(())
}

/// Embed `op` at position `index` of a register with subsystem sizes `dims`.
pub(crate) fn lift_operator(op: &CMatrix, index: usize, dims: &[usize]) -> Result<CMatrix> {
    if index >= dims.len() {
        return Err(Error::IndexOutOfRange {
            index,
            count: dims.len(),
        });
    }
    if !op.is_square() || op.rows() != dims[index] {
        return Err(Error::DimensionMismatch {
            expected: format!("{0}x{0} operator", dims[index]),
            found: format!("{}x{}", op.rows(), op.cols()),
        });
    }
    let before: usize = dims[..index].iter().product();
    let after: usize = dims[index + 1..].iter().product();
    let left = tensor(&CMatrix::identity(before), op);
    Ok(tensor(&left, &CMatrix::identity(after)))
}

/// Trace out every subsystem not listed in `keep`. Kept subsystems appear in
/// ascending index order in the result.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let dims = rho.dims();
    if keep.is_empty() {
        return Err(Error::InvalidParameter(
            "partial trace must keep at least one subsystem".into(),
        ));
    }
    if let Some(&bad) = keep.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            count: dims.len(),
        });
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    let out = partial_trace_matrix(rho.matrix(), dims, &kept);
    let out_dims = kept.iter().map(|&k| dims[k]).collect();
    DensityMatrix::new(out, out_dims)
}

/// Unvalidated partial trace over an arbitrary (possibly unnormalized) operator.
pub(crate) fn partial_trace_matrix(mat: &CMatrix, dims: &[usize], kept: &[usize]) -> CMatrix {
    let n = mat.rows();
    let nsub = dims.len();
    let is_kept: Vec<bool> = (0..nsub).map(|i| kept.contains(&i)).collect();
    let out_n: usize = kept.iter().map(|&k| dims[k]).product();

    // digit decomposition of every full index, most significant subsystem first
    let split = |mut idx: usize| -> (usize, usize) {
        let (mut keep_idx, mut keep_mul) = (0usize, 1usize);
        let (mut tr_idx, mut tr_mul) = (0usize, 1usize);
        for s in (0..nsub).rev() {
            let d = idx % dims[s];
            idx /= dims[s];
            if is_kept[s] {
                keep_idx += d * keep_mul;
                keep_mul *= dims[s];
            } else {
                tr_idx += d * tr_mul;
                tr_mul *= dims[s];
            }
        }
        (keep_idx, tr_idx)
    };
    let parts: Vec<(usize, usize)> = (0..n).map(split).collect();

    let mut out = CMatrix::zeros(out_n, out_n);
    for (r, &(kr, tr)) in parts.iter().enumerate() {
        for (c, &(kc, tc)) in parts.iter().enumerate() {
            if tr == tc {
                let v = out.get(kr, kc) + mat.get(r, c);
                out.set(kr, kc, v);
            }
        }
    }
    out
}

/// Max elementwise deviation of `Σ op† op` from the identity.
pub(crate) fn completeness_deviation(ops: &[CMatrix]) -> f64 {
    let Some(first) = ops.first() else {
        return f64::INFINITY;
    };
    let n = first.rows();
    let mut sum = CMatrix::zeros(n, n);
    for op in ops {
        let prod = op.adjoint().matmul(op);
        sum.add_assign_scaled(&prod, C64::new(1.0, 0.0));
    }
    sum.max_abs_diff(&CMatrix::identity(n))
}

pub(crate) fn kraus_sum(rho: &CMatrix, ops: &[CMatrix]) -> CMatrix {
    let n = rho.rows();
    let mut out = CMatrix::zeros(n, n);
    for op in ops {
        out.add_assign_scaled(&rho.sandwich(op, op), C64::new(1.0, 0.0));
    }
    out
}

/// `Σ_k A_k ρ A_k†` for a trace-preserving set of operators.
pub fn apply_kraus(rho: &DensityMatrix, ops: &[CMatrix]) -> Result<DensityMatrix> {
    if ops.is_empty() {
        return Err(Error::InvalidParameter("empty Kraus set".into()));
    }
    for op in ops {
        if !op.is_square() || op.rows() != rho.dim() {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0} operators", rho.dim()),
                found: format!("{}x{}", op.rows(), op.cols()),
            });
        }
    }
    let deviation = completeness_deviation(ops);
    if deviation > STATE_TOL {
        return Err(Error::Completeness { deviation });
    }
    DensityMatrix::new(kraus_sum(rho.matrix(), ops), rho.dims().to_vec())
}

/// Outcome of a projective measurement on one subsystem.
#[derive(Clone, Debug)]
pub struct Projection {
    /// Post-measurement state, `None` when the outcome is impossible.
    pub state: Option<DensityMatrix>,
    pub probability: f64,
}

impl Projection {
    pub fn is_impossible(&self) -> bool {
        self.state.is_none()
    }
}

/// Project `subsystem` onto the rank-1 projector `proj` and renormalize.
pub fn project_and_normalize(
    rho: &DensityMatrix,
    subsystem: usize,
    proj: &CMatrix,
) -> Result<Projection> {
    let lifted = rho.lift(proj, subsystem)?;
    let idempotent = proj.matmul(proj).max_abs_diff(proj);
    let tr = proj.trace();
    if !proj.is_hermitian(STATE_TOL) || idempotent > STATE_TOL || (tr.re - 1.0).abs() > STATE_TOL {
        return Err(Error::InvalidParameter(
            "measurement operator is not a rank-1 projector".into(),
        ));
    }
    let projected = rho.matrix().conjugate_by(&lifted);
    let p = projected.trace().re;
    if p < STATE_TOL {
        return Ok(Projection {
            state: None,
            probability: 0.0,
        });
    }
    let state = DensityMatrix::new(projected.scale_re(1.0 / p), rho.dims().to_vec())?;
    Ok(Projection {
        state: Some(state),
        probability: p,
    })
}

/// `|⟨ψ|ρ|ψ⟩|` for a normalized ket.
pub fn fidelity_to_ket(rho: &DensityMatrix, ket: &CMatrix) -> Result<f64> {
    if ket.cols() != 1 || ket.rows() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("ket of length {}", rho.dim()),
            found: format!("{}x{}", ket.rows(), ket.cols()),
        });
    }
    let v = rho.matrix().matmul(ket);
    Ok(CMatrix::inner(ket, &v).norm())
}

/// Fidelity of a single-qubit state with a pure qubit, clamped to `[0, 1]`.
pub fn fidelity_to_pure(rho: &DensityMatrix, phi: &PureQubit) -> Result<f64> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: "single-qubit state".into(),
            found: format!("{}-dimensional state", rho.dim()),
        });
    }
    Ok(fidelity_to_ket(rho, &phi.ket())?.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::ops;
    use crate::states::{bell_state, BellLabel};

    fn plus_state() -> DensityMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        DensityMatrix::from_ket(
            &CMatrix::ket(&[C64::new(s, 0.0), C64::new(s, 0.0)]),
            vec![2],
        )
        .unwrap()
    }

    #[test]
    fn rejects_non_states() {
        let bad_trace = CMatrix::from_real_diagonal(&[0.5, 0.4]);
        assert!(DensityMatrix::single(bad_trace).is_err());
        let negative = CMatrix::from_real_diagonal(&[1.2, -0.2]);
        assert!(matches!(
            DensityMatrix::single(negative),
            Err(Error::InvalidState(_))
        ));
        let mut nonherm = CMatrix::from_real_diagonal(&[0.5, 0.5]);
        nonherm.set(0, 1, C64::new(0.1, 0.0));
        assert!(DensityMatrix::single(nonherm).is_err());
        let wrong_dims = CMatrix::identity(4).scale_re(0.25);
        assert!(DensityMatrix::new(wrong_dims, vec![2, 3]).is_err());
    }

    #[test]
    fn partial_trace_of_product_returns_factor() {
        let a = plus_state();
        let b = DensityMatrix::single(CMatrix::from_real_diagonal(&[0.3, 0.7])).unwrap();
        let ab = a.tensor(&b);
        let tb = partial_trace(&ab, &[1]).unwrap();
        assert!(tb.matrix().approx_eq(b.matrix(), 1e-15));
        let ta = partial_trace(&ab, &[0]).unwrap();
        assert!(ta.matrix().approx_eq(a.matrix(), 1e-15));
    }

    #[test]
    fn singlet_marginal_is_maximally_mixed() {
        let psi = DensityMatrix::from_ket(&bell_state(BellLabel::PsiMinus), vec![2, 2]).unwrap();
        let rb = partial_trace(&psi, &[0]).unwrap();
        assert!(rb
            .matrix()
            .approx_eq(&CMatrix::identity(2).scale_re(0.5), 1e-15));
    }

    #[test]
    fn partial_trace_errors() {
        let psi = DensityMatrix::maximally_mixed(vec![2, 2]);
        assert!(matches!(
            partial_trace(&psi, &[2]),
            Err(Error::IndexOutOfRange { index: 2, count: 2 })
        ));
        assert!(partial_trace(&psi, &[]).is_err());
    }

    #[test]
    fn partial_trace_middle_subsystem_of_three() {
        // ρ_A ⊗ ρ_B ⊗ ρ_C, keep {0, 2}
        let a = plus_state();
        let b = DensityMatrix::single(CMatrix::from_real_diagonal(&[0.1, 0.9])).unwrap();
        let c = DensityMatrix::single(CMatrix::from_real_diagonal(&[0.6, 0.4])).unwrap();
        let abc = a.tensor(&b).tensor(&c);
        let ac = partial_trace(&abc, &[2, 0]).unwrap();
        assert_eq!(ac.dims(), &[2, 2]);
        assert!(ac.matrix().approx_eq(a.tensor(&c).matrix(), 1e-15));
    }

    #[test]
    fn identity_channel_is_noop() {
        let rho = plus_state();
        let out = apply_kraus(&rho, &[CMatrix::identity(2)]).unwrap();
        assert!(out.matrix().approx_eq(rho.matrix(), 0.0));
    }

    #[test]
    fn full_dephasing_of_plus_is_maximally_mixed() {
        let p0 = CMatrix::projector(&CMatrix::basis_ket(2, 0));
        let p1 = CMatrix::projector(&CMatrix::basis_ket(2, 1));
        let out = apply_kraus(&plus_state(), &[p0, p1]).unwrap();
        assert!(out
            .matrix()
            .approx_eq(&CMatrix::identity(2).scale_re(0.5), 1e-15));
    }

    #[test]
    fn incomplete_kraus_set_is_rejected() {
        let p0 = CMatrix::projector(&CMatrix::basis_ket(2, 0));
        let err = apply_kraus(&plus_state(), &[p0]).unwrap_err();
        assert!(matches!(err, Error::Completeness { .. }));
        let wrong = CMatrix::identity(4);
        assert!(matches!(
            apply_kraus(&plus_state(), &[wrong]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn projection_on_control() {
        let rho_s = DensityMatrix::single(CMatrix::from_real_diagonal(&[0.25, 0.75])).unwrap();
        let ctrl0 = DensityMatrix::single(CMatrix::from_real_diagonal(&[1.0, 0.0])).unwrap();
        let joint = ctrl0.tensor(&rho_s);
        let p0 = CMatrix::projector(&CMatrix::basis_ket(2, 0));
        let p1 = CMatrix::projector(&CMatrix::basis_ket(2, 1));

        let hit = project_and_normalize(&joint, 0, &p0).unwrap();
        assert!((hit.probability - 1.0).abs() < 1e-15);
        let reduced = partial_trace(hit.state.as_ref().unwrap(), &[1]).unwrap();
        assert!(reduced.matrix().approx_eq(rho_s.matrix(), 1e-15));

        let miss = project_and_normalize(&joint, 0, &p1).unwrap();
        assert!(miss.is_impossible());
        assert_eq!(miss.probability, 0.0);
    }

    #[test]
    fn projection_rejects_non_projectors() {
        let rho = DensityMatrix::maximally_mixed(vec![2, 2]);
        assert!(project_and_normalize(&rho, 0, &CMatrix::identity(2)).is_err());
        assert!(project_and_normalize(&rho, 0, &ops::sigma_z()).is_err());
        let p0 = CMatrix::projector(&CMatrix::basis_ket(2, 0));
        assert!(matches!(
            project_and_normalize(&rho, 5, &p0),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn fidelity_cases() {
        let phi = PureQubit::new(0.6, 1.3).unwrap();
        let pure = phi.density();
        assert!((fidelity_to_pure(&pure, &phi).unwrap() - 1.0).abs() < 1e-15);
        let mixed = DensityMatrix::maximally_mixed(vec![2]);
        assert!((fidelity_to_pure(&mixed, &phi).unwrap() - 0.5).abs() < 1e-15);
        let two = DensityMatrix::maximally_mixed(vec![2, 2]);
        assert!(fidelity_to_pure(&two, &phi).is_err());
    }

    #[test]
    fn fidelity_of_phase_flipped_state_is_cos_squared() {
        for &n in &[0.0, 0.4, 1.1, 2.0, 3.0] {
            let phi = PureQubit::from_polar(n, 0.7).unwrap();
            let flipped = phi.density().evolve(&ops::sigma_z()).unwrap();
            let a = (n / 2.0).cos();
            let expected = (1.0 - 2.0 * a * a).powi(2);
            let f = fidelity_to_pure(&flipped, &phi).unwrap();
            assert!((f - expected).abs() < 1e-14);
            assert!((f - n.cos().powi(2)).abs() < 1e-14);
        }
    }
}
