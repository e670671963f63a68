//! Kraus families: the two standard teleportation channels, their coherent
//! path superposition, the quantum switch, the generalized depolarizing
//! reduction, and the product-state generalization.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{
    completeness_deviation, kraus_sum, ops, partial_trace_matrix, tensor, CMatrix, DensityMatrix,
    C64, CONSERVATION_TOL,
};
use crate::states::{bell_state, BellLabel, PureQubit};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KrausLabel {
    /// Standard teleportation anchored on `|ψ⁻⟩`.
    K,
    /// Standard teleportation anchored on `|φ⁻⟩`.
    L,
    PathK,
    PathL,
    PathGeneralProduct,
    Path,
    Switch,
    Depolarizing,
    GeneralProduct,
    Custom,
}

/// A trace-preserving set of Kraus operators.
#[derive(Clone, Debug)]
pub struct KrausSet {
    ops: Vec<CMatrix>,
    label: KrausLabel,
}

impl KrausSet {
    /// Checks shapes and `Σ A†A = I` to [`CONSERVATION_TOL`].
    pub fn new(ops: Vec<CMatrix>, label: KrausLabel) -> Result<Self> {
        let Some(first) = ops.first() else {
            return Err(Error::InvalidParameter("empty Kraus set".into()));
        };
        let n = first.rows();
        if let Some(bad) = ops.iter().find(|o| !o.is_square() || o.rows() != n) {
            return Err(Error::DimensionMismatch {
                expected: format!("{n}x{n} operators"),
                found: format!("{}x{}", bad.rows(), bad.cols()),
            });
        }
        let deviation = completeness_deviation(&ops);
        if deviation > CONSERVATION_TOL {
            return Err(Error::Completeness { deviation });
        }
        Ok(Self { ops, label })
    }

    pub fn ops(&self) -> &[CMatrix] {
        &self.ops
    }

    pub fn label(&self) -> KrausLabel {
        self.label
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Side length of each operator.
    pub fn dim(&self) -> usize {
        self.ops[0].rows()
    }

    pub fn completeness_deviation(&self) -> f64 {
        completeness_deviation(&self.ops)
    }

    /// `Σ A ρ A†`. Completeness was checked at construction.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: format!("{}-dimensional state", self.dim()),
                found: format!("{}-dimensional state", rho.dim()),
            });
        }
        DensityMatrix::new(kraus_sum(rho.matrix(), &self.ops), rho.dims().to_vec())
    }
}

fn teleport_set(anchor: BellLabel, sources: [BellLabel; 4], label: KrausLabel) -> KrausSet {
    let anchor = bell_state(anchor);
    let bob = [
        CMatrix::identity(2),
        ops::sigma_z(),
        ops::sigma_x(),
        ops::sigma_y().scale(C64::new(0.0, 1.0)),
    ];
    let ops = sources
        .iter()
        .zip(bob.iter())
        .map(|(&src, u)| tensor(&CMatrix::outer(&anchor, &bell_state(src)), u))
        .collect();
    KrausSet::new(ops, label).expect("teleportation Kraus set is complete")
}

/// `K0 = ψ⁻⟨ψ⁻| ⊗ I`, `K1 = |ψ⁻⟩⟨ψ⁺| ⊗ σz`, `K2 = |ψ⁻⟩⟨φ⁻| ⊗ σx`,
/// `K3 = |ψ⁻⟩⟨φ⁺| ⊗ iσy` on `A ⊗ A' ⊗ B`.
pub fn kraus_k() -> KrausSet {
    use BellLabel::*;
    teleport_set(
        PsiMinus,
        [PsiMinus, PsiPlus, PhiMinus, PhiPlus],
        KrausLabel::K,
    )
}

/// Same structure as [`kraus_k`], anchored on `|φ⁻⟩`.
pub fn kraus_l() -> KrausSet {
    use BellLabel::*;
    teleport_set(
        PhiMinus,
        [PhiMinus, PhiPlus, PsiMinus, PsiPlus],
        KrausLabel::L,
    )
}

/// `M_μν = |0⟩⟨0| ⊗ ½E_μ + |1⟩⟨1| ⊗ ½E_ν` over `C ⊗ S`.
///
/// The ½ weights only give a complete set when the base has exactly four
/// operators, so other sizes are rejected.
pub fn path_superposition(base: &KrausSet) -> Result<KrausSet> {
    if base.len() != 4 {
        return Err(Error::InvalidParameter(format!(
            "path superposition needs exactly 4 base operators, got {}",
            base.len()
        )));
    }
    let p0 = CMatrix::projector(&CMatrix::basis_ket(2, 0));
    let p1 = CMatrix::projector(&CMatrix::basis_ket(2, 1));
    let halves: Vec<CMatrix> = base.ops().iter().map(|e| e.scale_re(0.5)).collect();
    let upper: Vec<CMatrix> = halves.iter().map(|e| tensor(&p0, e)).collect();
    let lower: Vec<CMatrix> = halves.iter().map(|e| tensor(&p1, e)).collect();
    let mut out = Vec::with_capacity(16);
    for u in &upper {
        for l in &lower {
            out.push(u + l);
        }
    }
    let label = match base.label() {
        KrausLabel::K => KrausLabel::PathK,
        KrausLabel::L => KrausLabel::PathL,
        KrausLabel::GeneralProduct => KrausLabel::PathGeneralProduct,
        _ => KrausLabel::Path,
    };
    KrausSet::new(out, label)
}

/// Quantum switch `S_μν = |0⟩⟨0| ⊗ E_μF_ν + |1⟩⟨1| ⊗ F_νE_μ` over `C ⊗ S`.
pub fn switch_kraus(e_ops: &KrausSet, f_ops: &KrausSet) -> Result<KrausSet> {
    if e_ops.dim() != f_ops.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}-dimensional channel", e_ops.dim()),
            found: format!("{}-dimensional channel", f_ops.dim()),
        });
    }
    let p0 = CMatrix::projector(&CMatrix::basis_ket(2, 0));
    let p1 = CMatrix::projector(&CMatrix::basis_ket(2, 1));
    let mut out = Vec::with_capacity(e_ops.len() * f_ops.len());
    for e in e_ops.ops() {
        for f in f_ops.ops() {
            let first = tensor(&p0, &e.matmul(f));
            let second = tensor(&p1, &f.matmul(e));
            out.push(&first + &second);
        }
    }
    KrausSet::new(out, KrausLabel::Switch)
}

/// Result of reducing standard teleportation over a shared state to a
/// generalized depolarizing channel `ρ ↦ Σ p_i σ_i ρ σ_i`.
#[derive(Clone, Debug)]
pub struct DepolarizingDecomposition {
    /// Weights for `[I, σx, σy, σz]`.
    pub probs: [f64; 4],
    /// `|β_0⟩ … |β_3⟩`, with `p_i = ⟨β_i|ρ|β_i⟩`.
    pub basis: [CMatrix; 4],
    /// Overlap of the shared state with `|β_0⟩`.
    pub singlet_fraction: f64,
}

impl DepolarizingDecomposition {
    /// `{√p_i σ_i}` with zero-weight terms dropped.
    pub fn kraus(&self) -> KrausSet {
        let ops = ops::paulis()
            .iter()
            .zip(self.probs.iter())
            .filter(|(_, &p)| p > 1e-15)
            .map(|(s, &p)| s.scale_re(p.sqrt()))
            .collect();
        KrausSet::new(ops, KrausLabel::Depolarizing).expect("weights sum to one")
    }
}

const DEGENERACY_TOL: f64 = 1e-10;

/// Magic basis: maximally entangled two-qubit states are exactly the real
/// unit combinations of these vectors, up to a global phase.
fn magic_basis() -> [CMatrix; 4] {
    let i = C64::new(0.0, 1.0);
    [
        bell_state(BellLabel::PhiPlus),
        bell_state(BellLabel::PhiMinus).scale(i),
        bell_state(BellLabel::PsiPlus).scale(i),
        bell_state(BellLabel::PsiMinus),
    ]
}

/// Reduce teleportation over `shared` to Pauli weights.
///
/// `|β_0⟩` maximizes the singlet fraction (top eigenvector of the real part
/// of `shared` in the magic basis). Ties are resolved by projecting the
/// `φ⁺` direction onto the top eigenspace, falling back through the other
/// magic vectors in order. The remaining `|β_i⟩ = (I ⊗ Fσ_iF†)|β_0⟩` use
/// Bob's marginal eigenbasis `F` (identity when that marginal is degenerate).
pub fn generalized_depolarizing_probs(shared: &DensityMatrix) -> Result<DepolarizingDecomposition> {
    if shared.dims() != [2, 2] {
        return Err(Error::DimensionMismatch {
            expected: "two-qubit shared state".into(),
            found: format!("dims {:?}", shared.dims()),
        });
    }
    let magic = magic_basis();
    let rho = shared.matrix();
    let mut real = nalgebra::Matrix4::<f64>::zeros();
    for j in 0..4 {
        let rk = rho.matmul(&magic[j]);
        for (k, mk) in magic.iter().enumerate() {
            real[(k, j)] = CMatrix::inner(mk, &rk).re;
        }
    }
    let real = (real + real.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(real);
    let top = eig.eigenvalues.max();
    let span: Vec<nalgebra::Vector4<f64>> = (0..4)
        .filter(|&k| eig.eigenvalues[k] >= top - DEGENERACY_TOL)
        .map(|k| eig.eigenvectors.column(k).into_owned())
        .collect();

    let coords = (0..4)
        .find_map(|axis| {
            let mut v = nalgebra::Vector4::<f64>::zeros();
            for u in &span {
                v += u * u[axis];
            }
            let n = v.norm();
            (n > 1e-8).then(|| v / n)
        })
        .expect("top eigenspace is nonempty");

    let mut beta0 = CMatrix::zeros(4, 1);
    for (k, m) in magic.iter().enumerate() {
        beta0.add_assign_scaled(m, C64::new(coords[k], 0.0));
    }

    let bob = partial_trace_matrix(rho, &[2, 2], &[1]);
    let eb = bob.hermitian_eigen();
    let frame = if (eb[0].0 - eb[1].0).abs() < DEGENERACY_TOL {
        CMatrix::identity(2)
    } else {
        let (u, v) = (&eb[0].1, &eb[1].1);
        CMatrix::new(
            2,
            2,
            vec![u.get(0, 0), v.get(0, 0), u.get(1, 0), v.get(1, 0)],
        )
        .unwrap()
    };
    let paulis = ops::paulis();
    let basis: [CMatrix; 4] = std::array::from_fn(|i| {
        let local = paulis[i].conjugate_by(&frame);
        tensor(&CMatrix::identity(2), &local).matmul(&beta0)
    });
    let probs: [f64; 4] = std::array::from_fn(|i| {
        CMatrix::inner(&basis[i], &rho.matmul(&basis[i]))
            .re
            .max(0.0)
    });
    Ok(DepolarizingDecomposition {
        singlet_fraction: probs[0],
        probs,
        basis,
    })
}

/// Teleportation operators adapted to `r|ωγ⟩⟨ωγ| + (1−r)|ω̄γ̄⟩⟨ω̄γ̄|`:
/// `K̃_i = |β_0⟩⟨β_i| ⊗ U_i` with
/// `|β_0⟩ = (|0ω⟩ − |1ω̄⟩)/√2`, `|β_1⟩ = (|0ω⟩ + |1ω̄⟩)/√2`,
/// `|β_2⟩ = (|0ω̄⟩ − |1ω⟩)/√2`, `|β_3⟩ = (|0ω̄⟩ + |1ω⟩)/√2`, and
/// `U_1: γ→γ, γ̄→−γ̄`; `U_2: γ↔γ̄`; `U_3: γ→−γ̄, γ̄→γ`.
pub fn general_product_kraus(omega: &PureQubit, gamma: &PureQubit) -> KrausSet {
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    let (w, wb) = (omega.ket(), omega.orthogonal_ket());
    let (e0, e1) = (CMatrix::basis_ket(2, 0), CMatrix::basis_ket(2, 1));
    let pair = |a: &CMatrix, b: &CMatrix, sign: f64| -> CMatrix {
        let mut v = tensor(&e0, a).scale(s);
        v.add_assign_scaled(&tensor(&e1, b), s * sign);
        v
    };
    let beta = [
        pair(&w, &wb, -1.0),
        pair(&w, &wb, 1.0),
        pair(&wb, &w, -1.0),
        pair(&wb, &w, 1.0),
    ];

    let (g, gb) = (gamma.ket(), gamma.orthogonal_ket());
    // U = Σ_k |out_k⟩⟨in_k| over the {γ, γ̄} basis
    let map = |to_g: (&CMatrix, f64), to_gb: (&CMatrix, f64)| -> CMatrix {
        let mut u = CMatrix::outer(to_g.0, &g).scale_re(to_g.1);
        u.add_assign_scaled(&CMatrix::outer(to_gb.0, &gb), C64::new(to_gb.1, 0.0));
        u
    };
    let bob = [
        CMatrix::identity(2),
        map((&g, 1.0), (&gb, -1.0)),
        map((&gb, 1.0), (&g, 1.0)),
        map((&gb, -1.0), (&g, 1.0)),
    ];

    let ops = beta
        .iter()
        .zip(bob.iter())
        .map(|(b, u)| tensor(&CMatrix::outer(&beta[0], b), u))
        .collect();
    KrausSet::new(ops, KrausLabel::GeneralProduct).expect("adapted Kraus set is complete")
}

/// `U_γ` with `U_γ|0⟩ = |γ⟩`, `U_γ|1⟩ = |γ̄⟩`; Bob undoes it with `U_γ†`.
pub fn general_product_frame(gamma: &PureQubit) -> CMatrix {
    gamma.frame()
}

/// Gate applied to the control qubit before it is measured.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ControlUnitary {
    Hadamard,
    /// `(1/√2)[[e^{iξ}, −e^{−iζ}], [e^{iζ}, e^{−iξ}]]`
    Generic {
        xi: f64,
        zeta: f64,
    },
}

impl ControlUnitary {
    /// Generic gate with `ξ + ζ = φc`.
    pub fn matched(phi_c: f64) -> Result<Self> {
        let u = Self::Generic {
            xi: phi_c,
            zeta: 0.0,
        };
        u.validate()?;
        Ok(u)
    }

    pub fn validate(&self) -> Result<()> {
        if let Self::Generic { xi, zeta } = *self {
            if !(0.0..TAU).contains(&xi) || !(0.0..TAU).contains(&zeta) {
                return Err(Error::InvalidParameter(format!(
                    "control unitary angles (ξ={xi}, ζ={zeta}) must lie in [0, 2π)"
                )));
            }
        }
        Ok(())
    }

    pub fn matrix(&self) -> CMatrix {
        match *self {
            Self::Hadamard => ops::hadamard(),
            Self::Generic { xi, zeta } => {
                let s = FRAC_1_SQRT_2;
                CMatrix::new(
                    2,
                    2,
                    vec![
                        C64::from_polar(s, xi),
                        -C64::from_polar(s, -zeta),
                        C64::from_polar(s, zeta),
                        C64::from_polar(s, -xi),
                    ],
                )
                .unwrap()
            }
        }
    }
}

/// Checked 2×2 matrix of a control gate.
pub fn control_unitary(kind: ControlUnitary) -> Result<CMatrix> {
    kind.validate()?;
    Ok(kind.matrix())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{apply_kraus, partial_trace};
    use crate::states::{build_shared, SharedState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bell_dm(label: BellLabel) -> DensityMatrix {
        DensityMatrix::from_ket(&bell_state(label), vec![2, 2]).unwrap()
    }

    #[test]
    fn teleport_sets_are_complete() {
        assert!(kraus_k().completeness_deviation() < 1e-15);
        assert!(kraus_l().completeness_deviation() < 1e-15);
        assert_eq!(kraus_k().len(), 4);
        assert_eq!(kraus_k().dim(), 8);
    }

    #[test]
    fn k_teleports_over_singlet() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k = kraus_k();
        for _ in 0..20 {
            let phi = PureQubit::random(&mut rng);
            let input = phi.density().tensor(&bell_dm(BellLabel::PsiMinus));
            let out = k.apply(&input).unwrap();
            let want = bell_dm(BellLabel::PsiMinus).tensor(&phi.density());
            assert!(out.matrix().approx_eq(want.matrix(), 1e-14));
        }
    }

    #[test]
    fn l_teleports_over_phi_minus() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let l = kraus_l();
        for _ in 0..20 {
            let phi = PureQubit::random(&mut rng);
            let input = phi.density().tensor(&bell_dm(BellLabel::PhiMinus));
            let out = apply_kraus(&input, l.ops()).unwrap();
            let want = bell_dm(BellLabel::PhiMinus).tensor(&phi.density());
            assert!(out.matrix().approx_eq(want.matrix(), 1e-14));
        }
    }

    #[test]
    fn single_operator_contractions() {
        let phi = PureQubit::new(0.8, 0.4).unwrap();
        // ⟨ψ⁻|_{AA'} |φ⟩|ψ⁻⟩ = −½|φ⟩, so both carry a −½ factor
        let s = C64::new(-0.5, 0.0);
        // K0 |φ⟩|ψ⁻⟩ = −½ |ψ⁻⟩|φ⟩
        let input = tensor(&phi.ket(), &bell_state(BellLabel::PsiMinus));
        let out = kraus_k().ops()[0].matmul(&input);
        let want = tensor(&bell_state(BellLabel::PsiMinus), &phi.ket()).scale(s);
        assert!(out.approx_eq(&want, 1e-15));
        // L2 |φ⟩|ψ⁻⟩ = −½ |φ⁻⟩ σx|φ⟩
        let out = kraus_l().ops()[2].matmul(&input);
        let want = tensor(
            &bell_state(BellLabel::PhiMinus),
            &ops::sigma_x().matmul(&phi.ket()),
        )
        .scale(s);
        assert!(out.approx_eq(&want, 1e-15));
    }

    #[test]
    fn path_superposition_shape_and_completeness() {
        let m = path_superposition(&kraus_k()).unwrap();
        assert_eq!(m.len(), 16);
        assert_eq!(m.dim(), 16);
        assert_eq!(m.label(), KrausLabel::PathK);
        // independent summation of M†M
        let mut sum = CMatrix::zeros(16, 16);
        for op in m.ops() {
            sum = &sum + &op.adjoint().matmul(op);
        }
        assert!(sum.approx_eq(&CMatrix::identity(16), 1e-14));
    }

    #[test]
    fn path_superposition_rejects_wrong_cardinality() {
        let two = KrausSet::new(
            vec![
                CMatrix::projector(&CMatrix::basis_ket(2, 0)),
                CMatrix::projector(&CMatrix::basis_ket(2, 1)),
            ],
            KrausLabel::Custom,
        )
        .unwrap();
        assert!(path_superposition(&two).is_err());
    }

    #[test]
    fn collapsed_control_reduces_to_base_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phi = PureQubit::random(&mut rng);
        let shared = build_shared(&SharedState::diagonal([0.1, 0.4, 0.3, 0.2]).unwrap()).unwrap();
        let target = phi.density().tensor(&shared);
        let ctrl = PureQubit::zero().density();
        let out = path_superposition(&kraus_k())
            .unwrap()
            .apply(&ctrl.tensor(&target))
            .unwrap();
        let base = kraus_k().apply(&target).unwrap();
        assert!(out.matrix().approx_eq(ctrl.tensor(&base).matrix(), 1e-14));
    }

    #[test]
    fn plus_control_carries_interference_block() {
        let phi = PureQubit::new(0.6, 0.9).unwrap();
        let shared = bell_dm(BellLabel::PsiMinus);
        let target = phi.density().tensor(&shared);
        let plus = PureQubit::new(FRAC_1_SQRT_2, 0.0).unwrap().density();
        let out = path_superposition(&kraus_k())
            .unwrap()
            .apply(&plus.tensor(&target))
            .unwrap();
        // off-diagonal control block: αβ*/4 Σ_μν K_μ ρ K_ν† with αβ* = 1/2
        let mut expected = CMatrix::zeros(8, 8);
        for a in kraus_k().ops() {
            for b in kraus_k().ops() {
                expected = &expected + &target.matrix().sandwich(a, b);
            }
        }
        let expected = expected.scale_re(0.5 / 4.0);
        for i in 0..8 {
            for j in 0..8 {
                assert!((out.get(i, 8 + j) - expected.get(i, j)).norm() < 1e-14);
            }
        }
    }

    fn dephasing() -> KrausSet {
        KrausSet::new(
            vec![
                CMatrix::identity(2).scale_re(FRAC_1_SQRT_2),
                ops::sigma_z().scale_re(FRAC_1_SQRT_2),
            ],
            KrausLabel::Depolarizing,
        )
        .unwrap()
    }

    #[test]
    fn switch_of_identities_is_identity() {
        let id = KrausSet::new(vec![CMatrix::identity(2)], KrausLabel::Custom).unwrap();
        let s = switch_kraus(&id, &id).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.ops()[0].approx_eq(&CMatrix::identity(4), 0.0));
    }

    #[test]
    fn switch_of_dephasing_factorizes() {
        let s = switch_kraus(&dephasing(), &dephasing()).unwrap();
        assert_eq!(s.len(), 4);
        assert!(s.completeness_deviation() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let phi = PureQubit::random(&mut rng);
            let chi = PureQubit::random(&mut rng).density();
            let out = s.apply(&chi.tensor(&phi.density())).unwrap();
            let flipped = phi.density().evolve(&ops::sigma_z()).unwrap();
            let rho_d = (phi.density().matrix() + flipped.matrix()).scale_re(0.5);
            let want = tensor(chi.matrix(), &rho_d);
            assert!(out.matrix().approx_eq(&want, 1e-14));
        }
    }

    #[test]
    fn switch_dimension_mismatch() {
        let id4 = KrausSet::new(vec![CMatrix::identity(4)], KrausLabel::Custom).unwrap();
        assert!(switch_kraus(&dephasing(), &id4).is_err());
    }

    #[test]
    fn depolarizing_probs_for_reference_states() {
        let singlet = generalized_depolarizing_probs(&bell_dm(BellLabel::PsiMinus)).unwrap();
        assert!((singlet.probs[0] - 1.0).abs() < 1e-12);
        assert!(singlet.probs[1..].iter().all(|&p| p.abs() < 1e-12));

        let mixed =
            generalized_depolarizing_probs(&DensityMatrix::maximally_mixed(vec![2, 2])).unwrap();
        assert!(mixed.probs.iter().all(|&p| (p - 0.25).abs() < 1e-12));
    }

    #[test]
    fn depolarizing_probs_for_product_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let w = PureQubit::random(&mut rng);
            let g = PureQubit::random(&mut rng);
            let shared = build_shared(&SharedState::product_mix(1.0, w, g).unwrap()).unwrap();
            let d = generalized_depolarizing_probs(&shared).unwrap();
            assert!((d.probs[0] - 0.5).abs() < 1e-10, "{:?}", d.probs);
            assert!((d.probs[3] - 0.5).abs() < 1e-10, "{:?}", d.probs);
            assert!(d.probs[1].abs() < 1e-10 && d.probs[2].abs() < 1e-10);
            // β_0 is maximally entangled: its marginal is I/2
            let b0 = DensityMatrix::from_ket(&d.basis[0], vec![2, 2]).unwrap();
            let m = partial_trace(&b0, &[1]).unwrap();
            assert!(m
                .matrix()
                .approx_eq(&CMatrix::identity(2).scale_re(0.5), 1e-10));
            let k = d.kraus();
            assert_eq!(k.len(), 2);
        }
    }

    #[test]
    fn general_product_reduces_to_l_in_computational_basis() {
        let z = PureQubit::zero();
        let g = general_product_kraus(&z, &z);
        for (a, b) in g.ops().iter().zip(kraus_l().ops()) {
            assert!(a.approx_eq(b, 1e-15));
        }
    }

    #[test]
    fn general_product_is_rotated_l() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let w = PureQubit::random(&mut rng);
            let g = PureQubit::random(&mut rng);
            let set = general_product_kraus(&w, &g);
            assert!(set.completeness_deviation() < 1e-12);
            let rot = tensor(&tensor(&CMatrix::identity(2), &w.frame()), &g.frame());
            for (a, l) in set.ops().iter().zip(kraus_l().ops()) {
                assert!(a.approx_eq(&l.conjugate_by(&rot), 1e-13));
            }
        }
    }

    #[test]
    fn adapted_anchor_has_half_overlap_with_product_mixture() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..10 {
            let w = PureQubit::random(&mut rng);
            let g = PureQubit::random(&mut rng);
            // (|ωγ⟩ − |ω̄γ̄⟩)/√2, i.e. φ⁻ in the (ω, γ) frames
            let anchor = tensor(&w.frame(), &g.frame()).matmul(&bell_state(BellLabel::PhiMinus));
            for &r in &[0.0, 0.25, 0.6, 1.0] {
                let shared = build_shared(&SharedState::product_mix(r, w, g).unwrap()).unwrap();
                let ov = CMatrix::inner(&anchor, &shared.matrix().matmul(&anchor)).re;
                assert!((ov - 0.5).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn u3_sign_convention() {
        let w = PureQubit::new(0.3, 1.0).unwrap();
        let g = PureQubit::new(0.7, 2.0).unwrap();
        let set = general_product_kraus(&w, &g);
        // recover U_3 from K̃_3 = |β0⟩⟨β3| ⊗ U_3 via the B block of the first nonzero A A' entry
        let k3 = &set.ops()[3];
        let (mut r, mut c) = (0, 0);
        'outer: for i in 0..4 {
            for j in 0..4 {
                if k3.get(2 * i, 2 * j).norm() + k3.get(2 * i, 2 * j + 1).norm() > 1e-6 {
                    r = i;
                    c = j;
                    break 'outer;
                }
            }
        }
        let blk = CMatrix::new(
            2,
            2,
            vec![
                k3.get(2 * r, 2 * c),
                k3.get(2 * r, 2 * c + 1),
                k3.get(2 * r + 1, 2 * c),
                k3.get(2 * r + 1, 2 * c + 1),
            ],
        )
        .unwrap();
        let u_g = blk.matmul(&g.ket());
        let u_gb = blk.matmul(&g.orthogonal_ket());
        // proportional to −γ̄ and γ with the same factor
        let f = CMatrix::inner(&g.orthogonal_ket(), &u_g);
        let f2 = CMatrix::inner(&g.ket(), &u_gb);
        assert!((f + f2).norm() < 1e-12);
    }

    #[test]
    fn control_unitaries() {
        let g00 = control_unitary(ControlUnitary::Generic { xi: 0.0, zeta: 0.0 }).unwrap();
        let col0 = g00.matmul(&CMatrix::basis_ket(2, 0));
        let plus = PureQubit::new(FRAC_1_SQRT_2, 0.0).unwrap().ket();
        assert!(col0.approx_eq(&plus, 1e-15));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            use rand::Rng;
            let u = ControlUnitary::Generic {
                xi: rng.gen_range(0.0..TAU),
                zeta: rng.gen_range(0.0..TAU),
            };
            assert!(control_unitary(u).unwrap().is_unitary(1e-12));
        }
        assert!(control_unitary(ControlUnitary::Hadamard)
            .unwrap()
            .is_unitary(1e-15));
        assert!(control_unitary(ControlUnitary::Generic { xi: 7.0, zeta: 0.0 }).is_err());
        assert!(ControlUnitary::matched(1.2).is_ok());
    }
}
