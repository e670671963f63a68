//! State families used by the protocols and the l1-norm coherence measure.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{tensor, CMatrix, DensityMatrix, C64, STATE_TOL};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Single-qubit pure state `a|0⟩ + √(1−a²) e^{iη}|1⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PureQubit {
    a: f64,
    eta: f64,
}

impl PureQubit {
    /// `a` must lie in `[0, 1]`; `eta` is wrapped into `[0, 2π)`.
    pub fn new(a: f64, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) || !eta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "pure qubit needs a in [0,1] and finite eta, got a={a}, eta={eta}"
            )));
        }
        Ok(Self {
            a,
            eta: eta.rem_euclid(TAU),
        })
    }

    /// Bloch polar angle `n ∈ [0, π]`, with `a = cos(n/2)`.
    pub fn from_polar(n: f64, eta: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&n) {
            return Err(Error::InvalidParameter(format!(
                "polar angle {n} outside [0, π]"
            )));
        }
        Self::new((n / 2.0).cos().clamp(0.0, 1.0), eta)
    }

    /// Haar-uniform draw: `cos n` uniform on `[−1, 1]`, `η` uniform on `[0, 2π)`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let cos_n: f64 = rng.gen_range(-1.0..=1.0);
        let eta: f64 = rng.gen_range(0.0..TAU);
        Self::from_polar(cos_n.acos(), eta).expect("acos lies in [0, π]")
    }

    pub fn zero() -> Self {
        Self { a: 1.0, eta: 0.0 }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn polar(&self) -> f64 {
        2.0 * self.a.acos()
    }

    pub fn amplitudes(&self) -> [C64; 2] {
        let b = (1.0 - self.a * self.a).max(0.0).sqrt();
        [c(self.a, 0.0), C64::from_polar(b, self.eta)]
    }

    pub fn ket(&self) -> CMatrix {
        CMatrix::ket(&self.amplitudes())
    }

    /// The orthogonal partner `−√(1−a²)e^{−iη}|0⟩ + a|1⟩`.
    pub fn orthogonal_ket(&self) -> CMatrix {
        let b = (1.0 - self.a * self.a).max(0.0).sqrt();
        CMatrix::ket(&[-C64::from_polar(b, -self.eta), c(self.a, 0.0)])
    }

    /// Unitary with columns `|self⟩`, `|self⊥⟩`.
    pub fn frame(&self) -> CMatrix {
        let k = self.amplitudes();
        let o = self.orthogonal_ket();
        CMatrix::new(2, 2, vec![k[0], o.get(0, 0), k[1], o.get(1, 0)]).unwrap()
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::from_ket(&self.ket(), vec![2]).expect("normalized ket")
    }
}

/// Control qubit `cos(θc/2)|0⟩ + e^{iφc} sin(θc/2)|1⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSpec {
    theta_c: f64,
    phi_c: f64,
}

impl ControlSpec {
    /// `θc ∈ [0, π/2]`, `φc ∈ [0, π]`.
    pub fn new(theta_c: f64, phi_c: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&phi_c) {
            return Err(Error::InvalidParameter(format!(
                "control azimuth {phi_c} outside [0, π]"
            )));
        }
        Self::with_full_azimuth(theta_c, phi_c)
    }

    /// Same polar range, azimuth anywhere in `[0, 2π)`.
    pub fn with_full_azimuth(theta_c: f64, phi_c: f64) -> Result<Self> {
        if !(0.0..=FRAC_PI_2).contains(&theta_c) {
            return Err(Error::InvalidParameter(format!(
                "control polar angle {theta_c} outside [0, π/2]"
            )));
        }
        if !(0.0..TAU).contains(&phi_c) {
            return Err(Error::InvalidParameter(format!(
                "control azimuth {phi_c} outside [0, 2π)"
            )));
        }
        Ok(Self { theta_c, phi_c })
    }

    /// Maximally coherent control with interference parameter `x`.
    pub fn from_interference(x: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&x) {
            return Err(Error::InvalidParameter(format!("X = {x} outside [-1, 1]")));
        }
        Self::new(FRAC_PI_2, x.acos())
    }

    /// Control with l1 coherence `c` and azimuth `phi_c ∈ [0, 2π)`.
    pub fn from_coherence(c: f64, phi_c: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::InvalidParameter(format!(
                "coherence {c} outside [0, 1]"
            )));
        }
        Self::with_full_azimuth(c.asin(), phi_c)
    }

    pub fn theta_c(&self) -> f64 {
        self.theta_c
    }

    pub fn phi_c(&self) -> f64 {
        self.phi_c
    }

    pub fn alpha(&self) -> C64 {
        c((self.theta_c / 2.0).cos(), 0.0)
    }

    pub fn beta(&self) -> C64 {
        C64::from_polar((self.theta_c / 2.0).sin(), self.phi_c)
    }

    pub fn ket(&self) -> CMatrix {
        CMatrix::ket(&[self.alpha(), self.beta()])
    }

    /// `X = αβ* + α*β`, which equals `sin θc cos φc`.
    pub fn interference(&self) -> f64 {
        let (a, b) = (self.alpha(), self.beta());
        (a * b.conj() + a.conj() * b).re
    }

    /// `C(χ) = |αβ*| + |α*β|`, which equals `sin θc`.
    pub fn coherence(&self) -> f64 {
        let (a, b) = (self.alpha(), self.beta());
        (a * b.conj()).norm() + (a.conj() * b).norm()
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::from_ket(&self.ket(), vec![2]).expect("normalized ket")
    }

    /// `|α|²|0⟩⟨0| + |β|²|1⟩⟨1|`: same populations, no coherence.
    pub fn dephased_density(&self) -> DensityMatrix {
        let p0 = self.alpha().norm_sqr();
        DensityMatrix::single(CMatrix::from_real_diagonal(&[p0, 1.0 - p0])).expect("diagonal state")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BellLabel {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellLabel {
    pub const ALL: [BellLabel; 4] = [
        BellLabel::PhiPlus,
        BellLabel::PhiMinus,
        BellLabel::PsiPlus,
        BellLabel::PsiMinus,
    ];
}

/// `|φ±⟩ = (|00⟩ ± |11⟩)/√2`, `|ψ±⟩ = (|01⟩ ± |10⟩)/√2`.
pub fn bell_state(label: BellLabel) -> CMatrix {
    let s = FRAC_1_SQRT_2;
    let amps = match label {
        BellLabel::PhiPlus => [s, 0.0, 0.0, s],
        BellLabel::PhiMinus => [s, 0.0, 0.0, -s],
        BellLabel::PsiPlus => [0.0, s, s, 0.0],
        BellLabel::PsiMinus => [0.0, s, -s, 0.0],
    };
    let v: Vec<C64> = amps.iter().map(|&x| c(x, 0.0)).collect();
    CMatrix::ket(&v)
}

/// Two-qubit resource shared between Alice (`A'`) and Bob (`B`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SharedState {
    /// `diag(p0, p1, p2, p3)` in the computational basis.
    DiagonalSeparable { p: [f64; 4] },
    /// `p|β⟩⟨β| + (1−p) I/4`.
    Werner { p: f64, bell: BellLabel },
    /// `r|ωγ⟩⟨ωγ| + (1−r)|ω̄γ̄⟩⟨ω̄γ̄|`.
    GeneralProductMix {
        r: f64,
        omega: PureQubit,
        gamma: PureQubit,
    },
}

impl SharedState {
    pub fn diagonal(p: [f64; 4]) -> Result<Self> {
        let s = Self::DiagonalSeparable { p };
        s.validate()?;
        Ok(s)
    }

    /// `p|00⟩⟨00| + (1−p)|11⟩⟨11|` (weight entirely outside the `{01, 10}` block).
    pub fn even_parity(p: f64) -> Result<Self> {
        Self::diagonal([p, 0.0, 0.0, 1.0 - p])
    }

    /// `q|01⟩⟨01| + (1−q)|10⟩⟨10|`.
    pub fn odd_parity(q: f64) -> Result<Self> {
        Self::diagonal([0.0, q, 1.0 - q, 0.0])
    }

    /// Diagonal state with odd-parity weight `y`, split evenly.
    pub fn with_odd_weight(y: f64) -> Result<Self> {
        Self::diagonal([(1.0 - y) / 2.0, y / 2.0, y / 2.0, (1.0 - y) / 2.0])
    }

    pub fn werner(p: f64, bell: BellLabel) -> Result<Self> {
        let s = Self::Werner { p, bell };
        s.validate()?;
        Ok(s)
    }

    pub fn product_mix(r: f64, omega: PureQubit, gamma: PureQubit) -> Result<Self> {
        let s = Self::GeneralProductMix { r, omega, gamma };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        match *self {
            Self::DiagonalSeparable { p } => {
                let sum: f64 = p.iter().sum();
                if p.iter().any(|&x| x < 0.0 || !x.is_finite()) || (sum - 1.0).abs() > STATE_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "diagonal weights {p:?} are not a probability vector"
                    )));
                }
            }
            Self::Werner { p, .. } => {
                if !in_unit(p) {
                    return Err(Error::InvalidParameter(format!(
                        "Werner mixing {p} outside [0, 1]"
                    )));
                }
            }
            Self::GeneralProductMix { r, .. } => {
                if !in_unit(r) {
                    return Err(Error::InvalidParameter(format!(
                        "product mixing {r} outside [0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Weight on the `{|01⟩, |10⟩}` block, `y = p1 + p2`.
    pub fn odd_weight(&self) -> Option<f64> {
        match self {
            Self::DiagonalSeparable { p } => Some(p[1] + p[2]),
            _ => None,
        }
    }

    /// `z = p0 + p3 = 1 − y`.
    pub fn even_weight(&self) -> Option<f64> {
        match self {
            Self::DiagonalSeparable { p } => Some(p[0] + p[3]),
            _ => None,
        }
    }

    /// Whether the state is a single pure product `|ωγ⟩⟨ωγ|`.
    pub fn is_pure_product(&self) -> bool {
        matches!(self, Self::GeneralProductMix { r, .. } if *r == 1.0)
    }
}

/// Explicit 4×4 density matrix of a shared resource on `A' ⊗ B`.
pub fn build_shared(s: &SharedState) -> Result<DensityMatrix> {
    s.validate()?;
    let mat = match *s {
        SharedState::DiagonalSeparable { p } => CMatrix::from_real_diagonal(&p),
        SharedState::Werner { p, bell } => {
            let proj = CMatrix::projector(&bell_state(bell));
            let mut m = CMatrix::identity(4).scale_re((1.0 - p) / 4.0);
            m.add_assign_scaled(&proj, c(p, 0.0));
            m
        }
        SharedState::GeneralProductMix { r, omega, gamma } => {
            let wg = tensor(&omega.ket(), &gamma.ket());
            let wg_bar = tensor(&omega.orthogonal_ket(), &gamma.orthogonal_ket());
            let mut m = CMatrix::projector(&wg).scale_re(r);
            m.add_assign_scaled(&CMatrix::projector(&wg_bar), c(1.0 - r, 0.0));
            m
        }
    };
    DensityMatrix::new(mat, vec![2, 2])
}

/// l1-norm coherence in the computational basis: `Σ_{i≠j} |ρ_ij|`.
pub fn coherence_l1(rho: &DensityMatrix) -> f64 {
    let n = rho.dim();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += rho.get(i, j).norm();
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bell_definitions() {
        let s = FRAC_1_SQRT_2;
        let psi_m = bell_state(BellLabel::PsiMinus);
        assert_eq!(psi_m.as_slice()[1], c(s, 0.0));
        assert_eq!(psi_m.as_slice()[2], c(-s, 0.0));
        let phi_p = bell_state(BellLabel::PhiPlus);
        assert_eq!(phi_p.as_slice()[0], c(s, 0.0));
        assert_eq!(phi_p.as_slice()[3], c(s, 0.0));
        for a in BellLabel::ALL {
            for b in BellLabel::ALL {
                let ip = CMatrix::inner(&bell_state(a), &bell_state(b)).norm();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn shared_state_examples() {
        let d = build_shared(&SharedState::diagonal([1.0, 0.0, 0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(d.matrix(), &CMatrix::projector(&CMatrix::basis_ket(4, 0)));

        let w1 = build_shared(&SharedState::werner(1.0, BellLabel::PsiMinus).unwrap()).unwrap();
        let singlet = CMatrix::projector(&bell_state(BellLabel::PsiMinus));
        assert!(w1.matrix().approx_eq(&singlet, 1e-15));

        // separability boundary: p = 1/3 has smallest eigenvalue 0 and the
        // singlet weight p + (1-p)/4 = 1/2
        let w3 =
            build_shared(&SharedState::werner(1.0 / 3.0, BellLabel::PsiMinus).unwrap()).unwrap();
        let ev = w3.matrix().hermitian_eigenvalues();
        assert!((ev[0] - 1.0 / 6.0).abs() < 1e-14);
        assert!((ev[3] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn invalid_shared_states_rejected() {
        assert!(SharedState::diagonal([0.5, 0.5, 0.5, -0.5]).is_err());
        assert!(SharedState::diagonal([0.5, 0.2, 0.2, 0.2]).is_err());
        assert!(SharedState::werner(1.2, BellLabel::PsiMinus).is_err());
        let z = PureQubit::zero();
        assert!(SharedState::product_mix(-0.1, z, z).is_err());
        // raw enum bypassing the constructor is still caught by build_shared
        assert!(build_shared(&SharedState::Werner {
            p: -0.5,
            bell: BellLabel::PhiPlus
        })
        .is_err());
    }

    #[test]
    fn derived_weights() {
        let s = SharedState::diagonal([0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!((s.odd_weight().unwrap() - 0.5).abs() < 1e-15);
        assert!((s.even_weight().unwrap() - 0.5).abs() < 1e-15);
        assert!(SharedState::werner(0.5, BellLabel::PsiMinus)
            .unwrap()
            .odd_weight()
            .is_none());
    }

    #[test]
    fn product_mix_in_computational_basis_is_diagonal() {
        let z = PureQubit::zero();
        for &r in &[0.0, 0.3, 1.0] {
            let gen = build_shared(&SharedState::product_mix(r, z, z).unwrap()).unwrap();
            let diag =
                build_shared(&SharedState::diagonal([r, 0.0, 0.0, 1.0 - r]).unwrap()).unwrap();
            assert!(gen.matrix().approx_eq(diag.matrix(), 1e-15));
        }
    }

    #[test]
    fn orthogonal_partner_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let q = PureQubit::random(&mut rng);
            let ip = CMatrix::inner(&q.ket(), &q.orthogonal_ket()).norm();
            assert!(ip < 1e-15);
            assert!(q.frame().is_unitary(1e-14));
        }
    }

    #[test]
    fn pure_qubit_validation_and_wrapping() {
        assert!(PureQubit::new(1.1, 0.0).is_err());
        assert!(PureQubit::new(0.5, f64::NAN).is_err());
        let q = PureQubit::new(0.5, -0.5).unwrap();
        assert!((q.eta() - (TAU - 0.5)).abs() < 1e-15);
        let p = PureQubit::from_polar(PI / 3.0, 0.0).unwrap();
        assert!((p.polar() - PI / 3.0).abs() < 1e-12);
        assert!(PureQubit::from_polar(4.0, 0.0).is_err());
    }

    #[test]
    fn control_interference_and_coherence() {
        let ctl = ControlSpec::new(1.0, 2.0).unwrap();
        assert!((ctl.interference() - 1.0f64.sin() * 2.0f64.cos()).abs() < 1e-15);
        assert!((ctl.coherence() - 1.0f64.sin()).abs() < 1e-15);
        let rho = ctl.density();
        assert!((coherence_l1(&rho) - 1.0f64.sin()).abs() < 1e-15);
        assert!(coherence_l1(&ctl.dephased_density()) == 0.0);

        assert!(ControlSpec::new(2.0, 0.0).is_err());
        assert!(ControlSpec::new(1.0, 4.0).is_err());
        assert!(ControlSpec::with_full_azimuth(1.0, 3.0 * FRAC_PI_2).is_ok());

        for &x in &[-1.0, -0.3, 0.0, 0.5, 1.0] {
            let c = ControlSpec::from_interference(x).unwrap();
            assert!((c.interference() - x).abs() < 1e-15);
        }
        let k = ControlSpec::from_coherence(0.4, 5.0).unwrap();
        assert!((k.coherence() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn coherence_examples() {
        let zero = PureQubit::zero().density();
        assert_eq!(coherence_l1(&zero), 0.0);
        let plus = PureQubit::new(FRAC_1_SQRT_2, 0.0).unwrap().density();
        assert!((coherence_l1(&plus) - 1.0).abs() < 1e-15);
    }
}
