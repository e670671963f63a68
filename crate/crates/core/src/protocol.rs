//! End-to-end protocol runner: prepare `χ ⊗ φ ⊗ shared`, apply the superposed
//! channel, rotate and measure the control, and report Bob's two branches.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::channels::{
    general_product_frame, general_product_kraus, generalized_depolarizing_probs, kraus_k, kraus_l,
    path_superposition, switch_kraus, ControlUnitary, KrausSet,
};
use crate::error::{Error, Result};
use crate::qcore::{
    fidelity_to_pure, lift_operator, ops, partial_trace, partial_trace_matrix,
    project_and_normalize, tensor, CMatrix, DensityMatrix, C64,
};
use crate::states::{build_shared, ControlSpec, PureQubit, SharedState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelKind {
    /// Superposed paths of the `ψ⁻`-anchored teleportation channel.
    PathK,
    /// Superposed paths of the `φ⁻`-anchored teleportation channel.
    PathL,
    /// Quantum switch of the depolarizing reduction of a pure product resource.
    SwitchDephase,
    /// Superposed paths of the channel adapted to `r|ωγ⟩⟨ωγ| + (1−r)|ω̄γ̄⟩⟨ω̄γ̄|`.
    GeneralProduct,
}

impl ChannelKind {
    pub const ALL: [ChannelKind; 4] = [
        ChannelKind::PathK,
        ChannelKind::PathL,
        ChannelKind::SwitchDephase,
        ChannelKind::GeneralProduct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::PathK => "path-k",
            Self::PathL => "path-l",
            Self::SwitchDephase => "switch-dephase",
            Self::GeneralProduct => "general-product",
        }
    }
}

/// Whether the control keeps its off-diagonal terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlMode {
    #[default]
    Coherent,
    /// Computational-basis dephased control, `|α|²|0⟩⟨0| + |β|²|1⟩⟨1|`.
    Dephased,
}

/// Outcome label of the control measurement: `Plus` is `|0⟩`, `Minus` is `|1⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub const ALL: [Branch; 2] = [Branch::Plus, Branch::Minus];

    pub fn index(self) -> usize {
        match self {
            Self::Plus => 0,
            Self::Minus => 1,
        }
    }

    /// `+1` or `−1`, the sign attached to `X` in the branch formulas.
    pub fn sign(self) -> f64 {
        match self {
            Self::Plus => 1.0,
            Self::Minus => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Plus => "plus",
            Self::Minus => "minus",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub channel: ChannelKind,
    pub shared: SharedState,
    pub input: PureQubit,
    pub control: ControlSpec,
    pub control_mode: ControlMode,
    pub unitary: ControlUnitary,
}

impl ProtocolConfig {
    /// Coherent control, Hadamard before measurement, input `|0⟩`.
    pub fn new(channel: ChannelKind, shared: SharedState, control: ControlSpec) -> Self {
        Self {
            channel,
            shared,
            input: PureQubit::zero(),
            control,
            control_mode: ControlMode::Coherent,
            unitary: ControlUnitary::Hadamard,
        }
    }

    pub fn with_input(mut self, input: PureQubit) -> Self {
        self.input = input;
        self
    }

    pub fn with_unitary(mut self, unitary: ControlUnitary) -> Self {
        self.unitary = unitary;
        self
    }

    pub fn with_control_mode(mut self, mode: ControlMode) -> Self {
        self.control_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.shared.validate()?;
        self.unitary.validate()?;
        match self.channel {
            ChannelKind::GeneralProduct
                if !matches!(self.shared, SharedState::GeneralProductMix { .. }) =>
            {
                Err(Error::InvalidConfig(
                    "general-product channel needs a product-mixture shared state".into(),
                ))
            }
            ChannelKind::SwitchDephase if !self.shared.is_pure_product() => {
                Err(Error::InvalidConfig(
                    "switch-dephase needs a pure product shared state (r = 1)".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    fn control_density(&self) -> DensityMatrix {
        match self.control_mode {
            ControlMode::Coherent => self.control.density(),
            ControlMode::Dephased => self.control.dephased_density(),
        }
    }

    /// Interference term seen by each branch after the control gate:
    /// `x_k = 4 Re(U_k0 conj(U_k1) ρ_01)`. Both supported gates have
    /// `|U_kj|² = ½`, so `p_k = (2 + x_k w)/4` on diagonal resources.
    pub fn effective_interference(&self) -> [f64; 2] {
        let rho01 = self.control_density().get(0, 1);
        let u = self.unitary.matrix();
        std::array::from_fn(|k| 4.0 * (u.get(k, 0) * u.get(k, 1).conj() * rho01).re)
    }
}

/// One post-selected branch. Impossible branches carry no state and no
/// fidelity.
#[derive(Clone, Debug)]
pub struct BranchOutcome {
    pub branch: Branch,
    pub bob_state: Option<DensityMatrix>,
    pub probability: f64,
    pub fidelity: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub plus: BranchOutcome,
    pub minus: BranchOutcome,
}

impl RunOutcome {
    pub fn branch(&self, b: Branch) -> &BranchOutcome {
        match b {
            Branch::Plus => &self.plus,
            Branch::Minus => &self.minus,
        }
    }

    pub fn probability_sum(&self) -> f64 {
        self.plus.probability + self.minus.probability
    }
}

fn cached_path(kind: ChannelKind) -> &'static KrausSet {
    static K: OnceLock<KrausSet> = OnceLock::new();
    static L: OnceLock<KrausSet> = OnceLock::new();
    match kind {
        ChannelKind::PathK => K.get_or_init(|| path_superposition(&kraus_k()).unwrap()),
        ChannelKind::PathL => L.get_or_init(|| path_superposition(&kraus_l()).unwrap()),
        _ => unreachable!("only the fixed path channels are cached"),
    }
}

/// Kraus set on the target (without control) used for the standard
/// protocol and, in superposed form, for the coherent one.
fn base_channel(cfg_channel: ChannelKind, shared: &SharedState) -> Result<KrausSet> {
    match (cfg_channel, shared) {
        (ChannelKind::PathK, _) => Ok(kraus_k()),
        (ChannelKind::PathL, _) => Ok(kraus_l()),
        (ChannelKind::GeneralProduct, SharedState::GeneralProductMix { omega, gamma, .. }) => {
            Ok(general_product_kraus(omega, gamma))
        }
        (ChannelKind::SwitchDephase, _) => {
            Ok(generalized_depolarizing_probs(&build_shared(shared)?)?.kraus())
        }
        _ => Err(Error::InvalidConfig(format!(
            "{} channel is incompatible with {shared:?}",
            cfg_channel.name()
        ))),
    }
}

/// Bob's local correction, if the channel needs one.
fn bob_correction(cfg: &ProtocolConfig) -> Option<CMatrix> {
    match (cfg.channel, &cfg.shared) {
        (ChannelKind::GeneralProduct, SharedState::GeneralProductMix { gamma, .. }) => {
            Some(general_product_frame(gamma).adjoint())
        }
        _ => None,
    }
}

/// Joint state after the channel, before the control gate, and the index
/// of the subsystem Bob keeps.
pub fn channel_output(cfg: &ProtocolConfig) -> Result<(DensityMatrix, usize)> {
    cfg.validate()?;
    let chi = cfg.control_density();
    let phi = cfg.input.density();
    match cfg.channel {
        ChannelKind::SwitchDephase => {
            let e = base_channel(cfg.channel, &cfg.shared)?;
            let s = switch_kraus(&e, &e)?;
            Ok((s.apply(&chi.tensor(&phi))?, 1))
        }
        ChannelKind::PathK | ChannelKind::PathL => {
            let joint = chi.tensor(&phi).tensor(&build_shared(&cfg.shared)?);
            Ok((cached_path(cfg.channel).apply(&joint)?, 3))
        }
        ChannelKind::GeneralProduct => {
            let set = path_superposition(&base_channel(cfg.channel, &cfg.shared)?)?;
            let joint = chi.tensor(&phi).tensor(&build_shared(&cfg.shared)?);
            Ok((set.apply(&joint)?, 3))
        }
    }
}

fn measured_joint(cfg: &ProtocolConfig) -> Result<(DensityMatrix, usize)> {
    let (out, bob) = channel_output(cfg)?;
    let u = lift_operator(&cfg.unitary.matrix(), 0, out.dims())?;
    Ok((out.evolve(&u)?, bob))
}

fn control_projector(b: Branch) -> CMatrix {
    CMatrix::projector(&CMatrix::basis_ket(2, b.index()))
}

/// Run the full protocol and return both branches.
pub fn run(cfg: &ProtocolConfig) -> Result<RunOutcome> {
    let (joint, bob) = measured_joint(cfg)?;
    let correction = bob_correction(cfg);
    let outcome = |b: Branch| -> Result<BranchOutcome> {
        let proj = project_and_normalize(&joint, 0, &control_projector(b))?;
        let Some(state) = proj.state else {
            return Ok(BranchOutcome {
                branch: b,
                bob_state: None,
                probability: 0.0,
                fidelity: None,
            });
        };
        let mut bob_state = partial_trace(&state, &[bob])?;
        if let Some(c) = &correction {
            bob_state = bob_state.evolve(c)?;
        }
        let fidelity = fidelity_to_pure(&bob_state, &cfg.input)?;
        Ok(BranchOutcome {
            branch: b,
            bob_state: Some(bob_state),
            probability: proj.probability,
            fidelity: Some(fidelity),
        })
    };
    Ok(RunOutcome {
        plus: outcome(Branch::Plus)?,
        minus: outcome(Branch::Minus)?,
    })
}

#[derive(Clone, Debug)]
pub struct StandardOutcome {
    pub bob_state: DensityMatrix,
    pub fidelity: f64,
}

/// The same resource and base channel with no control at all.
pub fn run_standard(cfg: &ProtocolConfig) -> Result<StandardOutcome> {
    cfg.validate()?;
    let base = base_channel(cfg.channel, &cfg.shared)?;
    let phi = cfg.input.density();
    let mut bob_state = match cfg.channel {
        ChannelKind::SwitchDephase => base.apply(&phi)?,
        _ => {
            let out = base.apply(&phi.tensor(&build_shared(&cfg.shared)?))?;
            partial_trace(&out, &[2])?
        }
    };
    if let Some(c) = bob_correction(cfg) {
        bob_state = bob_state.evolve(&c)?;
    }
    let fidelity = fidelity_to_pure(&bob_state, &cfg.input)?;
    Ok(StandardOutcome {
        bob_state,
        fidelity,
    })
}

/// Deviation of a simulated run from the closed-form branch states
/// `ρ_B = (2w ρ_d + 2(1−w) σx ρ_d σx + x w σz φ σz)/(2 + x w)` and
/// probabilities `p = (2 + x w)/4`, with `w = y` for K and `w = 1 − y` for L.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosedFormReport {
    pub weight: f64,
    pub interference: [f64; 2],
    pub probability_closed: [f64; 2],
    pub probability_simulated: [f64; 2],
    pub state_deviation: [f64; 2],
    pub probability_deviation: [f64; 2],
}

impl ClosedFormReport {
    pub fn max_deviation(&self) -> f64 {
        self.state_deviation
            .iter()
            .chain(&self.probability_deviation)
            .fold(0.0, |a, &b| a.max(b))
    }
}

/// Closed-form Bob state for one branch with effective interference `x`.
pub fn closed_form_branch(input: &PureQubit, weight: f64, x: f64) -> (CMatrix, f64) {
    let phi = input.density().into_matrix();
    let flipped = phi.conjugate_by(&ops::sigma_z());
    let rho_d = (&phi + &flipped).scale_re(0.5);
    let mut num = rho_d.scale_re(2.0 * weight);
    num.add_assign_scaled(
        &rho_d.conjugate_by(&ops::sigma_x()),
        C64::new(2.0 * (1.0 - weight), 0.0),
    );
    num.add_assign_scaled(&flipped, C64::new(x * weight, 0.0));
    let denom = 2.0 + x * weight;
    (num.scale_re(1.0 / denom), denom / 4.0)
}

pub fn branch_closed_form_check(cfg: &ProtocolConfig) -> Result<ClosedFormReport> {
    let weight = match (cfg.channel, cfg.shared) {
        (ChannelKind::PathK, SharedState::DiagonalSeparable { p }) => p[1] + p[2],
        (ChannelKind::PathL, SharedState::DiagonalSeparable { p }) => p[0] + p[3],
        _ => {
            return Err(Error::InvalidConfig(
                "closed forms exist for path-k/path-l over diagonal resources only".into(),
            ))
        }
    };
    let sim = run(cfg)?;
    let x = cfg.effective_interference();
    let mut report = ClosedFormReport {
        weight,
        interference: x,
        probability_closed: [0.0; 2],
        probability_simulated: [0.0; 2],
        state_deviation: [0.0; 2],
        probability_deviation: [0.0; 2],
    };
    for b in Branch::ALL {
        let k = b.index();
        let (state, p) = closed_form_branch(&cfg.input, weight, x[k]);
        let out = sim.branch(b);
        report.probability_closed[k] = p;
        report.probability_simulated[k] = out.probability;
        report.probability_deviation[k] = (p - out.probability).abs();
        report.state_deviation[k] = match &out.bob_state {
            Some(s) => s.matrix().max_abs_diff(&state),
            None if p < 1e-10 => 0.0,
            None => f64::INFINITY,
        };
    }
    Ok(report)
}

/// Probability and fidelity of one branch for one input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchSample {
    pub probability: f64,
    pub fidelity: Option<f64>,
}

/// The protocol as a linear map on the input state.
///
/// Every step up to post-selection is linear in `|φ⟩⟨φ|`, so the
/// unnormalized branch outputs for `|0⟩, |1⟩, |+⟩, |+i⟩` determine the
/// output for any input. The `input` field of the compiled config is ignored.
#[derive(Clone, Debug)]
pub struct ProtocolMap {
    images: [[CMatrix; 4]; 2],
}

/// Below this a branch is reported as impossible.
const BRANCH_FLOOR: f64 = 1e-10;

impl ProtocolMap {
    pub fn compile(cfg: &ProtocolConfig) -> Result<Self> {
        let probes = [
            PureQubit::zero(),
            PureQubit::new(0.0, 0.0)?,
            PureQubit::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)?,
            PureQubit::new(std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_PI_2)?,
        ];
        let correction = bob_correction(cfg);
        let mut images: [[CMatrix; 4]; 2] =
            std::array::from_fn(|_| std::array::from_fn(|_| CMatrix::zeros(2, 2)));
        for (j, probe) in probes.iter().enumerate() {
            let (joint, bob) = measured_joint(&cfg.with_input(*probe))?;
            for b in Branch::ALL {
                let lifted = lift_operator(&control_projector(b), 0, joint.dims())?;
                let projected = joint.matrix().conjugate_by(&lifted);
                let mut block = partial_trace_matrix(&projected, joint.dims(), &[bob]);
                if let Some(c) = &correction {
                    block = block.conjugate_by(c);
                }
                images[b.index()][j] = block;
            }
        }
        Ok(Self { images })
    }

    /// Unnormalized Bob block `p·ρ_B` for `input`.
    pub fn unnormalized(&self, input: &PureQubit, branch: Branch) -> CMatrix {
        let [x, y, z] = bloch_vector(input);
        let c = [
            0.5 - x / 2.0 - y / 2.0 + z / 2.0,
            0.5 - x / 2.0 - y / 2.0 - z / 2.0,
            x,
            y,
        ];
        let mut out = CMatrix::zeros(2, 2);
        for (img, &w) in self.images[branch.index()].iter().zip(&c) {
            out.add_assign_scaled(img, C64::new(w, 0.0));
        }
        out
    }

    pub fn evaluate(&self, input: &PureQubit, branch: Branch) -> BranchSample {
        let block = self.unnormalized(input, branch);
        let p = block.trace().re;
        if p < BRANCH_FLOOR {
            return BranchSample {
                probability: 0.0,
                fidelity: None,
            };
        }
        let [a0, a1] = input.amplitudes();
        let overlap = a0.conj() * (block.get(0, 0) * a0 + block.get(0, 1) * a1)
            + a1.conj() * (block.get(1, 0) * a0 + block.get(1, 1) * a1);
        BranchSample {
            probability: p,
            fidelity: Some((overlap.norm() / p).min(1.0)),
        }
    }
}

/// `(⟨σx⟩, ⟨σy⟩, ⟨σz⟩)` of a pure qubit.
pub fn bloch_vector(q: &PureQubit) -> [f64; 3] {
    let a = q.a();
    let s = 2.0 * a * (1.0 - a * a).max(0.0).sqrt();
    [s * q.eta().cos(), s * q.eta().sin(), 2.0 * a * a - 1.0]
}

/// Joint `χ ⊗ ρ_d` expected after the dephasing switch, in `C ⊗ S` order.
pub fn switch_factorized_reference(cfg: &ProtocolConfig) -> CMatrix {
    let phi = cfg.input.density().into_matrix();
    let rho_d = (&phi + &phi.conjugate_by(&ops::sigma_z())).scale_re(0.5);
    tensor(cfg.control_density().matrix(), &rho_d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::BellLabel;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

    fn qubit() -> impl Strategy<Value = PureQubit> {
        (0.0..=1.0f64, 0.0..std::f64::consts::TAU).prop_map(|(a, e)| PureQubit::new(a, e).unwrap())
    }

    fn diag() -> impl Strategy<Value = SharedState> {
        prop::array::uniform4(0.0..1.0f64).prop_filter_map("nonzero", |w| {
            let s: f64 = w.iter().sum();
            (s > 1e-3).then(|| SharedState::diagonal(w.map(|x| x / s)).unwrap())
        })
    }

    fn control() -> impl Strategy<Value = ControlSpec> {
        (0.0..=FRAC_PI_2, 0.0..=PI).prop_map(|(t, p)| ControlSpec::new(t, p).unwrap())
    }

    #[test]
    fn l_channel_perfect_branch_on_even_parity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in [0.0, 0.3, 1.0] {
            let shared = SharedState::even_parity(p).unwrap();
            let cfg = ProtocolConfig::new(
                ChannelKind::PathL,
                shared,
                ControlSpec::from_interference(-1.0).unwrap(),
            )
            .with_input(PureQubit::random(&mut rng));
            let out = run(&cfg).unwrap();
            assert!((out.plus.probability - 0.25).abs() < 1e-12);
            assert!((out.plus.fidelity.unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn singlet_resource_is_perfect_on_both_branches() {
        let shared = SharedState::werner(1.0, BellLabel::PsiMinus).unwrap();
        let cfg = ProtocolConfig::new(
            ChannelKind::PathK,
            shared,
            ControlSpec::new(1.0, 0.7).unwrap(),
        )
        .with_input(PureQubit::new(0.3, 2.0).unwrap());
        let out = run(&cfg).unwrap();
        for b in Branch::ALL {
            assert!((out.branch(b).fidelity.unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn general_product_plus_branch_is_perfect() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let shared = SharedState::product_mix(
                1.0,
                PureQubit::random(&mut rng),
                PureQubit::random(&mut rng),
            )
            .unwrap();
            let cfg = ProtocolConfig::new(
                ChannelKind::GeneralProduct,
                shared,
                ControlSpec::from_interference(-1.0).unwrap(),
            )
            .with_input(PureQubit::random(&mut rng));
            let out = run(&cfg).unwrap();
            assert!((out.plus.probability - 0.25).abs() < 1e-12);
            assert!((out.plus.fidelity.unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn closed_form_matches_example_point() {
        let cfg = ProtocolConfig::new(
            ChannelKind::PathK,
            SharedState::with_odd_weight(0.8).unwrap(),
            ControlSpec::from_interference(0.5).unwrap(),
        )
        .with_input(PureQubit::new(0.4, 1.3).unwrap());
        let r = branch_closed_form_check(&cfg).unwrap();
        assert!(r.max_deviation() < 1e-10, "{r:?}");
    }

    #[test]
    fn closed_form_probabilities_at_x_minus_one() {
        let cfg = ProtocolConfig::new(
            ChannelKind::PathK,
            SharedState::odd_parity(0.3).unwrap(),
            ControlSpec::from_interference(-1.0).unwrap(),
        );
        let r = branch_closed_form_check(&cfg).unwrap();
        assert!((r.probability_simulated[0] - 0.25).abs() < 1e-12);
        assert!((r.probability_simulated[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn no_interference_means_identical_branches() {
        let cfg = ProtocolConfig::new(
            ChannelKind::PathK,
            SharedState::with_odd_weight(0.35).unwrap(),
            ControlSpec::from_interference(0.0).unwrap(),
        )
        .with_input(PureQubit::new(0.9, 0.2).unwrap());
        let out = run(&cfg).unwrap();
        let (p, m) = (out.plus.bob_state.unwrap(), out.minus.bob_state.unwrap());
        assert!(p.matrix().approx_eq(m.matrix(), 1e-12));
    }

    #[test]
    fn closed_form_check_rejects_other_channels() {
        let shared = SharedState::product_mix(1.0, PureQubit::zero(), PureQubit::zero()).unwrap();
        let cfg = ProtocolConfig::new(
            ChannelKind::SwitchDephase,
            shared,
            ControlSpec::from_interference(0.0).unwrap(),
        );
        assert!(branch_closed_form_check(&cfg).is_err());
    }

    #[test]
    fn config_invariants() {
        let c = ControlSpec::from_interference(0.0).unwrap();
        let diag = SharedState::with_odd_weight(0.5).unwrap();
        assert!(matches!(
            run(&ProtocolConfig::new(ChannelKind::GeneralProduct, diag, c)),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            run(&ProtocolConfig::new(ChannelKind::SwitchDephase, diag, c)),
            Err(Error::InvalidConfig(_))
        ));
        let mixed = SharedState::product_mix(0.5, PureQubit::zero(), PureQubit::zero()).unwrap();
        assert!(run(&ProtocolConfig::new(ChannelKind::SwitchDephase, mixed, c)).is_err());
    }

    #[test]
    fn impossible_branch_is_flagged() {
        // |+⟩ control, dephasing switch, Hadamard: all weight lands on |0⟩
        let shared = SharedState::product_mix(1.0, PureQubit::zero(), PureQubit::zero()).unwrap();
        let cfg = ProtocolConfig::new(
            ChannelKind::SwitchDephase,
            shared,
            ControlSpec::from_interference(1.0).unwrap(),
        );
        let out = run(&cfg).unwrap();
        assert!(out.minus.bob_state.is_none());
        assert_eq!(out.minus.probability, 0.0);
        assert!(out.minus.fidelity.is_none());
        assert!((out.plus.probability - 1.0).abs() < 1e-12);
    }

    #[test]
    fn standard_protocol_on_singlet_is_exact() {
        let shared = SharedState::werner(1.0, BellLabel::PsiMinus).unwrap();
        let cfg = ProtocolConfig::new(
            ChannelKind::PathK,
            shared,
            ControlSpec::from_interference(0.0).unwrap(),
        )
        .with_input(PureQubit::new(0.2, 4.0).unwrap());
        assert!((run_standard(&cfg).unwrap().fidelity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn map_reproduces_direct_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let shared = SharedState::werner(0.4, BellLabel::PsiMinus).unwrap();
        let cfg = ProtocolConfig::new(
            ChannelKind::PathK,
            shared,
            ControlSpec::new(1.1, 2.5).unwrap(),
        );
        let map = ProtocolMap::compile(&cfg).unwrap();
        for _ in 0..10 {
            let phi = PureQubit::random(&mut rng);
            let direct = run(&cfg.with_input(phi)).unwrap();
            for b in Branch::ALL {
                let s = map.evaluate(&phi, b);
                let d = direct.branch(b);
                assert!((s.probability - d.probability).abs() < 1e-12);
                assert!((s.fidelity.unwrap() - d.fidelity.unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bloch_vector_of_basis_states() {
        let plus_i = PureQubit::new(FRAC_1_SQRT_2, FRAC_PI_2).unwrap();
        let v = bloch_vector(&plus_i);
        assert!(v[0].abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15 && v[2].abs() < 1e-15);
        assert_eq!(bloch_vector(&PureQubit::zero()), [0.0, 0.0, 1.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn probabilities_sum_to_one(shared in diag(), ctrl in control(), phi in qubit(),
                                    l in any::<bool>()) {
            let ch = if l { ChannelKind::PathL } else { ChannelKind::PathK };
            let out = run(&ProtocolConfig::new(ch, shared, ctrl).with_input(phi)).unwrap();
            prop_assert!((out.probability_sum() - 1.0).abs() < 1e-12);
            for b in Branch::ALL {
                if let Some(s) = &out.branch(b).bob_state {
                    prop_assert!(s.check().is_ok());
                }
            }
        }

        #[test]
        fn simulation_matches_closed_forms(shared in diag(), ctrl in control(), phi in qubit(),
                                           l in any::<bool>(), generic in any::<bool>()) {
            let ch = if l { ChannelKind::PathL } else { ChannelKind::PathK };
            let mut cfg = ProtocolConfig::new(ch, shared, ctrl).with_input(phi);
            if generic {
                cfg = cfg.with_unitary(ControlUnitary::Generic { xi: 0.7, zeta: 2.9 });
            }
            let r = branch_closed_form_check(&cfg).unwrap();
            prop_assert!(r.max_deviation() < 1e-10, "{:?}", r);
        }

        #[test]
        fn dephased_control_gives_standard_fidelity(shared in diag(), ctrl in control(),
                                                    phi in qubit(), l in any::<bool>()) {
            let ch = if l { ChannelKind::PathL } else { ChannelKind::PathK };
            let cfg = ProtocolConfig::new(ch, shared, ctrl)
                .with_input(phi)
                .with_control_mode(ControlMode::Dephased);
            let std = run_standard(&cfg).unwrap().fidelity;
            let out = run(&cfg).unwrap();
            for b in Branch::ALL {
                prop_assert!((out.branch(b).fidelity.unwrap() - std).abs() < 1e-10);
            }
        }

        #[test]
        fn switch_branches_ignore_the_gate(w in qubit(), g in qubit(), ctrl in control(),
                                          phi in qubit(), xi in 0.0..std::f64::consts::TAU, zeta in 0.0..std::f64::consts::TAU) {
            let shared = SharedState::product_mix(1.0, w, g).unwrap();
            let base = ProtocolConfig::new(ChannelKind::SwitchDephase, shared, ctrl).with_input(phi);
            let (joint, _) = channel_output(&base).unwrap();
            prop_assert!(joint.matrix().approx_eq(&switch_factorized_reference(&base), 1e-10));
            let reference = run(&base).unwrap();
            let generic = run(&base.with_unitary(ControlUnitary::Generic { xi, zeta })).unwrap();
            let states: Vec<_> = [&reference, &generic]
                .iter()
                .flat_map(|o| [&o.plus.bob_state, &o.minus.bob_state])
                .flatten()
                .collect();
            for s in &states {
                prop_assert!(s.matrix().approx_eq(states[0].matrix(), 1e-10));
            }
        }

        #[test]
        fn general_product_fidelity_is_frame_invariant(r in 0.0..=1.0f64, w in qubit(), g in qubit(),
                                                       ctrl in control(), phi in qubit()) {
            let gp = ProtocolConfig::new(
                ChannelKind::GeneralProduct,
                SharedState::product_mix(r, w, g).unwrap(),
                ctrl,
            )
            .with_input(phi);
            let aligned = ProtocolConfig::new(
                ChannelKind::PathL,
                SharedState::even_parity(r).unwrap(),
                ctrl,
            )
            .with_input(phi);
            let (a, b) = (run(&gp).unwrap(), run(&aligned).unwrap());
            for br in Branch::ALL {
                prop_assert!((a.branch(br).probability - b.branch(br).probability).abs() < 1e-10);
                if let (Some(x), Some(y)) = (a.branch(br).fidelity, b.branch(br).fidelity) {
                    prop_assert!((x - y).abs() < 1e-10);
                }
            }
        }
    }
}
