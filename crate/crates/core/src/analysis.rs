//! Closed-form average fidelities, averaging oracles (quadrature and Monte
//! Carlo), advantage classification and the control-coherence analysis.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channels::ControlUnitary;
use crate::error::{Error, Result};
use crate::protocol::{run, Branch, ChannelKind, ProtocolConfig, ProtocolMap};
use crate::states::{ControlSpec, PureQubit, SharedState};

/// Best average fidelity reachable with classical resources only.
pub const CLASSICAL_BOUND: f64 = 2.0 / 3.0;

/// Margins this close to zero count as zero when classifying.
const MARGIN_TOL: f64 = 1e-12;

/// A point of the `(X, y)` plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    x: f64,
    y: f64,
}

impl SweepPoint {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::InvalidParameter(format!(
                "sweep point (X={x}, y={y}) outside [-1,1]×[0,1]"
            )));
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    /// Odd-parity weight `p1 + p2`.
    pub fn y(&self) -> f64 {
        self.y
    }

    /// Even-parity weight `1 − y`.
    pub fn z(&self) -> f64 {
        1.0 - self.y
    }
}

/// `(2w ± Xw + 2) / (3(2 ± Xw))`, the input-averaged branch fidelity of a
/// path-superposed channel whose resource has weight `w` on the matching
/// parity block.
pub fn avg_fidelity_path(weight: f64, x: f64, branch: Branch) -> f64 {
    let xw = branch.sign() * x * weight;
    (2.0 * weight + xw + 2.0) / (3.0 * (2.0 + xw))
}

pub fn avg_fidelity_k(pt: SweepPoint, branch: Branch) -> f64 {
    avg_fidelity_path(pt.y(), pt.x(), branch)
}

pub fn avg_fidelity_l(pt: SweepPoint, branch: Branch) -> f64 {
    avg_fidelity_path(pt.z(), pt.x(), branch)
}

/// `(6(1+p) ± X(1−p)) / (12 ± 3X(1−p))` for a singlet-type Werner resource.
pub fn avg_fidelity_werner(p: f64, x: f64, branch: Branch) -> f64 {
    let t = branch.sign() * x * (1.0 - p);
    (6.0 * (1.0 + p) + t) / (12.0 + 3.0 * t)
}

/// `(4 − C)/(6 − 3C)`: best branch fidelity on the singlet-parity resource
/// once the control gate is matched to the control phase.
pub fn avg_fidelity_coherence_opt(c: f64) -> f64 {
    (4.0 - c) / (6.0 - 3.0 * c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdvantageProtocol {
    K,
    L,
    None,
}

impl AdvantageProtocol {
    pub fn name(self) -> &'static str {
        match self {
            Self::K => "K",
            Self::L => "L",
            Self::None => "none",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvantageVerdict {
    pub verdict: AdvantageProtocol,
    /// Best average fidelity over both protocols and branches, minus 2/3.
    pub margin: f64,
    pub branch: Option<Branch>,
}

/// Which of the two path protocols, if any, beats the classical bound.
pub fn classify_advantage(pt: SweepPoint) -> AdvantageVerdict {
    let mut best = (AdvantageProtocol::None, f64::NEG_INFINITY, Branch::Plus);
    for (proto, f) in [
        (
            AdvantageProtocol::K,
            avg_fidelity_k as fn(SweepPoint, Branch) -> f64,
        ),
        (AdvantageProtocol::L, avg_fidelity_l),
    ] {
        for b in Branch::ALL {
            let v = f(pt, b);
            if v > best.1 {
                best = (proto, v, b);
            }
        }
    }
    let mut margin = best.1 - CLASSICAL_BOUND;
    if margin.abs() < MARGIN_TOL {
        margin = 0.0;
    }
    if margin > 0.0 {
        AdvantageVerdict {
            verdict: best.0,
            margin,
            branch: Some(best.2),
        }
    } else {
        AdvantageVerdict {
            verdict: AdvantageProtocol::None,
            margin,
            branch: None,
        }
    }
}

/// Gauss–Legendre rule on `[−1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on `P_n` from Chebyshev starting points.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "quadrature order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, t);
                dp = d;
                let step = p / d;
                t -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, t);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - t * t) * dp * dp);
            nodes[i] = t;
            nodes[n - 1 - i] = -t;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }
}

/// `(P_n(t), P_n'(t))` by the three-term recurrence.
fn legendre(n: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let prev = if n == 0 { 0.0 } else { p0 };
    let d = n as f64 * (t * p - prev) / (t * t - 1.0);
    (p, d)
}

pub const QUADRATURE_ORDER: usize = 64;

fn default_rule() -> &'static GaussLegendre {
    static RULE: std::sync::OnceLock<GaussLegendre> = std::sync::OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(QUADRATURE_ORDER))
}

/// `½ ∫₀^π F(n) sin n dn`, integrated in `t = cos n`.
pub fn quadrature_avg_fidelity(fid: impl Fn(f64) -> f64) -> f64 {
    0.5 * default_rule().integrate(|t| fid(t.clamp(-1.0, 1.0).acos()))
}

/// Weighted quadrature average that skips nodes where `fid` is undefined.
/// `None` when the branch is impossible at every node.
fn quadrature_partial(fid: impl Fn(f64) -> Result<Option<f64>>) -> Result<Option<f64>> {
    let rule = default_rule();
    let (mut acc, mut norm) = (0.0, 0.0);
    for (&t, &w) in rule.nodes().iter().zip(rule.weights()) {
        if let Some(f) = fid(t.clamp(-1.0, 1.0).acos())? {
            acc += w * f;
            norm += w;
        }
    }
    Ok((norm > 0.0).then(|| acc / norm))
}

/// Input-averaged branch fidelity from full simulation: quadrature over
/// polar angle with inputs at `η = 0`.
pub fn simulated_avg_fidelity(cfg: &ProtocolConfig, branch: Branch) -> Result<Option<f64>> {
    quadrature_partial(|n| {
        let out = run(&cfg.with_input(PureQubit::from_polar(n, 0.0)?))?;
        Ok(out.branch(branch).fidelity)
    })
}

/// Both branch averages from one pass over the quadrature nodes.
pub fn simulated_avg_fidelities(cfg: &ProtocolConfig) -> Result<[Option<f64>; 2]> {
    let rule = default_rule();
    let mut acc = [(0.0, 0.0); 2];
    for (&t, &w) in rule.nodes().iter().zip(rule.weights()) {
        let n = t.clamp(-1.0, 1.0).acos();
        let out = run(&cfg.with_input(PureQubit::from_polar(n, 0.0)?))?;
        for b in Branch::ALL {
            if let Some(f) = out.branch(b).fidelity {
                acc[b.index()].0 += w * f;
                acc[b.index()].1 += w;
            }
        }
    }
    Ok(acc.map(|(a, n)| (n > 0.0).then(|| a / n)))
}

/// Same average as [`simulated_avg_fidelity`], evaluated through a
/// compiled [`ProtocolMap`].
pub fn map_avg_fidelity(map: &ProtocolMap, branch: Branch) -> Result<Option<f64>> {
    quadrature_partial(|n| {
        Ok(map
            .evaluate(&PureQubit::from_polar(n, 0.0)?, branch)
            .fidelity)
    })
}

/// Largest spread of a branch fidelity over `samples` azimuths at fixed `n`.
pub fn eta_variation(cfg: &ProtocolConfig, branch: Branch, n: f64, samples: usize) -> Result<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..samples {
        let eta = std::f64::consts::TAU * i as f64 / samples as f64;
        if let Some(f) = run(&cfg.with_input(PureQubit::from_polar(n, eta)?))?
            .branch(branch)
            .fidelity
        {
            lo = lo.min(f);
            hi = hi.max(f);
        }
    }
    Ok(if hi >= lo { hi - lo } else { 0.0 })
}

/// SplitMix64 finalizer; derives independent stream seeds from one seed.
pub fn sub_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Draws for which the branch was possible.
    pub used: usize,
}

pub const MIN_MC_SAMPLES: usize = 100;

/// Monte Carlo estimate of an input-averaged branch fidelity with
/// Haar-random inputs (`cos n` and `η` uniform).
pub fn mc_avg_fidelity(
    cfg: &ProtocolConfig,
    branch: Branch,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    let map = ProtocolMap::compile(cfg)?;
    mc_with_map(&map, branch, samples, seed)
}

pub fn mc_with_map(
    map: &ProtocolMap,
    branch: Branch,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if samples < MIN_MC_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "Monte Carlo needs at least {MIN_MC_SAMPLES} samples, got {samples}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum_sq, mut used) = (0.0, 0.0, 0usize);
    for _ in 0..samples {
        let phi = PureQubit::random(&mut rng);
        if let Some(f) = map.evaluate(&phi, branch).fidelity {
            sum += f;
            sum_sq += f * f;
            used += 1;
        }
    }
    if used < 2 {
        return Err(Error::InvalidParameter(
            "branch is impossible for almost every input".into(),
        ));
    }
    let n = used as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(McEstimate {
        mean,
        std_error: (var / n).sqrt(),
        used,
    })
}

/// Control gate used in the coherence analysis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoherenceGate {
    Hadamard,
    /// `U_{ξ,ζ}` with `ξ + ζ = φc`.
    Matched,
}

impl CoherenceGate {
    pub fn unitary(self, phi_c: f64) -> Result<ControlUnitary> {
        match self {
            Self::Hadamard => Ok(ControlUnitary::Hadamard),
            Self::Matched => ControlUnitary::matched(phi_c),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherencePoint {
    pub coherence: f64,
    pub phi_c: f64,
    pub closed_plus: f64,
    pub closed_minus: f64,
    pub sim_plus: f64,
    pub sim_minus: f64,
    /// `max(sim_plus, sim_minus)`.
    pub f_max: f64,
    /// `f_max − 2/3`.
    pub f_adv: f64,
}

/// Resource with all weight on the odd-parity block.
pub fn singlet_parity_resource() -> SharedState {
    SharedState::with_odd_weight(1.0).expect("valid weights")
}

/// Branch fidelities over `C(χ) × φc` on the odd-parity resource with the
/// K-path channel.
pub fn coherence_advantage_surface(
    coherences: &[f64],
    phis: &[f64],
    gate: CoherenceGate,
) -> Result<Vec<CoherencePoint>> {
    let mut out = Vec::with_capacity(coherences.len() * phis.len());
    for &c in coherences {
        for &phi in phis {
            out.push(coherence_point(c, phi, gate)?);
        }
    }
    Ok(out)
}

pub fn coherence_point(c: f64, phi_c: f64, gate: CoherenceGate) -> Result<CoherencePoint> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::InvalidParameter(format!(
            "coherence {c} outside [0, 1]"
        )));
    }
    let control = ControlSpec::with_full_azimuth(c.asin(), phi_c)?;
    let cfg = ProtocolConfig::new(ChannelKind::PathK, singlet_parity_resource(), control)
        .with_unitary(gate.unitary(phi_c)?);
    let x = cfg.effective_interference();
    let map = ProtocolMap::compile(&cfg)?;
    let sim_plus = map_avg_fidelity(&map, Branch::Plus)?.unwrap_or(f64::NAN);
    let sim_minus = map_avg_fidelity(&map, Branch::Minus)?.unwrap_or(f64::NAN);
    let f_max = sim_plus.max(sim_minus);
    Ok(CoherencePoint {
        coherence: c,
        phi_c,
        closed_plus: avg_fidelity_path(1.0, x[0], Branch::Plus),
        closed_minus: avg_fidelity_path(1.0, x[1], Branch::Plus),
        sim_plus,
        sim_minus,
        f_max,
        f_adv: f_max - CLASSICAL_BOUND,
    })
}

/// Root of `f` on `[lo, hi]` by bisection, assuming a sign change.
pub fn bisect(mut lo: f64, mut hi: f64, tol: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let mut f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::InvalidParameter(format!(
            "no sign change on [{lo}, {hi}]"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
