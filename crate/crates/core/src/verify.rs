//! The acceptance suite: nine numbered criteria, each made of one or more
//! checks with a measured value and a tolerance.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{
    avg_fidelity_coherence_opt, avg_fidelity_path, bisect, coherence_point, mc_with_map,
    simulated_avg_fidelities, simulated_avg_fidelity, sub_seed, CoherenceGate, CLASSICAL_BOUND,
};
use crate::channels::{
    general_product_kraus, generalized_depolarizing_probs, kraus_k, kraus_l, path_superposition,
    switch_kraus, KrausSet,
};
use crate::error::Result;
use crate::protocol::{
    channel_output, run, run_standard, switch_factorized_reference, Branch, ChannelKind,
    ControlMode, ProtocolConfig, ProtocolMap,
};
use crate::qcore::DensityMatrix;
use crate::states::{build_shared, BellLabel, ControlSpec, PureQubit, SharedState};

pub const SUITE_VERSION: &str = "1.0.0";

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Monte Carlo draws per trial.
    pub samples: usize,
    /// Monte Carlo trials per configuration.
    pub trials: usize,
    /// Multiplies every tolerance.
    pub tolerance_scale: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 2024,
            samples: 10_000,
            trials: 100,
            tolerance_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub quantity: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl CriterionResult {
    /// The check closest to (or furthest past) its tolerance.
    pub fn worst(&self) -> Option<&Check> {
        let ratio = |c: &Check| {
            if c.tolerance > 0.0 {
                c.measured / c.tolerance
            } else if c.measured > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        };
        self.checks
            .iter()
            .max_by(|a, b| ratio(a).total_cmp(&ratio(b)))
    }

    pub fn summary_line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        match self.worst() {
            Some(c) => format!(
                "[{status}] criterion {}: {} ({}: measured {:.3e}, tolerance {:.3e})",
                self.id, self.name, c.quantity, c.measured, c.tolerance
            ),
            None => format!("[{status}] criterion {}: {}", self.id, self.name),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suite_version: &'static str,
    pub options: VerifyOptions,
    pub criteria: Vec<CriterionResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CriterionResult> {
        self.criteria.iter().filter(|c| !c.passed)
    }
}

pub const CRITERIA: [(u8, &str); 9] = [
    (1, "closed-form agreement on the (X, y) grid"),
    (
        2,
        "perfect probabilistic teleportation over product mixtures",
    ),
    (3, "diagonal-separable special cases"),
    (4, "Werner advantage threshold"),
    (5, "switch null result"),
    (6, "coherence optimization"),
    (7, "coherence necessity"),
    (8, "oracle consistency"),
    (9, "channel well-formedness"),
];

struct Builder<'a> {
    opts: &'a VerifyOptions,
    checks: Vec<Check>,
}

impl<'a> Builder<'a> {
    fn new(opts: &'a VerifyOptions) -> Self {
        Self {
            opts,
            checks: Vec::new(),
        }
    }

    fn check(&mut self, quantity: impl Into<String>, measured: f64, tolerance: f64) {
        let tolerance = tolerance * self.opts.tolerance_scale;
        self.checks.push(Check {
            quantity: quantity.into(),
            measured,
            tolerance,
            passed: measured <= tolerance,
        });
    }

    fn finish(self, id: u8) -> CriterionResult {
        let name = CRITERIA[usize::from(id) - 1].1;
        CriterionResult {
            id,
            name,
            passed: !self.checks.is_empty() && self.checks.iter().all(|c| c.passed),
            checks: self.checks,
        }
    }
}

pub fn run_all(opts: &VerifyOptions) -> Result<VerifyReport> {
    let criteria = CRITERIA
        .iter()
        .map(|&(id, _)| run_criterion(id, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(VerifyReport {
        suite_version: SUITE_VERSION,
        options: *opts,
        criteria,
    })
}

pub fn run_criterion(id: u8, opts: &VerifyOptions) -> Result<CriterionResult> {
    let mut b = Builder::new(opts);
    match id {
        1 => closed_form_agreement(&mut b)?,
        2 => perfect_product_teleportation(&mut b)?,
        3 => diagonal_special_cases(&mut b)?,
        4 => werner_threshold(&mut b)?,
        5 => switch_null_result(&mut b)?,
        6 => coherence_optimization(&mut b)?,
        7 => coherence_necessity(&mut b)?,
        8 => oracle_consistency(&mut b)?,
        9 => well_formedness(&mut b)?,
        _ => {
            return Err(crate::Error::InvalidParameter(format!(
                "no acceptance criterion {id}"
            )))
        }
    }
    Ok(b.finish(id))
}

fn rng_for(b: &Builder, criterion: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(b.opts.seed, criterion))
}

/// `41 × 21` grid: `X = −1 + i/20`, `y = j/20`.
pub fn sweep_grid() -> impl Iterator<Item = (f64, f64)> {
    (0..=40).flat_map(|i| (0..=20).map(move |j| (i as f64 / 20.0 - 1.0, j as f64 / 20.0)))
}

fn closed_form_agreement(b: &mut Builder) -> Result<()> {
    for (channel, label) in [(ChannelKind::PathK, "K"), (ChannelKind::PathL, "L")] {
        let mut worst = 0.0f64;
        for (x, y) in sweep_grid() {
            let cfg = ProtocolConfig::new(
                channel,
                SharedState::with_odd_weight(y)?,
                ControlSpec::from_interference(x)?,
            );
            let weight = if channel == ChannelKind::PathK {
                y
            } else {
                1.0 - y
            };
            let sim = simulated_avg_fidelities(&cfg)?;
            for br in Branch::ALL {
                let closed = avg_fidelity_path(weight, x, br);
                let dev = sim[br.index()].map_or(f64::INFINITY, |s| (s - closed).abs());
                worst = worst.max(dev);
            }
        }
        b.check(
            format!("max |simulated − closed| over grid, {label}"),
            worst,
            1e-9,
        );
    }
    Ok(())
}

fn perfect_product_teleportation(b: &mut Builder) -> Result<()> {
    let mut rng = rng_for(b, 2);
    let (mut fid, mut prob) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let shared = SharedState::product_mix(
            rng.gen_range(0.0..=1.0),
            PureQubit::random(&mut rng),
            PureQubit::random(&mut rng),
        )?;
        let cfg = ProtocolConfig::new(
            ChannelKind::GeneralProduct,
            shared,
            ControlSpec::from_interference(-1.0)?,
        )
        .with_input(PureQubit::random(&mut rng));
        let out = run(&cfg)?;
        fid = fid.max(out.plus.fidelity.map_or(f64::INFINITY, |f| (f - 1.0).abs()));
        prob = prob.max((out.plus.probability - 0.25).abs());
    }
    b.check("max |F₊ − 1|", fid, 1e-10);
    b.check("max |p₊ − 1/4|", prob, 1e-12);
    Ok(())
}

fn diagonal_special_cases(b: &mut Builder) -> Result<()> {
    let mut rng = rng_for(b, 3);
    let (mut fid, mut prob) = (0.0f64, 0.0f64);
    for &w in &[0.0, 0.25, 0.5, 0.75, 1.0] {
        let cases = [
            (ChannelKind::PathL, SharedState::even_parity(w)?),
            (ChannelKind::PathK, SharedState::odd_parity(w)?),
        ];
        for (channel, shared) in cases {
            for (x, branch) in [(-1.0, Branch::Plus), (1.0, Branch::Minus)] {
                for _ in 0..5 {
                    let cfg =
                        ProtocolConfig::new(channel, shared, ControlSpec::from_interference(x)?)
                            .with_input(PureQubit::random(&mut rng));
                    let out = run(&cfg)?;
                    let br = out.branch(branch);
                    fid = fid.max(br.fidelity.map_or(f64::INFINITY, |f| (f - 1.0).abs()));
                    prob = prob.max((br.probability - 0.25).abs());
                }
            }
        }
    }
    b.check("max |F − 1| on the successful branch", fid, 1e-10);
    b.check("max |p − 1/4| on the successful branch", prob, 1e-12);
    Ok(())
}

fn werner_config(p: f64, x: f64) -> Result<ProtocolConfig> {
    Ok(ProtocolConfig::new(
        ChannelKind::PathK,
        SharedState::werner(p, BellLabel::PsiMinus)?,
        ControlSpec::from_interference(x)?,
    ))
}

/// Werner mixing at which the simulated plus-branch average at `X = −1`
/// crosses the classical bound.
pub fn simulated_werner_threshold(tol: f64) -> Result<f64> {
    bisect(0.0, 1.0 / 3.0, tol, |p| {
        let f = simulated_avg_fidelity(&werner_config(p, -1.0)?, Branch::Plus)?;
        Ok(f.unwrap_or(f64::NAN) - CLASSICAL_BOUND)
    })
}

fn werner_threshold(b: &mut Builder) -> Result<()> {
    let p = simulated_werner_threshold(1e-10)?;
    b.check("|p* − 1/5|", (p - 0.2).abs(), 1e-6);
    let sim = simulated_avg_fidelities(&werner_config(1.0, -1.0)?)?;
    let dev = sim
        .iter()
        .map(|f| f.map_or(f64::INFINITY, |f| (f - 1.0).abs()))
        .fold(0.0, f64::max);
    b.check("max |F − 1| at p = 1", dev, 1e-10);
    Ok(())
}

fn switch_null_result(b: &mut Builder) -> Result<()> {
    let mut rng = rng_for(b, 5);
    let (mut avg_dev, mut fact_dev) = (0.0f64, 0.0f64);
    for i in 0..20 {
        let shared = SharedState::product_mix(
            1.0,
            PureQubit::random(&mut rng),
            PureQubit::random(&mut rng),
        )?;
        let control = if i == 0 {
            ControlSpec::from_interference(0.0)?
        } else {
            ControlSpec::new(rng.gen_range(0.0..=FRAC_PI_2), rng.gen_range(0.0..=PI))?
        };
        let cfg = ProtocolConfig::new(ChannelKind::SwitchDephase, shared, control);
        for f in simulated_avg_fidelities(&cfg)?.into_iter().flatten() {
            avg_dev = avg_dev.max((f - CLASSICAL_BOUND).abs());
        }
        for _ in 0..3 {
            let probe = cfg.with_input(PureQubit::random(&mut rng));
            let (joint, _) = channel_output(&probe)?;
            fact_dev = fact_dev.max(
                joint
                    .matrix()
                    .max_abs_diff(&switch_factorized_reference(&probe)),
            );
        }
    }
    b.check("max |⟨F⟩ − 2/3| over branches", avg_dev, 1e-9);
    b.check("max |ρ' − χ ⊗ ρ_d|", fact_dev, 1e-10);
    Ok(())
}

fn coherence_optimization(b: &mut Builder) -> Result<()> {
    let phis = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2];
    let (mut matched, mut hadamard) = (0.0f64, 0.0f64);
    for k in 0..=10 {
        let c = k as f64 / 10.0;
        for &phi in &phis {
            let m = coherence_point(c, phi, CoherenceGate::Matched)?;
            matched = matched.max((m.f_max - avg_fidelity_coherence_opt(c)).abs());
        }
        let h = coherence_point(c, FRAC_PI_2, CoherenceGate::Hadamard)?;
        hadamard = hadamard.max(h.f_adv.abs());
    }
    b.check("max |F_max − (4−C)/(6−3C)|, matched gate", matched, 1e-6);
    b.check("max |F_adv| at φc = π/2, Hadamard", hadamard, 1e-10);
    Ok(())
}

fn standard_avg_fidelity(cfg: &ProtocolConfig) -> Result<f64> {
    let rule = crate::analysis::GaussLegendre::new(crate::analysis::QUADRATURE_ORDER);
    let mut acc = 0.0;
    for (&t, &w) in rule.nodes().iter().zip(rule.weights()) {
        let input = PureQubit::from_polar(t.clamp(-1.0, 1.0).acos(), 0.0)?;
        acc += w * run_standard(&cfg.with_input(input))?.fidelity;
    }
    Ok(acc / 2.0)
}

fn coherence_necessity(b: &mut Builder) -> Result<()> {
    let mut rng = rng_for(b, 7);
    let mut worst = 0.0f64;
    for _ in 0..4 {
        let mut weights = [0.0; 4];
        weights
            .iter_mut()
            .for_each(|w| *w = rng.gen_range(0.01..1.0));
        let total: f64 = weights.iter().sum();
        let diag = SharedState::diagonal(weights.map(|w| w / total))?;
        let werner = SharedState::werner(rng.gen_range(0.0..=1.0), BellLabel::PsiMinus)?;
        let mix = SharedState::product_mix(
            rng.gen_range(0.0..=1.0),
            PureQubit::random(&mut rng),
            PureQubit::random(&mut rng),
        )?;
        let control = ControlSpec::new(rng.gen_range(0.0..=FRAC_PI_2), rng.gen_range(0.0..=PI))?;
        let cases = [
            (ChannelKind::PathK, diag),
            (ChannelKind::PathL, diag),
            (ChannelKind::PathK, werner),
            (ChannelKind::PathL, werner),
            (ChannelKind::GeneralProduct, mix),
        ];
        for (channel, shared) in cases {
            let cfg = ProtocolConfig::new(channel, shared, control)
                .with_control_mode(ControlMode::Dephased);
            let standard = standard_avg_fidelity(&cfg)?;
            for f in simulated_avg_fidelities(&cfg)? {
                worst = worst.max(f.map_or(f64::INFINITY, |f| (f - standard).abs()));
            }
        }
    }
    b.check("max |⟨F⟩_dephased − ⟨F⟩_standard|", worst, 1e-10);
    Ok(())
}

/// The five configurations the Monte Carlo oracle is checked on.
pub fn oracle_configs() -> Result<Vec<(&'static str, ProtocolConfig, Branch)>> {
    Ok(vec![
        (
            "path-k y=0.8 X=0.5",
            ProtocolConfig::new(
                ChannelKind::PathK,
                SharedState::with_odd_weight(0.8)?,
                ControlSpec::from_interference(0.5)?,
            ),
            Branch::Plus,
        ),
        (
            "path-l y=0.1 X=-0.6",
            ProtocolConfig::new(
                ChannelKind::PathL,
                SharedState::diagonal([0.5, 0.04, 0.06, 0.4])?,
                ControlSpec::from_interference(-0.6)?,
            ),
            Branch::Plus,
        ),
        ("werner p=0.3 X=-1", werner_config(0.3, -1.0)?, Branch::Plus),
        (
            "switch-dephase",
            ProtocolConfig::new(
                ChannelKind::SwitchDephase,
                SharedState::product_mix(
                    1.0,
                    PureQubit::new(0.6, 0.8)?,
                    PureQubit::new(0.3, 2.1)?,
                )?,
                ControlSpec::new(1.0, 0.5)?,
            ),
            Branch::Plus,
        ),
        (
            "path-k y=0.9 X=0.7 minus",
            ProtocolConfig::new(
                ChannelKind::PathK,
                SharedState::diagonal([0.02, 0.6, 0.3, 0.08])?,
                ControlSpec::from_interference(0.7)?,
            ),
            Branch::Minus,
        ),
    ])
}

/// Count of trials whose Monte Carlo mean lies outside `3·SE` of `target`.
pub fn oracle_failures(
    cfg: &ProtocolConfig,
    branch: Branch,
    target: f64,
    samples: usize,
    trials: usize,
    seed: u64,
) -> Result<usize> {
    let map = ProtocolMap::compile(cfg)?;
    let mut failures = 0;
    for t in 0..trials {
        let est = mc_with_map(&map, branch, samples, sub_seed(seed, t as u64))?;
        if (est.mean - target).abs() > 3.0 * est.std_error.max(1e-12) {
            failures += 1;
        }
    }
    Ok(failures)
}

fn oracle_consistency(b: &mut Builder) -> Result<()> {
    let allowed = (b.opts.trials / 100) as f64;
    for (k, (label, cfg, branch)) in oracle_configs()?.into_iter().enumerate() {
        let target = simulated_avg_fidelity(&cfg, branch)?.unwrap_or(f64::NAN);
        let seed = sub_seed(b.opts.seed, 800 + k as u64);
        let failures = oracle_failures(&cfg, branch, target, b.opts.samples, b.opts.trials, seed)?;
        b.check(
            format!("{label}: trials outside 3·SE (of {})", b.opts.trials),
            failures as f64,
            allowed,
        );
    }
    Ok(())
}

fn state_violation(rho: &DensityMatrix) -> f64 {
    let m = rho.matrix();
    let herm = m.hermiticity_deviation();
    let tr = (m.trace().re - 1.0).abs() + m.trace().im.abs();
    let psd = (-rho.min_eigenvalue()).max(0.0);
    herm.max(tr).max(psd)
}

fn well_formedness(b: &mut Builder) -> Result<()> {
    let mut rng = rng_for(b, 9);
    let mut sets: Vec<KrausSet> = vec![kraus_k(), kraus_l()];
    sets.push(path_superposition(&kraus_k())?);
    sets.push(path_superposition(&kraus_l())?);
    let mut states: Vec<DensityMatrix> = Vec::new();
    for _ in 0..10 {
        let (w, g) = (PureQubit::random(&mut rng), PureQubit::random(&mut rng));
        let gp = general_product_kraus(&w, &g);
        sets.push(path_superposition(&gp)?);
        sets.push(gp);
        let product = build_shared(&SharedState::product_mix(1.0, w, g)?)?;
        let e = generalized_depolarizing_probs(&product)?.kraus();
        sets.push(switch_kraus(&e, &e)?);
        sets.push(e);
        let werner = build_shared(&SharedState::werner(
            rng.gen_range(0.0..=1.0),
            BellLabel::PsiMinus,
        )?)?;
        sets.push(generalized_depolarizing_probs(&werner)?.kraus());
        states.push(product);
        states.push(werner);
    }
    let completeness = sets
        .iter()
        .map(KrausSet::completeness_deviation)
        .fold(0.0, f64::max);
    b.check("max ‖Σ A†A − I‖ over constructed sets", completeness, 1e-12);

    for i in 0..40 {
        let channel = ChannelKind::ALL[i % 4];
        let (w, g) = (PureQubit::random(&mut rng), PureQubit::random(&mut rng));
        let shared = match channel {
            ChannelKind::SwitchDephase => SharedState::product_mix(1.0, w, g)?,
            ChannelKind::GeneralProduct => {
                SharedState::product_mix(rng.gen_range(0.0..=1.0), w, g)?
            }
            _ if i % 8 < 4 => SharedState::werner(rng.gen_range(0.0..=1.0), BellLabel::PsiMinus)?,
            _ => SharedState::with_odd_weight(rng.gen_range(0.0..=1.0))?,
        };
        let control = ControlSpec::new(rng.gen_range(0.0..=FRAC_PI_2), rng.gen_range(0.0..=PI))?;
        let cfg =
            ProtocolConfig::new(channel, shared, control).with_input(PureQubit::random(&mut rng));
        states.push(channel_output(&cfg)?.0);
        let out = run(&cfg)?;
        for br in Branch::ALL {
            if let Some(s) = &out.branch(br).bob_state {
                states.push(s.clone());
            }
        }
    }
    let violation = states.iter().map(state_violation).fold(0.0, f64::max);
    b.check(
        "max state-invariant violation over produced states",
        violation,
        1e-10,
    );
    Ok(())
}
