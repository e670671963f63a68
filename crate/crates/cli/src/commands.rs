use std::f64::consts::TAU;
use std::path::PathBuf;

use pathtele_core::analysis::{
    avg_fidelity_path, avg_fidelity_werner, classify_advantage, coherence_point, map_avg_fidelity,
    mc_with_map, sub_seed, CoherenceGate, SweepPoint,
};
use pathtele_core::protocol::{Branch, ChannelKind, ProtocolConfig, ProtocolMap};
use pathtele_core::states::{BellLabel, ControlSpec, SharedState};
use pathtele_core::verify::{run_all, VerifyOptions};
use serde_json::Value;

use crate::table::{num, Cell, Table};
use crate::{open_output, BranchArg, CliError, OutputArgs, OutputFormat, PathChannel, UnitaryArg};

pub const DEFAULT_SEED: u64 = 2024;

/// Number of steps of size `resolution` in `[0, 1]`.
fn unit_steps(resolution: f64, flag: &str) -> Result<usize, CliError> {
    if !resolution.is_finite() || resolution <= 0.0 || resolution > 1.0 {
        return Err(CliError::Usage(format!(
            "{flag} must lie in (0, 1], got {resolution}"
        )));
    }
    let n = (1.0 / resolution).round();
    if (n * resolution - 1.0).abs() > 1e-9 {
        return Err(CliError::Usage(format!(
            "{flag} {resolution} does not divide the unit interval evenly"
        )));
    }
    Ok(n as usize)
}

fn emit(table: &Table, out: &OutputArgs) -> Result<(), CliError> {
    let mut w = open_output(&out.output)?;
    match table.write(out.format, &mut w).and_then(|_| w.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io(e.to_string())),
        _ => Ok(()),
    }
}

fn format_name(f: OutputFormat) -> &'static str {
    match f {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    }
}

fn path_kind(c: PathChannel) -> (ChannelKind, &'static str) {
    match c {
        PathChannel::K => (ChannelKind::PathK, "k"),
        PathChannel::L => (ChannelKind::PathL, "l"),
    }
}

fn branch_avg(map: &ProtocolMap, b: Branch) -> Result<Option<f64>, CliError> {
    Ok(map_avg_fidelity(map, b)?)
}

fn dev(sim: Option<f64>, closed: f64) -> Cell {
    Cell::opt(sim.map(|s| (s - closed).abs()))
}

pub fn sweep_xy(
    channel: PathChannel,
    resolution: f64,
    samples: Option<usize>,
    seed: u64,
    out: &OutputArgs,
) -> Result<(), CliError> {
    let n = unit_steps(resolution, "--resolution")?;
    let (kind, name) = path_kind(channel);
    let mut columns = vec![
        "x",
        "y",
        "avg_fid_plus",
        "avg_fid_minus",
        "sim_plus",
        "sim_minus",
    ];
    if samples.is_some() {
        columns.extend(["mc_plus", "mc_plus_se", "mc_minus", "mc_minus_se"]);
    }
    columns.extend(["verdict", "dev_plus", "dev_minus"]);
    let mut table = Table::new("sweep-xy", columns);
    table.set("channel", Value::from(name));
    table.set("resolution", num(resolution));
    table.set("samples", samples.map_or(Value::Null, Value::from));
    table.set("seed", Value::from(seed));
    table.set("format", Value::from(format_name(out.format)));

    let mut index = 0u64;
    for i in 0..=2 * n {
        let x = (i as f64 / n as f64 - 1.0).clamp(-1.0, 1.0);
        for j in 0..=n {
            let y = j as f64 / n as f64;
            let cfg = ProtocolConfig::new(
                kind,
                SharedState::with_odd_weight(y)?,
                ControlSpec::from_interference(x)?,
            );
            let weight = if kind == ChannelKind::PathK {
                y
            } else {
                1.0 - y
            };
            let closed = Branch::ALL.map(|b| avg_fidelity_path(weight, x, b));
            let map = ProtocolMap::compile(&cfg)?;
            let sim = [
                branch_avg(&map, Branch::Plus)?,
                branch_avg(&map, Branch::Minus)?,
            ];
            let mut row = vec![
                Cell::Num(x),
                Cell::Num(y),
                Cell::Num(closed[0]),
                Cell::Num(closed[1]),
                Cell::opt(sim[0]),
                Cell::opt(sim[1]),
            ];
            if let Some(s) = samples {
                for b in Branch::ALL {
                    let est =
                        mc_with_map(&map, b, s, sub_seed(seed, 2 * index + b.index() as u64))?;
                    row.push(Cell::Num(est.mean));
                    row.push(Cell::Num(est.std_error));
                }
            }
            row.push(Cell::text(
                classify_advantage(SweepPoint::new(x, y)?).verdict.name(),
            ));
            row.push(dev(sim[0], closed[0]));
            row.push(dev(sim[1], closed[1]));
            table.push(row);
            index += 1;
        }
    }
    emit(&table, out)
}

pub fn regions(resolution: f64, out: &OutputArgs) -> Result<(), CliError> {
    let n = unit_steps(resolution, "--resolution")?;
    let mut table = Table::new(
        "regions",
        vec![
            "x", "y", "k_plus", "k_minus", "l_plus", "l_minus", "verdict", "branch", "margin",
        ],
    );
    table.set("resolution", num(resolution));
    table.set("format", Value::from(format_name(out.format)));
    for i in 0..=2 * n {
        let x = (i as f64 / n as f64 - 1.0).clamp(-1.0, 1.0);
        for j in 0..=n {
            let y = j as f64 / n as f64;
            let pt = SweepPoint::new(x, y)?;
            let v = classify_advantage(pt);
            table.push(vec![
                Cell::Num(x),
                Cell::Num(y),
                Cell::Num(avg_fidelity_path(y, x, Branch::Plus)),
                Cell::Num(avg_fidelity_path(y, x, Branch::Minus)),
                Cell::Num(avg_fidelity_path(1.0 - y, x, Branch::Plus)),
                Cell::Num(avg_fidelity_path(1.0 - y, x, Branch::Minus)),
                Cell::text(v.verdict.name()),
                v.branch.map_or(Cell::Missing, |b| Cell::text(b.name())),
                Cell::Num(v.margin),
            ]);
        }
    }
    emit(&table, out)
}

fn werner_marker(p: f64) -> Cell {
    if (p - 0.2).abs() < 1e-12 {
        Cell::text("advantage-threshold")
    } else if (p - 1.0 / 3.0).abs() < 1e-12 {
        Cell::text("separability-boundary")
    } else {
        Cell::Missing
    }
}

pub fn werner(
    resolution: f64,
    x_values: &[f64],
    branch: BranchArg,
    out: &OutputArgs,
) -> Result<(), CliError> {
    let n = unit_steps(resolution, "--resolution")?;
    if x_values.is_empty() {
        return Err(CliError::Usage(
            "--x-values needs at least one value".into(),
        ));
    }
    if let Some(x) = x_values.iter().find(|x| !(-1.0..=1.0).contains(*x)) {
        return Err(CliError::Usage(format!(
            "--x-values entry {x} outside [-1, 1]"
        )));
    }
    let branches: Vec<Branch> = match branch {
        BranchArg::Plus => vec![Branch::Plus],
        BranchArg::Minus => vec![Branch::Minus],
        BranchArg::Both => Branch::ALL.to_vec(),
    };
    let mut ps: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
    if ps.iter().all(|p| (p - 1.0 / 3.0).abs() > 1e-12) {
        ps.push(1.0 / 3.0);
        ps.sort_by(f64::total_cmp);
    }

    let mut table = Table::new(
        "werner",
        vec![
            "p",
            "x",
            "branch",
            "marker",
            "closed",
            "simulated",
            "deviation",
        ],
    );
    table.set("resolution", num(resolution));
    table.set(
        "x_values",
        Value::Array(x_values.iter().map(|&x| num(x)).collect()),
    );
    table.set(
        "branch",
        Value::from(match branch {
            BranchArg::Plus => "plus",
            BranchArg::Minus => "minus",
            BranchArg::Both => "both",
        }),
    );
    table.set("format", Value::from(format_name(out.format)));
    for &p in &ps {
        for &x in x_values {
            let cfg = ProtocolConfig::new(
                ChannelKind::PathK,
                SharedState::werner(p, BellLabel::PsiMinus)?,
                ControlSpec::from_interference(x)?,
            );
            let map = ProtocolMap::compile(&cfg)?;
            for &b in &branches {
                let closed = avg_fidelity_werner(p, x, b);
                let sim = branch_avg(&map, b)?;
                table.push(vec![
                    Cell::Num(p),
                    Cell::Num(x),
                    Cell::text(b.name()),
                    werner_marker(p),
                    Cell::Num(closed),
                    Cell::opt(sim),
                    dev(sim, closed),
                ]);
            }
        }
    }
    emit(&table, out)
}

pub fn coherence(
    unitary: UnitaryArg,
    resolution: f64,
    phi_points: Option<usize>,
    out: &OutputArgs,
) -> Result<(), CliError> {
    let n = unit_steps(resolution, "--resolution")?;
    let (gate, gate_name, default_phis) = match unitary {
        UnitaryArg::Hadamard => (CoherenceGate::Hadamard, "hadamard", 32),
        UnitaryArg::Matched => (CoherenceGate::Matched, "matched", 1),
    };
    let m = phi_points.unwrap_or(default_phis);
    if m == 0 {
        return Err(CliError::Usage("--phi-points must be positive".into()));
    }
    let mut table = Table::new(
        "coherence",
        vec![
            "c",
            "phi_c",
            "closed_plus",
            "closed_minus",
            "closed_f_max",
            "sim_plus",
            "sim_minus",
            "sim_f_max",
            "f_adv",
            "deviation",
        ],
    );
    table.set("unitary", Value::from(gate_name));
    table.set("resolution", num(resolution));
    table.set("phi_points", Value::from(m));
    table.set("format", Value::from(format_name(out.format)));
    for k in 0..=n {
        let c = k as f64 / n as f64;
        for j in 0..m {
            let phi = TAU * j as f64 / m as f64;
            let pt = coherence_point(c, phi, gate)?;
            let closed_max = pt.closed_plus.max(pt.closed_minus);
            table.push(vec![
                Cell::Num(c),
                Cell::Num(phi),
                Cell::Num(pt.closed_plus),
                Cell::Num(pt.closed_minus),
                Cell::Num(closed_max),
                Cell::Num(pt.sim_plus),
                Cell::Num(pt.sim_minus),
                Cell::Num(pt.f_max),
                Cell::Num(pt.f_adv),
                Cell::Num((pt.f_max - closed_max).abs()),
            ]);
        }
    }
    emit(&table, out)
}

pub fn verify(
    seed: u64,
    samples: usize,
    trials: usize,
    tolerance_scale: f64,
    output: &Option<PathBuf>,
    format: OutputFormat,
) -> Result<bool, CliError> {
    if trials == 0 {
        return Err(CliError::Usage("--trials must be positive".into()));
    }
    if !tolerance_scale.is_finite() || tolerance_scale < 0.0 {
        return Err(CliError::Usage(format!(
            "--tolerance-scale must be a nonnegative number, got {tolerance_scale}"
        )));
    }
    let opts = VerifyOptions {
        seed,
        samples,
        trials,
        tolerance_scale,
    };
    let report = run_all(&opts)?;
    let mut table = Table::new(
        "verify",
        vec![
            "criterion",
            "name",
            "quantity",
            "measured",
            "tolerance",
            "passed",
        ],
    );
    table.set("seed", Value::from(seed));
    table.set("samples", Value::from(samples));
    table.set("trials", Value::from(trials));
    table.set("tolerance_scale", num(tolerance_scale));
    table.set("passed", Value::Bool(report.all_passed()));
    for c in &report.criteria {
        eprintln!("{}", c.summary_line());
        for check in &c.checks {
            table.push(vec![
                Cell::Int(u64::from(c.id)),
                Cell::text(c.name),
                Cell::text(check.quantity.clone()),
                Cell::Num(check.measured),
                Cell::Num(check.tolerance),
                Cell::Bool(check.passed),
            ]);
        }
    }
    let failed: Vec<String> = report.failures().map(|c| c.id.to_string()).collect();
    if failed.is_empty() {
        eprintln!("all {} criteria passed", report.criteria.len());
    } else {
        eprintln!("failing criteria: {}", failed.join(", "));
    }
    emit(
        &table,
        &OutputArgs {
            output: output.clone(),
            format,
        },
    )?;
    Ok(report.all_passed())
}
