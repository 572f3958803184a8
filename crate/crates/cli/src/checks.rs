use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use wavegain::gainlayer::{gain_init, InitScheme};
use wavegain::gradcheck::{
    conv2d_gradcheck, dense_operator_check, gain_layer_gradcheck, tolerance, GradCheck,
    LayerCheckConfig,
};
use wavegain::nn::Precision;
use wavegain::transform::{load_filter_set, FilterSet, DEFAULT_LEVEL1};
use wavegain::verify::{filter_stage_checks, transform_suite, Check, LAYER_ADJOINT_TOLERANCE};

use crate::run::{skip_false, to_pretty, CliError, CliResult, Run};
use crate::{setup, Globals};

fn default_filter_set() -> String {
    load_filter_set(DEFAULT_LEVEL1)
        .map(|f| f.name)
        .unwrap_or_default()
}

#[derive(Args, Serialize)]
pub struct SelftestArgs {
    /// Print machine-readable JSON instead of a table
    #[arg(long)]
    #[serde(skip_serializing_if = "skip_false")]
    json: bool,
    /// Random trials per property
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Filter set name, e.g. near_sym_b+qshift_c
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    filter_set: Option<String>,
    /// Perturb one level-1 filter tap before testing (fault injection)
    #[arg(long, hide = true)]
    #[serde(skip_serializing_if = "skip_false")]
    inject_fault: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelftestSettings {
    json: bool,
    trials: usize,
    seed: u64,
    filter_set: String,
    inject_fault: bool,
}

impl Default for SelftestSettings {
    fn default() -> Self {
        Self {
            json: false,
            trials: 20,
            seed: 0,
            filter_set: default_filter_set(),
            inject_fault: false,
        }
    }
}

fn print_checks(checks: &[Check]) {
    println!(
        "{:<44} {:>12} {:>10}  result",
        "property", "max error", "bound"
    );
    for c in checks {
        println!(
            "{:<44} {:>12.3e} {:>10.0e}  {}",
            c.property,
            c.max_error,
            c.threshold,
            if c.passed { "pass" } else { "FAIL" }
        );
    }
}

fn failures(checks: &[Check]) -> CliResult<()> {
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.property.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failed.join(", ")))
    }
}

pub fn selftest(args: SelftestArgs, g: Globals) -> CliResult<()> {
    let (s, common) = setup::<SelftestSettings>("selftest", &args, g)?;
    if s.trials == 0 {
        return Err(CliError::Config("trials must be at least 1".into()));
    }
    let mut fs = load_filter_set(&s.filter_set)?;
    let mut checks = filter_stage_checks()?;
    if s.inject_fault {
        fs.level1.h0o[0] += 1e-3;
        let err = fs.level1.stage_reconstruction_error();
        checks.push(Check::new(
            format!("stage reconstruction {} (corrupted)", fs.level1.name),
            err,
            wavegain::transform::STAGE_PR_TOLERANCE,
        ));
    }
    checks.extend(transform_suite(&fs, s.trials, s.seed)?);

    let mut run = Run::start("selftest", &s, &common, &[s.seed])?;
    run.note("filter_set", &fs.name);
    run.write("selftest.json", to_pretty(&checks))?;
    run.finish()?;
    if s.json {
        print!("{}", to_pretty(&checks));
    } else {
        print_checks(&checks);
    }
    failures(&checks)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerChoice {
    Wavegain,
    Conv2d,
}

#[derive(Args, Serialize)]
pub struct GradcheckArgs {
    /// Layer to check; conv2d checks the baseline convolution as well
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    layer: Option<LayerChoice>,
    #[arg(long, value_parser = parse_precision)]
    #[serde(skip_serializing_if = "Option::is_none")]
    precision: Option<Precision>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    filter_set: Option<String>,
    /// Input height and width
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    size: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    levels: Option<usize>,
}

pub fn parse_precision(s: &str) -> Result<Precision, String> {
    s.parse().map_err(|e: wavegain::Error| e.to_string())
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckSettings {
    layer: LayerChoice,
    precision: Precision,
    seed: u64,
    filter_set: String,
    size: usize,
    levels: usize,
}

impl Default for GradcheckSettings {
    fn default() -> Self {
        Self {
            layer: LayerChoice::Wavegain,
            precision: Precision::F64,
            seed: 0,
            filter_set: default_filter_set(),
            size: 8,
            levels: 1,
        }
    }
}

#[derive(Serialize)]
struct GradReport {
    suite: String,
    #[serde(flatten)]
    check: GradCheck,
    tolerance: f64,
    passed: bool,
}

fn suite<T: wavegain::Real>(s: &GradcheckSettings, fs: &FilterSet) -> CliResult<Vec<GradReport>> {
    let tol = tolerance::<T>();
    let wrap = |suite: &str, checks: Vec<GradCheck>| {
        checks
            .into_iter()
            .map(|check| GradReport {
                suite: suite.to_owned(),
                passed: check.passes(tol),
                check,
                tolerance: tol,
            })
            .collect::<Vec<_>>()
    };
    let cfg = LayerCheckConfig {
        height: s.size,
        width: s.size,
        levels: s.levels,
        seed: s.seed,
        ..Default::default()
    };
    let mut out = wrap("wavegain", gain_layer_gradcheck::<T>(&cfg, fs)?);
    if s.layer == LayerChoice::Conv2d {
        let conv = LayerCheckConfig {
            in_channels: 3,
            ..cfg
        };
        out.extend(wrap("conv2d", conv2d_gradcheck::<T>(&conv)?));
    }
    Ok(out)
}

pub fn gradcheck(args: GradcheckArgs, g: Globals) -> CliResult<()> {
    let (s, common) = setup::<GradcheckSettings>("gradcheck", &args, g)?;
    if s.size == 0 || s.levels == 0 {
        return Err(CliError::Config(
            "size and levels must be at least 1".into(),
        ));
    }
    let fs = load_filter_set(&s.filter_set)?;
    let reports = match s.precision {
        Precision::F32 => suite::<f32>(&s, &fs)?,
        Precision::F64 => suite::<f64>(&s, &fs)?,
    };
    // The dense operator is always built at 64 bits.
    let p = gain_init::<f64>(3, 2, s.levels, 3, s.seed, InitScheme::UnitNormal, &fs.name)?;
    let dense_size = s.size.min(wavegain::gainlayer::DENSE_OPERATOR_LIMIT);
    let dense = Check::new(
        format!("dense operator transpose {dense_size}x{dense_size}"),
        dense_operator_check(&p, dense_size, dense_size, &fs, s.seed)?,
        LAYER_ADJOINT_TOLERANCE,
    );

    println!(
        "{:<10} {:<10} {:>8} {:>12} {:>12}  result",
        "suite", "tensor", "entries", "max rel err", "max abs err"
    );
    for r in &reports {
        println!(
            "{:<10} {:<10} {:>8} {:>12.3e} {:>12.3e}  {}",
            r.suite,
            r.check.name,
            r.check.entries,
            r.check.max_rel_err,
            r.check.max_abs_err,
            if r.passed { "pass" } else { "FAIL" }
        );
    }
    println!(
        "{:<32} {:>12.3e} (bound {:.0e})  {}",
        dense.property,
        dense.max_error,
        dense.threshold,
        if dense.passed { "pass" } else { "FAIL" }
    );
    let worst = reports
        .iter()
        .map(|r| r.check.max_rel_err)
        .fold(0.0, f64::max);
    println!(
        "worst relative error {worst:.3e} (bound {:.0e})",
        tolerance_of(s.precision)
    );

    let mut run = Run::start("gradcheck", &s, &common, &[s.seed])?;
    run.note("filter_set", &fs.name);
    run.write(
        "gradcheck.json",
        to_pretty(&serde_json::json!({ "finite_difference": reports, "dense_operator": dense, "worst_rel_err": worst })),
    )?;
    run.finish()?;

    let mut failed: Vec<String> = reports
        .iter()
        .filter(|r| !r.passed)
        .map(|r| format!("{} {}", r.suite, r.check.name))
        .collect();
    if !dense.passed {
        failed.push(dense.property);
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "gradient mismatch in {}",
            failed.join(", ")
        )))
    }
}

fn tolerance_of(p: Precision) -> f64 {
    match p {
        Precision::F32 => tolerance::<f32>(),
        Precision::F64 => tolerance::<f64>(),
    }
}
