use std::f64::consts::PI;
use std::fmt::Write as _;

use clap::Args;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use wavegain::gainlayer::{
    annulus_energy_fraction, box_energy_fraction, dof_from_vectors, impulse_responses,
    random_shape_gains, white_noise_dof, DofEstimate, GainLayer, SHAPE_GRID,
};
use wavegain::transform::{load_filter_set, DEFAULT_LEVEL1};
use wavegain::{npy, Tensor};

use crate::run::{to_pretty, CliError, CliResult, Run};
use crate::{setup, Globals};

/// Support side used for the spatial-confinement column.
const BOX: usize = 17;
/// Annulus bound the impulse fractions are compared against.
const ANNULUS_TARGET: f64 = 0.9;

fn default_filter_set() -> String {
    load_filter_set(DEFAULT_LEVEL1)
        .map(|f| f.name)
        .unwrap_or_default()
}

#[derive(Args, Serialize)]
pub struct ImpulseArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    num_shapes: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Odd side of the output images
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    size: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    filter_set: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImpulseSettings {
    num_shapes: usize,
    seed: u64,
    size: usize,
    filter_set: String,
}

impl Default for ImpulseSettings {
    fn default() -> Self {
        Self {
            num_shapes: 16,
            seed: 0,
            size: SHAPE_GRID,
            filter_set: default_filter_set(),
        }
    }
}

/// 8-bit binary PGM with zero at mid grey and `±max|v|` at the extremes.
pub fn pgm(img: &[f64], h: usize, w: usize) -> Vec<u8> {
    let peak = img.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(img.iter().map(|&v| {
        let t = if peak > 0.0 { v / peak } else { 0.0 };
        (127.5 + 127.5 * t).round().clamp(0.0, 255.0) as u8
    }));
    out
}

#[derive(Serialize)]
struct ShapeGains {
    shape: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

pub fn impulse(args: ImpulseArgs, g: Globals) -> CliResult<()> {
    let (s, common) = setup::<ImpulseSettings>("impulse", &args, g)?;
    if s.num_shapes == 0 || s.size % 2 == 0 || s.size < BOX {
        return Err(CliError::Config(format!(
            "need at least one shape and an odd size of at least {BOX}, got {} and {}",
            s.num_shapes, s.size
        )));
    }
    let fs = load_filter_set(&s.filter_set)?;
    let gains = random_shape_gains(s.num_shapes, s.seed, &fs.name);
    let shapes = impulse_responses(&GainLayer::new(fs.clone()), &gains, s.size)?;

    let mut run = Run::start("impulse", &s, &common, &[s.seed])?;
    let n = s.size;
    let mut stacked = Vec::with_capacity(s.num_shapes * n * n);
    let mut csv = String::from("shape,annulus_fraction,box17_fraction\n");
    let mut fractions = Vec::new();
    for (k, shape) in shapes.iter().enumerate() {
        let img = shape.data();
        stacked.extend_from_slice(img);
        let annulus = annulus_energy_fraction(img, n, n, PI / 4.0, PI / 2.0);
        let boxed = box_energy_fraction(img, n, n, n / 2, n / 2, BOX);
        fractions.push(annulus);
        let _ = writeln!(csv, "{k},{annulus:.6},{boxed:.6}");
        run.write(&format!("shapes/shape_{k:03}.pgm"), pgm(img, n, n))?;
    }
    let npy_path = run.dir.join("impulses.npy");
    npy::save(&Tensor::new(&[s.num_shapes, n, n], stacked)?, &npy_path).map_err(CliError::from)?;
    run.record("impulses.npy");
    run.write("energy.csv", csv)?;

    let recorded: Vec<ShapeGains> = gains
        .iter()
        .enumerate()
        .map(|(k, p)| ShapeGains {
            shape: k,
            re: p.g_hp[1].re.data().to_vec(),
            im: p.g_hp[1].im.data().to_vec(),
        })
        .collect();
    run.note("filter_set", &fs.name);
    run.note("scale2_gains", &recorded);
    run.finish()?;

    let min = fractions.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
    let meeting = fractions.iter().filter(|&&f| f >= ANNULUS_TARGET).count();
    println!(
        "{} shapes of {n}x{n} written to {}",
        s.num_shapes,
        common.out_dir.display()
    );
    println!("energy in pi/4 < |w| < pi/2: min {min:.3}, mean {mean:.3}; {meeting} of {} at or above {ANNULUS_TARGET}", fractions.len());
    Ok(())
}

#[derive(Args, Serialize)]
pub struct CorrdofArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    num_shapes: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    filter_set: Option<String>,
    /// Use white Gaussian vectors of this dimension instead of shapes
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    synthetic_dim: Option<usize>,
    /// Histogram bins over [-1, 1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    bins: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrdofSettings {
    num_shapes: usize,
    seed: u64,
    filter_set: String,
    synthetic_dim: Option<usize>,
    bins: usize,
}

impl Default for CorrdofSettings {
    fn default() -> Self {
        Self {
            num_shapes: 512,
            seed: 0,
            filter_set: default_filter_set(),
            synthetic_dim: None,
            bins: 40,
        }
    }
}

/// Density of the inner product of two independent uniform unit vectors in
/// `d` dimensions: `Γ(d/2) / (√π Γ((d−1)/2)) · (1 − ρ²)^((d−3)/2)`.
pub fn unit_vector_correlation_density(rho: f64, d: f64) -> f64 {
    if rho.abs() >= 1.0 || d <= 1.0 {
        return 0.0;
    }
    let log_norm = ln_gamma(d / 2.0) - 0.5 * PI.ln() - ln_gamma((d - 1.0) / 2.0);
    (log_norm + 0.5 * (d - 3.0) * (1.0 - rho * rho).ln()).exp()
}

fn histogram(est: &DofEstimate, bins: usize) -> String {
    let width = 2.0 / bins as f64;
    let mut counts = vec![0usize; bins];
    for &c in &est.correlations {
        let b = (((c + 1.0) / width).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    let total = est.correlations.len() as f64;
    let mut csv = String::from("bin_lo,bin_hi,count,density,model_density\n");
    for (b, &count) in counts.iter().enumerate() {
        let lo = -1.0 + b as f64 * width;
        let hi = lo + width;
        let model = unit_vector_correlation_density(0.5 * (lo + hi), est.dof);
        let _ = writeln!(
            csv,
            "{lo:.4},{hi:.4},{count},{:.6},{model:.6}",
            count as f64 / (total * width)
        );
    }
    csv
}

pub fn corrdof(args: CorrdofArgs, g: Globals) -> CliResult<()> {
    let (s, common) = setup::<CorrdofSettings>("corrdof", &args, g)?;
    if s.num_shapes < 2 || s.bins == 0 {
        return Err(CliError::Config(
            "need at least two shapes and one bin".into(),
        ));
    }
    let (est, source) = match s.synthetic_dim {
        Some(d) => (
            white_noise_dof(d, s.num_shapes, s.seed)?,
            format!("white noise, d = {d}"),
        ),
        None => {
            let fs = load_filter_set(&s.filter_set)?;
            let shapes = wavegain::gainlayer::random_shapes(s.num_shapes, s.seed, &fs)?;
            let vectors: Vec<Vec<f64>> = shapes.into_iter().map(Tensor::into_data).collect();
            (
                dof_from_vectors(&vectors)?,
                format!("scale-2 shapes, {}", fs.name),
            )
        }
    };
    let mut run = Run::start("corrdof", &s, &common, &[s.seed])?;
    run.write("corrdof.json", to_pretty(&est))?;
    run.write("corr_hist.csv", histogram(&est, s.bins))?;
    run.finish()?;
    println!(
        "{} vectors ({source}): {} pairs, mean {:.4}, variance {:.5}, dof {:.2}",
        s.num_shapes, est.pairs, est.mean, est.variance, est.dof
    );
    Ok(())
}
