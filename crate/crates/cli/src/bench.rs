use std::fmt::Write as _;
use std::time::Instant;

use clap::Args;
use serde::{Deserialize, Serialize};
use wavegain::gainlayer::{gain_init, GainLayer, InitScheme};
use wavegain::nn::conv2d_forward;
use wavegain::rng::SeededRng;
use wavegain::transform::{load_filter_set, mac_count, LayerCostSpec, DEFAULT_LEVEL1};
use wavegain::Tensor;

use crate::run::{CliError, CliResult, Run};
use crate::{setup, Globals};

#[derive(Args, Serialize)]
pub struct BenchArgs {
    /// Input channel counts, comma separated
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    channels: Option<Vec<usize>>,
    /// Output channel counts, comma separated
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    filters: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    levels: Option<usize>,
    /// Convolution kernel side for the baseline
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    kernel: Option<usize>,
    /// Image side
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    size: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    batch: Option<usize>,
    /// Timed runs per cell; the median is reported
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    repeats: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    filter_set: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSettings {
    channels: Vec<usize>,
    filters: Vec<usize>,
    levels: usize,
    kernel: usize,
    lowpass_size: usize,
    size: usize,
    batch: usize,
    repeats: usize,
    filter_set: String,
    seed: u64,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            channels: vec![3, 16],
            filters: vec![6, 16, 64],
            levels: 2,
            kernel: 5,
            lowpass_size: 3,
            size: 32,
            batch: 8,
            repeats: 3,
            filter_set: load_filter_set(DEFAULT_LEVEL1)
                .map(|f| f.name)
                .unwrap_or_default(),
            seed: 0,
        }
    }
}

fn median_ms(repeats: usize, mut f: impl FnMut() -> CliResult<()>) -> CliResult<f64> {
    f()?;
    let mut t = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        f()?;
        t.push(start.elapsed().as_secs_f64() * 1e3);
    }
    t.sort_by(f64::total_cmp);
    Ok(t[t.len() / 2])
}

pub fn bench(args: BenchArgs, g: Globals) -> CliResult<()> {
    let (s, common) = setup::<BenchSettings>("bench", &args, g)?;
    if s.channels.is_empty()
        || s.filters.is_empty()
        || s.channels.contains(&0)
        || s.filters.contains(&0)
    {
        return Err(CliError::Config(
            "channel and filter lists need positive entries".into(),
        ));
    }
    if s.levels == 0 || s.kernel % 2 == 0 || s.repeats == 0 || s.batch == 0 || s.size == 0 {
        return Err(CliError::Config(
            "need J ≥ 1, an odd kernel and positive size, batch and repeats".into(),
        ));
    }
    let fs = load_filter_set(&s.filter_set)?;
    let layer = GainLayer::<f32>::new(fs.clone());
    let mut rng = SeededRng::new(s.seed);

    let mut csv = String::from(
        "channels_in,filters,levels,forward_overhead,inverse_overhead,mixing,gain_total,conv_macs,gain_ms,conv_ms\n",
    );
    println!(
        "{:>4} {:>4} {:>3} {:>9} {:>9} {:>8} {:>9} {:>8} {:>9} {:>9}",
        "C", "F", "J", "fwd/px", "inv/px", "mix/px", "total/px", "conv/px", "gain ms", "conv ms"
    );
    for &c in &s.channels {
        let x: Tensor<f32> = rng.normal_tensor(&[s.batch, c, s.size, s.size]);
        for &f in &s.filters {
            let macs = mac_count(&LayerCostSpec {
                channels_in: c,
                channels_out: f,
                levels: s.levels,
                gain_size: 1,
                lowpass_size: s.lowpass_size,
                kernel: s.kernel,
                filter_set: fs.clone(),
            });
            // per input-channel pixel: one forward per input channel, one
            // inverse per output channel
            let total =
                macs.forward_overhead + macs.inverse_overhead * f as f64 / c as f64 + macs.mixing;
            let p = gain_init::<f32>(
                f,
                c,
                s.levels,
                s.lowpass_size,
                s.seed,
                InitScheme::GlorotLike,
                &fs.name,
            )?;
            let w: Tensor<f32> = rng.normal_tensor(&[f, c, s.kernel, s.kernel]);
            let b = Tensor::<f32>::zeros(&[f]);
            let gain_ms = median_ms(s.repeats, || {
                layer.forward(&x, &p).map(drop).map_err(Into::into)
            })?;
            let conv_ms = median_ms(s.repeats, || {
                conv2d_forward(&x, &w, &b, s.kernel / 2)
                    .map(drop)
                    .map_err(Into::into)
            })?;
            println!(
                "{c:>4} {f:>4} {:>3} {:>9.1} {:>9.1} {:>8.1} {:>9.1} {:>8.0} {gain_ms:>9.2} {conv_ms:>9.2}",
                s.levels, macs.forward_overhead, macs.inverse_overhead, macs.mixing, total, macs.conv_equivalent
            );
            let _ = writeln!(
                csv,
                "{c},{f},{},{},{},{},{total},{},{gain_ms:.4},{conv_ms:.4}",
                s.levels,
                macs.forward_overhead,
                macs.inverse_overhead,
                macs.mixing,
                macs.conv_equivalent
            );
        }
    }
    let mut run = Run::start("bench", &s, &common, &[s.seed])?;
    run.note("filter_set", &fs.name);
    run.write("bench.csv", csv)?;
    run.finish()?;
    Ok(())
}
