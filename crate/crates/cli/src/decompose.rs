use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use hipgest::motion_io::forward_kinematics;
use hipgest::pae::generate_synthetic;
use hipgest::spectrum::decompose_topk;
use hipgest::Matrix;

use crate::config::{defaults, RunConfig};
use crate::data;
use crate::error::{CliError, Result};
use crate::manifest::Run;
use crate::Common;

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("input").required(true))]
pub struct DecomposeArgs {
    /// Motion capture file to read.
    #[arg(long, group = "input")]
    pub bvh: Option<PathBuf>,
    /// Use a synthetic clip on the bundled skeleton instead of a file.
    #[arg(long, group = "input")]
    pub synthetic: bool,
    #[command(flatten)]
    pub common: Common,
}

fn config(args: &DecomposeArgs) -> Result<RunConfig> {
    let base = defaults(&[
        ("joint", "RightHand"),
        ("axis", "y"),
        ("k", "5"),
        ("seed", "0"),
        ("windows", "4"),
        ("fps", "15"),
        ("skeleton", data::BUILTIN),
        ("groups", data::BUILTIN),
    ]);
    let c = &args.common;
    RunConfig::load(base, c.config.as_deref(), &c.sets, c.seed)
}

/// Writes the periodic/non-periodic split of one joint coordinate's world
/// trajectory, with one column per selected Fourier basis function.
pub fn run(args: &DecomposeArgs) -> Result<()> {
    let cfg = config(args)?;
    let axis = match cfg.str("axis") {
        "x" => 0,
        "y" => 1,
        "z" => 2,
        other => return Err(CliError::usage(format!("axis `{other}` is not one of x, y, z"))),
    };
    let k: usize = cfg.get("k")?;
    let mut run = Run::start("decompose", &args.common.out, args.synthetic)?;
    let (skeleton, clip) = match &args.bvh {
        Some(path) => {
            if !path.exists() {
                return Err(CliError::usage(format!("{}: no such file", path.display())));
            }
            data::load_bvh(&mut run, path)?
        }
        None => {
            let (sk, template) = data::skeleton(&mut run, &cfg)?;
            let groups = data::groups(&mut run, &cfg)?;
            let ds = generate_synthetic(cfg.get("windows")?, 34, 141, cfg.get("seed")?);
            let parts: Vec<&Matrix> = ds.windows.iter().collect();
            let clip = data::clip_from_channels(&sk, &template, &groups, &Matrix::vconcat(&parts), cfg.get("fps")?)?;
            (sk, clip)
        }
    };
    let joint = skeleton
        .joint_index(cfg.str("joint"))
        .ok_or_else(|| CliError::usage(format!("unknown joint `{}`", cfg.str("joint"))))?;
    let positions = forward_kinematics(&skeleton, &clip).map_err(CliError::runtime)?;
    let mut signal: Vec<f64> = (0..positions.frame_count()).map(|f| positions.get(f, joint)[axis]).collect();
    if signal.len() % 2 == 1 {
        log::warn!("odd frame count {}; dropping the last frame", signal.len());
        signal.pop();
    }
    let d = decompose_topk(&signal, k).map_err(CliError::runtime)?;
    let basis = d.basis_components();

    let mut csv = String::from("frame,original,periodic,nonperiodic");
    for i in 1..=basis.len() {
        let _ = write!(csv, ",basis_{i}");
    }
    csv.push('\n');
    for t in 0..signal.len() {
        let _ = write!(csv, "{t},{},{},{}", signal[t], d.periodic[t], d.nonperiodic[t]);
        for b in &basis {
            let _ = write!(csv, ",{}", b[t]);
        }
        csv.push('\n');
    }
    run.output("decompose.csv", csv.as_bytes())?;
    run.finish(&cfg)
}
