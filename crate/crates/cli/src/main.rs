use std::ops::RangeInclusive;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use signlod::mesh::MeshPattern;
use signlod::scenarios::{mean_eoc, run_convergence_study, scenario_by_name, EocColumn, StudyConfig};

#[derive(Parser)]
#[command(name = "signlod", version, about = "LOD convergence studies for sign-changing diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study and write CSV, JSON and plot data.
    Run(RunArgs),
    /// Print the reference-triangle constants.
    Constants,
}

#[derive(Parser)]
struct RunArgs {
    /// One of flat2, flat11, square, circle, multiscale.
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    fine_level: Option<u32>,
    /// Inclusive range such as `1..4`, or a single level.
    #[arg(long, value_parser = parse_levels)]
    coarse_levels: Option<RangeInclusive<u32>>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    m: Vec<usize>,
    #[arg(long, default_value = "crisscross")]
    pattern: MeshPattern,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Fine level 8 and coarse levels 1 to 6 unless given explicitly.
    #[arg(long = "paper-scale")]
    full_scale: bool,
    /// Coarse element whose corrector decay is recorded (on the finest coarse level).
    #[arg(long)]
    decay_element: Option<usize>,
    #[arg(long)]
    decay_level: Option<u32>,
    /// Number of kernel samples for the coercivity probe.
    #[arg(long)]
    probe_coercivity: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write zero wall times so repeated runs produce identical files.
    #[arg(long)]
    no_timings: bool,
    /// Run coarse levels concurrently.
    #[arg(long)]
    parallel_cells: bool,
    /// Plain quadrature instead of splitting elements along the interface.
    #[arg(long)]
    no_split: bool,
}

fn parse_levels(s: &str) -> Result<RangeInclusive<u32>, String> {
    let parse = |t: &str| t.trim().parse::<u32>().map_err(|e| format!("bad level `{t}`: {e}"));
    match s.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (parse(a)?, parse(b.trim_start_matches('='))?);
            if a > b {
                return Err(format!("empty level range {s}"));
            }
            Ok(a..=b)
        }
        None => parse(s).map(|l| l..=l),
    }
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let spec = scenario_by_name(&args.scenario)?;
    let base = if args.full_scale { StudyConfig::full_scale() } else { StudyConfig::default() };
    let coarse_levels: Vec<u32> = args.coarse_levels.map_or(base.coarse_levels.clone(), |r| r.collect());
    let top = *coarse_levels.iter().max().context("no coarse levels")?;
    let cfg = StudyConfig {
        fine_level: args.fine_level.unwrap_or(base.fine_level),
        ms: args.m,
        pattern: args.pattern,
        output_dir: Some(args.out.clone()),
        seed: args.seed,
        zero_timings: args.no_timings,
        decay: args.decay_element.map(|k| (args.decay_level.unwrap_or(top), k)),
        probe_samples: args.probe_coercivity,
        parallel_cells: args.parallel_cells,
        split: !args.no_split,
        coarse_levels,
        ..base
    };
    if cfg.fine_level <= top {
        bail!("fine level {} must exceed the largest coarse level {top}", cfg.fine_level);
    }
    let record = run_convergence_study(&spec, &cfg)?;
    for r in &record.rows {
        match &r.failure {
            Some(f) => println!("{} H=2^-{} m={}: FAILED {f}", r.scenario, r.coarse_level, r.m),
            None => println!(
                "{} H=2^-{} m={}: h1_lod={:.4e} l2_macro={:.4e} l2_fem={:.4e} l2_best={:.4e}",
                r.scenario, r.coarse_level, r.m, r.errors.h1_lod, r.errors.l2_macro, r.errors.l2_fem, r.errors.l2_bestapprox
            ),
        }
    }
    for &m in &cfg.ms {
        let show = |c| mean_eoc(&record, m, c).map_or("-".to_string(), |v| format!("{v:.3}"));
        println!(
            "m={m}: mean EOC h1_lod {} l2_macro {} l2_best {}",
            show(EocColumn::H1Lod),
            show(EocColumn::L2Macro),
            show(EocColumn::L2BestApprox)
        );
    }
    if let Some(d) = &record.decay {
        println!("decay slope for element {}: {:.3}", d.element, d.fit_slope);
    }
    if let Some(p) = &record.probe {
        println!("coercivity probe: min ratio {:.4e} over {} samples", p.alpha_sampled_min, p.samples);
    }
    println!("outputs written to {}", args.out.display());
    Ok(())
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Constants => {
            let c = signlod::tcoercivity::reference_constants::<f64>();
            println!("C_norm = {:.12}\nC_inf  = {:.12}\nC_inv  = {:.12}", c.c_norm, c.c_inf, c.c_inv);
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_ranges() {
        assert_eq!(parse_levels("1..4").unwrap(), 1..=4);
        assert_eq!(parse_levels("2..=3").unwrap(), 2..=3);
        assert_eq!(parse_levels("3").unwrap(), 3..=3);
        assert!(parse_levels("4..1").is_err());
        assert!(parse_levels("a..2").is_err());
    }
}
