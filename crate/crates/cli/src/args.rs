use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "fridge", version, about = "Fractional ridge (Fridge) regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit at a single lambda.
    Fit,
    /// Warm-started solution path over a log-spaced lambda grid.
    Path,
    /// Choose lambda by k-fold cross-validation.
    Cv,
    /// Extreme Fridge: best m-variable least-squares model via lambda -> infinity.
    Extreme,
    /// Choose the target model size by repeated split-sample validation.
    SelectTms {
        /// one-se (default) or min.
        #[arg(long, default_value = "one-se")]
        rule: String,
    },
    /// Bootstrap standard errors of a fitting procedure.
    Bootstrap(BootstrapArgs),
    /// Monte Carlo study on a simulation design.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BootstrapMethod {
    /// Fridge at `--lambda`, or at the cross-validated lambda when absent.
    Fridge,
    /// Extreme Fridge.
    Extreme,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    #[arg(long, value_enum, default_value = "fridge")]
    pub method: BootstrapMethod,
    /// Held-out CSV (same columns) for the test-MSE summary.
    #[arg(long)]
    pub test: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Block {
    Leading,
    Random,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value = "D1")]
    pub scenario: String,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 60)]
    pub p: usize,
    /// Size of each replicate's independent test set.
    #[arg(long, default_value_t = 1000)]
    pub n_test: usize,
    /// Placement of the D2 coefficient block.
    #[arg(long, value_enum, default_value = "leading")]
    pub block: Block,
    /// Also write every replicate's training data with a JSON sidecar.
    #[arg(long)]
    pub export_data: bool,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Input CSV with a header row.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Response column, by name or 0-based index.
    #[arg(long, global = true, default_value = "y")]
    pub response: String,
    /// Target model size: `3`, `0,2,4` or `0..7` (inclusive).
    #[arg(long, global = true)]
    pub tms: Option<String>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true, default_value_t = 100)]
    pub grid_points: usize,
    /// abs, square, adaptive:<gamma> or geomean.
    #[arg(long, global = true, default_value = "abs")]
    pub component: String,
    /// cd, irl or irr (default: cd, or irr for the square component).
    #[arg(long, global = true)]
    pub solver: Option<String>,
    #[arg(long, global = true, default_value_t = 10)]
    pub k: usize,
    /// Repeats (select-tms), replicates (bootstrap, simulate).
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for folds, repeats and replicates.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
}

/// Parses `3`, `0,2,4`, `0..7` or `0-7` (ranges inclusive).
pub fn parse_tms(spec: &str) -> Result<Vec<usize>, String> {
    let bad = |s: &str| format!("bad target model size `{s}`");
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let range = part.split_once("..").or_else(|| part.split_once('-'));
        match range {
            Some((a, b)) => {
                let b = b.trim_start_matches('=');
                let lo: usize = a.trim().parse().map_err(|_| bad(part))?;
                let hi: usize = b.trim().parse().map_err(|_| bad(part))?;
                if lo > hi {
                    return Err(bad(part));
                }
                out.extend(lo..=hi);
            }
            None => out.push(part.parse().map_err(|_| bad(part))?),
        }
    }
    if out.is_empty() {
        return Err("empty target model size list".into());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tms_specs() {
        assert_eq!(parse_tms("3").unwrap(), vec![3]);
        assert_eq!(parse_tms("0,2, 4").unwrap(), vec![0, 2, 4]);
        assert_eq!(parse_tms("0..3").unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(parse_tms("1-2,5").unwrap(), vec![1, 2, 5]);
        assert_eq!(parse_tms("0..=2").unwrap(), vec![0, 1, 2]);
        assert!(parse_tms("3..1").is_err());
        assert!(parse_tms("x").is_err());
        assert!(parse_tms("").is_err());
    }
}
