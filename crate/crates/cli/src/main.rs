//! Experiment runner: loads a campaign spec, runs the episode matrix, and
//! writes CSV reports, replay logs, and protocol traces.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Parser;

use coopsim_core::campaign::{run_campaign, CampaignSpec, RunOptions, TransportKind};
use coopsim_core::episode::Strategy;
use coopsim_core::metrics::welch_t_test;
use coopsim_core::world::OutcomeStatus;

#[derive(Debug, Clone, clap::ValueEnum)]
enum TransportArg {
    Inproc,
    Udp,
}

/// Cooperative-perception driving campaigns with selective communication.
#[derive(Debug, Parser)]
#[command(name = "coopsim", version, about)]
struct Args {
    /// Campaign spec file (JSON). Omit to run the full evaluation matrix.
    #[arg(long)]
    spec: Option<PathBuf>,

    /// Directory for campaign.csv and episodes.csv.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Directory for per-episode replay logs (one CSV per episode).
    #[arg(long)]
    replay_dir: Option<PathBuf>,

    /// Message transport between simulated vehicles.
    #[arg(long, value_enum, default_value = "inproc")]
    transport: TransportArg,

    /// Worker threads for episode execution.
    #[arg(long)]
    jobs: Option<usize>,

    /// Emit per-tick utility/selection traces under <out>/traces.
    #[arg(long)]
    plot_csv: bool,
}

fn main() -> Result<()> {
    let args = Args::parse();

    let spec: CampaignSpec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading spec {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing spec {}", path.display()))?
        }
        None => CampaignSpec::paper_matrix(),
    };

    let seed_override = match std::env::var("COOPSIM_SEED") {
        Ok(value) => Some(
            value
                .parse::<u64>()
                .context("COOPSIM_SEED must be an unsigned integer")?,
        ),
        Err(_) => None,
    };

    let out_dir = args.out.clone().or_else(|| spec.output_dir.clone());
    let options = RunOptions {
        out_dir: out_dir.clone(),
        replay_dir: args.replay_dir.clone(),
        transport: match args.transport {
            TransportArg::Inproc => TransportKind::Inproc,
            TransportArg::Udp => TransportKind::Udp,
        },
        jobs: args.jobs,
        plot_csv: args.plot_csv,
        seed_override,
    };

    let output = match run_campaign(&spec, &options) {
        Ok(output) => output,
        Err(e) => bail!("campaign failed: {e}"),
    };

    // Group summary to stdout.
    print!("{}", output.report_csv);

    // Selective-vs-random significance over paired binary outcomes.
    for &n_s in &spec.n_s_list {
        let binary = |strategy: Strategy| -> Vec<f64> {
            output
                .rows
                .iter()
                .filter(|r| r.strategy == strategy && r.n_s == n_s)
                .map(|r| (r.outcome.status == OutcomeStatus::Success) as u8 as f64)
                .collect()
        };
        let selective = binary(Strategy::Selective);
        let random = binary(Strategy::Random);
        if let Ok((t, p)) = welch_t_test(&selective, &random) {
            println!("# welch selective-vs-random n_s={n_s}: t={t:.4} p={p:.4}");
        }
    }

    if let Some(dir) = &out_dir {
        eprintln!(
            "wrote {} and {}",
            dir.join("campaign.csv").display(),
            dir.join("episodes.csv").display()
        );
    }
    Ok(())
}
