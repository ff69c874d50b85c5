use std::path::PathBuf;
use std::process::ExitCode;

use alp_cli::commands;
use alp_cli::config::read_config_file;
use alp_cli::{CliError, Overrides, RunConfig};
use alp_core::{SamplingStrategy, ThetaKind};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "alp",
    version,
    about = "Anchor link prediction on an implicit matching graph"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic network pair with anchors and report its diagnostics.
    Generate(Common),
    /// Train a model and write model.json and loss.csv.
    Train {
        #[command(flatten)]
        common: Common,
        /// Continue from --checkpoint, or from OUT/model.json.
        #[arg(long)]
        resume: bool,
    },
    /// Rank held-out anchors with the model and the attribute baseline.
    Evaluate(Common),
    /// Time batches and epochs across node sizes and fan-outs.
    Benchmark(Common),
    /// Write final embeddings of the pairs in --pairs.
    ExportEmbeddings(Common),
}

#[derive(Args)]
struct Common {
    /// JSON file of flat dotted keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["cosine", "hadamard", "concat"])]
    theta: Option<String>,
    /// Number of hops; fan-outs default to 10 per extra hop and 5 for the last.
    #[arg(long)]
    hops: Option<usize>,
    /// Comma-separated fan-outs, outermost hop first.
    #[arg(long, value_delimiter = ',')]
    fanouts: Option<Vec<usize>>,
    #[arg(long, value_parser = ["random", "feature"])]
    strategy: Option<String>,
    /// Training fraction(s) of the anchors, comma-separated.
    #[arg(long, value_delimiter = ',')]
    ratio: Option<Vec<f64>>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    /// Dataset directory; without it the dataset is generated.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// File of "s t" lines for export-embeddings.
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// Any configuration key, e.g. --set train.epochs=50. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let file = self.config.as_deref().map(read_config_file).transpose()?;
        let overrides = Overrides {
            seed: self.seed,
            out: self.out.clone(),
            theta: self.theta.as_deref().map(parse::<ThetaKind>).transpose()?,
            hops: self.hops,
            fanouts: self.fanouts.clone(),
            strategy: self
                .strategy
                .as_deref()
                .map(parse::<SamplingStrategy>)
                .transpose()?,
            ratios: self.ratio.clone(),
            preset: self.preset.clone(),
            workers: self.workers,
            data: self.data.clone(),
            checkpoint: self.checkpoint.clone(),
            pairs: self.pairs.clone(),
            set: self.set.clone(),
        };
        RunConfig::resolve(file, &overrides)
    }
}

fn parse<T: std::str::FromStr<Err = alp_core::Error>>(s: &str) -> Result<T, CliError> {
    s.parse()
        .map_err(|e: alp_core::Error| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(c) => {
            let s = commands::cmd_generate(&c.resolve()?)?;
            println!(
                "{} anchors, collision rate {:.3}, consistency {:.3} (1-hop) {:.3} (2-hop)",
                s.anchors, s.collision_rate, s.consistency_1hop, s.consistency_2hop
            );
        }
        Command::Train { common, resume } => {
            let s = commands::cmd_train(&common.resolve()?, resume)?;
            match s.final_loss {
                Some(loss) => println!(
                    "{} epochs, final loss {loss:.6}, saved {}",
                    s.epochs,
                    s.checkpoint.display()
                ),
                None => println!("nothing to train, saved {}", s.checkpoint.display()),
            }
        }
        Command::Evaluate(c) => {
            for r in commands::cmd_evaluate(&c.resolve()?)? {
                println!(
                    "ratio {:.2}: model MRR {:.4} H@1 {:.4} H@10 {:.4} | AC MRR {:.4} H@1 {:.4} H@10 {:.4}",
                    r.ratio, r.model.mrr, r.model.hits1, r.model.hits10, r.ac.mrr, r.ac.hits1, r.ac.hits10
                );
            }
        }
        Command::Benchmark(c) => {
            for r in commands::cmd_benchmark(&c.resolve()?)? {
                println!(
                    "n={} fanouts=({},{}) per-batch {:.3} ms, train {:.3} s, test {:.3} s",
                    r.node_size, r.hop2_fanout, r.hop1_fanout, r.per_batch_ms, r.train_s, r.test_s
                );
            }
        }
        Command::ExportEmbeddings(c) => {
            let n = commands::cmd_export_embeddings(&c.resolve()?)?;
            println!("exported {n} embeddings");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
