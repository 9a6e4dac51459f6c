mod commands;
mod config;
mod corpus;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{Settings, SettingsArgs};
use crate::error::{CliError, CliResult};

/// Video DNA: sequence fingerprints, learned Hamming codes, alignment,
/// seeded search and version phylogeny.
#[derive(Parser, Debug)]
#[command(name = "videodna", version)]
struct Cli {
    /// Config file of `key = value` settings (flags take precedence)
    #[arg(long, global = true, env = "VIDEODNA_CONFIG")]
    config: Option<PathBuf>,
    /// Worker threads for bench queries and distance matrices
    #[arg(long, global = true, env = "VIDEODNA_THREADS")]
    threads: Option<usize>,
    #[command(flatten)]
    settings: SettingsArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract per-frame features from a directory of raster frames
    Extract {
        /// Directory of frames, read in file name order
        frames: PathBuf,
        /// Frame rate used for timestamps
        #[arg(long, default_value_t = 25.0)]
        fps: f64,
        /// Feature text file to write
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Train a visual vocabulary from feature files
    VocabTrain {
        #[arg(long, value_enum)]
        kind: Descriptor,
        /// Vocabulary size [default: --k-gray or --k-color]
        #[arg(short)]
        k: Option<usize>,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(required = true)]
        features: Vec<PathBuf>,
    },
    /// Turn feature files into video DNA sequences
    Sequence {
        #[arg(long)]
        gray_vocab: PathBuf,
        #[arg(long)]
        color_vocab: PathBuf,
        /// Source id for a single input [default: file stem]
        #[arg(long)]
        source_id: Option<String>,
        /// VDNA file to write (single input)
        #[arg(short, long, conflicts_with = "db", required_unless_present = "db")]
        output: Option<PathBuf>,
        /// Corpus directory to write, one sequence per input
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(required = true)]
        features: Vec<PathBuf>,
    },
    /// Compute visual-word idf weights over a corpus
    Idf {
        #[arg(long)]
        db: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Generate labelled nucleotide pairs for metric training
    Pairs {
        #[arg(long)]
        db: PathBuf,
        /// Mutation spec file, one `kind strength [key=value...]` per line
        #[arg(long)]
        specs: PathBuf,
        #[arg(long, default_value_t = 2000)]
        positives: usize,
        #[arg(long, default_value_t = 8000)]
        negatives: usize,
        /// Pair directory to write
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Learn a Hamming embedding from a pair directory
    MetricTrain {
        #[arg(long)]
        pairs: PathBuf,
        /// Pair directory used to calibrate the threshold
        #[arg(long)]
        validation: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        /// TSV of per-round training statistics
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Attach bitcodes to a sequence file or corpus directory
    Encode {
        #[arg(long)]
        model: PathBuf,
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Build a banded search index over a corpus
    IndexBuild {
        #[arg(long)]
        db: PathBuf,
        /// Model used to encode sequences that carry no bitcodes
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Search an index for a query sequence
    Search {
        #[arg(long)]
        index: PathBuf,
        /// Model used to encode the query and as the default threshold
        #[arg(long)]
        model: Option<PathBuf>,
        /// Keep only the best N results
        #[arg(long)]
        top: Option<usize>,
        query: PathBuf,
    },
    /// Locally align two sequences
    Align {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        scoring: ScoringArgs,
        /// Global instead of local alignment
        #[arg(long, conflicts_with = "band")]
        global: bool,
        /// Restrict to diagonals `center:halfwidth`
        #[arg(long, value_parser = parse_band, allow_hyphen_values = true)]
        band: Option<(i64, usize)>,
    },
    /// Progressive multiple alignment of a corpus
    ///
    /// --mode selects the guide tree distances; profiles are always compared
    /// by tf-idf.
    Msa {
        #[arg(long)]
        db: PathBuf,
        #[command(flatten)]
        scoring: ScoringArgs,
    },
    /// Neighbor-joining phylogeny of a corpus, printed as Newick
    Phylo {
        /// Corpus to align pairwise
        #[arg(long, required_unless_present = "matrix", conflicts_with = "matrix")]
        db: Option<PathBuf>,
        /// Distance matrix TSV to use instead of a corpus
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Also write the distance matrix TSV
        #[arg(long)]
        write_matrix: Option<PathBuf>,
        /// Root at the midpoint of the longest leaf-to-leaf path
        #[arg(long)]
        midpoint: bool,
        #[command(flatten)]
        scoring: ScoringArgs,
    },
    /// Apply mutations to a sequence
    Mutate {
        input: PathBuf,
        /// Inline spec `kind strength [seed=N] [key=value...]`, repeatable
        #[arg(long = "spec")]
        spec: Vec<String>,
        /// Spec file, applied after the inline specs
        #[arg(long)]
        specs: Option<PathBuf>,
        /// Corpus whose sequences supply substituted segments
        #[arg(long)]
        donors: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        /// TSV mapping output positions to source positions
        #[arg(long)]
        groundtruth: Option<PathBuf>,
    },
    /// Measure search precision on mutated excerpts of a corpus
    Bench {
        #[arg(long)]
        db: PathBuf,
        /// Model used to encode the corpus and queries
        #[arg(long)]
        model: PathBuf,
        /// Queries per length
        #[arg(long, default_value_t = 200)]
        queries: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [5, 10, 15, 20, 30])]
        lengths: Vec<usize>,
        /// Mutation spec file cycled over the queries [default: unmutated]
        #[arg(long)]
        specs: Option<PathBuf>,
        /// Directory for lengths.tsv, kinds.tsv, summary.tsv and queries.tsv
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic corpus of bag sequences
    Synth {
        #[arg(long, default_value_t = 100)]
        videos: usize,
        /// Nucleotides per sequence
        #[arg(long, default_value_t = 600)]
        length: usize,
        #[arg(long, default_value_t = 8)]
        genres: usize,
        /// Corpus directory to write
        #[arg(long)]
        db: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Descriptor {
    Gray,
    Color,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Hamming distance between bitcodes
    Bitcode,
    /// idf-weighted distance between bags
    Tfidf,
}

#[derive(Args, Clone, Debug)]
struct ScoringArgs {
    #[arg(long, value_enum, default_value_t = Mode::Bitcode)]
    mode: Mode,
    /// Model encoding sequences without bitcodes; its threshold is the
    /// default d0
    #[arg(long)]
    model: Option<PathBuf>,
    /// idf weights for tf-idf scoring [default: uniform]
    #[arg(long)]
    idf: Option<PathBuf>,
}

fn parse_band(s: &str) -> Result<(i64, usize), String> {
    let (c, w) = s.split_once(':').ok_or("expected center:halfwidth")?;
    let c = c.parse().map_err(|e| format!("center: {e}"))?;
    let w = w.parse().map_err(|e| format!("halfwidth: {e}"))?;
    Ok((c, w))
}

fn run(cli: Cli) -> CliResult<()> {
    let settings = Settings::resolve(&cli.settings, cli.config.as_deref(), cli.threads)?;
    if let Some(n) = settings.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("--threads: {e}")))?;
    }
    commands::dispatch(cli.command, &settings)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
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
