//! `flowcascade` command-line tool.
//!
//! Each subcommand is one request to the detector service. Without
//! `--server` a private server is started in-process on a loopback port, so
//! the tool works standalone.

use std::io::{self, BufRead, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use flowcascade::api::{BenchRequest, EvalRequest, PrepareRequest, SelectKRequest};
use flowcascade::RunConfig;
use flowcascade_client::{Client, ClientError};

#[derive(Parser)]
#[command(name = "flowcascade", version, about = "Five-layer kNN/ELM/H-ELM flow intrusion detector")]
struct Cli {
    #[command(flatten)]
    opts: Options,
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by all subcommands. Flags override the config file.
#[derive(Args)]
struct Options {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// URL of a running service; default is an in-process server.
    #[arg(long, global = true)]
    server: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Labeled training file (KDDTrain+ layout).
    #[arg(long, global = true)]
    train: Option<PathBuf>,
    /// Labeled test file, or a directory written by `prepare`.
    #[arg(long, global = true)]
    test: Option<PathBuf>,
    /// `name,category[,new]` attack table replacing the built-in one.
    #[arg(long, global = true)]
    taxonomy: Option<PathBuf>,
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Output directory for `prepare`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Neighbours used by layer 1.
    #[arg(long = "k", global = true)]
    k: Option<String>,
    /// Hidden nodes of the layer-2 ELM.
    #[arg(long, global = true)]
    elm_n: Option<String>,
    #[arg(long, global = true)]
    elm_c: Option<String>,
    /// Layer-3 widths, e.g. `40,40,200`.
    #[arg(long, global = true)]
    helm3: Option<String>,
    #[arg(long, global = true)]
    helm4: Option<String>,
    #[arg(long, global = true)]
    helm5: Option<String>,
    #[arg(long, global = true)]
    helm_c: Option<String>,
    #[arg(long, global = true)]
    fista_iterations: Option<String>,
    #[arg(long, global = true)]
    fista_lambda: Option<String>,
    #[arg(long, global = true)]
    fista_power_tolerance: Option<String>,
    #[arg(long, global = true)]
    fista_power_iterations: Option<String>,
    /// Worker threads for `bench`.
    #[arg(long, global = true)]
    workers: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Encode and scale both splits into a cache directory and print the census.
    Prepare,
    /// Train all five layers and write the model file.
    Train,
    /// Score a model on a labeled test file or prepared cache.
    Eval {
        /// Also train kNN and H-ELM alone on the training file and compare.
        #[arg(long)]
        baselines: bool,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Write the CSV report here as well.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write the JSON report here as well.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Classify flow rows from stdin (or --input), one JSON decision per line.
    Predict {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Lines sent per request.
        #[arg(long, default_value_t = 4096)]
        batch: usize,
    },
    /// Classify synthetic flows and report throughput and latency.
    Bench {
        #[arg(long, default_value_t = 100_000)]
        flows: usize,
        #[arg(long)]
        json: bool,
    },
    /// Pick the layer-1 k by cross-validation on the training file.
    SelectK {
        #[arg(long, value_delimiter = ',', default_value = "1,5,15,25,35,45,55,65,75,85,95")]
        candidates: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        folds: usize,
    },
    /// Print the effective configuration.
    Config,
    /// Run the HTTP service in the foreground.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
    },
}

enum Failure {
    Input(String),
    Internal(String),
    /// The reader of our output went away (e.g. `| head`).
    Closed,
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Internal(e.to_string())
        }
    }
}

impl From<flowcascade::Error> for Failure {
    fn from(e: flowcascade::Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Internal(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::BrokenPipe {
            return Failure::Closed;
        }
        Failure::Internal(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn absolute(p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        std::env::current_dir().map(|d| d.join(p)).unwrap_or_else(|_| p.to_path_buf())
    }
}

fn resolve_config(o: &Options) -> Result<RunConfig, Failure> {
    let mut config = match &o.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    let overrides = [
        ("train", path(&o.train)),
        ("test", path(&o.test)),
        ("taxonomy", path(&o.taxonomy)),
        ("model", path(&o.model)),
        ("out", path(&o.out)),
        ("seed", o.seed.clone()),
        ("knn.k", o.k.clone()),
        ("elm.n", o.elm_n.clone()),
        ("elm.c", o.elm_c.clone()),
        ("helm3", o.helm3.clone()),
        ("helm4", o.helm4.clone()),
        ("helm5", o.helm5.clone()),
        ("helm.c", o.helm_c.clone()),
        ("fista.iterations", o.fista_iterations.clone()),
        ("fista.lambda", o.fista_lambda.clone()),
        ("fista.power_tolerance", o.fista_power_tolerance.clone()),
        ("fista.power_iterations", o.fista_power_iterations.clone()),
        ("bench.workers", o.workers.clone()),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            config.set(key, &v)?;
        }
    }
    // the service may run in another working directory
    config.train = config.train.as_deref().map(absolute);
    config.test = config.test.as_deref().map(absolute);
    config.taxonomy = config.taxonomy.as_deref().map(absolute);
    config.model = absolute(&config.model);
    config.out = absolute(&config.out);
    config.validate()?;
    Ok(config)
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, Failure> {
    value
        .as_deref()
        .ok_or_else(|| Failure::Input(format!("{flag} is required (flag or config file)")))
}

fn connect(o: &Options) -> Result<Client, Failure> {
    let url = match &o.server {
        Some(url) => url.clone(),
        None => flowcascade_server::spawn(([127, 0, 0, 1], 0).into())?.url(),
    };
    Ok(Client::new(url)?)
}

fn load(client: &Client, config: &RunConfig) -> Result<String, Failure> {
    Ok(client.load_model(&config.model)?.model_id)
}

fn write_file(path: &Path, text: &str) -> Outcome {
    std::fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Outcome {
    let config = resolve_config(&cli.opts)?;
    let mut stdout = BufWriter::new(io::stdout().lock());
    match cli.command {
        Command::Config => {
            write!(stdout, "{}", config.to_text())?;
        }
        Command::Serve { listen } => {
            let server = flowcascade_server::spawn(listen)?;
            writeln!(stdout, "listening on {}", server.url())?;
            stdout.flush()?;
            loop {
                std::thread::park();
            }
        }
        Command::Prepare => {
            let client = connect(&cli.opts)?;
            let resp = client.prepare(&PrepareRequest {
                train: required(&config.train, "--train")?.to_path_buf(),
                test: required(&config.test, "--test")?.to_path_buf(),
                taxonomy: config.taxonomy.clone(),
                out: config.out.clone(),
            })?;
            write!(stdout, "{}", resp.census_text)?;
            writeln!(stdout, "cache written to {}", resp.out.display())?;
        }
        Command::Train => {
            required(&config.train, "--train")?;
            let client = connect(&cli.opts)?;
            let resp = client.train(&config)?;
            let m = &resp.model;
            writeln!(
                stdout,
                "trained on {} records in {:.1} s",
                resp.train_records, resp.seconds
            )?;
            writeln!(stdout, "layers: {}", m.layers.join(" > "))?;
            writeln!(stdout, "model: {} ({} bytes)", config.model.display(), m.bytes)?;
            writeln!(stdout, "sha256: {}", m.sha256)?;
            writeln!(stdout, "Configuration")?;
            for line in m.config.to_text().lines() {
                writeln!(stdout, "  {line}")?;
            }
        }
        Command::Eval {
            baselines,
            format,
            csv,
            json,
        } => {
            let test = required(&config.test, "--test")?.to_path_buf();
            let baselines_train = if baselines {
                Some(required(&config.train, "--train (needed by --baselines)")?.to_path_buf())
            } else {
                None
            };
            let client = connect(&cli.opts)?;
            let model_id = load(&client, &config)?;
            let resp = client.eval(&EvalRequest {
                model_id,
                test,
                baselines_train,
            })?;
            let json_text = serde_json::to_string_pretty(&resp).expect("report serializes");
            if let Some(path) = csv {
                write_file(&path, &resp.csv)?;
            }
            if let Some(path) = json {
                write_file(&path, &json_text)?;
            }
            match format {
                Format::Text => write!(stdout, "{}", resp.text)?,
                Format::Csv => write!(stdout, "{}", resp.csv)?,
                Format::Json => writeln!(stdout, "{json_text}")?,
            }
        }
        Command::Predict { input, batch } => {
            if batch == 0 {
                return Err(Failure::Input("--batch must be positive".into()));
            }
            let client = connect(&cli.opts)?;
            let model_id = load(&client, &config)?;
            let reader: Box<dyn BufRead> = match &input {
                Some(path) => Box::new(io::BufReader::new(
                    std::fs::File::open(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?,
                )),
                None => Box::new(io::stdin().lock()),
            };
            predict_stream(&client, &model_id, reader, batch, &mut stdout)?;
        }
        Command::Bench { flows, json } => {
            let client = connect(&cli.opts)?;
            let model_id = load(&client, &config)?;
            let r = client.bench(&BenchRequest {
                model_id,
                flows,
                workers: config.bench_workers,
                seed: config.seed,
            })?;
            if json {
                writeln!(stdout, "{}", serde_json::to_string_pretty(&r).expect("report serializes"))?;
            } else {
                writeln!(stdout, "flows: {}  workers: {}  elapsed: {:.3} s", r.flows, r.workers, r.seconds)?;
                writeln!(stdout, "throughput: {:.0} flows/sec", r.flows_per_sec)?;
                writeln!(
                    stdout,
                    "latency (us): mean {:.1}  p50 {:.1}  p90 {:.1}  p99 {:.1}  max {:.1}",
                    r.latency_us_mean, r.latency_us_p50, r.latency_us_p90, r.latency_us_p99, r.latency_us_max
                )?;
                writeln!(stdout, "decisions sha256: {}", r.decisions_sha256)?;
                writeln!(stdout, "Configuration")?;
                for line in r.config.to_text().lines() {
                    writeln!(stdout, "  {line}")?;
                }
            }
        }
        Command::SelectK { candidates, folds } => {
            let client = connect(&cli.opts)?;
            let r = client.select_k(&SelectKRequest {
                train: required(&config.train, "--train")?.to_path_buf(),
                taxonomy: config.taxonomy.clone(),
                candidates,
                folds,
                seed: config.seed,
            })?;
            writeln!(stdout, "{:>5}  {:>12}", "k", "accuracy(%)")?;
            for (k, acc) in &r.accuracy {
                writeln!(stdout, "{k:>5}  {:>12}", flowcascade::metrics::pct(*acc))?;
            }
            writeln!(stdout, "best k: {}", r.best)?;
        }
    }
    stdout.flush()?;
    Ok(())
}

/// Sends the stream in batches and writes decisions in input order. Ids are
/// 1-based input line numbers.
fn predict_stream(client: &Client, model_id: &str, mut reader: impl BufRead, batch: usize, out: &mut impl Write) -> Outcome {
    let mut next_id = 1u64;
    let mut buf = Vec::new();
    loop {
        let mut lines = Vec::with_capacity(batch);
        while lines.len() < batch {
            buf.clear();
            if reader.read_until(b'\n', &mut buf)? == 0 {
                break;
            }
            lines.push(String::from_utf8_lossy(&buf).trim_end_matches(['\r', '\n']).to_string());
        }
        if lines.is_empty() {
            return Ok(());
        }
        let count = lines.len() as u64;
        for d in client.classify(model_id, lines, next_id)? {
            serde_json::to_writer(&mut *out, &d).map_err(io::Error::other)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        next_id += count;
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) | Err(Failure::Closed) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(1)
        }
    }
}
