use std::fmt;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Fact3,
    #[value(name = "lemma52-1")]
    #[serde(rename = "lemma52-1")]
    Lemma52Part1,
    #[value(name = "lemma52-2")]
    #[serde(rename = "lemma52-2")]
    Lemma52Part2,
    Lemma71,
    CoinIter,
    Agreement,
    Spectral,
    Constants,
    All,
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.to_possible_value().expect("no skipped variants").get_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

/// Verification experiments for summed-coinflip global coins.
#[derive(Debug, Parser)]
#[command(name = "coinlab", version)]
pub struct Cli {
    /// Experiment to run.
    pub subcommand: Subcommand,
    /// Number of processors.
    #[arg(long)]
    pub n: Option<u64>,
    /// Number of bad processors.
    #[arg(long)]
    pub t: Option<u64>,
    /// Spectral bound slack.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Variant-2 stream length constant.
    #[arg(long)]
    pub c1: Option<f64>,
    /// Iterations (matrix rows).
    #[arg(long)]
    pub m: Option<u64>,
    /// Monte Carlo trials (iterations or runs, depending on the experiment).
    #[arg(long)]
    pub trials: Option<u64>,
    /// Root seed. Required, here or in the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every available core.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Report destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Flat `key=value` file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Fully resolved run configuration. Unset parameters fall back to each
/// experiment's defaults.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub n: Option<u64>,
    pub t: Option<u64>,
    pub epsilon: Option<f64>,
    pub c1: Option<f64>,
    pub m: Option<u64>,
    pub trials: Option<u64>,
    pub seed: u64,
    pub workers: usize,
    pub output_path: Option<PathBuf>,
    pub output_format: OutputFormat,
}

#[derive(Debug, Default)]
struct FileValues {
    n: Option<u64>,
    t: Option<u64>,
    epsilon: Option<f64>,
    c1: Option<f64>,
    m: Option<u64>,
    trials: Option<u64>,
    seed: Option<u64>,
    workers: Option<usize>,
    out: Option<PathBuf>,
    format: Option<OutputFormat>,
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| format!("config line {line}: bad value for `{key}`: {e}"))
}

/// Parses a flat `key=value` file. Blank lines and `#` comments are skipped.
fn parse_file(text: &str) -> Result<FileValues, String> {
    let mut v = FileValues::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| format!("config line {line}: expected key=value"))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "n" => v.n = Some(parse_value(line, key, value)?),
            "t" => v.t = Some(parse_value(line, key, value)?),
            "epsilon" => v.epsilon = Some(parse_value(line, key, value)?),
            "c1" => v.c1 = Some(parse_value(line, key, value)?),
            "m" => v.m = Some(parse_value(line, key, value)?),
            "trials" => v.trials = Some(parse_value(line, key, value)?),
            "seed" => v.seed = Some(parse_value(line, key, value)?),
            "workers" => v.workers = Some(parse_value(line, key, value)?),
            "out" => v.out = Some(PathBuf::from(value)),
            "format" => {
                v.format = Some(
                    OutputFormat::from_str(value, true)
                        .map_err(|e| format!("config line {line}: {e}"))?,
                )
            }
            other => return Err(format!("config line {line}: unknown key `{other}`")),
        }
    }
    Ok(v)
}

impl RunConfig {
    /// Merges the optional config file under the command-line flags.
    pub fn resolve(cli: Cli) -> Result<RunConfig, String> {
        let file = match &cli.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
                parse_file(&text)?
            }
            None => FileValues::default(),
        };
        let seed = cli
            .seed
            .or(file.seed)
            .ok_or("a seed is required (--seed or `seed=` in the config file)")?;
        let cfg = RunConfig {
            subcommand: cli.subcommand,
            n: cli.n.or(file.n),
            t: cli.t.or(file.t),
            epsilon: cli.epsilon.or(file.epsilon),
            c1: cli.c1.or(file.c1),
            m: cli.m.or(file.m),
            trials: cli.trials.or(file.trials),
            seed,
            workers: cli.workers.or(file.workers).unwrap_or(0),
            output_path: cli.out.or(file.out),
            output_format: cli.format.or(file.format).unwrap_or(OutputFormat::Json),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        if self.trials == Some(0) {
            return Err("--trials must be positive".into());
        }
        if self.n == Some(0) {
            return Err("--n must be positive".into());
        }
        if self.m == Some(0) {
            return Err("--m must be positive".into());
        }
        for (name, v) in [("epsilon", self.epsilon), ("c1", self.c1)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(format!("--{name} must be positive"));
                }
            }
        }
        if let (Some(n), Some(t)) = (self.n, self.t) {
            if 2 * t >= n {
                return Err(format!("need 2t < n, got n = {n}, t = {t}"));
            }
        }
        if self.subcommand == Subcommand::All
            && (self.n.is_some()
                || self.t.is_some()
                || self.epsilon.is_some()
                || self.c1.is_some()
                || self.m.is_some())
        {
            return Err("`all` runs fixed parameters; only --trials, --seed, --workers, --out and --format apply".into());
        }
        Ok(())
    }
}
