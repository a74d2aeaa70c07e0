//! Batch reports and the verification suite behind the `steinkit` binary.

pub mod commands;
pub mod config;
pub mod report;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};

use clap::{Args, Parser, Subcommand};

use crate::commands::CliError;
use crate::config::{Format, RawSettings};
use crate::report::Report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Clone, Args)]
struct Common {
    /// key=value file; flags override it
    #[arg(long, global = true)]
    config: Option<String>,
    /// Grid points separated by `;`: `n,m` for ER (m may be `0.5n`), `n,alpha` for Jack (alpha may be `n^1.5`)
    #[arg(long, global = true)]
    grid: Option<String>,
    #[arg(long, global = true)]
    samples: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    confidence: Option<String>,
    #[arg(long, global = true)]
    epsilon: Option<String>,
    #[arg(long, global = true)]
    out: Option<String>,
    /// csv or json
    #[arg(long, global = true)]
    format: Option<String>,
    /// n_bar,m_bar,c_bar
    #[arg(long, global = true)]
    thresholds: Option<String>,
}

impl Common {
    fn flags(&self) -> BTreeMap<String, String> {
        [
            ("grid", &self.grid),
            ("samples", &self.samples),
            ("seed", &self.seed),
            ("confidence", &self.confidence),
            ("epsilon", &self.epsilon),
            ("out", &self.out),
            ("format", &self.format),
            ("thresholds", &self.thresholds),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
        .collect()
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact moments, lemma checks and Kolmogorov estimates for ER(n, m)
    ErReport,
    /// Rates, distance estimates and diagnostics for the Jack content
    JackReport,
    /// Exhaustive and exact identity checks
    Verify {
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
    /// Closed form of a_n = q a_{n-1} + c and a chain fixed point
    Recursion {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        c: f64,
        #[arg(long, default_value_t = 20)]
        steps: u32,
        #[arg(long, default_value_t = 50)]
        states: usize,
    },
    /// Exact hypergeometric law and bounds for Hyp(N, m, n)
    Hyp {
        #[arg(long)]
        population: u64,
        #[arg(long)]
        draws: u64,
        #[arg(long)]
        special: u64,
        /// Tail offsets, comma-separated
        #[arg(long, default_value = "1,2,5", value_delimiter = ',')]
        t: Vec<f64>,
        #[arg(long, default_value_t = 4)]
        k: u32,
    },
}

#[derive(Debug, Parser)]
#[command(
    name = "steinkit",
    version,
    about = "Normal approximation reports for isolated vertices and Jack contents"
)]
struct Outer {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

fn settings(common: &Common) -> Result<RawSettings, CliError> {
    let mut s = RawSettings::default();
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)?;
        s.layer(config::parse_kv_config(&text)?);
    }
    s.layer(common.flags());
    Ok(s)
}

fn execute(outer: &Outer) -> Result<(Report, RawSettings, Format), CliError> {
    let s = settings(&outer.common)?;
    let default_format = match outer.command {
        Command::Verify { .. } => Format::Json,
        _ => Format::Csv,
    };
    let format = s.format(default_format)?;
    let report = match &outer.command {
        Command::ErReport => commands::er_report(&s)?,
        Command::JackReport => commands::jack_report(&s)?,
        Command::Verify { inject_fault } => {
            let fault = match inject_fault.as_deref() {
                None => false,
                Some("kerov-weights") => true,
                Some(other) => return Err(CliError::Params(format!("unknown fault {other:?}"))),
            };
            commands::verify(fault)
        }
        Command::Recursion {
            q,
            c,
            steps,
            states,
        } => commands::recursion(*q, *c, *steps, *states)?,
        Command::Hyp {
            population,
            draws,
            special,
            t,
            k,
        } => commands::hyp(*population, *draws, *special, t, *k)?,
    };
    Ok((report, s, format))
}

/// Runs the command line `args` and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let outer = match Outer::try_parse_from(args) {
        Ok(o) => o,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let (report, settings, format) = match execute(&outer) {
        Ok(x) => x,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    let written = match settings.out() {
        Some(path) => File::create(&path).and_then(|f| {
            let mut w = BufWriter::new(f);
            report.write(format, &mut w)?;
            w.flush()
        }),
        None => report.write(format, stdout),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: {e}");
        return EXIT_CONFIG;
    }
    if report.failed_checks.is_empty() {
        EXIT_OK
    } else {
        let _ = writeln!(stderr, "failed checks: {}", report.failed_checks.join(", "));
        EXIT_CHECK_FAILED
    }
}
