//! `calcaudit`: read-only audit of OpenDocument spreadsheets.
//!
//! Exit codes: 0 success, 2 unreadable input or bad usage, 3 invalid filter,
//! 4 checkpoint cannot be reconstructed, 5 change recording not enabled.

use std::io::Write;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use calcaudit::analyze::{scan, CheckConfig};
use calcaudit::filter::{apply_filters, summarize, FilterSpec};
use calcaudit::reconstruct::{export_changes, snapshot_at, Checkpoint};
use calcaudit::report::{
    render_change_table, render_findings, render_sheet_csv, render_summary, Format,
};
use calcaudit::{RecordingStatus, Workbook};
use calcaudit_service::{serve, ServiceConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "calcaudit",
    version,
    about = "Read-only audit of spreadsheets with tracked changes"
)]
struct Cli {
    /// Output format
    #[arg(long, global = true, default_value = "table")]
    format: Format,
    /// Static-check configuration (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Filters {
    /// Filter in text form, e.g. '+author=J* Doe,ci' or '-transition=empty->any'; repeatable
    #[arg(long = "filter", allow_hyphen_values = true)]
    filters: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// List change records
    Changes {
        file: PathBuf,
        #[command(flatten)]
        filters: Filters,
    },
    /// Run the static checks on the current grid or a checkpoint
    Scan {
        file: PathBuf,
        /// Timestamp (2003-03-28T21:55:00) or change id
        #[arg(long)]
        at: Option<String>,
    },
    /// Count change records by type, author and date
    Summary {
        file: PathBuf,
        #[command(flatten)]
        filters: Filters,
    },
    /// Write the grid at a checkpoint as one csv file per sheet
    Reconstruct {
        file: PathBuf,
        #[arg(long)]
        at: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write change records as one JSON object per line
    ExportChanges {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report whether change recording is on, with the file digest
    Verify { file: PathBuf },
    /// Serve the audit API on a loopback port
    Serve {
        /// Directory whose files may be opened
        #[arg(long, default_value = ".")]
        root: PathBuf,
        #[arg(long, default_value_t = 8740)]
        port: u16,
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        bind: IpAddr,
        /// Built UI bundle to serve at /
        #[arg(long)]
        ui: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl ToString) -> Failure {
    Failure {
        code,
        message: message.to_string(),
    }
}

fn load(path: &Path) -> Result<Workbook, Failure> {
    Workbook::open(path).map_err(|e| fail(2, format!("{}: {e}", path.display())))
}

fn parse_filters(texts: &[String]) -> Result<Vec<FilterSpec>, Failure> {
    texts
        .iter()
        .map(|t| t.parse::<FilterSpec>().map_err(|e| fail(3, e)))
        .collect()
}

fn check_config(path: Option<&Path>) -> Result<CheckConfig, Failure> {
    match path {
        Some(p) => CheckConfig::load(p).map_err(|e| fail(2, format!("{}: {e}", p.display()))),
        None => Ok(CheckConfig::default()),
    }
}

fn sheet_file_name(index: usize, name: &str) -> String {
    let clean: String = name
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{:02}-{clean}.csv", index + 1)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut stdout = std::io::stdout().lock();
    let mut emit = |text: &str| stdout.write_all(text.as_bytes()).map_err(|e| fail(2, e));
    match cli.command {
        Command::Changes { file, filters } => {
            let specs = parse_filters(&filters.filters)?;
            let wb = load(&file)?;
            let records = apply_filters(&specs, &wb).map_err(|e| fail(3, e))?;
            emit(&render_change_table(records, cli.format))
        }
        Command::Summary { file, filters } => {
            let specs = parse_filters(&filters.filters)?;
            let wb = load(&file)?;
            let records = apply_filters(&specs, &wb).map_err(|e| fail(3, e))?;
            emit(&render_summary(&summarize(records)))
        }
        Command::Scan { file, at } => {
            let config = check_config(cli.config.as_deref())?;
            let wb = load(&file)?;
            let findings = match at {
                None => scan(&wb.sheets, &config),
                Some(at) => {
                    let cp: Checkpoint = at.parse().expect("infallible");
                    let snap = snapshot_at(&wb, &cp).map_err(|e| fail(4, e))?;
                    scan(&snap.sheets, &config)
                }
            };
            emit(&render_findings(&findings, cli.format))
        }
        Command::Reconstruct { file, at, out } => {
            let wb = load(&file)?;
            let cp: Checkpoint = at.parse().expect("infallible");
            let snap = snapshot_at(&wb, &cp).map_err(|e| fail(4, e))?;
            std::fs::create_dir_all(&out)
                .map_err(|e| fail(2, format!("{}: {e}", out.display())))?;
            let source = file.canonicalize().map_err(|e| fail(2, e))?;
            for (i, sheet) in snap.sheets.iter().enumerate() {
                let target = out.join(sheet_file_name(i, &sheet.name));
                if target.canonicalize().is_ok_and(|t| t == source) {
                    return Err(fail(2, "refusing to overwrite the input file"));
                }
                std::fs::write(&target, render_sheet_csv(sheet))
                    .map_err(|e| fail(2, format!("{}: {e}", target.display())))?;
                emit(&format!("{}\n", target.display()))?;
            }
            Ok(())
        }
        Command::ExportChanges { file, out } => {
            let wb = load(&file)?;
            match out {
                None => export_changes(&wb.changes, &mut stdout).map_err(|e| fail(2, e)),
                Some(path) => {
                    if path.canonicalize().ok() == file.canonicalize().ok() {
                        return Err(fail(2, "refusing to overwrite the input file"));
                    }
                    let f = std::fs::File::create(&path)
                        .map_err(|e| fail(2, format!("{}: {e}", path.display())))?;
                    export_changes(&wb.changes, std::io::BufWriter::new(f)).map_err(|e| fail(2, e))
                }
            }
        }
        Command::Verify { file } => {
            let wb = load(&file)?;
            let status = wb.recording.as_str();
            emit(&format!(
                "change recording: {status}\nchange records: {}\nsource digest: {}\n",
                wb.changes.len(),
                wb.manifest.source_digest
            ))?;
            if wb.recording == RecordingStatus::NoHistoryFound {
                return Err(fail(5, "no change history found; turn on change recording"));
            }
            Ok(())
        }
        Command::Serve {
            root,
            port,
            bind,
            ui,
        } => {
            let mut config = ServiceConfig::new(root);
            config.checks = check_config(cli.config.as_deref())?;
            config.static_dir = ui;
            let addr = SocketAddr::new(bind, port);
            eprintln!("serving on http://{addr}");
            let rt = tokio::runtime::Runtime::new().map_err(|e| fail(2, e))?;
            rt.block_on(serve(config, addr)).map_err(|e| fail(2, e))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("calcaudit: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
