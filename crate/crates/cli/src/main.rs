use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use receiptvote::cli::{self, AuthorityCheckPaths, Format};

/// Receipt-based verifiable voting: simulate elections, verify receipts,
/// audit boards and analyze coercion leaks.
#[derive(Debug, Parser)]
#[command(name = "receiptvote", version, about)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Text,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => Format::Json,
            FormatArg::Text => Format::Text,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write board, receipts, trace and reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a receipt's signature and pairings against a published board.
    VerifyReceipt {
        #[arg(long)]
        receipt: PathBuf,
        #[arg(long)]
        board: PathBuf,
        #[arg(long)]
        machine_pub: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
    /// Compare board entries with the signings count.
    Audit {
        #[arg(long)]
        board: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Decrypt and check the bootstrap batch, then confirm it on the board.
    AuthorityCheck {
        #[arg(long)]
        batch: PathBuf,
        #[arg(long)]
        machine_pub: PathBuf,
        #[arg(long)]
        authority_key: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        board: PathBuf,
    },
    /// Infer "did not vote for" statements from receipts in casting order.
    Coerce {
        #[arg(long)]
        receipts: PathBuf,
        /// File listing receipt filenames in casting order.
        #[arg(long)]
        order: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
    /// Tally a board and print the results page.
    ShowBoard {
        #[arg(long)]
        board: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                cli::EXIT_USAGE
            } else {
                cli::EXIT_CLEAN
            });
        }
    };
    let out = &mut io::stdout().lock();
    let err = &mut io::stderr().lock();
    let code = match args.command {
        Command::Run {
            config,
            seed,
            out: dir,
        } => cli::cmd_run(&config, seed, &dir, out, err),
        Command::VerifyReceipt {
            receipt,
            board,
            machine_pub,
            format,
        } => cli::cmd_verify_receipt(&receipt, &board, &machine_pub, format.into(), out, err),
        Command::Audit { board, config } => cli::cmd_audit(&board, &config, out, err),
        Command::AuthorityCheck {
            batch,
            machine_pub,
            authority_key,
            config,
            board,
        } => cli::cmd_authority_check(
            &AuthorityCheckPaths {
                batch: &batch,
                machine_pub: &machine_pub,
                authority_secret: &authority_key,
                config: &config,
                board: &board,
            },
            out,
            err,
        ),
        Command::Coerce {
            receipts,
            order,
            format,
        } => cli::cmd_coerce(&receipts, &order, format.into(), out, err),
        Command::ShowBoard {
            board,
            config,
            format,
        } => cli::cmd_show_board(&board, &config, format.into(), out, err),
    };
    ExitCode::from(code)
}
