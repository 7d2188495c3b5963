use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use labelfuse4d_cli::args::{Cli, Command};
use labelfuse4d_cli::{commands, exit, server};
use tracing_subscriber::EnvFilter;

fn init_tracing(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Render(a) => commands::render(&a),
        Command::Run(a) => commands::run(&a).map(drop),
        Command::Rectify(a) => commands::rectify(&a).map(drop),
        Command::Eval(a) => commands::eval(&a),
        Command::Extract(a) => commands::extract(&a),
        Command::Fixture(a) => commands::fixture(&a),
        Command::Serve(a) => {
            let state = Arc::new(server::AppState::new(a.job.load()?)?);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(server::serve(state, &a.host, a.port))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_tracing(cli.verbose);
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = exit::classify(&err);
            eprintln!("error: {err:#}");
            ExitCode::from(kind.code() as u8)
        }
    }
}
