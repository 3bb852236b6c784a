use breslow_cli::{error_kind, Cli};
use clap::Parser;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command.run() {
        Ok(written) => {
            for path in written {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            let body = serde_json::json!({
                "error": {
                    "command": cli.command.name(),
                    "kind": error_kind(&err),
                    "message": err.to_string(),
                    "causes": err.chain().skip(1).map(|c| c.to_string()).collect::<Vec<_>>(),
                }
            });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
