use std::process::ExitCode;

use clap::Parser;
use serde_json::json;
use videpth_cli::commands::{run, Cli};
use videpth_cli::io::IoError;
use videpth_cli::pipeline::PipelineError;

/// Machine-readable description of a failure for stderr.
fn error_json(err: &anyhow::Error) -> serde_json::Value {
    let causes: Vec<String> = err.chain().skip(1).map(|e| e.to_string()).collect();
    let mut body = json!({
        "message": err.to_string(),
        "causes": causes,
        "kind": "error",
    });
    for cause in err.chain() {
        let io = cause.downcast_ref::<IoError>().or(match cause.downcast_ref::<PipelineError>() {
            Some(PipelineError::Io(e)) => Some(e),
            _ => None,
        });
        if let Some(io) = io {
            body["kind"] = json!("io");
            if let IoError::Parse { offset, .. } = io {
                body["kind"] = json!("parse");
                body["offset"] = json!(offset);
            }
            break;
        }
        if cause.downcast_ref::<videpth::Error>().is_some() {
            body["kind"] = json!("invalid_input");
            break;
        }
    }
    json!({ "error": body })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", error_json(&err));
            ExitCode::FAILURE
        }
    }
}
