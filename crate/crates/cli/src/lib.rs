//! Command-line front end for the `geotopo` library.
//!
//! Every command writes one JSON document:
//!
//! ```text
//! { "schema_version", "kind", "manifest": { "command", "parameters",
//!   "input_paths", "master_seed", "tool_version" }, "result": { … } }
//! ```
//!
//! Exit codes: 0 success, 1 validation or input error, 2 usage error.

pub mod commands;
pub mod doc;
pub mod error;
pub mod ingest;

use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;

pub use commands::Cli;
use doc::Node;

pub const SCHEMA_VERSION: usize = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Parses `args` (including the program name), runs the command and writes
/// the document to `--output` or `out`. Errors go to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    let pool = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "cannot start worker threads: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| commands::execute(&cli.command)) {
        Ok(text) => {
            let written = match &cli.output {
                Some(path) => std::fs::write(path, text.as_bytes()).map_err(|e| e.to_string()),
                None => out.write_all(text.as_bytes()).map_err(|e| e.to_string()),
            };
            match written {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    let _ = write!(err, "{}", error_document("cli.io_error", &e));
                    EXIT_VALIDATION
                }
            }
        }
        Err(e) => {
            let _ = write!(err, "{}", error_document(e.code(), &e.to_string()));
            EXIT_VALIDATION
        }
    }
}

fn error_document(code: &str, message: &str) -> String {
    Node::obj()
        .with("schema_version", SCHEMA_VERSION)
        .with("kind", "error")
        .with("error", Node::obj().with("code", code).with("message", message))
        .render()
}
