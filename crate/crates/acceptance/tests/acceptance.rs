use std::io::Write;
use std::panic;
use std::process::ExitCode;
use std::time::Instant;

use acceptance::criteria;

fn main() -> ExitCode {
    let mut out = std::io::stdout().lock();
    let mut failed = Vec::new();
    for c in criteria() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(c.run).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let (passed, detail) = match outcome {
            Ok(v) => (v.passed, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let status = if passed { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "criterion {:>2} {status} {} ({:.2?}): {detail}", c.id, c.name, start.elapsed());
        if !passed {
            failed.push(c.id);
        }
    }
    let _ = writeln!(out, "acceptance: {} of 10 passed", 10 - failed.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        let _ = writeln!(out, "failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
