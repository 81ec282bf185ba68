use std::process::ExitCode;

fn main() -> ExitCode {
    let outcomes = pelcov_acceptance::run_all();
    let mut failed = 0;
    for o in &outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2} {status}  {} ({:.1?}): {}",
            o.id, o.title, o.elapsed, o.detail
        );
        failed += usize::from(!o.passed);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        outcomes.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
