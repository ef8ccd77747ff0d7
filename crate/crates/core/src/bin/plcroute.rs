use std::process::ExitCode;

fn main() -> ExitCode {
    let code = std::panic::catch_unwind(|| {
        plc_routing::cli::run(
            std::env::args_os(),
            &mut std::io::stdout().lock(),
            &mut std::io::stderr(),
        )
    })
    .unwrap_or(plc_routing::cli::EXIT_INTERNAL);
    ExitCode::from(code as u8)
}
