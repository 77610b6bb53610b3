use std::io::Write;

fn main() -> std::process::ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let env_seed = std::env::var(qqc_cli::SEED_ENV).ok();
    let (out, err, code) = qqc_cli::run(std::env::args_os(), env_seed.as_deref());
    log::info!("exit code {}", code as u8);
    let _ = std::io::stdout().write_all(out.as_bytes());
    let _ = std::io::stderr().write_all(err.as_bytes());
    std::process::ExitCode::from(code as u8)
}
