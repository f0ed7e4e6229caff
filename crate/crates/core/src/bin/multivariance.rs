use std::io::Write;

use clap::Parser;
use multivariance::cli::{run, Args};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(threads) = std::env::var("MULTIVARIANCE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if threads > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        }
    }
    let mut stdout = std::io::stdout().lock();
    let code = match Args::parse().into_config() {
        Ok(config) => run(&config, &mut stdout),
        Err(e) => {
            let _ = writeln!(stdout, "{{\"error\":{{\"code\":\"{}\",\"message\":{:?}}}}}", e.code(), e.to_string());
            e.exit_code()
        }
    };
    let _ = stdout.flush();
    std::process::exit(code);
}
