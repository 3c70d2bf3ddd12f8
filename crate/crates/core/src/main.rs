use std::io;

use cmt_core::keys::MASTER_KEY_ENV;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let env_key = std::env::var(MASTER_KEY_ENV).ok();
    let code = cmt_core::cli::run_args(
        std::env::args_os(),
        env_key,
        &mut io::stdout().lock(),
        &mut io::stderr().lock(),
    );
    std::process::exit(code);
}
