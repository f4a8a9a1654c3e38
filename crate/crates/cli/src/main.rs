use std::io;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let ctx = auditloop_cli::Context::current();
    let code = auditloop_cli::run(
        std::env::args_os(),
        &ctx,
        &mut io::stdout(),
        &mut io::stderr(),
    );
    std::process::exit(code);
}
