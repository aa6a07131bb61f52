fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("QCRL_LOG")).init();
    std::process::exit(qcrl::cli::main_with_args(std::env::args_os()));
}
