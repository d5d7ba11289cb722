fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("C2SIM_LOG", "info")).init();
    std::process::exit(c2sim_cli::run_cli(std::env::args_os()));
}
