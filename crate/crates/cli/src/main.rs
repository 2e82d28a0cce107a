fn main() {
    std::process::exit(smooth_smc_cli::run_cli(std::env::args_os()));
}
