use clap::Parser;

fn main() {
    let cli = usf_radar::Cli::parse();
    if let Err(e) = usf_radar::run(cli) {
        eprintln!("usf-radar: {e}");
        std::process::exit(e.exit_code());
    }
}
