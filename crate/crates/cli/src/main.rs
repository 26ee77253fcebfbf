use clap::Parser;

fn main() {
    let cli = tablerl_cli::Cli::parse();
    if let Err(e) = tablerl_cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
