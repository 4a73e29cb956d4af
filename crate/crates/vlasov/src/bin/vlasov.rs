use clap::Parser;

fn main() {
    let cli = vlasov::cli::Cli::parse();
    std::process::exit(vlasov::cli::dispatch(cli));
}
