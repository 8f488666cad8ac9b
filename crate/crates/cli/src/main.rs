use clap::Parser;

fn main() -> anyhow::Result<()> {
    timeaware_cli::run(timeaware_cli::Cli::parse())
}
