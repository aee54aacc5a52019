use clap::Parser;
use pseudomode::cli::{run, Cli};

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let summary = run(&cli)?;
    print!("{summary}");
    Ok(())
}
