use clap::Parser;
use eevconv_cli::{run, Cli};

fn main() -> anyhow::Result<()> {
    let text = run(Cli::parse())?;
    print!("{text}");
    Ok(())
}
