//! Reproduce a figure's data at reduced replication and write it as CSV.

use gnt_harness::figures::{run_figure_to, FigureId, FigureOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let id: FigureId = std::env::args().nth(1).as_deref().unwrap_or("fig9").parse()?;
    let dir = std::path::PathBuf::from("out");
    let path = run_figure_to(id, &FigureOptions { seed: 14, reps: 20 }, &dir)?;
    println!("{}", std::fs::read_to_string(&path)?);
    println!("written to {}", path.display());
    Ok(())
}
