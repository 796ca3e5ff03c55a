//! Smallest signal strength that satisfies the sufficient power condition over a grid of sizes.

use gnt_harness::condition::{condition_surface, linear_grid, log_grid, MIN_DRAWS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n0s = log_grid(1e2, 1e5, 4);
    let n1s = log_grid(1e2, 1e3, 2);
    let cells = condition_surface(&n0s, &n1s, 0.05, 0.2, &linear_grid(0.1, 6.0, 0.1), MIN_DRAWS, 13)?;
    for c in cells {
        println!("n0={:>6} n1={:>5} required mu={:?}", c.n0, c.n1, c.required.value());
    }
    Ok(())
}
