//! Runs a small (g, |p|) sweep through the CLI layer and prints the CSV.

use bhf::cli::{parse_config, run, sweep_csv};

fn main() -> bhf::Result<()> {
    let cfg = parse_config([
        "bhf", "--solver", "sweep", "--nr", "4", "--nang", "14", "--sweep-g", "0.02,0.05", "--sweep-p", "0.1,0.2",
        "--jobs", "2",
    ])?;
    let rep = run(&cfg);
    print!("{}", sweep_csv(rep.sweep.as_deref().unwrap_or_default()));
    println!("status {:?} in {:.2}s", rep.status, rep.wall_time);
    Ok(())
}
