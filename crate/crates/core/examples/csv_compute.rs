// Read a CSV file, group columns into blocks and print the JSON report the
// command line tool would write.

use multivariance::cli::{ingest_csv, to_json};
use multivariance::{estimate, CndfSpec, Result};

pub fn run_example() -> Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/independent_uniform_200.csv");
    let sample = ingest_csv(path.as_ref(), Some("0-1;2"))?;
    let specs = [CndfSpec::euclidean(2)?, CndfSpec::euclidean(1)?];
    let est = estimate(&sample, &specs)?;
    println!("{}", to_json(&est)?);
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
