// The same data under different continuous negative definite functions.

use multivariance::experiments::sinusoidal_sample;
use multivariance::{estimate, CndfSpec, Result};

pub fn run_example() -> Result<()> {
    let sample = sinusoidal_sample(400, 2, 21)?;
    let choices = [
        CndfSpec::euclidean(1)?,
        CndfSpec::stable(0.5, 1)?,
        CndfSpec::stable(1.5, 1)?,
        CndfSpec::minkowski(1.5, 1)?,
        CndfSpec::bounded_exp(2.0, 1)?,
    ];
    for spec in choices {
        let est = estimate(&sample, &[spec; 2])?;
        println!("{:?}: normalized M = {:.4}, multicorrelation = {:.4}", spec.kind(), est.normalized_m().value, est.multicorrelation().value);
    }
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
