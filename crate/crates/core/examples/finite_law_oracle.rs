// Exact population values of a finite law, checked against the Gaussian
// multivariance representation and the empirical law of a sample.

use multivariance::oracle::{gaussian_multivariance_mc, population_summary, FiniteDistribution};
use multivariance::{estimate, CndfSpec, Result};

pub fn run_example() -> Result<()> {
    // X uniform on {0, 1, 2}, Y = 1{X > 0}, Z an independent coin
    let xy = FiniteDistribution::uniform(vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 1.0]], &[1, 1])?;
    let z = FiniteDistribution::uniform(vec![vec![0.0], vec![1.0]], &[1])?;
    let law = xy.independent_product(&z)?;
    let specs = vec![CndfSpec::euclidean(1)?; 3];

    let summary = population_summary(&law, &specs)?;
    println!("exact: M^2 = {:.6e}, total = {:.6}", summary.m2, summary.total_m2);
    let pair = population_summary(&law.marginal(&[0, 1])?, &specs[..2])?;
    let gauss = gaussian_multivariance_mc(&law.marginal(&[0, 1])?, &specs[..2], 20_000, 9)?;
    println!("pair (X,Y): exact {:.6}, Gaussian field {:.6} ± {:.6}", pair.m2, gauss.estimate, gauss.std_error);

    let sample = multivariance::BlockSample::from_dims(
        law.support().iter().flatten().copied().collect(),
        law.support().len(),
        law.block_dims(),
    )?;
    let empirical = FiniteDistribution::empirical(&sample)?;
    let a = population_summary(&empirical, &specs)?.total_m2;
    let b = estimate(&sample, &specs)?.total_m2;
    println!("empirical law vs sample estimator: {a:.15} {b:.15}");
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
