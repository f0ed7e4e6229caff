// Power of the permutation test on sinusoidal dependence, comparing the
// Euclidean distance with a bounded exponential one tuned to the frequency.

use multivariance::experiments::{power_study, Generator, PowerStudyConfig, StudyTest};
use multivariance::{suggest_gamma, CndfSpec, Result};

pub fn run_example() -> Result<()> {
    for l in [1u32, 3] {
        let gamma = suggest_gamma(std::f64::consts::PI / l as f64)?;
        for spec in [CndfSpec::euclidean(1)?, CndfSpec::bounded_exp(gamma, 1)?] {
            let mut config = PowerStudyConfig::new(Generator::Sinusoidal { l }, 60, StudyTest::Permutation);
            config.replications = 40;
            config.resamples = 99;
            config.specs = vec![spec];
            config.seed = 17;
            let row = power_study(&config)?;
            println!("l = {l}, psi = {:20}: power {:.2} ± {:.2}", row.psi, row.rate, row.se);
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
