// Degree laws, their size-biased versions, and sampled degree sequences.

use commcascade::dist::DegreeSequences;
use commcascade::{Community, DegreeDistribution, ModelSpec, SeedingRule, ThresholdRule};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let laws = [
        ("poisson(4)", DegreeDistribution::poisson(4.0)?),
        ("regular(3)", DegreeDistribution::regular(3)?),
        ("table", DegreeDistribution::table([(1, 0.5), (2, 0.3), (6, 0.2)])?),
    ];
    for (name, law) in &laws {
        let biased = law.size_biased()?;
        let report = law.validate_regularity();
        println!(
            "{name:>11}: mean {:.4}, dmax {}, size-biased mean {:.4}, passes regularity checks {}",
            law.mean(),
            law.dmax(),
            biased.mean(),
            report.pass
        );
    }

    let model = ModelSpec::new(
        laws[0].1.clone(),
        laws[2].1.clone(),
        laws[1].1.clone(),
        400,
        400,
        ThresholdRule::Linear(0.25),
        SeedingRule::GlobalUniform(0.0),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let seqs = DegreeSequences::sample(&model, &mut rng);
    seqs.validate()?;
    println!(
        "sampled n = {}: internal edges ({}, {}), cross edges {}, repair stubs {}",
        seqs.n(),
        seqs.internal_edges(Community::One),
        seqs.internal_edges(Community::Two),
        seqs.cross_edges(),
        seqs.repairs
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
