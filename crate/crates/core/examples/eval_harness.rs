//! Perplexity-comparison accuracy of the built-in scorers on a toy task.
//!
//! The "language" repeats the cycle 0 1 2 3 4; each record asks which of two
//! continuations follows the prefix, the true one or a shuffled one.

use rand::seq::SliceRandom;
use rand::Rng;
use speechtok::metrics::{accuracy, candidate_perplexities, BigramScorer, EvalRecord, OracleScorer, RandomScorer};
use speechtok::seed;

fn main() -> speechtok::Result<()> {
    let mut rng = seed::rng(3);
    let training: Vec<Vec<u32>> = (0..20).map(|s| (s..s + 60).map(|i| i % 5).collect()).collect();
    let records: Vec<EvalRecord> = (0..2000)
        .map(|_| {
            let start = rng.gen_range(0..5u32);
            let prefix: Vec<u32> = (start..start + 4).map(|i| i % 5).collect();
            let truth: Vec<u32> = (start + 4..start + 10).map(|i| i % 5).collect();
            let mut shuffled = truth.clone();
            shuffled.shuffle(&mut rng);
            let positive = rng.gen_range(0..2);
            let candidates = if positive == 0 { vec![truth, shuffled] } else { vec![shuffled, truth] };
            EvalRecord {
                prefix,
                candidates,
                positive_index: positive,
            }
        })
        .collect();

    let mut bigram = BigramScorer::train(training.iter().map(Vec::as_slice));
    println!("example record: {:?}", records[0]);
    println!("  bigram perplexities: {:?}", candidate_perplexities(&records[0], &mut bigram)?);
    println!("oracle  {:.3}", accuracy(&records, &mut OracleScorer::new(&records))?);
    println!("anti    {:.3}", accuracy(&records, &mut OracleScorer::anti(&records))?);
    println!("random  {:.3}", accuracy(&records, &mut RandomScorer::new(1))?);
    // Shuffles that happen to reproduce the cycle leave two equal candidates; ties count as wrong.
    println!("bigram  {:.3}", accuracy(&records, &mut bigram)?);
    Ok(())
}
