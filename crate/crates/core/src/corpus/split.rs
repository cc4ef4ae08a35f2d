use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Corpus, CorpusError, Publication, Result, Split, UserClass};

/// Number of publications sent to the language model when unspecified.
pub const DEFAULT_SAMPLE_SIZE: usize = 30_000;

/// Uniform sample without replacement from the train split, in shuffled order.
pub fn sample_publications(corpus: &Corpus, n: usize, seed: u64) -> Result<Vec<Publication>> {
    if !corpus.is_split() {
        return Err(CorpusError::Unsplit);
    }
    let mut pool: Vec<&Publication> = corpus.train().flat_map(|t| t.publications.iter()).collect();
    if n > pool.len() {
        return Err(CorpusError::SampleTooLarge { requested: n, available: pool.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (chosen, _) = pool.partial_shuffle(&mut rng, n);
    Ok(chosen.iter().map(|p| (*p).clone()).collect())
}

/// Stratified train/test split by user class.
///
/// A corpus whose users all carry a split tag is returned unchanged. Each
/// class sends `round(n_class * test_fraction)` users to the test side, and
/// both sides must receive at least one user of each class.
pub fn split_corpus(mut corpus: Corpus, test_fraction: f64, seed: u64) -> Result<Corpus> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(CorpusError::DegenerateSplit(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let tagged = corpus.timelines.iter().filter(|t| t.split.is_some()).count();
    if tagged == corpus.timelines.len() && tagged > 0 {
        return Ok(corpus);
    }
    if tagged > 0 {
        return Err(CorpusError::PartialSplit { tagged, total: corpus.timelines.len() });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for class in UserClass::ALL {
        let mut members: Vec<usize> =
            corpus.timelines.iter().enumerate().filter(|(_, t)| t.label == class).map(|(i, _)| i).collect();
        let n_test = (members.len() as f64 * test_fraction).round() as usize;
        if n_test == 0 || n_test == members.len() {
            return Err(CorpusError::DegenerateSplit(format!(
                "{} {} users with fraction {test_fraction} leaves one side empty",
                members.len(),
                class.as_str()
            )));
        }
        members.shuffle(&mut rng);
        for (rank, &i) in members.iter().enumerate() {
            corpus.timelines[i].split = Some(if rank < n_test { Split::Test } else { Split::Train });
        }
    }
    Ok(corpus)
}
