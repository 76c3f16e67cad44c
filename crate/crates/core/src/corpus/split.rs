use rand::seq::SliceRandom;

use super::CorpusError;
use crate::stream_rng;

const SPLIT_STREAM: u64 = 0x5911;

/// Seeded shuffle, then the first `round(train% · n / 100)` items (halves
/// round up) go to train and the rest to test.
pub fn split_corpus<T: Clone>(items: &[T], ratio: (u32, u32), seed: u64) -> Result<(Vec<T>, Vec<T>), CorpusError> {
    if ratio.0 + ratio.1 != 100 {
        return Err(CorpusError::BadRatio(ratio.0, ratio.1));
    }
    if items.is_empty() {
        return Err(CorpusError::EmptyInput);
    }
    let n = items.len();
    let n_train = (ratio.0 as usize * n * 2 + 100) / 200;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, SPLIT_STREAM));
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect::<Vec<T>>();
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventy_thirty() {
        let items: Vec<u32> = (0..100).collect();
        let (train, test) = split_corpus(&items, (70, 30), 1).unwrap();
        assert_eq!((train.len(), test.len()), (70, 30));
        let mut all: Vec<u32> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, items);
        assert_eq!(split_corpus(&items, (70, 30), 1).unwrap(), (train, test));
    }

    #[test]
    fn ninety_ten_and_rounding() {
        let items: Vec<u32> = (0..10).collect();
        let (train, test) = split_corpus(&items, (90, 10), 3).unwrap();
        assert_eq!((train.len(), test.len()), (9, 1));
        // 0.5 rounds up: 50% of 3 items
        assert_eq!(split_corpus(&[1, 2, 3], (50, 50), 0).unwrap().0.len(), 2);
        // 70% of 5 = 3.5 → 4
        assert_eq!(split_corpus(&[1, 2, 3, 4, 5], (70, 30), 0).unwrap().0.len(), 4);
    }

    #[test]
    fn errors() {
        assert!(matches!(split_corpus::<u8>(&[], (70, 30), 0), Err(CorpusError::EmptyInput)));
        assert!(matches!(split_corpus(&[1], (70, 20), 0), Err(CorpusError::BadRatio(70, 20))));
    }

    #[test]
    fn seed_changes_order() {
        let items: Vec<u32> = (0..50).collect();
        assert_ne!(split_corpus(&items, (70, 30), 1).unwrap(), split_corpus(&items, (70, 30), 2).unwrap());
    }
}
