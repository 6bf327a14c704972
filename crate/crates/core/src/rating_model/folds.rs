use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ModelError;

/// Splits sample indices into `k` folds so that every class is spread as
/// evenly as possible: per class, fold sizes differ by at most one.
///
/// Each class is shuffled with the seed, classes are laid end to end in
/// label order, and position `p` goes to fold `p mod k`.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, ModelError> {
    if k < 2 {
        return Err(ModelError::InvalidK(k));
    }
    if k > labels.len() {
        return Err(ModelError::KTooLarge { k, n: labels.len() });
    }
    let mut classes: Vec<u8> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = Vec::with_capacity(labels.len());
    for c in classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        order.extend(members);
    }
    let mut folds = vec![Vec::new(); k];
    for (p, i) in order.into_iter().enumerate() {
        folds[p % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn six_four_split() {
        let labels = [0, 0, 0, 0, 0, 0, 1, 1, 1, 1];
        let folds = stratified_folds(&labels, 5, 3).unwrap();
        for f in &folds {
            assert_eq!(f.len(), 2);
            let ones = f.iter().filter(|&&i| labels[i] == 1).count();
            assert!(ones <= 1);
        }
    }

    #[test]
    fn leave_one_out_and_errors() {
        let labels = [3, 4, 3, 5];
        let folds = stratified_folds(&labels, 4, 0).unwrap();
        assert!(folds.iter().all(|f| f.len() == 1));
        assert_eq!(stratified_folds(&labels, 5, 0), Err(ModelError::KTooLarge { k: 5, n: 4 }));
        assert_eq!(stratified_folds(&labels, 1, 0), Err(ModelError::InvalidK(1)));
        assert_eq!(stratified_folds(&[7; 9], 3, 0).unwrap().iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 3, 3]);
    }

    proptest! {
        #[test]
        fn folds_partition_and_stratify(labels in prop::collection::vec(1u8..=5, 2..60), k in 2usize..8, seed in any::<u64>()) {
            prop_assume!(k <= labels.len());
            let folds = stratified_folds(&labels, k, seed).unwrap();
            let mut all: Vec<usize> = folds.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            for c in 1..=5u8 {
                let counts: Vec<usize> = folds.iter().map(|f| f.iter().filter(|&&i| labels[i] == c).count()).collect();
                let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
                prop_assert!(hi - lo <= 1);
            }
            prop_assert_eq!(stratified_folds(&labels, k, seed).unwrap(), folds);
        }
    }
}
