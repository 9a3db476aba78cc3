use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Disjoint train / test / tune positions covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub tune: Vec<usize>,
}

impl SplitSpec {
    pub fn len(&self) -> usize {
        self.train.len() + self.test.len() + self.tune.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Seeded shuffle of `0..n` cut into 2/3 train, 1/6 test, 1/6 tune.
///
/// Test and tune each get `round(n / 6)`; train takes the remainder. Each
/// part is sorted.
pub fn make_split(n: usize, seed: u64) -> SplitSpec {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let sixth = (n as f64 / 6.0).round() as usize;
    let mut test = order[..sixth].to_vec();
    let mut tune = order[sixth..2 * sixth].to_vec();
    let mut train = order[2 * sixth..].to_vec();
    test.sort_unstable();
    tune.sort_unstable();
    train.sort_unstable();
    SplitSpec { train, test, tune }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sizes() {
        let s = make_split(6, 1);
        assert_eq!((s.train.len(), s.test.len(), s.tune.len()), (4, 1, 1));
        let s = make_split(600, 1);
        assert_eq!((s.train.len(), s.test.len(), s.tune.len()), (400, 100, 100));
    }

    #[test]
    fn seeded() {
        assert_eq!(make_split(50, 9), make_split(50, 9));
        assert_ne!(make_split(50, 9), make_split(50, 10));
    }

    proptest! {
        #[test]
        fn partition(n in 0usize..500, seed in any::<u64>()) {
            let s = make_split(n, seed);
            let mut all: Vec<usize> = s.train.iter().chain(&s.test).chain(&s.tune).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            let nf = n as f64;
            prop_assert!((s.train.len() as f64 - nf * 2.0 / 3.0).abs() <= 1.0);
            prop_assert!((s.test.len() as f64 - nf / 6.0).abs() <= 1.0);
            prop_assert!((s.tune.len() as f64 - nf / 6.0).abs() <= 1.0);
        }
    }
}
