use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DesignTable, DoeError};

/// Assigns a feed batch to every run so that per-batch counts differ by at
/// most one. Which batches receive the extra run, and the run-to-batch
/// mapping, come from a seeded shuffle.
pub fn allocate_batches(
    design: &DesignTable,
    batches: &[String],
    seed: u64,
) -> Result<DesignTable, DoeError> {
    if batches.is_empty() {
        return Err(DoeError::NoBatches);
    }
    if design.is_allocated() {
        return Err(DoeError::AlreadyAllocated);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = design.len();
    let b = batches.len();

    let mut order: Vec<usize> = (0..b).collect();
    order.shuffle(&mut rng);
    let mut pool: Vec<&String> = Vec::with_capacity(n);
    for (rank, &idx) in order.iter().enumerate() {
        let count = n / b + usize::from(rank < n % b);
        pool.extend(std::iter::repeat_n(&batches[idx], count));
    }
    pool.shuffle(&mut rng);

    let mut out = design.clone();
    for (row, batch) in out.rows.iter_mut().zip(pool) {
        row.batch_id = Some(batch.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doe::generate_dsd;
    use crate::params::default_factors;
    use std::collections::HashMap;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("B{i:02}")).collect()
    }

    fn counts(d: &DesignTable) -> HashMap<String, usize> {
        let mut m = HashMap::new();
        for r in &d.rows {
            *m.entry(r.batch_id.clone().unwrap()).or_default() += 1;
        }
        m
    }

    #[test]
    fn twenty_runs_ten_batches() {
        let d = generate_dsd(&default_factors(), 2, 3, 0).unwrap();
        let a = allocate_batches(&d, &ids(10), 11).unwrap();
        let c = counts(&a);
        assert_eq!(c.len(), 10);
        assert!(c.values().all(|&v| v == 2));
    }

    #[test]
    fn twenty_runs_three_batches() {
        let d = generate_dsd(&default_factors(), 2, 3, 0).unwrap();
        let a = allocate_batches(&d, &ids(3), 4).unwrap();
        let c = counts(&a);
        assert_eq!(c.values().sum::<usize>(), 20);
        assert!(c.values().all(|&v| v == 6 || v == 7));
    }

    #[test]
    fn deterministic_per_seed() {
        let d = generate_dsd(&default_factors(), 2, 3, 0).unwrap();
        let a = allocate_batches(&d, &ids(7), 99).unwrap();
        let b = allocate_batches(&d, &ids(7), 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn refuses_second_allocation() {
        let d = generate_dsd(&default_factors(), 2, 3, 0).unwrap();
        let a = allocate_batches(&d, &ids(2), 1).unwrap();
        assert_eq!(allocate_batches(&a, &ids(2), 1), Err(DoeError::AlreadyAllocated));
        assert_eq!(allocate_batches(&d, &[], 1), Err(DoeError::NoBatches));
    }

    #[test]
    fn more_batches_than_runs() {
        let d = generate_dsd(&default_factors()[..2], 0, 0, 0).unwrap();
        let a = allocate_batches(&d, &ids(9), 3).unwrap();
        let c = counts(&a);
        assert_eq!(c.len(), 5);
        assert!(c.values().all(|&v| v == 1));
    }
}
