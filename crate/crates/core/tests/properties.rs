//! Property tests over the resizer pipeline and result-set semantics.

use obqsim_core::distributions::FillerDistribution;
use obqsim_core::resizer::{resize, sort_and_cut, TrimStrategy};
use obqsim_core::{multiset_equal, LeakageLedger, OpId, PaddedTable, ResultSet, Schema};
use proptest::prelude::*;

fn padded_table(values: Vec<i64>, valid: Vec<bool>) -> PaddedTable {
    let rows = values.into_iter().map(|v| vec![v]).collect();
    PaddedTable::new(Schema::shared(vec!["x"]).unwrap(), rows, valid, OpId(0)).unwrap()
}

fn strategy_from(kind: u8, dist: u8) -> TrimStrategy {
    let dist = match dist % 4 {
        0 => FillerDistribution::beta(2.0, 6.0).unwrap(),
        1 => FillerDistribution::tlap(0.5, 5e-5, 1.0).unwrap(),
        2 => FillerDistribution::fixed_fraction(0.0).unwrap(),
        _ => FillerDistribution::fixed_fraction(0.6).unwrap(),
    };
    match kind % 4 {
        0 => TrimStrategy::None,
        1 => TrimStrategy::CoinToss(dist),
        2 => TrimStrategy::CounterBased(dist),
        _ => TrimStrategy::SortAndCut(dist),
    }
}

proptest! {
    /// Resizing never loses or invents valid tuples, discloses exactly one
    /// trimmed size (unless pass-through), and keeps T <= S <= N.
    #[test]
    fn resize_is_lossless(
        values in prop::collection::vec(-50i64..50, 1..60),
        valid_bits in prop::collection::vec(any::<bool>(), 1..60),
        kind in any::<u8>(),
        dist in any::<u8>(),
        seed in any::<u64>(),
    ) {
        let n = values.len().min(valid_bits.len());
        let table = padded_table(values[..n].to_vec(), valid_bits[..n].to_vec());
        let strategy = strategy_from(kind, dist);
        let before = table.induced_result();
        let t = table.true_count();

        let mut ledger = LeakageLedger::new();
        let out = resize(table, &strategy, seed, OpId::resizer_over(OpId(0)), &mut ledger)
            .unwrap();

        prop_assert!(multiset_equal(&before, &out.induced_result()).unwrap());
        prop_assert!(out.true_count() == t);
        prop_assert!(out.public_size() >= t && out.public_size() <= n);
        let expected_entries = usize::from(!strategy.is_none());
        prop_assert_eq!(ledger.len(), expected_entries);
        if let Some(entry) = ledger.entries().first() {
            prop_assert_eq!(entry.value, out.public_size() as u64);
        }
    }

    /// sort&cut keeps exactly min(T + eta, N) rows, valid rows first.
    #[test]
    fn sort_and_cut_size_is_exact(
        values in prop::collection::vec(-50i64..50, 1..60),
        valid_bits in prop::collection::vec(any::<bool>(), 1..60),
        eta in 0u64..80,
    ) {
        let n = values.len().min(valid_bits.len());
        let table = padded_table(values[..n].to_vec(), valid_bits[..n].to_vec());
        let t = table.true_count();
        let mut ledger = LeakageLedger::new();
        let out = sort_and_cut(table, eta, &mut ledger).unwrap();
        let expected = (t as u64 + eta).min(n as u64) as usize;
        prop_assert_eq!(out.public_size(), expected);
        // Fillers occupy a contiguous suffix.
        let first_filler = out.valid().iter().position(|v| !v).unwrap_or(expected);
        prop_assert!(out.valid()[first_filler..].iter().all(|v| !v));
        prop_assert_eq!(out.true_count(), t);
    }

    /// Multiset equality is permutation-invariant and duplicate-sensitive.
    #[test]
    fn multiset_semantics(
        rows in prop::collection::vec(prop::collection::vec(-5i64..5, 2), 0..20),
        swap_a in any::<prop::sample::Index>(),
        swap_b in any::<prop::sample::Index>(),
    ) {
        let schema = Schema::shared(vec!["a", "b"]).unwrap();
        let base = ResultSet::new(schema.clone(), rows.clone());

        let mut permuted = rows.clone();
        if !permuted.is_empty() {
            let (i, j) = (swap_a.index(permuted.len()), swap_b.index(permuted.len()));
            permuted.swap(i, j);
        }
        prop_assert!(multiset_equal(&base, &ResultSet::new(schema.clone(), permuted)).unwrap());

        if !rows.is_empty() {
            let mut extra = rows.clone();
            extra.push(rows[0].clone());
            prop_assert!(!multiset_equal(&base, &ResultSet::new(schema, extra)).unwrap());
        }
    }
}
