//! Ad-hoc stage timing for the resize pipeline (profiling aid).

use obqsim_core::distributions::FillerDistribution;
use obqsim_core::resizer::{mark_cointoss, resize, shuffle, trim, TrimStrategy};
use obqsim_core::{LeakageLedger, OpId, PaddedTable, Schema};
use std::time::Instant;

fn table(rows: u64, cols: u64) -> PaddedTable {
    let names: Vec<String> = (0..cols).map(|c| format!("c{c}")).collect();
    let schema = Schema::shared(names).unwrap();
    let data: Vec<Vec<i64>> = (0..rows as i64)
        .map(|r| (0..cols as i64).map(|c| r ^ c).collect())
        .collect();
    let valid: Vec<bool> = (0..rows).map(|r| r % 10 == 0).collect();
    PaddedTable::new(schema, data, valid, OpId(0)).unwrap()
}

fn main() {
    for &n in &[1_000u64, 10_000, 100_000, 1_000_000] {
        let t = table(n, 4);
        let mut best = [u64::MAX; 4];
        for rep in 0..5u64 {
            let input = t.clone();
            let mut rng_mark = obqsim_core::rng::derive("m", &[rep]);
            let t0 = Instant::now();
            let keep = mark_cointoss(&input, 0.25, &mut rng_mark).unwrap();
            let t1 = Instant::now();
            let mut rng_sh = obqsim_core::rng::derive("s", &[rep]);
            let (shuffled, keep) = shuffle(input, keep, &mut rng_sh).unwrap();
            let t2 = Instant::now();
            let mut ledger = LeakageLedger::new();
            let out = trim(shuffled, &keep, &mut ledger).unwrap();
            let t3 = Instant::now();
            std::hint::black_box(out.public_size());
            best[0] = best[0].min((t1 - t0).as_nanos() as u64);
            best[1] = best[1].min((t2 - t1).as_nanos() as u64);
            best[2] = best[2].min((t3 - t2).as_nanos() as u64);

            let input2 = t.clone();
            let mut ledger2 = LeakageLedger::new();
            let s = TrimStrategy::CoinToss(FillerDistribution::Beta {
                alpha: 2.0,
                beta: 6.0,
            });
            let t4 = Instant::now();
            let out2 = resize(input2, &s, rep, OpId::resizer_over(OpId(0)), &mut ledger2).unwrap();
            let t5 = Instant::now();
            std::hint::black_box(out2.public_size());
            best[3] = best[3].min((t5 - t4).as_nanos() as u64);
        }
        println!(
            "n={n:>8}  mark={:>10}  shuffle={:>10}  trim={:>10}  full_resize={:>10}",
            best[0], best[1], best[2], best[3]
        );
    }
}
