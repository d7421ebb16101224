// Count alignment entries and comparisons over a small (N, M) grid and
// check them against 2NM and c * NM log2(NM).
//
//     cargo run --release --example complexity_bound

use lgca::{verify_bound, BenchMode};

fn main() -> lgca::Result<()> {
    let report = verify_bound(&[16, 64, 256], &[8, 32], 2, BenchMode::Lgca)?;
    println!("{:>5} {:>4} {:>9} {:>9} {:>9} {:>11} {:>6}", "N", "M", "Q entries", "entries", "2NM", "comparisons", "c");
    for p in &report.points {
        println!(
            "{:>5} {:>4} {:>9} {:>9} {:>9} {:>11} {:>6.3}",
            p.n, p.m, p.q.matrix_entries, p.lgca.matrix_entries, p.entries_bound, p.lgca.sort_comparisons, p.comparison_constant
        );
    }
    println!("fitted c = {:.4} (limit {})", report.fitted_c, report.c_limit);
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    print!("\n{}", String::from_utf8_lossy(&csv));
    Ok(())
}
