//! CSV tables for `inspect --stats`.

use std::fmt::Write as _;

use sage_core::decode::DecodeStats;
use sage_core::tune::BitLenHistogram;

/// One named CSV table.
pub struct Table {
    pub name: &'static str,
    pub csv: String,
}

/// Dense rows from bit length 1 up to the largest observed one, so plots
/// show empty bins.
fn bit_length_table(name: &'static str, h: &BitLenHistogram) -> Table {
    let mut csv = String::from("bits,count\n");
    if let Some(max) = h.max_bit_len() {
        for b in 1..=max {
            let _ = writeln!(csv, "{b},{}", h.count(b));
        }
    }
    Table { name, csv }
}

pub fn tables(stats: &DecodeStats) -> Vec<Table> {
    let mut counts = String::from("mismatches,reads\n");
    for (m, n) in &stats.mismatch_counts {
        let _ = writeln!(counts, "{m},{n}");
    }

    let mut indels = String::from("length,blocks,cumulative_fraction\n");
    let total: u64 = stats.indel_lengths.values().sum();
    let mut seen = 0u64;
    for (len, n) in &stats.indel_lengths {
        seen += n;
        let _ = writeln!(indels, "{len},{n},{:.6}", seen as f64 / total as f64);
    }

    vec![
        bit_length_table("matching_deltas", &stats.matching_deltas),
        bit_length_table("mismatch_deltas", &stats.mismatch_deltas),
        Table {
            name: "mismatch_counts",
            csv: counts,
        },
        Table {
            name: "indel_lengths",
            csv: indels,
        },
    ]
}

/// All tables in one stream, each introduced by a `# name` line.
pub fn concatenated(tables: &[Table]) -> String {
    let mut s = String::new();
    for (i, t) in tables.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        let _ = writeln!(s, "# {}", t.name);
        s.push_str(&t.csv);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_stats_give_headers_only() {
        let t = tables(&DecodeStats::default());
        let csv: Vec<&str> = t.iter().map(|t| t.csv.as_str()).collect();
        assert_eq!(
            csv,
            [
                "bits,count\n",
                "bits,count\n",
                "mismatches,reads\n",
                "length,blocks,cumulative_fraction\n"
            ]
        );
    }

    #[test]
    fn bit_lengths_are_dense_and_cdf_ends_at_one() {
        let mut s = DecodeStats::default();
        s.matching_deltas.add(0);
        s.matching_deltas.add(9);
        s.indel_lengths.insert(1, 3);
        s.indel_lengths.insert(40, 1);
        let t = tables(&s);
        assert_eq!(t[0].csv, "bits,count\n1,1\n2,0\n3,0\n4,1\n");
        assert_eq!(t[3].csv, "length,blocks,cumulative_fraction\n1,3,0.750000\n40,1,1.000000\n");
    }
}
