use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::data::PartitionSpec;
use crate::federation::{ClientState, RoundReport};

pub const ROUNDS_CSV_HEADER: &str =
    "round,client,participated,test_accuracy,mta,k_eff,coalition,shapley,weights";

fn joined<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

/// One row per round per client. Wall time is left out so the file only
/// depends on the config and seed.
pub fn write_rounds_csv<W: Write>(reports: &[RoundReport], mut out: W) -> io::Result<()> {
    writeln!(out, "{ROUNDS_CSV_HEADER}")?;
    for r in reports {
        for c in &r.clients {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.round,
                c.client,
                c.participated,
                c.test_accuracy,
                r.mta,
                c.k_eff,
                joined(&c.coalition),
                joined(&c.shapley),
                joined(&c.weights),
            )?;
        }
    }
    out.flush()
}

pub fn write_matrix_csv<W: Write, T: ToString>(rows: &[Vec<T>], mut out: W) -> io::Result<()> {
    for row in rows {
        let line: Vec<String> = row.iter().map(T::to_string).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()
}

/// Writes `relevance_final.csv` (row `i`, column `j` is client `i`'s score
/// for peer `j`) and the 0/1 label-overlap matrix `relevance_truth.csv`.
pub fn export_relevance_heatmap(
    clients: &[ClientState],
    partition: &PartitionSpec,
    dir: &Path,
) -> io::Result<()> {
    let relevance: Vec<Vec<f64>> = clients.iter().map(|c| c.relevance.clone()).collect();
    write_matrix_csv(
        &relevance,
        BufWriter::new(File::create(dir.join("relevance_final.csv"))?),
    )?;
    let truth: Vec<Vec<u8>> = partition
        .relevance_ground_truth()
        .into_iter()
        .map(|row| row.into_iter().map(u8::from).collect())
        .collect();
    write_matrix_csv(
        &truth,
        BufWriter::new(File::create(dir.join("relevance_truth.csv"))?),
    )
}
