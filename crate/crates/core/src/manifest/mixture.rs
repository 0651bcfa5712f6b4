//! Training-mixture tables and deterministic manifest composition.
//!
//! A mixture table declares how many examples each (task, input type) pair
//! contributes to a training stage. Composing a manifest scales the table by
//! a fraction using largest-remainder apportionment (exact total
//! conservation, no floating drift) and shuffles the expanded entries with a
//! seeded, platform-stable PRNG.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Task family of a training example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    GeneralQa,
    Reasoning,
    Captioning,
    OcrDoc,
    Textbook,
    ChartTable,
    ImageDiff,
}

impl TaskKind {
    pub const ALL: [TaskKind; 7] = [
        TaskKind::GeneralQa,
        TaskKind::Reasoning,
        TaskKind::Captioning,
        TaskKind::OcrDoc,
        TaskKind::Textbook,
        TaskKind::ChartTable,
        TaskKind::ImageDiff,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TaskKind::GeneralQa => "general_qa",
            TaskKind::Reasoning => "reasoning",
            TaskKind::Captioning => "captioning",
            TaskKind::OcrDoc => "ocr_doc",
            TaskKind::Textbook => "textbook",
            TaskKind::ChartTable => "chart_table",
            TaskKind::ImageDiff => "image_diff",
        }
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskKind::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::parse(format!("unknown task {s:?}")))
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Input modality of a training example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputType {
    MultiImage,
    SingleImage,
    TextOnly,
}

impl InputType {
    pub const ALL: [InputType; 3] = [
        InputType::MultiImage,
        InputType::SingleImage,
        InputType::TextOnly,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            InputType::MultiImage => "multi_image",
            InputType::SingleImage => "single_image",
            InputType::TextOnly => "text_only",
        }
    }
}

impl FromStr for InputType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InputType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::parse(format!("unknown input type {s:?}")))
    }
}

impl fmt::Display for InputType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One mixture line: how many examples a (task, input type) pair supplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixtureRow {
    pub task: TaskKind,
    pub input_type: InputType,
    pub count: u64,
}

/// A full stage mixture. `total` always equals the row sum; construction
/// and loading enforce it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixtureTable {
    pub name: String,
    pub rows: Vec<MixtureRow>,
    pub total: u64,
}

impl MixtureTable {
    /// Builds a table from rows, computing the total and rejecting
    /// duplicate (task, input type) pairs.
    pub fn new(name: impl Into<String>, rows: Vec<MixtureRow>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if rows[..i]
                .iter()
                .any(|r| r.task == row.task && r.input_type == row.input_type)
            {
                return Err(Error::Validation(format!(
                    "duplicate mixture row ({}, {})",
                    row.task, row.input_type
                )));
            }
        }
        let total = rows.iter().map(|r| r.count).sum();
        Ok(Self {
            name: name.into(),
            rows,
            total,
        })
    }
}

/// Parses a mixture CSV (`task,input_type,count` header).
///
/// An optional `total,all,N` row declares the expected total; when present
/// it is cross-checked against the computed row sum and a mismatch is a
/// validation error reporting both values.
pub fn parse_mixture_csv(name: &str, text: &str) -> Result<MixtureTable> {
    #[derive(Deserialize)]
    struct RawRow {
        task: String,
        input_type: String,
        count: u64,
    }

    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    {
        let headers = reader.headers().map_err(|e| Error::parse(e.to_string()))?;
        if headers != vec!["task", "input_type", "count"] {
            return Err(Error::parse(format!(
                "expected header task,input_type,count, got {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
    }

    let mut rows = Vec::new();
    let mut declared_total: Option<u64> = None;
    for record in reader.deserialize::<RawRow>() {
        let raw = record.map_err(|e| Error::parse(e.to_string()))?;
        if raw.task == "total" {
            if raw.input_type != "all" {
                return Err(Error::parse(format!(
                    "total row must use input_type \"all\", got {:?}",
                    raw.input_type
                )));
            }
            if declared_total.is_some() {
                return Err(Error::parse("duplicate total row"));
            }
            declared_total = Some(raw.count);
            continue;
        }
        rows.push(MixtureRow {
            task: raw.task.parse()?,
            input_type: raw.input_type.parse()?,
            count: raw.count,
        });
    }
    if rows.is_empty() {
        return Err(Error::parse("mixture table has no data rows"));
    }

    let table = MixtureTable::new(name, rows)?;
    if let Some(declared) = declared_total {
        if declared != table.total {
            return Err(Error::Validation(format!(
                "mixture {} declares total {declared} but rows sum to {}",
                table.name, table.total
            )));
        }
    }
    Ok(table)
}

/// Loads a mixture CSV from disk; the table name is the file stem.
pub fn load_mixture(path: impl AsRef<Path>) -> Result<MixtureTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "mixture".to_string());
    parse_mixture_csv(&name, &text).map_err(|e| e.with_path(path))
}

/// One manifest line: a synthetic sample id plus its mixture coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub task: TaskKind,
    pub input_type: InputType,
}

/// A materialized, shuffled stage manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub seed: u64,
    pub scale: f64,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Writes header line then one JSON entry per line.
    pub fn write_jsonl(&self, mut out: impl Write) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Header<'a> {
            schema_version: u32,
            stage: &'a str,
            seed: u64,
            scale: f64,
            total: usize,
        }
        let header = Header {
            schema_version: 1,
            stage: &self.stage,
            seed: self.seed,
            scale: self.scale,
            total: self.entries.len(),
        };
        writeln!(out, "{}", serde_json::to_string(&header).expect("header serializes"))?;
        for entry in &self.entries {
            writeln!(out, "{}", serde_json::to_string(entry).expect("entry serializes"))?;
        }
        Ok(())
    }
}

/// Scales each row by `scale` with largest-remainder apportionment.
///
/// Per-row counts start at `floor(count * scale)`; the remaining
/// `round(total * scale) - sum(floors)` units go to the rows with the
/// largest fractional remainders (ties broken by row order). At scale 1 the
/// result is exact. Returns `(per-row counts, target total)`.
pub fn apportion(rows: &[u64], total: u64, scale: f64) -> Result<(Vec<u64>, u64)> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::arg(format!("scale must be in (0, 1], got {scale}")));
    }
    let target = (total as f64 * scale).round() as u64;
    let mut counts: Vec<u64> = Vec::with_capacity(rows.len());
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(rows.len());
    for (i, &count) in rows.iter().enumerate() {
        let exact = count as f64 * scale;
        let base = exact.floor();
        counts.push(base as u64);
        remainders.push((i, exact - base));
    }
    let assigned: u64 = counts.iter().sum();
    let mut leftover = target.saturating_sub(assigned);
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    while leftover > 0 {
        // One pass nearly always suffices; the loop guards the degenerate
        // case where rounding error leaves more units than rows.
        for &(i, _) in &remainders {
            if leftover == 0 {
                break;
            }
            counts[i] += 1;
            leftover -= 1;
        }
    }
    Ok((counts, target))
}

/// Materializes a scaled, shuffled manifest from a table.
///
/// Entry ids are `stage/task/input_type/index`. The shuffle is a
/// Fisher-Yates pass driven by a ChaCha8 stream seeded with `seed`, so the
/// result is identical on every platform.
pub fn compose_mixture(table: &MixtureTable, scale: f64, seed: u64) -> Result<Manifest> {
    let row_counts: Vec<u64> = table.rows.iter().map(|r| r.count).collect();
    let (scaled, target) = apportion(&row_counts, table.total, scale)?;

    let mut entries = Vec::with_capacity(target as usize);
    for (row, &n) in table.rows.iter().zip(&scaled) {
        for i in 0..n {
            entries.push(ManifestEntry {
                id: format!("{}/{}/{}/{i}", table.name, row.task, row.input_type),
                task: row.task,
                input_type: row.input_type,
            });
        }
    }
    debug_assert_eq!(entries.len() as u64, target);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    entries.shuffle(&mut rng);
    Ok(Manifest {
        stage: table.name.clone(),
        seed,
        scale,
        entries,
    })
}

/// Per-task share of a table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskShare {
    pub task: TaskKind,
    pub count: u64,
    /// Exact fraction of the table total.
    pub share: f64,
}

impl TaskShare {
    /// Share as a percentage rounded to one decimal place.
    pub fn percent(&self) -> f64 {
        (self.share * 1000.0).round() / 10.0
    }
}

/// Per-task shares (summed over input types), descending by count, tasks
/// with zero examples omitted.
pub fn mixture_stats(table: &MixtureTable) -> Result<Vec<TaskShare>> {
    if table.rows.is_empty() || table.total == 0 {
        return Err(Error::arg("mixture table is empty"));
    }
    let mut shares: Vec<TaskShare> = TaskKind::ALL
        .into_iter()
        .filter_map(|task| {
            let count: u64 = table
                .rows
                .iter()
                .filter(|r| r.task == task)
                .map(|r| r.count)
                .sum();
            (count > 0).then(|| TaskShare {
                task,
                count,
                share: count as f64 / table.total as f64,
            })
        })
        .collect();
    shares.sort_by(|a, b| b.count.cmp(&a.count).then(a.task.cmp(&b.task)));
    Ok(shares)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_table() -> MixtureTable {
        MixtureTable::new(
            "test",
            vec![
                MixtureRow {
                    task: TaskKind::OcrDoc,
                    input_type: InputType::SingleImage,
                    count: 60,
                },
                MixtureRow {
                    task: TaskKind::Captioning,
                    input_type: InputType::SingleImage,
                    count: 30,
                },
                MixtureRow {
                    task: TaskKind::GeneralQa,
                    input_type: InputType::TextOnly,
                    count: 10,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn task_and_input_round_trip_strings() {
        for task in TaskKind::ALL {
            assert_eq!(task.as_str().parse::<TaskKind>().unwrap(), task);
        }
        for it in InputType::ALL {
            assert_eq!(it.as_str().parse::<InputType>().unwrap(), it);
        }
        assert!("no_such_task".parse::<TaskKind>().is_err());
    }

    #[test]
    fn table_rejects_duplicate_pairs() {
        let row = MixtureRow {
            task: TaskKind::OcrDoc,
            input_type: InputType::SingleImage,
            count: 5,
        };
        assert!(matches!(
            MixtureTable::new("dup", vec![row, row]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn csv_single_row_parses() {
        let table =
            parse_mixture_csv("tiny", "task,input_type,count\nocr_doc,single_image,10\n").unwrap();
        assert_eq!(table.total, 10);
        assert_eq!(table.rows.len(), 1);
    }

    #[test]
    fn csv_total_row_cross_checks() {
        let ok = "task,input_type,count\nocr_doc,single_image,10\ntotal,all,10\n";
        assert_eq!(parse_mixture_csv("t", ok).unwrap().total, 10);
        let bad = "task,input_type,count\nocr_doc,single_image,10\ntotal,all,11\n";
        let err = parse_mixture_csv("t", bad).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("11") && msg.contains("10"), "{msg}");
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(parse_mixture_csv("t", "not,a,header\n1,2,3\n").is_err());
        assert!(parse_mixture_csv("t", "task,input_type,count\nocr_doc,single_image,ten\n")
            .is_err());
        assert!(parse_mixture_csv("t", "task,input_type,count\n").is_err());
    }

    #[test]
    fn apportion_scale_one_is_exact() {
        let rows = vec![143_000u64, 1_966_936, 3_141_265];
        let total: u64 = rows.iter().sum();
        let (counts, target) = apportion(&rows, total, 1.0).unwrap();
        assert_eq!(counts, rows);
        assert_eq!(target, total);
    }

    #[test]
    fn apportion_conserves_total_at_small_scale() {
        let rows = vec![143_000u64, 1_966_936, 3_141_265];
        let (counts, target) = apportion(&rows, 5_251_201, 1e-4).unwrap();
        assert_eq!(target, 525);
        assert_eq!(counts.iter().sum::<u64>(), 525);
        // Hand apportionment: floors 14/196/314, one leftover goes to the
        // largest remainder 0.6936.
        assert_eq!(counts, vec![14, 197, 314]);
    }

    #[test]
    fn apportion_rejects_out_of_range_scale() {
        assert!(apportion(&[1], 1, 0.0).is_err());
        assert!(apportion(&[1], 1, 1.5).is_err());
        assert!(apportion(&[1], 1, -0.1).is_err());
    }

    #[test]
    fn compose_counts_match_apportionment() {
        let table = small_table();
        let manifest = compose_mixture(&table, 0.5, 9).unwrap();
        assert_eq!(manifest.entries.len(), 50);
        let ocr = manifest
            .entries
            .iter()
            .filter(|e| e.task == TaskKind::OcrDoc)
            .count();
        assert_eq!(ocr, 30);
    }

    #[test]
    fn compose_is_deterministic_and_seed_sensitive() {
        let table = small_table();
        let a = compose_mixture(&table, 1.0, 7).unwrap();
        let b = compose_mixture(&table, 1.0, 7).unwrap();
        assert_eq!(a, b);
        let c = compose_mixture(&table, 1.0, 8).unwrap();
        assert_ne!(a.entries, c.entries);
    }

    #[test]
    fn compose_shuffle_is_a_permutation() {
        let table = small_table();
        let manifest = compose_mixture(&table, 1.0, 3).unwrap();
        let mut ids: Vec<&str> = manifest.entries.iter().map(|e| e.id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), table.total as usize);
    }

    #[test]
    fn compose_single_row_table_is_uniform() {
        let table = MixtureTable::new(
            "solo",
            vec![MixtureRow {
                task: TaskKind::ChartTable,
                input_type: InputType::SingleImage,
                count: 12,
            }],
        )
        .unwrap();
        let manifest = compose_mixture(&table, 0.5, 1).unwrap();
        assert_eq!(manifest.entries.len(), 6);
        assert!(manifest
            .entries
            .iter()
            .all(|e| e.task == TaskKind::ChartTable && e.input_type == InputType::SingleImage));
    }

    #[test]
    fn manifest_jsonl_has_header_and_entries() {
        let table = small_table();
        let manifest = compose_mixture(&table, 0.1, 2).unwrap();
        let mut buf = Vec::new();
        manifest.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), manifest.entries.len() + 1);
        let header: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(header["schema_version"], 1);
        assert_eq!(header["total"], manifest.entries.len());
        let first: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
        assert!(first["id"].as_str().unwrap().starts_with("test/"));
    }

    #[test]
    fn stats_shares_sum_to_one() {
        let table = small_table();
        let stats = mixture_stats(&table).unwrap();
        let sum: f64 = stats.iter().map(|s| s.share).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert_eq!(stats[0].task, TaskKind::OcrDoc);
        assert_eq!(stats[0].percent(), 60.0);
    }

    #[test]
    fn stats_single_row_is_total_share() {
        let table = MixtureTable::new(
            "solo",
            vec![MixtureRow {
                task: TaskKind::Reasoning,
                input_type: InputType::TextOnly,
                count: 4,
            }],
        )
        .unwrap();
        let stats = mixture_stats(&table).unwrap();
        assert_eq!(stats.len(), 1);
        assert_eq!(stats[0].percent(), 100.0);
    }
}
