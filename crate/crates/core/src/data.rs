//! Dataset ingestion, normalization, splitting, corruption, and a synthetic
//! correlated-task generator.
//!
//! CSV files carry a `smiles,value` header; rows whose SMILES fail to parse
//! are dropped (and counted), while malformed numeric values are hard
//! errors. Labels are normalized to zero mean and unit population standard
//! deviation. Splits are 80:20 train/test with four uniform folds inside the
//! train portion; scaffold mode keeps every ring framework on one side.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{GateError, Result};
use crate::smiles::{parse_smiles, scaffold_key};

/// One labeled molecule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub smiles: String,
    pub value: f64,
}

/// Label statistics used for normalization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

/// A named list of labeled molecules, optionally normalized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub records: Vec<Record>,
    /// Present once labels have been normalized; stores the original scale.
    pub norm: Option<NormStats>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, records: Vec<Record>) -> Dataset {
        Dataset { name: name.into(), records, norm: None }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.value).collect()
    }
}

/// Result of loading a CSV: the dataset plus the dropped-row count.
#[derive(Clone, Debug)]
pub struct CsvLoad {
    pub dataset: Dataset,
    /// Rows discarded because their SMILES failed to parse.
    pub dropped: usize,
}

/// Load a `smiles,value` CSV. Unparseable SMILES rows are dropped and
/// counted; malformed values or a bad header are errors naming the line.
pub fn load_csv(path: &Path, name: &str) -> Result<CsvLoad> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| GateError::Data { line: 1, message: "empty file".into() })??;
    if !header.trim().eq_ignore_ascii_case("smiles,value") {
        return Err(GateError::Data {
            line: 1,
            message: format!("expected header 'smiles,value', found '{}'", header.trim()),
        });
    }
    let mut records = Vec::new();
    let mut dropped = 0usize;
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let (smiles, value) = trimmed.split_once(',').ok_or_else(|| GateError::Data {
            line: line_no,
            message: "expected 'smiles,value'".into(),
        })?;
        let value: f64 = value.trim().parse().map_err(|_| GateError::Data {
            line: line_no,
            message: format!("non-numeric value '{}'", value.trim()),
        })?;
        if !value.is_finite() {
            return Err(GateError::Data {
                line: line_no,
                message: format!("non-finite value {value}"),
            });
        }
        if parse_smiles(smiles.trim()).is_ok() {
            records.push(Record { smiles: smiles.trim().to_string(), value });
        } else {
            dropped += 1;
        }
    }
    Ok(CsvLoad { dataset: Dataset::new(name, records), dropped })
}

/// Write a dataset back out as `smiles,value` CSV.
pub fn save_csv(path: &Path, dataset: &Dataset) -> Result<()> {
    use std::io::Write;
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "smiles,value")?;
    for r in &dataset.records {
        writeln!(f, "{},{}", r.smiles, r.value)?;
    }
    Ok(())
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Normalize labels to zero mean, unit population standard deviation.
pub fn normalize(dataset: &Dataset) -> Result<(Dataset, NormStats)> {
    let values = dataset.values();
    let distinct = {
        let mut v = values.clone();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.len()
    };
    if distinct < 2 {
        return Err(GateError::Parameter(format!(
            "normalization needs >= 2 distinct values, dataset '{}' has {distinct}",
            dataset.name
        )));
    }
    let (mean, std) = mean_std(&values);
    let stats = NormStats { mean, std };
    Ok((apply_norm(dataset, stats), stats))
}

/// Normalize with externally supplied statistics.
pub fn apply_norm(dataset: &Dataset, stats: NormStats) -> Dataset {
    let records = dataset
        .records
        .iter()
        .map(|r| Record { smiles: r.smiles.clone(), value: (r.value - stats.mean) / stats.std })
        .collect();
    Dataset { name: dataset.name.clone(), records, norm: Some(stats) }
}

/// Invert a normalized prediction back to the original scale.
pub fn denormalize(value: f64, stats: NormStats) -> f64 {
    value * stats.std + stats.mean
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

pub const FOLDS: usize = 4;
pub const TEST_FRACTION: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    Random,
    Scaffold,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Test,
}

/// Membership of one record in the split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub index: usize,
    /// Fold id (0..4) for train records, absent for test records.
    pub fold: Option<usize>,
    pub role: Role,
}

/// Deterministic record of train/test/fold membership for one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub name: String,
    pub mode: SplitMode,
    pub seed: u64,
    pub assignments: Vec<Assignment>,
    /// Indices whose labels were corrupted, when the corruption experiment
    /// produced this manifest.
    #[serde(default)]
    pub corrupted: Vec<usize>,
}

impl SplitManifest {
    pub fn test_indices(&self) -> Vec<usize> {
        self.assignments
            .iter()
            .filter(|a| a.role == Role::Test)
            .map(|a| a.index)
            .collect()
    }

    pub fn fold_indices(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .filter(|a| a.fold == Some(fold))
            .map(|a| a.index)
            .collect()
    }

    pub fn train_indices_excluding(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .filter(|a| a.role == Role::Train && a.fold != Some(fold))
            .map(|a| a.index)
            .collect()
    }

    pub fn train_indices(&self) -> Vec<usize> {
        self.assignments
            .iter()
            .filter(|a| a.role == Role::Train)
            .map(|a| a.index)
            .collect()
    }
}

fn check_size(dataset: &Dataset) -> Result<()> {
    if dataset.len() < 10 {
        return Err(GateError::Parameter(format!(
            "dataset '{}' too small to split ({} records, need >= 10)",
            dataset.name,
            dataset.len()
        )));
    }
    Ok(())
}

/// Random 80:20 split with four uniform folds inside the train portion.
pub fn split_random(dataset: &Dataset, seed: u64) -> Result<SplitManifest> {
    check_size(dataset)?;
    let n = dataset.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let test_count = (n as f64 * TEST_FRACTION).round() as usize;
    let mut assignments = vec![Assignment { index: 0, fold: None, role: Role::Test }; n];
    for (pos, &index) in order.iter().enumerate() {
        let a = if pos < test_count {
            Assignment { index, fold: None, role: Role::Test }
        } else {
            Assignment { index, fold: Some((pos - test_count) % FOLDS), role: Role::Train }
        };
        assignments[index] = a;
    }
    Ok(SplitManifest {
        name: dataset.name.clone(),
        mode: SplitMode::Random,
        seed,
        assignments,
        corrupted: Vec::new(),
    })
}

/// Scaffold split: molecules sharing a ring framework stay on one side.
///
/// Scaffold groups are placed greedily, largest first, into five bins (test
/// plus four folds) targeting `n/5` records each, so no scaffold key ever
/// crosses the train/test boundary or a fold boundary.
pub fn split_scaffold(dataset: &Dataset, seed: u64) -> Result<SplitManifest> {
    check_size(dataset)?;
    let mut groups: HashMap<String, Vec<usize>> = HashMap::new();
    for (i, r) in dataset.records.iter().enumerate() {
        let g = parse_smiles(&r.smiles)?;
        groups.entry(scaffold_key(&g)).or_default().push(i);
    }
    if groups.len() < FOLDS + 1 {
        return Err(GateError::Parameter(format!(
            "only {} scaffold groups in '{}' (need >= {}); consider a random split",
            groups.len(),
            dataset.name,
            FOLDS + 1
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keyed: Vec<(String, Vec<usize>)> = groups.into_iter().collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    keyed.shuffle(&mut rng);
    // Stable sort keeps the shuffled order among equal sizes.
    keyed.sort_by_key(|(_, members)| std::cmp::Reverse(members.len()));

    // Bin 0 is the test set; bins 1..=4 are folds 0..=3.
    let n = dataset.len() as f64;
    let mut loads = [0usize; FOLDS + 1];
    let target = n / (FOLDS + 1) as f64;
    let mut assignments: Vec<Assignment> = (0..dataset.len())
        .map(|index| Assignment { index, fold: None, role: Role::Test })
        .collect();
    for (_, members) in keyed {
        let bin = (0..=FOLDS)
            .max_by(|&a, &b| {
                let da = target - loads[a] as f64;
                let db = target - loads[b] as f64;
                da.partial_cmp(&db).unwrap().then(b.cmp(&a))
            })
            .unwrap();
        loads[bin] += members.len();
        for index in members {
            assignments[index] = if bin == 0 {
                Assignment { index, fold: None, role: Role::Test }
            } else {
                Assignment { index, fold: Some(bin - 1), role: Role::Train }
            };
        }
    }
    Ok(SplitManifest {
        name: dataset.name.clone(),
        mode: SplitMode::Scaffold,
        seed,
        assignments,
        corrupted: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// Corruption
// ---------------------------------------------------------------------------

/// One corrupted record with its pre-corruption label.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptedPoint {
    pub index: usize,
    pub original: f64,
}

/// Corrupt labels lying outside one standard deviation.
///
/// Requires a normalized dataset: every record with `|value| > 1` is a
/// candidate; a `fraction` of candidates (all by default) get their label
/// replaced by `-2 * sign(value)`, i.e. twice the standard deviation with
/// negation. Returns the corrupted dataset plus the affected indices with
/// their original values; no candidates yields the dataset unchanged.
pub fn corrupt(
    dataset: &Dataset,
    seed: u64,
    fraction: f64,
) -> Result<(Dataset, Vec<CorruptedPoint>)> {
    if dataset.norm.is_none() {
        return Err(GateError::Contract("corrupt requires a normalized dataset".into()));
    }
    if !(0.0..=1.0).contains(&fraction) {
        return Err(GateError::Parameter(format!(
            "corruption fraction {fraction} outside [0,1]"
        )));
    }
    let mut candidates: Vec<usize> = dataset
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.value.abs() > 1.0)
        .map(|(i, _)| i)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    candidates.shuffle(&mut rng);
    let keep = (candidates.len() as f64 * fraction).round() as usize;
    let mut chosen: Vec<usize> = candidates.into_iter().take(keep).collect();
    chosen.sort_unstable();

    let mut corrupted = dataset.clone();
    let mut points = Vec::with_capacity(chosen.len());
    for &i in &chosen {
        let original = corrupted.records[i].value;
        corrupted.records[i].value = -2.0 * original.signum();
        points.push(CorruptedPoint { index: i, original });
    }
    Ok((corrupted, points))
}

// ---------------------------------------------------------------------------
// Synthetic correlated pair
// ---------------------------------------------------------------------------

/// Generate a correlated target/source dataset pair from a small SMILES
/// grammar; see [`synth_pair_with`]. Label noise defaults to 0.1.
pub fn synth_pair(
    n_target: usize,
    n_source: usize,
    correlation: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    synth_pair_with(n_target, n_source, correlation, 0.1, seed)
}

/// Generate a synthetic transfer pair with the given label correlation.
///
/// A pool of `max(n_target, n_source)` random molecules is generated; the
/// target dataset takes the first `n_target`, the source the first
/// `n_source`, so the smaller dataset's molecules all appear in the larger
/// one with the other task's labels. A latent descriptor `u` (standardized
/// mix of atom count, ring count, and heteroatom fraction) drives both
/// labels: target `u + e_t`, source `rho*u + sqrt(1-rho^2)*w + e_s` with
/// per-molecule standard normal `w` and noise `e ~ N(0, noise^2)`.
pub fn synth_pair_with(
    n_target: usize,
    n_source: usize,
    correlation: f64,
    noise: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if !(0.0..=1.0).contains(&correlation) {
        return Err(GateError::Parameter(format!(
            "correlation {correlation} outside [0, 1]"
        )));
    }
    if n_target == 0 || n_source == 0 {
        return Err(GateError::Parameter("dataset sizes must be positive".into()));
    }
    let pool = n_target.max(n_source);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let molecules: Vec<String> = (0..pool).map(|_| random_smiles(&mut rng)).collect();

    // Structural descriptors, standardized over the pool.
    let mut atoms = Vec::with_capacity(pool);
    let mut rings = Vec::with_capacity(pool);
    let mut hetero = Vec::with_capacity(pool);
    for s in &molecules {
        let g = parse_smiles(s).expect("generator emits parseable SMILES");
        let n = g.num_atoms() as f64;
        atoms.push(n);
        rings.push((g.num_bonds() + 1).saturating_sub(g.num_atoms()) as f64);
        let het = g
            .atoms
            .iter()
            .filter(|a| a.element != crate::smiles::Element::C)
            .count() as f64;
        hetero.push(het / n);
    }
    let z = |values: &[f64]| -> Vec<f64> {
        let (mean, std) = mean_std(values);
        let std = if std > 0.0 { std } else { 1.0 };
        values.iter().map(|v| (v - mean) / std).collect()
    };
    let (za, zr, zh) = (z(&atoms), z(&rings), z(&hetero));
    let mix: Vec<f64> = (0..pool)
        .map(|i| (za[i] + zr[i] + zh[i]) / 3f64.sqrt())
        .collect();
    let u = z(&mix);

    let mut normal = |scale: f64, rng: &mut ChaCha8Rng| -> f64 {
        let v: f64 = StandardNormal.sample(rng);
        scale * v
    };
    let mut target = Vec::with_capacity(n_target);
    let mut source = Vec::with_capacity(n_source);
    let ortho = (1.0 - correlation * correlation).sqrt();
    for (i, s) in molecules.iter().enumerate() {
        let w = normal(1.0, &mut rng);
        let e_t = normal(noise, &mut rng);
        let e_s = normal(noise, &mut rng);
        if i < n_target {
            target.push(Record { smiles: s.clone(), value: u[i] + e_t });
        }
        if i < n_source {
            source.push(Record { smiles: s.clone(), value: correlation * u[i] + ortho * w + e_s });
        }
    }
    Ok((Dataset::new("synth-target", target), Dataset::new("synth-source", source)))
}

/// Random small molecule: either a decorated ring or a branched chain.
fn random_smiles<R: Rng>(rng: &mut R) -> String {
    if rng.random::<f64>() < 0.4 {
        random_ring(rng)
    } else {
        random_chain(rng, 2 + (rng.random::<u64>() % 5) as usize)
    }
}

fn random_atom<R: Rng>(rng: &mut R) -> &'static str {
    match rng.random::<u64>() % 10 {
        0 => "N",
        1 | 2 => "O",
        3 => "S",
        _ => "C",
    }
}

fn random_chain<R: Rng>(rng: &mut R, len: usize) -> String {
    let mut s = String::new();
    for i in 0..len {
        s.push_str(random_atom(rng));
        // Occasional single-atom branch off a middle position.
        if i > 0 && i + 1 < len && rng.random::<f64>() < 0.25 {
            s.push('(');
            s.push_str(random_atom(rng));
            s.push(')');
        }
    }
    s
}

fn random_ring<R: Rng>(rng: &mut R) -> String {
    let aromatic = rng.random::<f64>() < 0.5;
    let size = if aromatic { 6 } else { 5 + (rng.random::<u64>() % 2) as usize };
    let atom = if aromatic { "c" } else { "C" };
    let mut s = format!("{atom}1");
    for i in 1..size {
        s.push_str(atom);
        if i == size / 2 && rng.random::<f64>() < 0.5 {
            let chain = random_chain(rng, 1 + (rng.random::<u64>() % 3) as usize);
            s.push('(');
            s.push_str(&chain);
            s.push(')');
        }
    }
    s.push('1');
    if rng.random::<f64>() < 0.3 {
        s.push_str(&random_chain(rng, 1 + (rng.random::<u64>() % 2) as usize));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::pearson;

    fn dataset(values: &[f64]) -> Dataset {
        let records = values
            .iter()
            .map(|&v| Record { smiles: "CCO".to_string(), value: v })
            .collect();
        Dataset::new("test", records)
    }

    #[test]
    fn load_csv_basics() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "smiles,value\nCCO,1.5\nc1ccccc1,-2\n").unwrap();
        let load = load_csv(&path, "d").unwrap();
        assert_eq!(load.dataset.len(), 2);
        assert_eq!(load.dropped, 0);
    }

    #[test]
    fn load_csv_drops_bad_smiles_with_count() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "smiles,value\nC1CC,3.0\nCC,1.0\n").unwrap();
        let load = load_csv(&path, "d").unwrap();
        assert_eq!(load.dataset.len(), 1);
        assert_eq!(load.dropped, 1, "dangling ring closure row dropped");
    }

    #[test]
    fn load_csv_parses_scientific_notation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "smiles,value\nCC,1e3\n").unwrap();
        let load = load_csv(&path, "d").unwrap();
        assert_eq!(load.dataset.records[0].value, 1000.0);
    }

    #[test]
    fn load_csv_errors_name_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "wrong,header\nCC,1.0\n").unwrap();
        match load_csv(&path, "d") {
            Err(GateError::Data { line: 1, .. }) => {}
            other => panic!("expected header error, got {other:?}"),
        }
        std::fs::write(&path, "smiles,value\nCC,abc\n").unwrap();
        match load_csv(&path, "d") {
            Err(GateError::Data { line: 2, .. }) => {}
            other => panic!("expected value error, got {other:?}"),
        }
    }

    #[test]
    fn normalize_hand_case() {
        let (normalized, stats) = normalize(&dataset(&[0.0, 2.0])).unwrap();
        assert_eq!(stats.mean, 1.0);
        assert_eq!(stats.std, 1.0, "population std of [0,2]");
        assert_eq!(normalized.values(), vec![-1.0, 1.0]);
    }

    #[test]
    fn normalize_round_trip() {
        let d = dataset(&[3.3, -1.2, 0.05, 9.9, 2.4]);
        let (normalized, stats) = normalize(&d).unwrap();
        for (orig, norm) in d.records.iter().zip(&normalized.records) {
            assert!((denormalize(norm.value, stats) - orig.value).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_rejects_constant_labels() {
        assert!(normalize(&dataset(&[2.0, 2.0, 2.0])).is_err());
    }

    #[test]
    fn externally_supplied_stats_are_accepted() {
        // Reference scale for a heat-of-vaporization-style dataset.
        let stats = NormStats { mean: 43.77, std: 18.08 };
        let d = dataset(&[43.77, 61.85, 25.69]);
        let normalized = apply_norm(&d, stats);
        assert!((normalized.records[0].value).abs() < 1e-12);
        assert!((normalized.records[1].value - 1.0).abs() < 1e-12);
        assert!((normalized.records[2].value + 1.0).abs() < 1e-12);
        assert_eq!(normalized.norm, Some(stats));
    }

    #[test]
    fn random_split_exact_sizes() {
        let d = dataset(&(0..100).map(|i| i as f64).collect::<Vec<_>>());
        let m = split_random(&d, 7).unwrap();
        assert_eq!(m.test_indices().len(), 20);
        for f in 0..FOLDS {
            assert_eq!(m.fold_indices(f).len(), 20);
        }
        let all: std::collections::HashSet<usize> =
            m.assignments.iter().map(|a| a.index).collect();
        assert_eq!(all.len(), 100, "assignments cover every index");
    }

    #[test]
    fn splits_are_deterministic() {
        let d = dataset(&(0..50).map(|i| i as f64).collect::<Vec<_>>());
        assert_eq!(split_random(&d, 3).unwrap(), split_random(&d, 3).unwrap());
        assert_ne!(split_random(&d, 3).unwrap(), split_random(&d, 4).unwrap());
    }

    #[test]
    fn scaffold_split_groups_stay_together() {
        let mut records = Vec::new();
        // Five scaffold families with decorated members.
        let cores = ["c1ccccc1", "C1CCCCC1", "C1CCCC1", "c1ccncc1", "C1CCOC1"];
        for (i, core) in cores.iter().enumerate() {
            for j in 0..(3 + i) {
                let mut s = core.to_string();
                for _ in 0..j {
                    s.push('C');
                }
                records.push(Record { smiles: s, value: (i * 10 + j) as f64 });
            }
        }
        let d = Dataset::new("scaffolds", records);
        let m = split_scaffold(&d, 5).unwrap();

        let mut side: HashMap<String, Role> = HashMap::new();
        let mut fold_of: HashMap<String, Option<usize>> = HashMap::new();
        for a in &m.assignments {
            let g = parse_smiles(&d.records[a.index].smiles).unwrap();
            let key = scaffold_key(&g);
            if let Some(prev) = side.insert(key.clone(), a.role) {
                assert_eq!(prev, a.role, "scaffold crossed the train/test boundary");
            }
            if let Some(prev) = fold_of.insert(key, a.fold) {
                assert_eq!(prev, a.fold, "scaffold crossed a fold boundary");
            }
        }
        // Benzene derivatives all land on one side.
        let benzene_roles: Vec<Role> = m
            .assignments
            .iter()
            .filter(|a| d.records[a.index].smiles.starts_with("c1ccccc1"))
            .map(|a| a.role)
            .collect();
        assert!(benzene_roles.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn scaffold_split_needs_enough_groups() {
        let d = dataset(&(0..20).map(|i| i as f64).collect::<Vec<_>>());
        // All records share the "CCO" scaffold key.
        let err = split_scaffold(&d, 1).unwrap_err();
        assert!(err.to_string().contains("random"), "{err}");
    }

    #[test]
    fn corruption_rule() {
        let mut d = dataset(&[1.5, 0.5, -1.2, 0.9]);
        d.norm = Some(NormStats { mean: 0.0, std: 1.0 });
        let (corrupted, points) = corrupt(&d, 1, 1.0).unwrap();
        assert_eq!(corrupted.records[0].value, -2.0);
        assert_eq!(corrupted.records[1].value, 0.5, "below threshold, untouched");
        assert_eq!(corrupted.records[2].value, 2.0);
        assert_eq!(points.len(), 2, "corruption count equals candidate count");
        assert!(points.iter().any(|p| p.index == 0 && p.original == 1.5));
    }

    #[test]
    fn corruption_without_candidates_is_identity() {
        let mut d = dataset(&[0.5, -0.7, 0.2]);
        d.norm = Some(NormStats { mean: 0.0, std: 1.0 });
        let (corrupted, points) = corrupt(&d, 1, 1.0).unwrap();
        assert_eq!(corrupted, d);
        assert!(points.is_empty());
    }

    #[test]
    fn corruption_requires_normalized_input() {
        let d = dataset(&[1.5, 0.5]);
        assert!(corrupt(&d, 1, 1.0).is_err());
    }

    #[test]
    fn synth_pair_labels_identical_at_full_correlation_without_noise() {
        let (t, s) = synth_pair_with(50, 50, 1.0, 0.0, 9).unwrap();
        for (a, b) in t.records.iter().zip(&s.records) {
            assert_eq!(a.smiles, b.smiles);
            assert!((a.value - b.value).abs() < 1e-12);
        }
    }

    #[test]
    fn synth_pair_uncorrelated_labels() {
        let (t, s) = synth_pair(5000, 5000, 0.0, 13).unwrap();
        let r = pearson(&t.values(), &s.values()).unwrap();
        assert!(r.abs() < 0.05, "empirical correlation {r}");
    }

    #[test]
    fn synth_pair_high_correlation_shows_up_empirically() {
        let (t, s) = synth_pair(5000, 5000, 0.9, 14).unwrap();
        let r = pearson(&t.values(), &s.values()).unwrap();
        assert!(r > 0.8, "empirical correlation {r}");
    }

    #[test]
    fn synth_molecules_all_parse() {
        let (t, s) = synth_pair(300, 400, 0.5, 21).unwrap();
        for r in t.records.iter().chain(&s.records) {
            assert!(parse_smiles(&r.smiles).is_ok(), "unparseable: {}", r.smiles);
        }
        assert_eq!(t.len(), 300);
        assert_eq!(s.len(), 400);
    }

    #[test]
    fn synth_pair_is_deterministic() {
        let a = synth_pair(40, 60, 0.7, 42).unwrap();
        let b = synth_pair(40, 60, 0.7, 42).unwrap();
        assert_eq!(a, b);
    }
}
