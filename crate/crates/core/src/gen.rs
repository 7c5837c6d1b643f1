//! Seeded generation of message-set corpora.
//!
//! Every set draws from its own ChaCha stream selected by
//! `(seed, set_index)`, so sets can be generated in any order or in
//! parallel with identical output.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{self, IoError, Provenance};
use crate::model::{validate_message_set, Message, MessageSet, Ticks};

const MAX_ATTEMPTS: usize = 100;
/// Slack allowed between the realised and the target utilization after
/// rounding transmission times to whole ticks.
pub const UTIL_SLACK: f64 = 0.05;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("set {set_index}: no feasible message set after {MAX_ATTEMPTS} attempts")]
    InfeasibleParams { set_index: usize },
    #[error(transparent)]
    Io(#[from] IoError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub n_sets: usize,
    pub msgs_per_set: usize,
    /// When set, overrides `msgs_per_set` and spreads this many messages as
    /// evenly as possible over the sets.
    pub total_msgs: Option<usize>,
    pub target_util: f64,
    pub t_min: Ticks,
    pub t_max: Ticks,
    /// D is drawn uniformly from `[deadline_factor * T, T]`.
    pub deadline_factor: f64,
    /// J is drawn uniformly from `[0, jitter_factor * T]`.
    pub jitter_factor: f64,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            n_sets: 135,
            msgs_per_set: 19,
            total_msgs: Some(2600),
            target_util: 0.5,
            t_min: 1000,
            t_max: 5_000,
            deadline_factor: 0.8,
            jitter_factor: 0.1,
            seed: 1,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::InvalidParams(m.to_string()));
        if !(self.target_util > 0.0 && self.target_util < 1.0) {
            return bad("target_util must be in (0, 1)");
        }
        if self.t_min < 10 || self.t_max < self.t_min {
            return bad("period range must satisfy 10 <= t_min <= t_max");
        }
        if !(self.deadline_factor > 0.0 && self.deadline_factor <= 1.0) {
            return bad("deadline_factor must be in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.jitter_factor) {
            return bad("jitter_factor must be in [0, 1)");
        }
        Ok(())
    }

    /// Number of messages in set `set_index`.
    pub fn count_for(&self, set_index: usize) -> usize {
        match self.total_msgs {
            Some(total) if self.n_sets > 0 => {
                total / self.n_sets + usize::from(set_index < total % self.n_sets)
            }
            _ => self.msgs_per_set,
        }
    }

    /// Total messages across the corpus.
    pub fn total(&self) -> usize {
        (0..self.n_sets).map(|i| self.count_for(i)).sum()
    }
}

/// Independent RNG stream for one set.
fn set_rng(seed: u64, set_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(set_index as u64);
    rng
}

/// Unbiased split of `total` into `n` non-negative shares (UUniFast).
pub fn uunifast(rng: &mut impl Rng, n: usize, total: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut remaining = total;
    for i in 1..n {
        let r: f64 = rng.random();
        let next = remaining * r.powf(1.0 / (n - i) as f64);
        out.push(remaining - next);
        remaining = next;
    }
    if n > 0 {
        out.push(remaining);
    }
    out
}

fn draw(params: &GenParams, n: usize, rng: &mut ChaCha8Rng) -> Option<Vec<Message>> {
    let utils = uunifast(rng, n, params.target_util);
    let (lo, hi) = ((params.t_min as f64).ln(), (params.t_max as f64).ln());
    let mut raw = Vec::with_capacity(n);
    for (idx, u) in utils.into_iter().enumerate() {
        let t = (rng.random_range(lo..=hi).exp().round() as Ticks).clamp(params.t_min, params.t_max);
        let c = ((u * t as f64).round() as Ticks).max(1);
        let d_lo = ((params.deadline_factor * t as f64).ceil() as Ticks).clamp(1, t);
        let d = rng.random_range(d_lo..=t);
        let j_hi = (params.jitter_factor * t as f64).floor() as Ticks;
        let j = rng.random_range(0..=j_hi);
        if c > d {
            return None;
        }
        raw.push((idx as u32 + 1, c, t, d, j));
    }
    let util: f64 = raw.iter().map(|&(_, c, t, _, _)| c as f64 / t as f64).sum();
    if util > params.target_util + UTIL_SLACK {
        return None;
    }
    // Deadline-monotonic priorities, ties broken by id.
    raw.sort_by_key(|&(id, _, _, d, _)| (d, id));
    Some(
        raw.into_iter()
            .enumerate()
            .map(|(p, (id, c, t, d, j))| Message::new(id, p as u32 + 1, c, t, d, j))
            .collect(),
    )
}

/// Generates set `set_index` of the corpus described by `params`.
pub fn generate_message_set(params: &GenParams, set_index: usize) -> Result<MessageSet, GenError> {
    params.validate()?;
    let n = params.count_for(set_index);
    let mut rng = set_rng(params.seed, set_index);
    for _ in 0..MAX_ATTEMPTS {
        if let Some(messages) = draw(params, n, &mut rng) {
            return validate_message_set(messages)
                .map_err(|e| GenError::InvalidParams(e.to_string()));
        }
    }
    Err(GenError::InfeasibleParams { set_index })
}

/// Generates the whole corpus in memory.
pub fn generate_sets(params: &GenParams) -> Result<Vec<MessageSet>, GenError> {
    params.validate()?;
    (0..params.n_sets)
        .into_par_iter()
        .map(|i| generate_message_set(params, i))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub messages: usize,
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub params: GenParams,
    pub sets: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.toml";

pub fn set_file_name(set_index: usize) -> String {
    format!("set_{set_index:03}.csv")
}

/// Writes one CSV per set plus `manifest.toml` into `out_dir`.
pub fn generate_corpus(
    params: &GenParams,
    out_dir: &Path,
    provenance: &Provenance,
) -> Result<Manifest, GenError> {
    let sets = generate_sets(params)?;
    std::fs::create_dir_all(out_dir).map_err(|e| IoError::at(out_dir, e))?;
    let mut entries = Vec::with_capacity(sets.len());
    for (i, set) in sets.iter().enumerate() {
        let file = set_file_name(i);
        io::write_message_set(&out_dir.join(&file), set, provenance)?;
        entries.push(ManifestEntry {
            file,
            messages: set.len(),
            utilization: set.utilization(),
        });
    }
    let manifest = Manifest {
        seed: params.seed,
        params: params.clone(),
        sets: entries,
    };
    let body = toml::to_string(&manifest).map_err(|e| IoError::Format {
        path: out_dir.join(MANIFEST_FILE),
        message: e.to_string(),
    })?;
    io::write_with_header(&out_dir.join(MANIFEST_FILE), provenance, "# ", &body)?;
    Ok(manifest)
}

/// Loads a corpus directory, using the manifest's file order when present
/// and otherwise every `*.csv` file sorted by name.
pub fn load_corpus(dir: &Path) -> Result<Vec<MessageSet>, IoError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let files: Vec<PathBuf> = if manifest_path.exists() {
        let text = io::read_to_string(&manifest_path)?;
        let manifest: Manifest = toml::from_str(&text).map_err(|e| IoError::Format {
            path: manifest_path.clone(),
            message: e.to_string(),
        })?;
        manifest.sets.iter().map(|e| dir.join(&e.file)).collect()
    } else {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| IoError::at(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        files
    };
    files.iter().map(|p| io::read_message_set(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize, seed: u64) -> GenParams {
        GenParams {
            n_sets: 1,
            msgs_per_set: n,
            total_msgs: None,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn seeded_sets_are_identical() {
        let a = generate_message_set(&small(20, 7), 0).unwrap();
        let b = generate_message_set(&small(20, 7), 0).unwrap();
        assert_eq!(a, b);
        let c = generate_message_set(&small(20, 8), 0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn singleton_gets_whole_budget() {
        let set = generate_message_set(&small(1, 3), 0).unwrap();
        assert_eq!(set.len(), 1);
        assert!(set.utilization() <= 0.55);
    }

    #[test]
    fn default_corpus_scale() {
        let params = GenParams::default();
        assert_eq!(params.total(), 2600);
        let sets = generate_sets(&params).unwrap();
        assert_eq!(sets.len(), 135);
        let total: usize = sets.iter().map(MessageSet::len).sum();
        assert!(total.abs_diff(2600) <= 5);
        for set in &sets {
            assert!(set.flags().is_empty());
            assert!(set.utilization() <= params.target_util + UTIL_SLACK);
            assert_eq!(validate_message_set(set.messages().to_vec()).unwrap(), *set);
        }
    }

    #[test]
    fn priorities_are_deadline_monotonic() {
        let set = generate_message_set(&small(30, 11), 0).unwrap();
        let ms = set.messages();
        for (i, w) in ms.windows(2).enumerate() {
            assert!(w[0].d <= w[1].d);
            assert_eq!(w[0].priority as usize, i + 1);
        }
    }

    #[test]
    fn uunifast_sums_to_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = uunifast(&mut rng, 12, 0.7);
        assert_eq!(u.len(), 12);
        assert!((u.iter().sum::<f64>() - 0.7).abs() < 1e-12);
        assert!(u.iter().all(|&x| x >= 0.0));
        assert!(uunifast(&mut rng, 0, 0.7).is_empty());
    }

    #[test]
    fn infeasible_params_fail() {
        // Twenty messages with T = 10 at 10% load: every C rounds up to 1,
        // so the realised utilization is always 2.0.
        let params = GenParams {
            target_util: 0.1,
            t_min: 10,
            t_max: 10,
            ..small(20, 1)
        };
        assert!(matches!(
            generate_message_set(&params, 0),
            Err(GenError::InfeasibleParams { set_index: 0 })
        ));
        let invalid = GenParams {
            target_util: 1.2,
            ..small(3, 1)
        };
        assert!(matches!(
            generate_message_set(&invalid, 0),
            Err(GenError::InvalidParams(_))
        ));
    }

    #[test]
    fn count_distribution() {
        let p = GenParams {
            n_sets: 4,
            total_msgs: Some(10),
            ..Default::default()
        };
        assert_eq!((0..4).map(|i| p.count_for(i)).collect::<Vec<_>>(), vec![3, 3, 2, 2]);
    }
}
