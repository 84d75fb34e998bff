//! Dataset serialization: JSON Lines, one sequence per line, with an optional
//! `labels.json` sidecar mapping class ids to names.
//!
//! Line schema:
//!   {"id": string, "class_id": int, "fps": number, "joints": [[[x,y,z] x24] xT]}

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coupling::PseudoComposite;
use crate::error::{Error, Result};
use crate::motion::{ActionLabel, MixedLabel, MotionSequence, Pose, NUM_JOINTS};

#[derive(Debug, Serialize, Deserialize)]
struct SequenceRecord {
    id: String,
    class_id: usize,
    fps: f64,
    joints: Vec<Vec<[f64; 3]>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CompositeRecord {
    id: String,
    fps: f64,
    joints: Vec<Vec<[f64; 3]>>,
    lambda: f64,
    mixed_label: Vec<f64>,
    sources: (String, String),
    source_indices: (usize, usize),
    source_classes: (usize, usize),
}

fn frames_to_rows(frames: &[Pose]) -> Vec<Vec<[f64; 3]>> {
    frames.iter().map(|p| p.joints.to_vec()).collect()
}

fn rows_to_frames(rows: Vec<Vec<[f64; 3]>>, line: usize) -> Result<Vec<Pose>> {
    let mut frames = Vec::with_capacity(rows.len());
    for (t, row) in rows.into_iter().enumerate() {
        if row.len() != NUM_JOINTS {
            return Err(Error::Parse {
                line,
                msg: format!("frame {t} has {} joints, expected {NUM_JOINTS}", row.len()),
            });
        }
        let mut joints = [[0.0; 3]; NUM_JOINTS];
        for (n, j) in row.into_iter().enumerate() {
            joints[n] = j;
        }
        frames.push(Pose { joints });
    }
    Ok(frames)
}

/// A loaded dataset: sequences plus their stable string ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub sequences: Vec<MotionSequence>,
    pub ids: Vec<String>,
    /// Class names, indexed by class_id. Synthesized as "class-N" when no
    /// sidecar is present.
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    path.with_file_name("labels.json")
}

/// Save sequences as JSON Lines plus a `labels.json` sidecar. Output bytes are
/// deterministic for fixed input.
pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    for (seq, id) in dataset.sequences.iter().zip(&dataset.ids) {
        let rec = SequenceRecord {
            id: id.clone(),
            class_id: seq.label.class_id,
            fps: seq.fps,
            joints: frames_to_rows(&seq.frames),
        };
        serde_json::to_writer(&mut out, &rec).map_err(|e| Error::validation(e.to_string()))?;
        out.push(b'\n');
    }
    write_atomic(path, &out)?;
    let labels = serde_json::to_string_pretty(&dataset.class_names).map_err(|e| Error::validation(e.to_string()))?;
    write_atomic(&sidecar_path(path), labels.as_bytes())?;
    Ok(())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Load a JSON Lines dataset, validating every sequence. Malformed lines are
/// reported with their 1-based line number. An empty file yields an empty
/// dataset.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    let mut sequences = Vec::new();
    let mut ids = Vec::new();
    let mut max_class = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SequenceRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })?;
        let frames = rows_to_frames(rec.joints, lineno)?;
        max_class = max_class.max(rec.class_id);
        ids.push(rec.id);
        sequences.push((frames, rec.class_id, rec.fps, lineno));
    }

    let class_names = match fs::read_to_string(sidecar_path(path)) {
        Ok(s) => serde_json::from_str::<Vec<String>>(&s)
            .map_err(|e| Error::Parse { line: 0, msg: format!("labels.json: {e}") })?,
        Err(_) => (0..=max_class).map(|c| format!("class-{c}")).collect(),
    };
    let num_classes = class_names.len().max(max_class + 1);

    let mut out = Vec::with_capacity(sequences.len());
    for (frames, class_id, fps, lineno) in sequences {
        let label = ActionLabel::new(class_id, num_classes)
            .map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })?;
        let seq = MotionSequence::new(frames, label, fps)
            .map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })?;
        out.push(seq);
    }
    let mut names = class_names;
    while names.len() < num_classes {
        names.push(format!("class-{}", names.len()));
    }
    Ok(Dataset { sequences: out, ids, class_names: names })
}

/// Save pseudo-composites as JSON Lines (sequence schema plus lambda, sources,
/// mixed_label).
pub fn save_composites(composites: &[PseudoComposite], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    for c in composites {
        let rec = CompositeRecord {
            id: c.id.clone(),
            fps: c.fps,
            joints: frames_to_rows(&c.frames),
            lambda: c.lambda,
            mixed_label: c.mixed_label.weights.clone(),
            sources: c.sources.clone(),
            source_indices: c.source_indices,
            source_classes: c.source_classes,
        };
        serde_json::to_writer(&mut out, &rec).map_err(|e| Error::validation(e.to_string()))?;
        out.push(b'\n');
    }
    write_atomic(path, &out)
}

/// Load pseudo-composites saved by `save_composites`.
pub fn load_composites(path: &Path) -> Result<Vec<PseudoComposite>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CompositeRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })?;
        let frames = rows_to_frames(rec.joints, lineno)?;
        let c = PseudoComposite {
            id: rec.id,
            frames,
            fps: rec.fps,
            mixed_label: MixedLabel { weights: rec.mixed_label },
            lambda: rec.lambda,
            sources: rec.sources,
            source_indices: rec.source_indices,
            source_classes: rec.source_classes,
        };
        c.validate().map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })?;
        out.push(c);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{generate_sub_action, SubActionKind};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn sample_dataset(seed: u64, n: usize, t: usize) -> Dataset {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut sequences = Vec::new();
        let mut ids = Vec::new();
        for k in 0..n {
            let kind = SubActionKind::ALL[k % 6];
            sequences.push(generate_sub_action(kind, t, &mut rng).unwrap());
            ids.push(format!("seq-{k:03}"));
        }
        Dataset {
            sequences,
            ids,
            class_names: SubActionKind::ALL.iter().map(|k| k.name().to_string()).collect(),
        }
    }

    #[test]
    fn round_trip_preserves_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        let ds = sample_dataset(3, 4, 6);
        save_dataset(&ds, &path).unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(loaded, ds);
    }

    #[test]
    fn save_is_byte_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.jsonl");
        let b = dir.path().join("b.jsonl");
        let ds = sample_dataset(11, 3, 5);
        save_dataset(&ds, &a).unwrap();
        save_dataset(&ds, &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    }

    #[test]
    fn wrong_joint_count_names_frame_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let joints: Vec<Vec<[f64; 3]>> = vec![vec![[0.0; 3]; 24], vec![[0.0; 3]; 23]];
        let rec = SequenceRecord { id: "x".into(), class_id: 0, fps: 20.0, joints };
        fs::write(&path, format!("{}\n", serde_json::to_string(&rec).unwrap())).unwrap();
        match load_dataset(&path) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 1);
                assert!(msg.contains("frame 1"), "msg: {msg}");
                assert!(msg.contains("23"), "msg: {msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let ds = sample_dataset(1, 1, 4);
        save_dataset(&ds, &path).unwrap();
        let mut content = fs::read_to_string(&path).unwrap();
        content.push_str("{not json\n");
        fs::write(&path, content).unwrap();
        match load_dataset(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        fs::write(&path, "").unwrap();
        let ds = load_dataset(&path).unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let ds = sample_dataset(2, 1, 4);
        let err = save_dataset(&ds, Path::new("/nonexistent-dir/x.jsonl")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn composites_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("composites.jsonl");
        let ds = sample_dataset(8, 4, 6);
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let composites = crate::coupling::build_pseudo_dataset(
            &ds.sequences,
            &ds.ids,
            &crate::coupling::PairingPolicy::FullClass,
            7,
            &crate::coupling::MixingRateDist::Gaussian { std: 0.1 },
            &crate::motion::BodyPartition::default_five(),
            &mut rng,
        )
        .unwrap();
        save_composites(&composites, &path).unwrap();
        let loaded = load_composites(&path).unwrap();
        assert_eq!(loaded, composites);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn round_trip_random_datasets(seed in 0u64..500, n in 1usize..5, t in 2usize..8) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("d.jsonl");
            let ds = sample_dataset(seed, n, t);
            save_dataset(&ds, &path).unwrap();
            let loaded = load_dataset(&path).unwrap();
            prop_assert_eq!(loaded, ds);
        }
    }
}
