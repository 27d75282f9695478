use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::{mix, mix_label, SeededRng};
use crate::synthdata::catalog::Catalog;
use crate::synthdata::format::{encode_feature, read_feature};
use crate::synthdata::generator::{Generator, Partition, SessionRecord, SignalStrength, PHQ8_MAX};

pub const MANIFEST_FILE: &str = "manifest.txt";
const MANIFEST_TAG: &str = "#FZCORPUS v1";

/// Everything needed to regenerate a corpus bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    pub seed: u64,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub scale_divisor: usize,
    pub strength: SignalStrength,
    /// Subset of catalog features to generate; all when `None`.
    pub features: Option<Vec<String>>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_train: 163,
            n_dev: 56,
            n_test: 56,
            scale_divisor: 100,
            strength: SignalStrength::default(),
            features: None,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_dev == 0 || self.n_test == 0 {
            return Err(Error::Config(
                "every partition needs at least one session".into(),
            ));
        }
        if self.scale_divisor == 0 {
            return Err(Error::Config("scale_divisor must be >= 1".into()));
        }
        let s = self.strength;
        if [s.text, s.audio, s.video]
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(Error::Config(
                "signal strengths must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.n_train + self.n_dev + self.n_test
    }

    pub fn catalog(&self) -> Catalog {
        Catalog::full().scaled(self.scale_divisor)
    }

    pub fn generator(&self) -> Result<Generator> {
        let g = Generator::new(mix_label(self.seed, "plan"), self.catalog(), self.strength);
        match &self.features {
            Some(names) => g.with_features(names),
            None => Ok(g),
        }
    }

    /// Session ids, partitions, labels and per-session seeds, in corpus order.
    pub fn schedule(&self) -> Vec<(String, Partition, u8, u64)> {
        let mut labels = SeededRng::new(mix_label(self.seed, "labels"));
        let counts = [self.n_train, self.n_dev, self.n_test];
        let mut out = Vec::with_capacity(self.total());
        for (p, &n) in Partition::ALL.iter().zip(&counts) {
            for _ in 0..n {
                let i = out.len();
                let label = labels.below(u64::from(PHQ8_MAX) + 1) as u8;
                out.push((format!("s{i:04}"), *p, label, mix(self.seed, i as u64)));
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub session_id: String,
    pub partition: Partition,
    pub phq8: u8,
    /// Feature name to path relative to the corpus root.
    pub files: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusManifest {
    pub seed: u64,
    pub scale_divisor: usize,
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{MANIFEST_TAG} seed={} divisor={}\n",
            self.seed, self.scale_divisor
        );
        for e in &self.entries {
            write!(s, "{}\t{}\t{}", e.session_id, e.partition, e.phq8).unwrap();
            for (name, path) in &e.files {
                write!(s, "\t{name}={path}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format(0, "empty manifest"))?;
        let rest = header
            .strip_prefix(MANIFEST_TAG)
            .ok_or_else(|| Error::format(0, format!("bad manifest header `{header}`")))?;
        let mut seed = None;
        let mut divisor = None;
        for kv in rest.split_whitespace() {
            match kv.split_once('=') {
                Some(("seed", v)) => seed = v.parse().ok(),
                Some(("divisor", v)) => divisor = v.parse().ok(),
                _ => return Err(Error::format(0, format!("bad header field `{kv}`"))),
            }
        }
        let (Some(seed), Some(scale_divisor)) = (seed, divisor) else {
            return Err(Error::format(0, "header needs seed=<n> divisor=<n>"));
        };
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        let mut offset = header.len() as u64 + 1;
        for line in lines {
            let here = offset;
            offset += line.len() as u64 + 1;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: String| Error::format(here, msg);
            let mut cols = line.split('\t');
            let id = cols.next().unwrap_or_default().to_string();
            let partition: Partition = cols
                .next()
                .ok_or_else(|| bad("missing partition".into()))?
                .parse()
                .map_err(|e: Error| bad(e.to_string()))?;
            let phq8: u8 = cols
                .next()
                .and_then(|v| v.parse().ok())
                .filter(|v| *v <= PHQ8_MAX)
                .ok_or_else(|| bad("phq8 must be an integer in [0, 24]".into()))?;
            let mut files = BTreeMap::new();
            for pair in cols {
                let (k, v) = pair
                    .split_once('=')
                    .ok_or_else(|| bad(format!("expected name=path, got `{pair}`")))?;
                files.insert(k.to_string(), v.to_string());
            }
            if id.is_empty() || !seen.insert(id.clone()) {
                return Err(bad(format!("empty or duplicate session id `{id}`")));
            }
            entries.push(ManifestEntry {
                session_id: id,
                partition,
                phq8,
                files,
            });
        }
        Ok(Self {
            seed,
            scale_divisor,
            entries,
        })
    }

    /// SHA-256 over the manifest text and every referenced file, in order.
    pub fn digest(&self, root: &Path) -> Result<String> {
        let mut h = Sha256::new();
        h.update(self.to_text().as_bytes());
        for e in &self.entries {
            for path in e.files.values() {
                h.update(fs::read(root.join(path))?);
            }
        }
        Ok(hex::encode(h.finalize()))
    }
}

fn feature_path(session: &str, feature: &str) -> String {
    format!("sessions/{session}/{feature}.edf")
}

/// Generates a corpus session by session and writes it under `dir`.
pub fn generate_corpus(dir: &Path, config: &CorpusConfig) -> Result<CorpusManifest> {
    config.validate()?;
    let generator = config.generator()?;
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(config.total());
    for (id, partition, label, seed) in config.schedule() {
        let session = generator.generate_session(id, partition, seed, i64::from(label))?;
        let sdir = dir.join("sessions").join(&session.session_id);
        fs::create_dir_all(&sdir)?;
        let mut files = BTreeMap::new();
        for (name, m) in &session.features {
            let rel = feature_path(&session.session_id, name);
            fs::write(dir.join(&rel), encode_feature(m)?)?;
            files.insert(name.clone(), rel);
        }
        entries.push(ManifestEntry {
            session_id: session.session_id,
            partition,
            phq8: label,
            files,
        });
    }
    let manifest = CorpusManifest {
        seed: config.seed,
        scale_divisor: config.scale_divisor,
        entries,
    };
    fs::write(dir.join(MANIFEST_FILE), manifest.to_text())?;
    Ok(manifest)
}

/// A corpus held in memory.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub seed: u64,
    pub scale_divisor: usize,
    pub catalog: Catalog,
    pub sessions: Vec<SessionRecord>,
}

impl Corpus {
    pub fn generate(config: &CorpusConfig) -> Result<Self> {
        config.validate()?;
        let generator = config.generator()?;
        let sessions = config
            .schedule()
            .into_iter()
            .map(|(id, p, label, seed)| generator.generate_session(id, p, seed, i64::from(label)))
            .collect::<Result<_>>()?;
        Ok(Self {
            seed: config.seed,
            scale_divisor: config.scale_divisor,
            catalog: config.catalog(),
            sessions,
        })
    }

    /// Reads `dir/manifest.txt` and every feature file it references,
    /// optionally keeping only the named features.
    pub fn load(dir: &Path, only: Option<&[String]>) -> Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        let manifest = CorpusManifest::parse(&text)?;
        let catalog = Catalog::full().scaled(manifest.scale_divisor);
        let mut sessions = Vec::with_capacity(manifest.entries.len());
        for e in manifest.entries {
            let mut features = BTreeMap::new();
            for (name, rel) in &e.files {
                if only.is_some_and(|o| !o.iter().any(|n| n == name)) {
                    continue;
                }
                let path: PathBuf = dir.join(rel);
                let m = read_feature(&path).map_err(|err| match err {
                    Error::Io(io) => Error::Io(std::io::Error::new(
                        io.kind(),
                        format!("{}: {io}", path.display()),
                    )),
                    other => other,
                })?;
                features.insert(name.clone(), m);
            }
            let record = SessionRecord {
                session_id: e.session_id,
                partition: e.partition,
                phq8: e.phq8,
                features,
            };
            record.validate(&catalog)?;
            sessions.push(record);
        }
        Ok(Self {
            seed: manifest.seed,
            scale_divisor: manifest.scale_divisor,
            catalog,
            sessions,
        })
    }

    pub fn partition(&self, p: Partition) -> Vec<&SessionRecord> {
        self.sessions.iter().filter(|s| s.partition == p).collect()
    }

    pub fn labels(&self, p: Partition) -> Vec<f64> {
        self.partition(p)
            .iter()
            .map(|s| f64::from(s.phq8))
            .collect()
    }
}
