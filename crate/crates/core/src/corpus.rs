//! Corpus orchestration: building splits on disk, manifests, validation, and
//! loading a built corpus back for evaluation.
//!
//! Layout:
//!
//! ```text
//! out/
//!   manifest.json
//!   train/ manifest.json qa.jsonl train_000000.svg train_000000.annotations.json train_000000.spec.json ...
//!   test/ ...
//!   novel_test/ ...
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use log::{debug, info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::encode::{encode_answer, encode_question, order_annotations, ReservedTokenMap};
use crate::eval::{self, EvalError, EvalReport, Prediction, TextSource};
use crate::oracle::solve;
use crate::qa::{generate_all, AnswerType, QaRecord, QuestionType, QA_SCHEMA_VERSION, TEMPLATE_SCHEMA_VERSION};
use crate::render::annotate::ANNOTATION_SCHEMA_VERSION;
use crate::render::{render_chart, AnnotationSet};
use crate::synth::{make_chart_spec, ChartSpec, ChartType};
use crate::table::{decompose_table, impute_table, merge_tables, mergeable_groups, DataTable, Decomposition};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const CONFIG_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const QA_FILE: &str = "qa.jsonl";
/// Tables longer than this are also offered as row groups.
pub const DECOMPOSE_ABOVE_ROWS: usize = 24;
pub const ROW_GROUP_SIZE: usize = 12;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("split hygiene: {0}")]
    Hygiene(String),
    #[error("{chart_id}: {message}")]
    Chart { chart_id: String, message: String },
    #[error("output directory {0} is not empty; pass overwrite to replace it")]
    NotEmpty(PathBuf),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io { path: path.to_path_buf(), source }
}

fn parse_err(path: &Path, message: impl ToString) -> CorpusError {
    CorpusError::Parse { path: path.to_path_buf(), message: message.to_string() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
    NovelTest,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Test, Split::NovelTest];

    pub fn id(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::NovelTest => "novel_test",
        }
    }

    pub fn from_id(id: &str) -> Option<Split> {
        Split::ALL.into_iter().find(|s| s.id() == id)
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

/// Build configuration, read from a single JSON file. Relative paths are
/// resolved against the directory holding the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    #[serde(default = "config_version")]
    pub schema_version: u32,
    pub seed: u64,
    /// Relative frequency per chart type; omitted types weigh 0.
    pub chart_type_weights: BTreeMap<ChartType, f64>,
    pub charts_per_split: BTreeMap<Split, usize>,
    pub questions_per_chart: usize,
    pub table_dirs: BTreeMap<Split, Vec<PathBuf>>,
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ocr_noise_rate: Option<f64>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn config_version() -> u32 {
    CONFIG_SCHEMA_VERSION
}

impl CorpusConfig {
    pub fn from_json(json: &str, base_dir: &Path) -> Result<CorpusConfig, CorpusError> {
        let mut c: CorpusConfig =
            serde_json::from_str(json).map_err(|e| CorpusError::Config(e.to_string()))?;
        c.base_dir = base_dir.to_path_buf();
        c.check()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<CorpusConfig, CorpusError> {
        let json = fs::read_to_string(path).map_err(io_err(path))?;
        let base = path.parent().unwrap_or(Path::new("."));
        CorpusConfig::from_json(&json, base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn check(&self) -> Result<(), CorpusError> {
        let bad = |m: String| Err(CorpusError::Config(m));
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return bad(format!("unsupported config schema_version {}", self.schema_version));
        }
        if self.chart_type_weights.values().any(|w| !w.is_finite() || *w < 0.0) {
            return bad("chart-type weights must be finite and nonnegative".into());
        }
        if self.chart_type_weights.values().sum::<f64>() <= 0.0 {
            return bad("chart-type weights must sum to a positive value".into());
        }
        if let Some(r) = self.ocr_noise_rate {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("ocr_noise_rate {r} outside [0, 1]"));
            }
        }
        for (split, &n) in &self.charts_per_split {
            if n > 0 && self.table_dirs.get(split).is_none_or(|d| d.is_empty()) {
                return bad(format!("split {split} has charts but no table directories"));
            }
        }
        let novel: BTreeSet<PathBuf> = self.split_dirs(Split::NovelTest).into_iter().collect();
        for split in [Split::Train, Split::Test] {
            for d in self.split_dirs(split) {
                if novel.contains(&d) {
                    return Err(CorpusError::Hygiene(format!(
                        "{} is a table directory of both {split} and novel_test",
                        d.display()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Table directories of a split, resolved and normalized where possible.
    pub fn split_dirs(&self, split: Split) -> Vec<PathBuf> {
        self.table_dirs
            .get(&split)
            .map(|ds| {
                ds.iter()
                    .map(|d| {
                        let p = self.resolve(d);
                        p.canonicalize().unwrap_or(p)
                    })
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn charts(&self, split: Split) -> usize {
        self.charts_per_split.get(&split).copied().unwrap_or(0)
    }

    /// The configuration as recorded in manifests. The output location is
    /// left out so that relocated builds stay byte-identical.
    pub fn snapshot(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(o) = v.as_object_mut() {
            o.remove("output_dir");
        }
        v
    }

    fn weight(&self, t: ChartType) -> f64 {
        self.chart_type_weights.get(&t).copied().unwrap_or(0.0)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A 64-bit seed drawn from the hash of a label such as `"7:train:12"`.
pub fn derive_seed(label: &str) -> u64 {
    let d = Sha256::digest(label.as_bytes());
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

pub fn chart_id(split: Split, index: usize) -> String {
    format!("{}_{index:06}", split.id())
}

/// Splits `total` into integer counts proportional to `weights` by largest
/// remainder; ties go to the earlier entry.
pub fn apportion(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut rest: Vec<usize> = (0..weights.len()).collect();
    rest.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b)));
    let missing = total - counts.iter().sum::<usize>();
    for &i in rest.iter().take(missing) {
        counts[i] += 1;
    }
    counts
}

/// Chart types for every index of a split, in shuffled order.
pub fn plan_split(config: &CorpusConfig, split: Split) -> Vec<ChartType> {
    let weights: Vec<f64> = ChartType::ALL.iter().map(|&t| config.weight(t)).collect();
    let counts = apportion(&weights, config.charts(split));
    let mut plan: Vec<ChartType> = ChartType::ALL
        .iter()
        .zip(counts)
        .flat_map(|(&t, n)| std::iter::repeat_n(t, n))
        .collect();
    plan.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(&format!("{}:{split}:plan", config.seed))));
    plan
}

/// One input CSV.
#[derive(Debug, Clone)]
pub struct SourceTable {
    pub path: PathBuf,
    pub digest: String,
    pub table: DataTable,
}

pub fn load_table_dir(dir: &Path) -> Result<Vec<SourceTable>, CorpusError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|path| {
            let bytes = fs::read(&path).map_err(io_err(&path))?;
            let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let table = DataTable::from_csv(&name, &bytes).map_err(|e| parse_err(&path, e))?;
            Ok(SourceTable { digest: sha256_hex(&bytes), path, table })
        })
        .collect()
}

fn table_fingerprint(t: &DataTable) -> u64 {
    let mut h = Sha256::new();
    h.update(t.name.as_bytes());
    h.update([0]);
    for l in &t.row_labels {
        h.update(l.as_bytes());
        h.update([0]);
    }
    for c in &t.columns {
        h.update(c.header.as_bytes());
        for v in c.numbers() {
            h.update(v.map_or(u64::MAX, f64::to_bits).to_le_bytes());
        }
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Preprocessed tables charts are drawn from: every source, each group of
/// sources sharing a label set merged into one, and long tables cut into
/// row groups. Aggregate rows are dropped and gaps imputed with a seed
/// derived from the table's content.
pub fn table_pool(sources: &[SourceTable]) -> Vec<DataTable> {
    let mut originals: Vec<DataTable> = sources.iter().map(|s| s.table.clone()).collect();
    for t in &mut originals {
        let removed = t.remove_aggregate_rows();
        if !removed.is_empty() {
            debug!("{}: dropped aggregate rows {removed:?}", t.name);
        }
    }
    let mut pool = originals.clone();
    for group in mergeable_groups(&originals) {
        let members: Vec<DataTable> = group.iter().map(|&i| originals[i].clone()).collect();
        match merge_tables(&members) {
            Ok(m) => pool.push(m),
            Err(e) => debug!("merge skipped: {e}"),
        }
    }
    for t in &originals {
        if t.n_rows() > DECOMPOSE_ABOVE_ROWS {
            pool.extend(decompose_table(t, Decomposition::ByRowGroup { group_size: ROW_GROUP_SIZE }));
        }
    }
    for t in &mut pool {
        let mut rng = ChaCha8Rng::seed_from_u64(table_fingerprint(t));
        let rejected = impute_table(t, &mut rng);
        if !rejected.is_empty() {
            debug!("{}: rejected columns {rejected:?}", t.name);
        }
    }
    pool.retain(|t| t.numeric_columns().next().is_some());
    pool
}

/// Everything generated for one chart, before it touches the disk.
#[derive(Debug, Clone)]
pub struct ChartBuild {
    pub chart_id: String,
    pub spec: ChartSpec,
    pub annotations: AnnotationSet,
    pub svg: Vec<u8>,
    pub records: Vec<QaRecord>,
    pub skipped_questions: usize,
}

impl ChartBuild {
    /// File name and bytes of each per-chart file.
    pub fn files(&self) -> Vec<(String, Vec<u8>)> {
        vec![
            (format!("{}.svg", self.chart_id), self.svg.clone()),
            (format!("{}.annotations.json", self.chart_id), json_line(&self.annotations)),
            (format!("{}.spec.json", self.chart_id), json_line(&self.spec)),
        ]
    }
}

fn json_line<T: Serialize>(v: &T) -> Vec<u8> {
    let mut b = serde_json::to_vec(v).expect("serializable");
    b.push(b'\n');
    b
}

/// Builds chart `index` of a split: tables are tried in a seeded order
/// until one supports the chart type, then the chart is rendered and its
/// questions generated and encoded.
pub fn build_chart(
    pool: &[DataTable],
    chart_type: ChartType,
    master_seed: u64,
    split: Split,
    index: usize,
    quota: usize,
) -> Result<ChartBuild, CorpusError> {
    let id = chart_id(split, index);
    let fail = |message: String| CorpusError::Chart { chart_id: id.clone(), message };
    let seed = derive_seed(&format!("{master_seed}:{split}:{index}"));
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let spec = order
        .iter()
        .find_map(|&i| make_chart_spec(&pool[i], chart_type, seed).ok())
        .ok_or_else(|| fail(format!("no input table supports {chart_type}")))?;
    let rendered = render_chart(&spec, &id).map_err(|e| fail(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&format!("{master_seed}:{split}:{index}:qa")));
    let pairs = generate_all(&spec, &rendered.annotations, &mut rng, quota).map_err(|e| fail(e.to_string()))?;
    let skipped = quota.saturating_sub(pairs.len());
    if skipped > 0 {
        debug!("{id}: {skipped} of {quota} question draws skipped");
    }
    let (ordered, _) = order_annotations(&rendered.annotations);
    let tokens = ReservedTokenMap::bundled();
    let records = pairs
        .into_iter()
        .enumerate()
        .map(|(k, pair)| {
            let answer_vector =
                encode_answer(&pair.answers, &ordered, spec.chart_type).map_err(|e| fail(e.to_string()))?;
            Ok(QaRecord {
                question_id: format!("{id}_q{k:02}"),
                encoded_question: encode_question(&pair.question, &ordered, tokens),
                answer_vector,
                pair,
            })
        })
        .collect::<Result<Vec<_>, CorpusError>>()?;
    Ok(ChartBuild {
        chart_id: id,
        spec,
        annotations: rendered.annotations,
        svg: rendered.svg,
        records,
        skipped_questions: skipped,
    })
}

/// Counts in the shape of the corpus statistics table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub charts: usize,
    pub questions: usize,
    pub answers: usize,
    pub skipped_questions: usize,
    pub chart_types: BTreeMap<ChartType, usize>,
    pub question_types: BTreeMap<QuestionType, usize>,
    pub answer_types: BTreeMap<AnswerType, usize>,
    /// Questions keyed "question_type/answer_type".
    pub cells: BTreeMap<String, usize>,
}

fn type_id<T: Serialize>(t: &T) -> String {
    serde_json::to_value(t)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

impl SplitCounts {
    pub fn add_chart(&mut self, chart_type: ChartType, skipped: usize) {
        self.charts += 1;
        self.skipped_questions += skipped;
        *self.chart_types.entry(chart_type).or_default() += 1;
    }

    pub fn add_record(&mut self, r: &QaRecord) {
        self.questions += 1;
        self.answers += r.pair.answers.len();
        *self.question_types.entry(r.pair.question_type).or_default() += 1;
        *self.answer_types.entry(r.pair.answer_type).or_default() += 1;
        let cell = format!("{}/{}", type_id(&r.pair.question_type), type_id(&r.pair.answer_type));
        *self.cells.entry(cell).or_default() += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub schema_version: u32,
    pub split: Split,
    #[serde(flatten)]
    pub counts: SplitCounts,
    /// Input CSV file name → SHA-256 of its bytes.
    pub sources: BTreeMap<String, String>,
    /// Emitted file name → SHA-256 of its bytes.
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEntry {
    #[serde(flatten)]
    pub counts: SplitCounts,
    pub manifest_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub config: serde_json::Value,
    pub schema_versions: BTreeMap<String, u32>,
    pub splits: BTreeMap<Split, SplitEntry>,
}

pub fn schema_versions() -> BTreeMap<String, u32> {
    BTreeMap::from([
        ("annotations".to_string(), ANNOTATION_SCHEMA_VERSION),
        ("config".to_string(), CONFIG_SCHEMA_VERSION),
        ("manifest".to_string(), MANIFEST_SCHEMA_VERSION),
        ("qa".to_string(), QA_SCHEMA_VERSION),
        ("templates".to_string(), TEMPLATE_SCHEMA_VERSION),
    ])
}

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    /// Worker threads; 0 picks one per core.
    pub workers: usize,
    pub overwrite: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { workers: 0, overwrite: false }
    }
}

/// Loads the source tables of every split and checks that no novel-test
/// table shares content with a train or test table.
pub fn load_sources(config: &CorpusConfig) -> Result<BTreeMap<Split, Vec<SourceTable>>, CorpusError> {
    let mut out = BTreeMap::new();
    for split in Split::ALL {
        let mut tables = Vec::new();
        for d in config.split_dirs(split) {
            tables.extend(load_table_dir(&d)?);
        }
        if config.charts(split) > 0 && tables.is_empty() {
            return Err(CorpusError::Config(format!("split {split} has no input tables")));
        }
        out.insert(split, tables);
    }
    let seen: BTreeMap<&str, &Path> = [Split::Train, Split::Test]
        .iter()
        .flat_map(|s| out[s].iter().map(|t| (t.digest.as_str(), t.path.as_path())))
        .collect();
    for t in &out[&Split::NovelTest] {
        if let Some(p) = seen.get(t.digest.as_str()) {
            return Err(CorpusError::Hygiene(format!(
                "{} has the same content as {}",
                t.path.display(),
                p.display()
            )));
        }
    }
    Ok(out)
}

/// Builds every split into the configured output directory and returns the
/// root manifest. On failure the partial output is removed.
pub fn build_corpus(config: &CorpusConfig, options: BuildOptions) -> Result<Manifest, CorpusError> {
    config.check()?;
    let out = config.output_path();
    if out.exists() {
        let non_empty = fs::read_dir(&out).map_err(io_err(&out))?.next().is_some();
        if non_empty {
            if !options.overwrite {
                return Err(CorpusError::NotEmpty(out));
            }
            fs::remove_dir_all(&out).map_err(io_err(&out))?;
        }
    }
    let sources = load_sources(config)?;
    fs::create_dir_all(&out).map_err(io_err(&out))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers)
        .build()
        .map_err(|e| CorpusError::Config(e.to_string()))?;
    let result = pool.install(|| write_corpus(config, &sources, &out));
    if result.is_err() {
        if let Err(e) = fs::remove_dir_all(&out) {
            warn!("could not remove partial output {}: {e}", out.display());
        }
    }
    result
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<String, CorpusError> {
    fs::write(path, bytes).map_err(io_err(path))?;
    Ok(sha256_hex(bytes))
}

struct ChartSummary {
    chart_type: ChartType,
    skipped: usize,
    files: Vec<(String, String)>,
    records: Vec<QaRecord>,
}

fn write_corpus(
    config: &CorpusConfig,
    sources: &BTreeMap<Split, Vec<SourceTable>>,
    out: &Path,
) -> Result<Manifest, CorpusError> {
    let mut splits = BTreeMap::new();
    for split in Split::ALL {
        let n = config.charts(split);
        if n == 0 {
            continue;
        }
        let dir = out.join(split.id());
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let pool = table_pool(&sources[&split]);
        let plan = plan_split(config, split);
        info!("{split}: building {n} charts from {} tables", pool.len());
        let summaries: Vec<ChartSummary> = plan
            .par_iter()
            .enumerate()
            .map(|(i, &t)| {
                let chart = build_chart(&pool, t, config.seed, split, i, config.questions_per_chart)?;
                let files = chart
                    .files()
                    .into_iter()
                    .map(|(name, bytes)| Ok((name.clone(), write_file(&dir.join(&name), &bytes)?)))
                    .collect::<Result<Vec<_>, CorpusError>>()?;
                Ok(ChartSummary { chart_type: t, skipped: chart.skipped_questions, files, records: chart.records })
            })
            .collect::<Result<_, CorpusError>>()?;

        let mut counts = SplitCounts::default();
        let mut files = BTreeMap::new();
        let mut qa = Vec::new();
        for s in &summaries {
            counts.add_chart(s.chart_type, s.skipped);
            files.extend(s.files.iter().cloned());
            for r in &s.records {
                counts.add_record(r);
                qa.extend(json_line(r));
            }
        }
        if counts.skipped_questions > 0 {
            info!("{split}: {} question draws skipped", counts.skipped_questions);
        }
        files.insert(QA_FILE.to_string(), write_file(&dir.join(QA_FILE), &qa)?);
        let manifest = SplitManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            split,
            counts: counts.clone(),
            sources: sources[&split]
                .iter()
                .map(|s| (s.path.file_name().unwrap_or_default().to_string_lossy().into_owned(), s.digest.clone()))
                .collect(),
            files,
        };
        let bytes = serde_json::to_vec_pretty(&manifest).expect("serializable");
        let digest = write_file(&dir.join(MANIFEST_FILE), &bytes)?;
        splits.insert(split, SplitEntry { counts, manifest_sha256: digest });
    }
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        config: config.snapshot(),
        schema_versions: schema_versions(),
        splits,
    };
    write_file(&out.join(MANIFEST_FILE), &serde_json::to_vec_pretty(&manifest).expect("serializable"))?;
    Ok(manifest)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Missing,
    Digest,
    Schema,
    Annotation,
    Encoding,
    Oracle,
    Count,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub charts: usize,
    pub questions: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    fn push(&mut self, kind: ViolationKind, location: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation { kind, location: location.into(), message: message.into() });
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CorpusError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|e| parse_err(path, e))
}

pub fn read_manifest(corpus: &Path) -> Result<Manifest, CorpusError> {
    let m: Manifest = read_json(&corpus.join(MANIFEST_FILE))?;
    if m.schema_version != MANIFEST_SCHEMA_VERSION {
        return Err(parse_err(
            &corpus.join(MANIFEST_FILE),
            format!("unsupported manifest schema_version {}", m.schema_version),
        ));
    }
    Ok(m)
}

/// Re-checks a built corpus: file digests, schema conformance, annotation
/// invariants, answer encodings, oracle agreement on every question, and
/// manifest counts. Only a missing or unreadable root manifest is an error;
/// everything else is reported.
pub fn validate_corpus(corpus: &Path) -> Result<ValidationReport, CorpusError> {
    use ViolationKind::*;
    let manifest = read_manifest(corpus)?;
    let mut report = ValidationReport::default();
    for (k, v) in schema_versions() {
        if manifest.schema_versions.get(&k) != Some(&v) {
            report.push(Schema, MANIFEST_FILE, format!("schema version of {k} is not {v}"));
        }
    }
    for (&split, entry) in &manifest.splits {
        let dir = corpus.join(split.id());
        let mpath = dir.join(MANIFEST_FILE);
        let loc = |name: &str| format!("{split}/{name}");
        let bytes = match fs::read(&mpath) {
            Ok(b) => b,
            Err(e) => {
                report.push(Missing, loc(MANIFEST_FILE), e.to_string());
                continue;
            }
        };
        if sha256_hex(&bytes) != entry.manifest_sha256 {
            report.push(Digest, loc(MANIFEST_FILE), "digest differs from root manifest");
        }
        let sm: SplitManifest = match serde_json::from_slice(&bytes) {
            Ok(m) => m,
            Err(e) => {
                report.push(Schema, loc(MANIFEST_FILE), e.to_string());
                continue;
            }
        };
        if sm.counts != entry.counts {
            report.push(Count, loc(MANIFEST_FILE), "counts differ from root manifest");
        }
        let mut contents: BTreeMap<String, Vec<u8>> = BTreeMap::new();
        for (name, digest) in &sm.files {
            match fs::read(dir.join(name)) {
                Ok(b) => {
                    if &sha256_hex(&b) != digest {
                        report.push(Digest, loc(name), "content digest mismatch");
                    }
                    contents.insert(name.clone(), b);
                }
                Err(e) => report.push(Missing, loc(name), e.to_string()),
            }
        }

        let mut specs: BTreeMap<String, ChartSpec> = BTreeMap::new();
        let mut sets: BTreeMap<String, AnnotationSet> = BTreeMap::new();
        let mut counts = SplitCounts::default();
        for (name, bytes) in &contents {
            if let Some(id) = name.strip_suffix(".annotations.json") {
                match serde_json::from_slice::<AnnotationSet>(bytes) {
                    Ok(set) => {
                        if set.schema_version != ANNOTATION_SCHEMA_VERSION {
                            report.push(Schema, loc(name), "unsupported annotation schema_version");
                        }
                        if set.chart_id != id {
                            report.push(Schema, loc(name), "chart_id does not match file name");
                        }
                        for v in set.violations() {
                            report.push(Annotation, loc(name), v);
                        }
                        sets.insert(id.to_string(), set);
                    }
                    Err(e) => report.push(Schema, loc(name), e.to_string()),
                }
            } else if let Some(id) = name.strip_suffix(".spec.json") {
                match serde_json::from_slice::<ChartSpec>(bytes) {
                    Ok(spec) => {
                        specs.insert(id.to_string(), spec);
                    }
                    Err(e) => report.push(Schema, loc(name), e.to_string()),
                }
            }
        }
        for (id, set) in &sets {
            counts.add_chart(set.chart_type, 0);
            if let Some(spec) = specs.get(id) {
                if spec.chart_type != set.chart_type {
                    report.push(Schema, loc(id), "spec and annotations disagree on chart type");
                }
            }
        }
        if let Some(qa) = contents.get(QA_FILE) {
            let ordered_cache: BTreeMap<&String, _> =
                sets.iter().map(|(id, set)| (id, order_annotations(set).0)).collect();
            for (line_no, line) in qa.split(|&b| b == b'\n').enumerate() {
                if line.is_empty() {
                    continue;
                }
                let at = format!("{split}/{QA_FILE}:{}", line_no + 1);
                let r: QaRecord = match serde_json::from_slice(line) {
                    Ok(r) => r,
                    Err(e) => {
                        report.push(Schema, at, e.to_string());
                        continue;
                    }
                };
                counts.add_record(&r);
                report.questions += 1;
                let Some(spec) = specs.get(&r.pair.chart_id) else {
                    report.push(Missing, at, format!("no spec for chart {}", r.pair.chart_id));
                    continue;
                };
                match solve(&r.pair.semantic_form, spec) {
                    Ok(a) if a == r.pair.answers => {}
                    Ok(a) => report.push(
                        Oracle,
                        at.clone(),
                        format!("{}: stored {:?}, oracle {:?}", r.question_id, r.pair.answers, a),
                    ),
                    Err(e) => report.push(Oracle, at.clone(), format!("{}: {e}", r.question_id)),
                }
                if let Some(ordered) = ordered_cache.get(&r.pair.chart_id) {
                    match encode_answer(&r.pair.answers, ordered, spec.chart_type) {
                        Ok(v) if v == r.answer_vector => {}
                        Ok(_) => report.push(Encoding, at, format!("{}: answer vector differs", r.question_id)),
                        Err(e) => report.push(Encoding, at, format!("{}: {e}", r.question_id)),
                    }
                }
            }
        }
        // Skipped draws leave no trace in the files; take the manifest's word.
        counts.skipped_questions = sm.counts.skipped_questions;
        if counts != sm.counts {
            report.push(Count, loc(MANIFEST_FILE), "manifest counts differ from file contents");
        }
        report.charts += sets.len();
    }
    Ok(report)
}

/// Specs, annotations and QA records of one split, keyed by chart id.
pub struct SplitTruth {
    pub specs: BTreeMap<String, ChartSpec>,
    pub annotations: BTreeMap<String, AnnotationSet>,
    pub records: Vec<QaRecord>,
}

pub fn load_split(corpus: &Path, split: Split) -> Result<SplitTruth, CorpusError> {
    let dir = corpus.join(split.id());
    let sm: SplitManifest = read_json(&dir.join(MANIFEST_FILE))?;
    let mut annotations = BTreeMap::new();
    let mut specs = BTreeMap::new();
    for name in sm.files.keys() {
        if let Some(id) = name.strip_suffix(".annotations.json") {
            let set: AnnotationSet = read_json(&dir.join(name))?;
            annotations.insert(id.to_string(), set);
        } else if let Some(id) = name.strip_suffix(".spec.json") {
            let spec: ChartSpec = read_json(&dir.join(name))?;
            specs.insert(id.to_string(), spec);
        }
    }
    let records = read_jsonl(&dir.join(QA_FILE))?;
    Ok(SplitTruth { specs, annotations, records })
}

/// Parses one JSON value per non-empty line.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| parse_err(path, format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CorpusError> {
    let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(io_err(path))?);
    for it in items {
        f.write_all(&json_line(it)).map_err(io_err(path))?;
    }
    f.flush().map_err(io_err(path))
}

/// A predicted answer for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaPrediction {
    pub question_id: String,
    pub answer: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Detection,
    Qa,
    EndToEnd,
}

impl EvalMode {
    pub fn id(self) -> &'static str {
        match self {
            EvalMode::Detection => "detection",
            EvalMode::Qa => "qa",
            EvalMode::EndToEnd => "end_to_end",
        }
    }
}

/// Scores a predictions file against one split. Detection and end-to-end
/// modes read [`Prediction`] lines; qa mode reads [`QaPrediction`] lines.
/// End-to-end attaches oracle text to the predicted boxes, perturbed by
/// simulated OCR when `ocr` is given as (rate, seed).
pub fn evaluate(
    predictions: &Path,
    corpus: &Path,
    split: Split,
    mode: EvalMode,
    ocr: Option<(f64, u64)>,
) -> Result<EvalReport, CorpusError> {
    let truth = load_split(corpus, split)?;
    let mut report = EvalReport { mode: mode.id().to_string(), detection: None, qa: None };
    match mode {
        EvalMode::Qa => {
            let preds: Vec<QaPrediction> = read_jsonl(predictions)?;
            let map = preds.into_iter().map(|p| (p.question_id, p.answer)).collect();
            report.qa = Some(eval::qa_accuracy(&map, &truth.records)?);
        }
        EvalMode::Detection | EvalMode::EndToEnd => {
            let preds: Vec<Prediction> = read_jsonl(predictions)?;
            report.detection =
                Some(eval::evaluate_detection(&preds, &truth.annotations, eval::DEFAULT_IOU_THRESHOLD)?);
            if mode == EvalMode::EndToEnd {
                let source = match ocr {
                    Some((rate, seed)) => TextSource::Ocr { rate, seed },
                    None => TextSource::Oracle,
                };
                let answers = eval::end_to_end_answers(&preds, &truth.annotations, &truth.records, source)?;
                report.qa = Some(eval::qa_accuracy(&answers, &truth.records)?);
            }
        }
    }
    Ok(report)
}

/// Ground-truth annotations of a split as confident predictions, with a
/// uniformly chosen fraction removed.
pub fn export_truth(corpus: &Path, split: Split, drop: f64, seed: u64) -> Result<Vec<Prediction>, CorpusError> {
    let truth = load_split(corpus, split)?;
    let all: Vec<Prediction> = truth
        .annotations
        .iter()
        .flat_map(|(id, set)| set.elements.iter().map(move |a| Prediction::from_truth(id, a)))
        .collect();
    if drop <= 0.0 {
        return Ok(all);
    }
    Ok(eval::drop_predictions(&all, drop, &mut ChaCha8Rng::seed_from_u64(seed)))
}
