//! Synthetic binary datasets: the identity relation between the two halves
//! of a vector, single-bit and zero-parity patterns, and the joint task that
//! asks for both labels at once.
//!
//! Vectors of length `2 * n_half` are handled internally as integer codes
//! whose most significant bit is position 0, so ascending codes are
//! lexicographic order.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::{Error, Result, Rng};

pub const MAX_N_HALF: usize = 30;
/// Upper bound on the size of any generated dataset.
pub const MAX_DATASET_SIZE: usize = 1000;
const MAX_CLASS_SIZE: usize = MAX_DATASET_SIZE / 2;
/// Joint datasets enumerate all `4^n_half` inputs.
pub const MAX_JOINT_N_HALF: usize = 10;
const ENUMERATE_UNEQUAL_UP_TO: usize = 10;
const TRAIN_FRACTION: f64 = 0.75;

/// A two-way class label. `Positive` is the one-hot `[1, 0]` (halves equal,
/// or pattern present); `Negative` is `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Class {
    Positive,
    Negative,
}

impl Class {
    pub fn index(self) -> usize {
        match self {
            Class::Positive => 0,
            Class::Negative => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Class::Positive
        } else {
            Class::Negative
        }
    }

    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Class::Positive
        } else {
            Class::Negative
        }
    }

    pub fn one_hot(self) -> [f64; 2] {
        match self {
            Class::Positive => [1.0, 0.0],
            Class::Negative => [0.0, 1.0],
        }
    }
}

/// Non-relational bit patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PatternKind {
    /// Positive iff position 0 is set.
    SingleBit,
    /// Positive iff every even position (0-based) of the full vector is 0.
    ParityZero,
    /// Positive iff every odd position of the full vector is 0.
    ParityZeroOdd,
}

impl PatternKind {
    pub fn holds(self, input: &[f64]) -> bool {
        match self {
            PatternKind::SingleBit => input[0] == 1.0,
            PatternKind::ParityZero => input.iter().step_by(2).all(|&x| x == 0.0),
            PatternKind::ParityZeroOdd => input.iter().skip(1).step_by(2).all(|&x| x == 0.0),
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            PatternKind::SingleBit => "single_bit",
            PatternKind::ParityZero => "parity_zero",
            PatternKind::ParityZeroOdd => "parity_zero_odd",
        }
    }

    /// Mask of the code bits that must be zero for a positive, or the single
    /// bit that must be one for `SingleBit`.
    fn mask(self, len: usize) -> u64 {
        let first = match self {
            PatternKind::SingleBit => return 1 << (len - 1),
            PatternKind::ParityZero => 0,
            PatternKind::ParityZeroOdd => 1,
        };
        (first..len).step_by(2).map(|p| 1u64 << (len - 1 - p)).sum()
    }

    fn holds_code(self, code: u64, len: usize) -> bool {
        let mask = self.mask(len);
        match self {
            PatternKind::SingleBit => code & mask != 0,
            _ => code & mask == 0,
        }
    }

    fn positives(self, len: usize) -> u64 {
        match self {
            PatternKind::SingleBit => 1 << (len - 1),
            _ => 1 << (len - self.mask(len).count_ones() as usize),
        }
    }
}

impl FromStr for PatternKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single_bit" => Ok(PatternKind::SingleBit),
            "parity_zero" => Ok(PatternKind::ParityZero),
            "parity_zero_odd" => Ok(PatternKind::ParityZeroOdd),
            _ => Err(Error::config(format!("unknown pattern kind {s:?}"))),
        }
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What the labels of a dataset mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Identity,
    /// Pattern only: `Example::label` is the pattern class.
    Pattern(PatternKind),
    /// `Example::label` is the identity class, `Example::pattern` the pattern.
    Joint(PatternKind),
}

impl Task {
    pub fn heads(self) -> usize {
        match self {
            Task::Joint(_) => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::Identity => f.write_str("identity"),
            Task::Pattern(k) => write!(f, "{k}"),
            Task::Joint(k) => write!(f, "joint_{k}"),
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "identity" {
            return Ok(Task::Identity);
        }
        match s.strip_prefix("joint_") {
            Some(rest) => Ok(Task::Joint(rest.parse()?)),
            None => Ok(Task::Pattern(s.parse()?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub input: Vec<f64>,
    pub label: Class,
    pub pattern: Option<Class>,
}

/// `input[i] == input[n_half + i]` for every `i`.
pub fn halves_equal(input: &[f64]) -> bool {
    let (u, v) = input.split_at(input.len() / 2);
    u == v
}

/// Number of positions where the two halves differ.
pub fn hamming_between_halves(input: &[f64]) -> usize {
    let (u, v) = input.split_at(input.len() / 2);
    u.iter().zip(v).filter(|(a, b)| a != b).count()
}

fn code_to_bits(code: u64, len: usize) -> Vec<f64> {
    (0..len)
        .map(|p| ((code >> (len - 1 - p)) & 1) as f64)
        .collect()
}

fn check_n_half(n_half: usize) -> Result<()> {
    if !(1..=MAX_N_HALF).contains(&n_half) {
        return Err(Error::config(format!(
            "n_half must be in 1..={MAX_N_HALF}, got {n_half}"
        )));
    }
    Ok(())
}

fn equal_code(n_half: usize, half: u64) -> u64 {
    (half << n_half) | half
}

/// Every vector whose halves are identical, in lexicographic order.
pub fn enumerate_equal_half_vectors(n_half: usize) -> Result<impl Iterator<Item = Vec<f64>>> {
    check_n_half(n_half)?;
    Ok((0..1u64 << n_half).map(move |h| code_to_bits(equal_code(n_half, h), 2 * n_half)))
}

/// Maps `rank` in `0..2^n(2^n - 1)` onto the rank-th unequal-halves code in
/// ascending order.
fn unequal_code_from_rank(n_half: usize, rank: u64) -> u64 {
    let side = 1u64 << n_half;
    let u = rank / (side - 1);
    let t = rank % (side - 1);
    let v = if t < u { t } else { t + 1 };
    (u << n_half) | v
}

fn sample_unequal_codes(rng: &mut Rng, n_half: usize, k: usize) -> Result<Vec<u64>> {
    check_n_half(n_half)?;
    let side = 1u64 << n_half;
    let population = side * (side - 1);
    if k as u64 > population {
        return Err(Error::config(format!(
            "cannot sample {k} unequal vectors with n_half={n_half} (population {population})"
        )));
    }
    if n_half <= ENUMERATE_UNEQUAL_UP_TO {
        let ranks = rng.sample_without_replacement(population as usize, k)?;
        return Ok(ranks
            .into_iter()
            .map(|r| unequal_code_from_rank(n_half, r as u64))
            .collect());
    }
    let mut seen = HashSet::with_capacity(k);
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let u = rng.below(side);
        let v = rng.below(side);
        if u != v && seen.insert((u, v)) {
            out.push((u << n_half) | v);
        }
    }
    Ok(out)
}

/// `k` distinct vectors whose halves differ somewhere.
pub fn sample_unequal_half_vectors(
    rng: &mut Rng,
    n_half: usize,
    k: usize,
) -> Result<Vec<Vec<f64>>> {
    Ok(sample_unequal_codes(rng, n_half, k)?
        .into_iter()
        .map(|c| code_to_bits(c, 2 * n_half))
        .collect())
}

/// An immutable labelled collection of distinct binary vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_half: usize,
    task: Task,
    examples: Vec<Example>,
}

impl Dataset {
    /// Validates input shape, binary entries, label consistency and
    /// distinctness.
    pub fn new(n_half: usize, task: Task, examples: Vec<Example>) -> Result<Self> {
        check_n_half(n_half)?;
        if examples.len() > MAX_DATASET_SIZE {
            return Err(Error::config(format!(
                "dataset of {} examples exceeds the {MAX_DATASET_SIZE} cap",
                examples.len()
            )));
        }
        let mut seen = HashSet::with_capacity(examples.len());
        for (i, ex) in examples.iter().enumerate() {
            check_example(n_half, task, ex)
                .map_err(|m| Error::config(format!("example {i}: {m}")))?;
            if !seen.insert(bits_key(&ex.input)) {
                return Err(Error::config(format!("example {i}: duplicate input")));
            }
        }
        Ok(Dataset {
            n_half,
            task,
            examples,
        })
    }

    pub fn n_half(&self) -> usize {
        self.n_half
    }

    pub fn input_len(&self) -> usize {
        2 * self.n_half
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Counts of `(Positive, Negative)` primary labels.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self
            .examples
            .iter()
            .filter(|e| e.label == Class::Positive)
            .count();
        (pos, self.examples.len() - pos)
    }

    /// Target class per head, in head order.
    pub fn targets(ex: &Example) -> Vec<usize> {
        std::iter::once(ex.label)
            .chain(ex.pattern)
            .map(Class::index)
            .collect()
    }

    fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            n_half: self.n_half,
            task: self.task,
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "n_half={} task={} size={}\n",
            self.n_half,
            self.task,
            self.examples.len()
        );
        for ex in &self.examples {
            let bits: Vec<&str> = ex
                .input
                .iter()
                .map(|&b| if b == 1.0 { "1" } else { "0" })
                .collect();
            out.push_str(&bits.join(" "));
            out.push_str(" | ");
            out.push_str(one_hot_str(ex.label));
            if let Some(p) = ex.pattern {
                out.push_str(" | ");
                out.push_str(one_hot_str(p));
            }
            out.push('\n');
        }
        out
    }

    /// Parses the text format; `path` is only used in error messages.
    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let perr = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or_else(|| perr(1, "empty file".into()))?;
        let (n_half, task, size) = parse_header(header).map_err(|m| perr(1, m))?;

        let mut examples = Vec::new();
        let mut seen = HashSet::new();
        let mut last = 1;
        for (lineno, line) in lines {
            last = lineno;
            if line.trim().is_empty() {
                continue;
            }
            let ex = parse_example(line, n_half, task).map_err(|m| perr(lineno, m))?;
            if !seen.insert(bits_key(&ex.input)) {
                return Err(perr(lineno, "duplicate input".into()));
            }
            examples.push(ex);
        }
        if examples.len() != size {
            return Err(perr(
                last,
                format!("header declares {size} examples, found {}", examples.len()),
            ));
        }
        Dataset::new(n_half, task, examples).map_err(|e| perr(1, e.to_string()))
    }
}

fn bits_key(input: &[f64]) -> Vec<bool> {
    input.iter().map(|&b| b == 1.0).collect()
}

fn one_hot_str(c: Class) -> &'static str {
    match c {
        Class::Positive => "1 0",
        Class::Negative => "0 1",
    }
}

fn check_example(n_half: usize, task: Task, ex: &Example) -> std::result::Result<(), String> {
    if ex.input.len() != 2 * n_half {
        return Err(format!(
            "expected {} bits, got {}",
            2 * n_half,
            ex.input.len()
        ));
    }
    if ex.input.iter().any(|&b| b != 0.0 && b != 1.0) {
        return Err("input entries must be 0 or 1".into());
    }
    let identity = Class::from_bool(halves_equal(&ex.input));
    match task {
        Task::Identity => {
            if ex.label != identity {
                return Err("identity label disagrees with input".into());
            }
            if ex.pattern.is_some() {
                return Err("identity task carries no pattern label".into());
            }
        }
        Task::Pattern(kind) => {
            if ex.label != Class::from_bool(kind.holds(&ex.input)) {
                return Err("pattern label disagrees with input".into());
            }
            if ex.pattern.is_some() {
                return Err("pattern task carries a single label".into());
            }
        }
        Task::Joint(kind) => {
            if ex.label != identity {
                return Err("identity label disagrees with input".into());
            }
            if ex.pattern != Some(Class::from_bool(kind.holds(&ex.input))) {
                return Err("pattern label missing or disagrees with input".into());
            }
        }
    }
    Ok(())
}

fn parse_header(line: &str) -> std::result::Result<(usize, Task, usize), String> {
    let mut n_half = None;
    let mut task = None;
    let mut size = None;
    for field in line.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| format!("malformed header field {field:?}"))?;
        match key {
            "n_half" => n_half = Some(value.parse::<usize>().map_err(|e| format!("n_half: {e}"))?),
            "task" => task = Some(value.parse::<Task>().map_err(|e| e.to_string())?),
            "size" => size = Some(value.parse::<usize>().map_err(|e| format!("size: {e}"))?),
            _ => return Err(format!("unknown header field {key:?}")),
        }
    }
    match (n_half, task, size) {
        (Some(n), Some(t), Some(s)) => Ok((n, t, s)),
        _ => Err("header must contain n_half, task and size".into()),
    }
}

fn parse_bits(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split_whitespace()
        .map(|tok| match tok {
            "0" => Ok(0.0),
            "1" => Ok(1.0),
            other => Err(format!("non-binary entry {other:?}")),
        })
        .collect()
}

fn parse_one_hot(s: &str) -> std::result::Result<Class, String> {
    match parse_bits(s)?.as_slice() {
        [1.0, 0.0] => Ok(Class::Positive),
        [0.0, 1.0] => Ok(Class::Negative),
        _ => Err(format!("label {:?} is not a one-hot pair", s.trim())),
    }
}

fn parse_example(line: &str, n_half: usize, task: Task) -> std::result::Result<Example, String> {
    let parts: Vec<&str> = line.split('|').collect();
    let expected_parts = 1 + task.heads();
    if parts.len() != expected_parts {
        return Err(format!(
            "expected {expected_parts} '|'-separated fields, got {}",
            parts.len()
        ));
    }
    let ex = Example {
        input: parse_bits(parts[0])?,
        label: parse_one_hot(parts[1])?,
        pattern: parts.get(2).map(|p| parse_one_hot(p)).transpose()?,
    };
    check_example(n_half, task, &ex)?;
    Ok(ex)
}

pub fn write_dataset(d: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, d.to_text()).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Dataset::from_text(&text, path)
}

fn identity_example(input: Vec<f64>) -> Example {
    let label = Class::from_bool(halves_equal(&input));
    Example {
        input,
        label,
        pattern: None,
    }
}

/// Balanced identity dataset: every equal-halves vector (or a sample of 500
/// when there are more) and as many distinct unequal ones.
pub fn generate_identity_dataset(rng: &mut Rng, n_half: usize) -> Result<Dataset> {
    check_n_half(n_half)?;
    let side = 1usize << n_half;
    let per_class = side.min(MAX_CLASS_SIZE);
    let mut halves: Vec<u64> = if side <= MAX_CLASS_SIZE {
        (0..side as u64).collect()
    } else {
        rng.sample_without_replacement(side, per_class)?
            .into_iter()
            .map(|h| h as u64)
            .collect()
    };
    halves.sort_unstable();
    let mut unequal = sample_unequal_codes(rng, n_half, per_class)?;
    unequal.sort_unstable();

    let len = 2 * n_half;
    let examples = halves
        .into_iter()
        .map(|h| equal_code(n_half, h))
        .chain(unequal)
        .map(|c| identity_example(code_to_bits(c, len)))
        .collect();
    Dataset::new(n_half, Task::Identity, examples)
}

/// Draws `k` distinct codes from `draw`, which must only produce members of
/// the intended population.
fn sample_distinct(rng: &mut Rng, k: usize, mut draw: impl FnMut(&mut Rng) -> u64) -> Vec<u64> {
    let mut seen = HashSet::with_capacity(k);
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let c = draw(rng);
        if seen.insert(c) {
            out.push(c);
        }
    }
    out.sort_unstable();
    out
}

/// Balanced dataset for a bit pattern alone; each class is sampled
/// separately.
pub fn generate_pattern_dataset(
    rng: &mut Rng,
    n_half: usize,
    kind: PatternKind,
) -> Result<Dataset> {
    check_n_half(n_half)?;
    if n_half < 2 {
        return Err(Error::config("pattern tasks need n_half >= 2"));
    }
    let len = 2 * n_half;
    let total = 1u64 << len;
    let mask = kind.mask(len);
    let positives = kind.positives(len);
    let per_class = positives.min(total - positives).min(MAX_CLASS_SIZE as u64) as usize;
    let uniform = |rng: &mut Rng| rng.next_u64() & (total - 1);

    let pos = sample_distinct(rng, per_class, |rng| match kind {
        PatternKind::SingleBit => uniform(rng) | mask,
        _ => uniform(rng) & !mask,
    });
    let neg = sample_distinct(rng, per_class, |rng| loop {
        let c = uniform(rng);
        if !kind.holds_code(c, len) {
            break c;
        }
    });
    let examples = pos
        .into_iter()
        .chain(neg)
        .map(|c| {
            let input = code_to_bits(c, len);
            Example {
                label: Class::from_bool(kind.holds(&input)),
                input,
                pattern: None,
            }
        })
        .collect();
    Dataset::new(n_half, Task::Pattern(kind), examples)
}

/// Identity plus pattern labels. Identity classes are balanced; within each
/// identity class the pattern classes are as close to half/half as the
/// available vectors permit.
pub fn generate_joint_dataset(rng: &mut Rng, n_half: usize, kind: PatternKind) -> Result<Dataset> {
    if !(2..=MAX_JOINT_N_HALF).contains(&n_half) {
        return Err(Error::config(format!(
            "joint tasks need n_half in 2..={MAX_JOINT_N_HALF}, got {n_half}"
        )));
    }
    let len = 2 * n_half;
    // cells[identity][pattern], both indexed by Class::index
    let mut cells: [[Vec<u64>; 2]; 2] = Default::default();
    for code in 0..1u64 << len {
        let equal = (code >> n_half) == (code & ((1 << n_half) - 1));
        let id = Class::from_bool(equal).index();
        let pat = Class::from_bool(kind.holds_code(code, len)).index();
        cells[id][pat].push(code);
    }
    let per_class = (1usize << n_half).min(MAX_CLASS_SIZE);

    let mut examples = Vec::with_capacity(2 * per_class);
    for (id, row) in cells.iter().enumerate() {
        let (avail_pos, avail_neg) = (row[0].len(), row[1].len());
        if avail_pos == 0 || avail_neg == 0 {
            return Err(Error::config(format!(
                "{kind} with n_half={n_half}: no {} examples in the {} identity class",
                if avail_pos == 0 {
                    "positive"
                } else {
                    "negative"
                },
                if id == 0 { "equal" } else { "unequal" },
            )));
        }
        let mut n_pos = (per_class / 2).min(avail_pos);
        let n_neg = (per_class - n_pos).min(avail_neg);
        n_pos = per_class - n_neg;
        for (pat, want) in [(0, n_pos), (1, n_neg)] {
            let cell = &row[pat];
            let mut picked: Vec<u64> = rng
                .sample_without_replacement(cell.len(), want)?
                .into_iter()
                .map(|i| cell[i])
                .collect();
            picked.sort_unstable();
            examples.extend(picked.into_iter().map(|c| Example {
                input: code_to_bits(c, len),
                label: Class::from_index(id),
                pattern: Some(Class::from_index(pat)),
            }));
        }
    }
    Dataset::new(n_half, Task::Joint(kind), examples)
}

pub fn generate(rng: &mut Rng, n_half: usize, task: Task) -> Result<Dataset> {
    match task {
        Task::Identity => generate_identity_dataset(rng, n_half),
        Task::Pattern(kind) => generate_pattern_dataset(rng, n_half, kind),
        Task::Joint(kind) => generate_joint_dataset(rng, n_half, kind),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
}

/// Stratified 75/25 split on the primary label. Each class keeps at least
/// one example on each side.
pub fn split_train_test(rng: &mut Rng, d: &Dataset) -> Result<Split> {
    if d.len() < 4 {
        return Err(Error::config(format!(
            "need at least 4 examples to split, got {}",
            d.len()
        )));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [Class::Positive, Class::Negative] {
        let mut idx: Vec<usize> = (0..d.len())
            .filter(|&i| d.examples[i].label == class)
            .collect();
        if idx.len() < 2 {
            return Err(Error::config(format!(
                "class {class:?} has {} examples; need at least 2 to split",
                idx.len()
            )));
        }
        rng.shuffle(&mut idx);
        let n_train =
            ((idx.len() as f64 * TRAIN_FRACTION).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split {
        train: d.subset(&train),
        test: d.subset(&test),
    })
}

impl Split {
    pub fn n_half(&self) -> usize {
        self.train.n_half()
    }

    pub fn task(&self) -> Task {
        self.train.task()
    }
}

/// Path-less parse, for callers holding text in memory.
pub fn parse_dataset(text: &str) -> Result<Dataset> {
    Dataset::from_text(text, &PathBuf::from("<memory>"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(d: &Dataset) -> Vec<Vec<f64>> {
        d.examples().iter().map(|e| e.input.clone()).collect()
    }

    #[test]
    fn equal_half_enumeration() {
        let one: Vec<_> = enumerate_equal_half_vectors(1).unwrap().collect();
        assert_eq!(one, vec![vec![0.0, 0.0], vec![1.0, 1.0]]);

        let three: Vec<_> = enumerate_equal_half_vectors(3).unwrap().collect();
        assert_eq!(three.len(), 8);
        assert_eq!(three[0], vec![0.0; 6]);
        assert!(three.windows(2).all(|w| w[0] < w[1]));

        let ten: Vec<_> = enumerate_equal_half_vectors(10).unwrap().collect();
        assert_eq!(ten.len(), 1024);
        assert!(ten.iter().all(|v| v.len() == 20 && halves_equal(v)));

        assert!(enumerate_equal_half_vectors(0).is_err());
        assert!(enumerate_equal_half_vectors(31).is_err());
    }

    #[test]
    fn unequal_rank_mapping_matches_enumeration() {
        for n in 1..=4 {
            let brute: Vec<u64> = (0..1u64 << (2 * n))
                .filter(|&c| (c >> n) != (c & ((1 << n) - 1)))
                .collect();
            let mapped: Vec<u64> = (0..brute.len() as u64)
                .map(|r| unequal_code_from_rank(n, r))
                .collect();
            assert_eq!(mapped, brute, "n_half={n}");
        }
    }

    #[test]
    fn unequal_sampling() {
        let mut got = sample_unequal_half_vectors(&mut Rng::new(1), 1, 2).unwrap();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);

        let s = sample_unequal_half_vectors(&mut Rng::new(5), 3, 8).unwrap();
        assert_eq!(s.len(), 8);
        assert!(s.iter().all(|v| !halves_equal(v)));
        let distinct: HashSet<_> = s.iter().map(|v| bits_key(v)).collect();
        assert_eq!(distinct.len(), 8);

        assert_eq!(
            sample_unequal_half_vectors(&mut Rng::new(9), 12, 50).unwrap(),
            sample_unequal_half_vectors(&mut Rng::new(9), 12, 50).unwrap()
        );
        assert!(sample_unequal_half_vectors(&mut Rng::new(0), 1, 3).is_err());
    }

    #[test]
    fn identity_dataset_sizes() {
        let d3 = generate_identity_dataset(&mut Rng::new(0), 3).unwrap();
        assert_eq!(d3.len(), 16);
        assert_eq!(d3.class_counts(), (8, 8));

        let d10 = generate_identity_dataset(&mut Rng::new(0), 10).unwrap();
        assert_eq!(d10.len(), 1000);
        assert_eq!(d10.class_counts(), (500, 500));

        let d30 = generate_identity_dataset(&mut Rng::new(0), 30).unwrap();
        assert_eq!(d30.len(), 1000);
        for ex in d30.examples() {
            assert_eq!(ex.label == Class::Positive, halves_equal(&ex.input));
        }
    }

    #[test]
    fn pattern_predicates() {
        assert!(PatternKind::SingleBit.holds(&[1.0, 0.0, 1.0, 1.0]));
        assert!(PatternKind::ParityZero.holds(&[0.0, 1.0, 0.0, 1.0, 0.0, 1.0]));
        assert!(!PatternKind::ParityZero.holds(&[1.0, 1.0, 0.0, 0.0, 0.0, 0.0]));
        assert!(PatternKind::ParityZeroOdd.holds(&[1.0, 0.0, 1.0, 0.0]));
        for kind in [
            PatternKind::SingleBit,
            PatternKind::ParityZero,
            PatternKind::ParityZeroOdd,
        ] {
            for code in 0..64u64 {
                let bits = code_to_bits(code, 6);
                assert_eq!(kind.holds_code(code, 6), kind.holds(&bits), "{kind} {code}");
            }
            let brute = (0..64u64).filter(|&c| kind.holds_code(c, 6)).count() as u64;
            assert_eq!(kind.positives(6), brute);
        }
    }

    #[test]
    fn pattern_dataset_is_balanced_and_consistent() {
        for kind in [
            PatternKind::SingleBit,
            PatternKind::ParityZero,
            PatternKind::ParityZeroOdd,
        ] {
            for n in [2, 3, 10, 20] {
                let d = generate_pattern_dataset(&mut Rng::new(n as u64), n, kind).unwrap();
                let (p, q) = d.class_counts();
                assert_eq!(p, q, "{kind} n={n}");
                assert!(d.len() <= MAX_DATASET_SIZE);
            }
        }
        assert!(generate_pattern_dataset(&mut Rng::new(0), 1, PatternKind::SingleBit).is_err());
    }

    #[test]
    fn joint_dataset_cells() {
        let d = generate_joint_dataset(&mut Rng::new(4), 3, PatternKind::SingleBit).unwrap();
        assert_eq!(d.class_counts(), (8, 8));
        let mut cells = [[0usize; 2]; 2];
        for ex in d.examples() {
            assert_eq!(ex.label, Class::from_bool(halves_equal(&ex.input)));
            cells[ex.label.index()][ex.pattern.unwrap().index()] += 1;
        }
        assert_eq!(cells, [[4, 4], [4, 4]]);

        // n_half=3 zero-parity: the only equal positive is the zero vector.
        let d = generate_joint_dataset(&mut Rng::new(4), 3, PatternKind::ParityZero).unwrap();
        let mut cells = [[0usize; 2]; 2];
        for ex in d.examples() {
            cells[ex.label.index()][ex.pattern.unwrap().index()] += 1;
        }
        assert_eq!(cells, [[1, 7], [4, 4]]);

        assert!(generate_joint_dataset(&mut Rng::new(0), 1, PatternKind::ParityZero).is_err());
        assert!(generate_joint_dataset(&mut Rng::new(0), 11, PatternKind::SingleBit).is_err());
    }

    #[test]
    fn split_arithmetic() {
        let d = generate_identity_dataset(&mut Rng::new(2), 3).unwrap();
        let s = split_train_test(&mut Rng::new(3), &d).unwrap();
        assert_eq!(s.train.class_counts(), (6, 6));
        assert_eq!(s.test.class_counts(), (2, 2));

        let d = generate_identity_dataset(&mut Rng::new(2), 10).unwrap();
        let s = split_train_test(&mut Rng::new(3), &d).unwrap();
        assert_eq!(s.train.class_counts(), (375, 375));
        assert_eq!(s.test.class_counts(), (125, 125));
        assert_eq!(s, split_train_test(&mut Rng::new(3), &d).unwrap());

        let mut all: Vec<_> = inputs(&s.train);
        all.extend(inputs(&s.test));
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut source = inputs(&d);
        source.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(all, source);
    }

    #[test]
    fn split_rejects_tiny_classes() {
        let ex = |bits: [f64; 2]| identity_example(bits.to_vec());
        let d = Dataset::new(
            1,
            Task::Identity,
            vec![
                ex([0.0, 0.0]),
                ex([0.0, 1.0]),
                ex([1.0, 0.0]),
                ex([1.0, 1.0]),
            ],
        )
        .unwrap();
        assert!(split_train_test(&mut Rng::new(0), &d).is_ok());
        let d = Dataset::new(
            1,
            Task::Identity,
            vec![ex([0.0, 0.0]), ex([0.0, 1.0]), ex([1.0, 0.0])],
        )
        .unwrap();
        assert!(split_train_test(&mut Rng::new(0), &d).is_err());
    }

    #[test]
    fn text_round_trip_and_errors() {
        let d = generate_joint_dataset(&mut Rng::new(8), 2, PatternKind::ParityZero).unwrap();
        assert_eq!(parse_dataset(&d.to_text()).unwrap(), d);

        let err = parse_dataset("").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));

        let bad = "n_half=1 task=identity size=2\n0 0 | 1 0\n0 2 | 0 1\n";
        match parse_dataset(bad).unwrap_err() {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("non-binary"));
            }
            other => panic!("unexpected {other:?}"),
        }

        let mislabelled = "n_half=1 task=identity size=1\n0 0 | 0 1\n";
        assert!(matches!(
            parse_dataset(mislabelled).unwrap_err(),
            Error::Parse { line: 2, .. }
        ));
    }
}
