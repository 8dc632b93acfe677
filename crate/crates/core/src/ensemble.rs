//! Seeded generation of Gaussian sensing matrices, sparse and compressible
//! signals, sphere-uniform noise, and the problem instances built from them.
//!
//! Every generator is a pure function of its arguments and a 64-bit seed. The
//! random stream is ChaCha20 (`rand_chacha` 0.9) seeded through
//! `SeedableRng::seed_from_u64`, and Gaussian variates come from the
//! `rand_distr` 0.5 `StandardNormal` ziggurat sampler. Both are portable, so a
//! seed reproduces the same bits on every platform.
//!
//! Indices are 0-based in memory and 1-based in every file format.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector, DVectorView};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type Seed = u64;

/// Human-readable name of the generator stack, echoed into output files.
pub const RNG_ALGORITHM: &str = "chacha20(rand_chacha-0.9)+ziggurat(rand_distr-0.5)";

/// Stream identifiers used with [`derive_seed`].
pub mod stream {
    pub const MATRIX: u8 = 0;
    pub const SIGNAL: u8 = 1;
    pub const NOISE: u8 = 2;
    pub const AUX: u8 = 3;
}

pub fn rng_from_seed(seed: Seed) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix_finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent per-trial seed.
///
/// The trial index and stream are packed into `trial << 8 | stream`,
/// multiplied by the odd golden-ratio constant, xored with the SplitMix64
/// finalization of `master`, and finalized once more. Every step is a
/// bijection of `u64`, so for a fixed master the map is injective over all
/// `trial_index < 2^56` and all 256 streams.
pub fn derive_seed(master: Seed, trial_index: u64, stream: u8) -> Seed {
    debug_assert!(trial_index < (1 << 56), "trial index exceeds 56 bits");
    let packed = (trial_index << 8) | u64::from(stream);
    splitmix_finalize(splitmix_finalize(master) ^ packed.wrapping_mul(GOLDEN_GAMMA))
}

/// Dense `n x p` measurement matrix stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    data: DMatrix<f64>,
}

impl SensingMatrix {
    pub fn from_matrix(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::domain("sensing matrix needs at least one row and one column"));
        }
        Ok(Self { data })
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn column(&self, j: usize) -> DVectorView<'_, f64> {
        self.data.column(j)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Copies the listed columns into a new `n x |cols|` matrix.
    pub fn select_columns(&self, cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(self.nrows(), cols.len(), |i, c| self.data[(i, cols[c])])
    }

    /// `A x`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.data * x
    }

    /// `A^T r`, the correlations of every column with `r`.
    pub fn correlate(&self, r: &DVector<f64>) -> DVector<f64> {
        self.data.tr_mul(r)
    }

    /// `A x` for a sparse `x`, summing the support columns in increasing index order.
    pub fn apply_sparse(&self, signal: &SignalSpec) -> DVector<f64> {
        let mut out = DVector::zeros(self.nrows());
        for (&i, &v) in signal.support.iter().zip(&signal.values) {
            out.axpy(v, &self.data.column(i), 1.0);
        }
        out
    }
}

/// Column-major stream of the entries [`gaussian_matrix`] would produce.
///
/// Lets statistical checks run over matrix sizes that do not fit in memory.
pub struct GaussianEntries {
    rng: ChaCha20Rng,
    scale: f64,
    remaining: usize,
}

impl GaussianEntries {
    pub fn new(n: usize, p: usize, seed: Seed) -> Result<Self> {
        let remaining = checked_entry_count(n, p)?;
        Ok(Self { rng: rng_from_seed(seed), scale: 1.0 / (n as f64).sqrt(), remaining })
    }
}

impl Iterator for GaussianEntries {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let z: f64 = StandardNormal.sample(&mut self.rng);
        Some(z * self.scale)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

fn checked_entry_count(n: usize, p: usize) -> Result<usize> {
    if n == 0 || p == 0 {
        return Err(Error::domain(format!("matrix dimensions must be positive, got {n} x {p}")));
    }
    n.checked_mul(p)
        .filter(|&c| c.checked_mul(std::mem::size_of::<f64>()).is_some_and(|b| b <= isize::MAX as usize))
        .ok_or(Error::Size { rows: n, cols: p })
}

/// `n x p` matrix with i.i.d. `N(0, 1/n)` entries, filled column by column.
pub fn gaussian_matrix(n: usize, p: usize, seed: Seed) -> Result<SensingMatrix> {
    let entries = GaussianEntries::new(n, p, seed)?;
    let data = DMatrix::from_iterator(n, p, entries);
    Ok(SensingMatrix { data })
}

/// Sparse ground truth: strictly increasing support with nonzero values.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    p: usize,
    support: Vec<usize>,
    values: Vec<f64>,
}

impl SignalSpec {
    /// Builds a signal from 0-based indices. Pairs are sorted by index.
    pub fn new(p: usize, support: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if support.len() != values.len() {
            return Err(Error::Shape(format!("{} support indices but {} values", support.len(), values.len())));
        }
        let mut pairs: Vec<(usize, f64)> = support.into_iter().zip(values).collect();
        pairs.sort_by_key(|&(i, _)| i);
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::domain(format!("duplicate support index {}", w[0].0 + 1)));
            }
        }
        if let Some(&(i, _)) = pairs.iter().find(|&&(i, _)| i >= p) {
            return Err(Error::domain(format!("support index {} exceeds dimension {p}", i + 1)));
        }
        if let Some(&(i, _)) = pairs.iter().find(|&&(_, v)| v == 0.0 || !v.is_finite()) {
            return Err(Error::domain(format!("value at index {} must be finite and nonzero", i + 1)));
        }
        let (support, values) = pairs.into_iter().unzip();
        Ok(Self { p, support, values })
    }

    pub fn zero(p: usize) -> Self {
        Self { p, support: Vec::new(), values: Vec::new() }
    }

    /// Exact nonzero pattern of a dense vector.
    pub fn from_dense(x: &DVector<f64>) -> Self {
        let (support, values) = x.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, &v)| (i, v)).unzip();
        Self { p: x.len(), support, values }
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.support.len()
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `sign(x̄)` as ±1.0 entries.
    pub fn signs(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.signum()).collect()
    }

    /// Smallest magnitude on the support, `None` when the support is empty.
    pub fn min_magnitude(&self) -> Option<f64> {
        self.values.iter().map(|v| v.abs()).reduce(f64::min)
    }

    pub fn dense(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.p);
        for (&i, &v) in self.support.iter().zip(&self.values) {
            x[i] = v;
        }
        x
    }

    /// Same support and signs, every magnitude multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor > 0.0);
        Self { p: self.p, support: self.support.clone(), values: self.values.iter().map(|v| v * factor).collect() }
    }
}

/// First `k` entries of a Fisher-Yates shuffle of `0..p`, i.e. a uniform
/// random ordered k-subset. Shuffling further with the same generator
/// extends the prefix, so supports drawn with a common seed are nested in k.
fn shuffled_prefix(p: usize, k: usize, rng: &mut ChaCha20Rng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..p).collect();
    for i in 0..k {
        let j = rng.random_range(i..p);
        perm.swap(i, j);
    }
    perm
}

/// k-sparse signal with a uniform random support and i.i.d. ±T values.
pub fn sparse_signal(p: usize, k: usize, t: f64, seed: Seed) -> Result<SignalSpec> {
    if k > p {
        return Err(Error::domain(format!("sparsity k = {k} exceeds dimension p = {p}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("magnitude T must be positive, got {t}")));
    }
    let mut rng = rng_from_seed(seed);
    let perm = shuffled_prefix(p, k, &mut rng);
    let support = perm[..k].to_vec();
    let values = (0..k).map(|_| if rng.random::<bool>() { t } else { -t }).collect();
    SignalSpec::new(p, support, values)
}

/// Noise vector uniform on the sphere of radius `eps`.
pub fn sphere_noise(n: usize, eps: f64, seed: Seed) -> Result<DVector<f64>> {
    if n == 0 {
        return Err(Error::domain("noise dimension must be positive"));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::domain(format!("noise radius must be nonnegative, got {eps}")));
    }
    if eps == 0.0 {
        return Ok(DVector::zeros(n));
    }
    let mut rng = rng_from_seed(seed);
    loop {
        let g: DVector<f64> = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
        let norm = g.norm();
        if norm > 0.0 {
            return Ok(g * (eps / norm));
        }
    }
}

/// Compressible signal: `k` entries of magnitude `T` on a uniform random
/// support, and a power-law tail on the remaining `p - k` entries whose j-th
/// largest (j = 1, 2, ...) has magnitude `T (1 + j)^(-tail_decay)`. All signs
/// are independent and uniform; tail positions are a uniform permutation of
/// the complement.
pub fn compressible_signal(p: usize, k: usize, t: f64, tail_decay: f64, seed: Seed) -> Result<DVector<f64>> {
    if k > p {
        return Err(Error::domain(format!("sparsity k = {k} exceeds dimension p = {p}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("magnitude T must be positive, got {t}")));
    }
    if !(tail_decay > 0.0 && tail_decay.is_finite()) {
        return Err(Error::domain(format!("tail decay must be positive, got {tail_decay}")));
    }
    let mut rng = rng_from_seed(seed);
    let perm = shuffled_prefix(p, p, &mut rng);
    let mut x = DVector::zeros(p);
    for (rank, &i) in perm.iter().enumerate() {
        let magnitude = if rank < k { t } else { t * (1.0 + (rank - k + 1) as f64).powf(-tail_decay) };
        x[i] = if rng.random::<bool>() { magnitude } else { -magnitude };
    }
    Ok(x)
}

/// Best k-term approximation: the `k` largest magnitudes, ties broken by the
/// smallest index. Zero entries are never selected.
pub fn best_k_term(x: &DVector<f64>, k: usize) -> SignalSpec {
    let mut order: Vec<usize> = (0..x.len()).filter(|&i| x[i] != 0.0).collect();
    order.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    order.truncate(k);
    let values = order.iter().map(|&i| x[i]).collect();
    SignalSpec::new(x.len(), order, values).expect("entries of a dense vector form a valid signal")
}

/// Seeds behind a [`ProblemInstance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedRecord {
    pub matrix: Seed,
    pub noise: Seed,
    /// Seed of the signal generator, absent when the signal was supplied directly.
    pub signal: Option<Seed>,
}

/// `y = A x0 + w` together with everything needed to rebuild it.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub a: SensingMatrix,
    pub x0: SignalSpec,
    pub w: DVector<f64>,
    pub y: DVector<f64>,
    pub eps: f64,
    pub seeds: SeedRecord,
}

impl ProblemInstance {
    /// Draws `A`, a ±T k-sparse signal and sphere noise of radius `eps` from
    /// seeds derived from `master` (trial index 0).
    pub fn generate(n: usize, p: usize, k: usize, t: f64, eps: f64, master: Seed) -> Result<Self> {
        let signal_seed = derive_seed(master, 0, stream::SIGNAL);
        let x0 = sparse_signal(p, k, t, signal_seed)?;
        let seeds = SeedRecord {
            matrix: derive_seed(master, 0, stream::MATRIX),
            noise: derive_seed(master, 0, stream::NOISE),
            signal: Some(signal_seed),
        };
        Self::from_seeds(n, x0, eps, seeds)
    }

    /// Regenerates `A` and `w` from the recorded seeds around a given signal.
    pub fn from_seeds(n: usize, x0: SignalSpec, eps: f64, seeds: SeedRecord) -> Result<Self> {
        let a = gaussian_matrix(n, x0.dim(), seeds.matrix)?;
        let w = sphere_noise(n, eps, seeds.noise)?;
        let y = a.apply_sparse(&x0) + &w;
        Ok(Self { a, x0, w, y, eps, seeds })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn p(&self) -> usize {
        self.a.ncols()
    }
}

const INSTANCE_FORMAT: &str = "sparselab-instance-v1";

/// Writes the instance container.
///
/// The file is CSV. A `key,value` block records the format tag, `n`, `p`,
/// `eps`, the RNG name and the three seeds (`signal_seed` may be `none`);
/// then an `index,value` header introduces one row per support entry with
/// 1-based indices. The matrix and the noise are not stored: they are
/// regenerated from their seeds on load.
pub fn write_instance(instance: &ProblemInstance, path: &Path) -> Result<()> {
    let mut out = String::new();
    let seeds = &instance.seeds;
    let _ = writeln!(out, "key,value");
    let _ = writeln!(out, "format,{INSTANCE_FORMAT}");
    let _ = writeln!(out, "rng,{RNG_ALGORITHM}");
    let _ = writeln!(out, "n,{}", instance.n());
    let _ = writeln!(out, "p,{}", instance.p());
    let _ = writeln!(out, "eps,{}", instance.eps);
    let _ = writeln!(out, "matrix_seed,{}", seeds.matrix);
    let _ = writeln!(out, "noise_seed,{}", seeds.noise);
    match seeds.signal {
        Some(s) => {
            let _ = writeln!(out, "signal_seed,{s}");
        }
        None => {
            let _ = writeln!(out, "signal_seed,none");
        }
    }
    let _ = writeln!(out, "k,{}", instance.x0.k());
    let _ = writeln!(out, "index,value");
    for (&i, &v) in instance.x0.support().iter().zip(instance.x0.values()) {
        let _ = writeln!(out, "{},{}", i + 1, v);
    }
    let mut file = std::fs::File::create(path).map_err(Error::at(path))?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Reads a container written by [`write_instance`] and regenerates the instance.
pub fn read_instance(path: &Path) -> Result<ProblemInstance> {
    let file = std::io::BufReader::new(std::fs::File::open(path).map_err(Error::at(path))?);
    let mut lines = file.lines();
    let bad = |msg: &str| Error::Parse(format!("{}: {msg}", path.display()));

    let header = lines.next().transpose()?.ok_or_else(|| bad("empty file"))?;
    if header.trim() != "key,value" {
        return Err(bad("missing key,value header"));
    }
    let mut fields = std::collections::HashMap::new();
    for line in lines.by_ref() {
        let line = line?;
        let line = line.trim();
        if line == "index,value" {
            break;
        }
        let (key, value) = line.split_once(',').ok_or_else(|| bad("expected key,value row"))?;
        fields.insert(key.to_string(), value.to_string());
    }
    let get = |key: &str| fields.get(key).ok_or_else(|| bad(&format!("missing field {key}")));
    let parse_u64 =
        |key: &str| -> Result<u64> { get(key)?.parse().map_err(|_| bad(&format!("field {key} is not an integer"))) };
    if get("format")? != INSTANCE_FORMAT {
        return Err(bad("unsupported format tag"));
    }
    let n = parse_u64("n")? as usize;
    let p = parse_u64("p")? as usize;
    let k = parse_u64("k")? as usize;
    let eps: f64 = get("eps")?.parse().map_err(|_| bad("eps is not a number"))?;
    let signal = match get("signal_seed")?.as_str() {
        "none" => None,
        s => Some(s.parse().map_err(|_| bad("signal_seed is not an integer"))?),
    };
    let seeds = SeedRecord { matrix: parse_u64("matrix_seed")?, noise: parse_u64("noise_seed")?, signal };

    let mut support = Vec::with_capacity(k);
    let mut values = Vec::with_capacity(k);
    for line in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (i, v) = line.split_once(',').ok_or_else(|| bad("expected index,value row"))?;
        let i: usize = i.parse().map_err(|_| bad("support index is not an integer"))?;
        if i == 0 {
            return Err(bad("support indices are 1-based"));
        }
        support.push(i - 1);
        values.push(v.parse().map_err(|_| bad("support value is not a number"))?);
    }
    if support.len() != k {
        return Err(bad(&format!("header declares k = {k} but {} rows follow", support.len())));
    }
    let x0 = SignalSpec::new(p, support, values)?;
    ProblemInstance::from_seeds(n, x0, eps, seeds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn same_seed_same_matrix() {
        let a = gaussian_matrix(2, 3, 11).unwrap();
        let b = gaussian_matrix(2, 3, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gaussian_matrix(2, 3, 12).unwrap());
    }

    #[test]
    fn one_by_one_is_standard_normal_draw() {
        let a = gaussian_matrix(1, 1, 5).unwrap();
        let mut rng = rng_from_seed(5);
        let z: f64 = StandardNormal.sample(&mut rng);
        assert_eq!(a.matrix()[(0, 0)], z);
    }

    #[test]
    fn stream_matches_matrix_layout() {
        let a = gaussian_matrix(7, 5, 3).unwrap();
        let streamed: Vec<f64> = GaussianEntries::new(7, 5, 3).unwrap().collect();
        assert_eq!(a.matrix().as_slice(), streamed.as_slice());
    }

    #[test]
    fn dimension_errors() {
        assert!(matches!(gaussian_matrix(0, 3, 1), Err(Error::Domain(_))));
        assert!(matches!(gaussian_matrix(usize::MAX, 2, 1), Err(Error::Size { .. })));
    }

    #[test]
    fn moderate_matrix_moments() {
        let (n, p) = (500, 2000);
        let a = gaussian_matrix(n, p, 99).unwrap();
        let m = a.matrix().as_slice();
        let count = m.len() as f64;
        let mean = m.iter().sum::<f64>() / count;
        let var = m.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
        // mean has sd sqrt(1/n / count), variance has relative sd sqrt(2/count)
        assert!(mean.abs() < 5.0 * (1.0 / n as f64 / count).sqrt());
        assert!((var * n as f64 - 1.0).abs() < 5.0 * (2.0 / count).sqrt());
    }

    #[test]
    fn sparse_signal_edge_cases() {
        let empty = sparse_signal(10, 0, 1.0, 4).unwrap();
        assert_eq!(empty.k(), 0);
        assert_eq!(empty.dense(), DVector::zeros(10));

        let full = sparse_signal(10, 10, 2.0, 4).unwrap();
        assert_eq!(full.support(), (0..10).collect::<Vec<_>>().as_slice());
        assert!(full.values().iter().all(|v| v.abs() == 2.0));

        assert!(matches!(sparse_signal(3, 4, 1.0, 0), Err(Error::Domain(_))));
        assert!(matches!(sparse_signal(3, 1, 0.0, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn figure_one_signal_is_valid() {
        let x = sparse_signal(32000, 246, 0.6263, 1).unwrap();
        assert_eq!(x.k(), 246);
        assert_eq!(SignalSpec::from_dense(&x.dense()), x);
        assert!(x.support().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn supports_nest_in_k() {
        let small = sparse_signal(200, 5, 1.0, 42).unwrap();
        let large = sparse_signal(200, 20, 1.0, 42).unwrap();
        assert!(small.support().iter().all(|i| large.support().contains(i)));
    }

    #[test]
    fn sign_balance_within_binomial_interval() {
        let (k, trials) = (10usize, 2000u64);
        let positives: usize = (0..trials)
            .map(|t| {
                let x = sparse_signal(50, k, 1.0, derive_seed(7, t, stream::SIGNAL)).unwrap();
                x.values().iter().filter(|&&v| v > 0.0).count()
            })
            .sum();
        let total = (k as f64) * trials as f64;
        // 99% normal-approximation interval for Binomial(total, 1/2)
        let half_width = 2.5758 * (total * 0.25).sqrt();
        assert!((positives as f64 - total / 2.0).abs() <= half_width, "{positives} of {total}");
    }

    #[test]
    fn sphere_noise_radius() {
        assert_eq!(sphere_noise(5, 0.0, 1).unwrap(), DVector::zeros(5));
        let w = sphere_noise(8000, 1.0, 3).unwrap();
        assert!((w.norm() - 1.0).abs() <= 1e-12);
        assert!(matches!(sphere_noise(3, -1.0, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn circle_noise_angle_is_uniform() {
        // chi-square goodness of fit of the angle over 16 equal sectors
        let bins = 16usize;
        let trials = 8000u64;
        let mut counts = vec![0usize; bins];
        for t in 0..trials {
            let w = sphere_noise(2, 3.0, derive_seed(21, t, stream::NOISE)).unwrap();
            let angle = w[1].atan2(w[0]) + std::f64::consts::PI;
            let b = ((angle / (2.0 * std::f64::consts::PI)) * bins as f64) as usize;
            counts[b.min(bins - 1)] += 1;
        }
        let expected = trials as f64 / bins as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 0.99 quantile of chi-square with 15 degrees of freedom
        assert!(chi2 < 30.578, "chi2 = {chi2}");
    }

    #[test]
    fn compressible_without_tail_is_sparse() {
        let x = compressible_signal(8, 8, 1.0, 3.0, 2).unwrap();
        assert!(x.iter().all(|v| v.abs() == 1.0));
    }

    #[test]
    fn compressible_tail_profile() {
        let x = compressible_signal(100, 10, 1.0, 2.0, 9).unwrap();
        let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        assert!(mags.windows(2).all(|w| w[0] >= w[1]));
        assert!(mags[..10].iter().all(|&m| m == 1.0));
        let head = best_k_term(&x, 10);
        let tail = &x - head.dense();
        let expected_tail: f64 = (1..=90).map(|j| (1.0 + j as f64).powi(-4)).sum::<f64>().sqrt();
        assert!((tail.norm() - expected_tail).abs() < 1e-12);
        assert!(tail.norm() < head.dense().norm());
    }

    #[test]
    fn best_k_term_examples() {
        let x = DVector::from_vec(vec![3.0, -1.0, 2.0, 0.0]);
        assert_eq!(best_k_term(&x, 2).dense(), DVector::from_vec(vec![3.0, 0.0, 2.0, 0.0]));
        assert_eq!(best_k_term(&x, 0).dense(), DVector::zeros(4));
        assert_eq!(best_k_term(&x, 3).dense(), x);
        // asking for more than the nonzero count keeps only the nonzeros
        assert_eq!(best_k_term(&x, 4).dense(), x);
        // ties go to the smallest index
        let tied = DVector::from_vec(vec![1.0, -2.0, 2.0, -2.0]);
        assert_eq!(best_k_term(&tied, 2).support(), &[1, 2]);
    }

    #[test]
    fn derive_seed_properties() {
        assert_ne!(derive_seed(5, 0, 0), derive_seed(5, 1, 0));
        assert_ne!(derive_seed(5, 0, 0), derive_seed(5, 0, 1));
        assert_eq!(derive_seed(5, 17, 2), derive_seed(5, 17, 2));
    }

    #[test]
    fn derive_seed_has_no_collisions_over_a_million() {
        let mut seeds: Vec<u64> =
            (0..250_000u64).flat_map(|t| (0..4u8).map(move |s| derive_seed(0xDEAD_BEEF, t, s))).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 1_000_000);
    }

    #[test]
    fn signal_spec_rejects_bad_input() {
        assert!(SignalSpec::new(5, vec![1, 1], vec![1.0, 2.0]).is_err());
        assert!(SignalSpec::new(5, vec![5], vec![1.0]).is_err());
        assert!(SignalSpec::new(5, vec![2], vec![0.0]).is_err());
        assert!(SignalSpec::new(5, vec![2], vec![1.0, 2.0]).is_err());
        let s = SignalSpec::new(5, vec![3, 0], vec![1.0, -2.0]).unwrap();
        assert_eq!(s.support(), &[0, 3]);
        assert_eq!(s.values(), &[-2.0, 1.0]);
    }

    #[test]
    fn instance_identity_and_round_trip() {
        let inst = ProblemInstance::generate(30, 80, 4, 1.5, 0.5, 77).unwrap();
        let recomputed = inst.a.apply_sparse(&inst.x0) + &inst.w;
        assert_eq!(inst.y, recomputed);
        assert!((inst.w.norm() - 0.5).abs() < 1e-12);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.csv");
        write_instance(&inst, &path).unwrap();
        let back = read_instance(&path).unwrap();
        assert_eq!(back.y, inst.y);
        assert_eq!(back.x0, inst.x0);
        assert_eq!(back.seeds, inst.seeds);
        assert_eq!(back.eps, inst.eps);
    }

    #[test]
    fn read_instance_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "key,value\nformat,other\n").unwrap();
        assert!(matches!(read_instance(&path), Err(Error::Parse(_))));
    }

    fn brute_force_best(x: &[f64], k: usize) -> f64 {
        let p = x.len();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << p) {
            if mask.count_ones() as usize > k {
                continue;
            }
            // optimal z on a fixed support copies x there
            let err: f64 = (0..p).filter(|i| mask & (1 << i) == 0).map(|i| x[i] * x[i]).sum();
            best = best.min(err);
        }
        best.sqrt()
    }

    proptest! {
        #[test]
        fn best_k_term_is_optimal(x in prop::collection::vec(-5.0f64..5.0, 1..=8), k in 0usize..=8) {
            let k = k.min(x.len());
            let v = DVector::from_vec(x.clone());
            let err = (&v - best_k_term(&v, k).dense()).norm();
            prop_assert!(err <= brute_force_best(&x, k) + 1e-12);
        }

        #[test]
        fn sphere_noise_norm_is_exact(n in 1usize..300, eps in 0.0f64..1e3, seed in any::<u64>()) {
            let w = sphere_noise(n, eps, seed).unwrap();
            prop_assert!((w.norm() - eps).abs() <= 1e-10 * eps.max(1.0));
        }

        #[test]
        fn generators_are_deterministic(seed in any::<u64>(), k in 0usize..20) {
            prop_assert_eq!(sparse_signal(40, k, 1.0, seed).unwrap(), sparse_signal(40, k, 1.0, seed).unwrap());
            prop_assert_eq!(compressible_signal(40, k, 1.0, 2.0, seed).unwrap(), compressible_signal(40, k, 1.0, 2.0, seed).unwrap());
        }
    }
}
