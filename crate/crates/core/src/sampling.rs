//! Reproducible Monte Carlo integration over a box.
//!
//! Points come in pairs, either two independent uniform points or two
//! uniform points in the same cell of a stratification of the box. Each
//! point emits a sparse vector; the estimator of its integral is the
//! pair-mean weighted by the pair volume, and the pair differences give an
//! unbiased covariance estimate within each index group.
//!
//! Pairs are processed in fixed chunks, each with its own random stream
//! `(seed, chunk)`, and chunk results are added in chunk order, so the output
//! does not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::vector::Vector;

pub const CHUNK_PAIRS: usize = 4096;
const BATCH_CHUNKS: usize = 64;
/// Bound on the doubles held by one batch of chunk partials.
const BATCH_BUDGET: usize = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxRegion {
    pub lo: Vector,
    pub hi: Vector,
}

impl BoxRegion {
    pub fn new(lo: Vector, hi: Vector) -> Self {
        BoxRegion { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.hi[i] - self.lo[i]).product()
    }

    pub fn uniform(&self, rng: &mut impl Rng) -> Vector {
        Vector::from_fn(self.dim(), |i| {
            self.lo[i] + (self.hi[i] - self.lo[i]) * rng.random::<f64>()
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Independent uniform points.
    Uniform,
    /// Two uniform points in every cell of a regular grid.
    Stratified,
}

#[derive(Clone, Debug)]
pub struct PairPlan {
    region: BoxRegion,
    /// Grid cells per axis (empty for the uniform scheme).
    strata: Vec<usize>,
    pairs: usize,
    seed: u64,
}

impl PairPlan {
    /// Plans at most `samples` points.
    pub fn new(region: BoxRegion, samples: usize, scheme: Scheme, seed: u64) -> Self {
        let pairs_wanted = (samples / 2).max(1);
        match scheme {
            Scheme::Uniform => PairPlan {
                region,
                strata: Vec::new(),
                pairs: pairs_wanted,
                seed,
            },
            Scheme::Stratified => {
                let n = region.dim();
                let g = ((pairs_wanted as f64).powf(1.0 / n as f64).floor() as usize).max(1);
                let mut strata = vec![g; n];
                // floor per axis can lose a lot in total; top up axis by axis
                while strata.iter().product::<usize>() > pairs_wanted {
                    let i = strata.iter().enumerate().max_by_key(|s| s.1).unwrap().0;
                    strata[i] -= 1;
                }
                for i in 0..n {
                    let others: usize = strata.iter().product::<usize>() / strata[i];
                    if (strata[i] + 1) * others <= pairs_wanted {
                        strata[i] += 1;
                    }
                }
                let pairs = strata.iter().product();
                PairPlan {
                    region,
                    strata,
                    pairs,
                    seed,
                }
            }
        }
    }

    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    pub fn pairs(&self) -> usize {
        self.pairs
    }

    pub fn samples(&self) -> usize {
        2 * self.pairs
    }

    /// Volume represented by one pair.
    pub fn pair_volume(&self) -> f64 {
        self.region.volume() / self.pairs as f64
    }

    fn draw_pair(&self, index: usize, rng: &mut ChaCha8Rng) -> (Vector, Vector) {
        if self.strata.is_empty() {
            return (self.region.uniform(rng), self.region.uniform(rng));
        }
        let n = self.region.dim();
        let mut cell = [0usize; crate::vector::MAX_DIM];
        let mut rest = index;
        for i in 0..n {
            cell[i] = rest % self.strata[i];
            rest /= self.strata[i];
        }
        let mut draw = || {
            Vector::from_fn(n, |i| {
                let w = (self.region.hi[i] - self.region.lo[i]) / self.strata[i] as f64;
                self.region.lo[i] + w * (cell[i] as f64 + rng.random::<f64>())
            })
        };
        let a = draw();
        let b = draw();
        (a, b)
    }
}

/// Partition of the flat index space into contiguous groups; covariances are
/// kept within groups only.
#[derive(Clone, Debug)]
pub struct Layout {
    starts: Vec<usize>,
    sizes: Vec<usize>,
    cov_offsets: Vec<usize>,
    group_of: Vec<u32>,
    cov_len: usize,
}

impl Layout {
    pub fn new(sizes: impl IntoIterator<Item = usize>) -> Self {
        let sizes: Vec<usize> = sizes.into_iter().collect();
        let mut starts = Vec::with_capacity(sizes.len());
        let mut cov_offsets = Vec::with_capacity(sizes.len());
        let mut group_of = Vec::new();
        let (mut start, mut cov) = (0, 0);
        for (g, &s) in sizes.iter().enumerate() {
            starts.push(start);
            cov_offsets.push(cov);
            group_of.extend(std::iter::repeat_n(g as u32, s));
            start += s;
            cov += s * s;
        }
        Layout {
            starts,
            sizes,
            cov_offsets,
            group_of,
            cov_len: cov,
        }
    }

    pub fn len(&self) -> usize {
        self.group_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.group_of.is_empty()
    }

    pub fn groups(&self) -> usize {
        self.sizes.len()
    }

    pub fn group_start(&self, g: usize) -> usize {
        self.starts[g]
    }

    pub fn group_size(&self, g: usize) -> usize {
        self.sizes[g]
    }
}

/// Sparse output of one point. `tag` counts the point in one of the
/// caller's hit counters.
#[derive(Clone, Debug, Default)]
pub struct Emission {
    pub entries: Vec<(usize, f64)>,
    pub tag: Option<usize>,
}

impl Emission {
    pub fn clear(&mut self) {
        self.entries.clear();
        self.tag = None;
    }

    pub fn push(&mut self, index: usize, value: f64) {
        self.entries.push((index, value));
    }
}

/// Integral estimates with their within-group covariance.
#[derive(Clone, Debug)]
pub struct Moments {
    pub sum: Vec<f64>,
    cov: Vec<f64>,
    pub counts: Vec<u64>,
    pub samples: usize,
    layout: Layout,
}

impl Moments {
    fn zeros(layout: &Layout, tags: usize) -> Self {
        Moments {
            sum: vec![0.0; layout.len()],
            cov: vec![0.0; layout.cov_len],
            counts: vec![0; tags],
            samples: 0,
            layout: layout.clone(),
        }
    }

    fn add(&mut self, other: &Moments) {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.cov.iter_mut().zip(&other.cov) {
            *a += b;
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.samples += other.samples;
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Covariance block of group `g`, row-major.
    pub fn group_cov(&self, g: usize) -> &[f64] {
        let s = self.layout.sizes[g];
        let o = self.layout.cov_offsets[g];
        &self.cov[o..o + s * s]
    }

    pub fn group_sum(&self, g: usize) -> &[f64] {
        let s = self.layout.starts[g];
        &self.sum[s..s + self.layout.sizes[g]]
    }

    fn record_pair(&mut self, a: &Emission, b: &Emission, vol: f64, diff: &mut Vec<(usize, f64)>) {
        for &(i, v) in &a.entries {
            self.sum[i] += 0.5 * vol * v;
        }
        for &(i, v) in &b.entries {
            self.sum[i] += 0.5 * vol * v;
        }
        for t in [a.tag, b.tag].into_iter().flatten() {
            self.counts[t] += 1;
        }
        diff.clear();
        diff.extend(a.entries.iter().copied());
        diff.extend(b.entries.iter().map(|&(i, v)| (i, -v)));
        diff.sort_unstable_by_key(|e| e.0);
        // merge duplicate indices
        let mut w = 0;
        for r in 0..diff.len() {
            if w > 0 && diff[w - 1].0 == diff[r].0 {
                diff[w - 1].1 += diff[r].1;
            } else {
                diff[w] = diff[r];
                w += 1;
            }
        }
        diff.truncate(w);
        let c = 0.25 * vol * vol;
        let mut run = 0;
        while run < diff.len() {
            let g = self.layout.group_of[diff[run].0] as usize;
            let mut end = run + 1;
            while end < diff.len() && self.layout.group_of[diff[end].0] as usize == g {
                end += 1;
            }
            let (start, size, off) = (
                self.layout.starts[g],
                self.layout.sizes[g],
                self.layout.cov_offsets[g],
            );
            for p in run..end {
                let (i, di) = diff[p];
                for &(j, dj) in &diff[run..end] {
                    self.cov[off + (i - start) * size + (j - start)] += c * di * dj;
                }
            }
            run = end;
        }
    }
}

/// Integrates the emissions of `f` over the plan's box.
pub fn integrate<F>(plan: &PairPlan, layout: &Layout, tags: usize, f: F) -> Result<Moments>
where
    F: Fn(&Vector, &mut Emission) -> Result<()> + Sync,
{
    let chunks = plan.pairs.div_ceil(CHUNK_PAIRS);
    let vol = plan.pair_volume();
    let run_chunk = |c: usize| -> Result<Moments> {
        let mut m = Moments::zeros(layout, tags);
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
        rng.set_stream(c as u64);
        let (mut ea, mut eb) = (Emission::default(), Emission::default());
        let mut diff = Vec::new();
        let end = ((c + 1) * CHUNK_PAIRS).min(plan.pairs);
        for j in c * CHUNK_PAIRS..end {
            let (xa, xb) = plan.draw_pair(j, &mut rng);
            ea.clear();
            eb.clear();
            f(&xa, &mut ea)?;
            f(&xb, &mut eb)?;
            m.record_pair(&ea, &eb, vol, &mut diff);
        }
        m.samples = 2 * (end - c * CHUNK_PAIRS);
        Ok(m)
    };
    let mut total = Moments::zeros(layout, tags);
    // depends on the layout only, so the reduction order is fixed
    let batch = (BATCH_BUDGET / (layout.len() + layout.cov_len).max(1)).clamp(1, BATCH_CHUNKS);
    let mut start = 0;
    while start < chunks {
        let stop = (start + batch).min(chunks);
        let parts: Vec<Result<Moments>> = (start..stop).into_par_iter().map(run_chunk).collect();
        for p in parts {
            total.add(&p?);
        }
        start = stop;
    }
    Ok(total)
}

/// Runs `f` on the given number of worker threads (0: rayon's default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool")
        .install(f)
}

/// Random stream for the `chunk`-th block of an index range.
pub fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}
