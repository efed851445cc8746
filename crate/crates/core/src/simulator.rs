//! Continuous-time Harris stirring for the exclusion process on a finite
//! window, with current counters, a tagged particle and exact
//! boundary-influence tracking.
//!
//! Every bond `(x, x+1)` rings at rate ½ and swaps its two sites. The
//! window `[−W, W]` is closed: the two outer bonds `(−W−1, −W)` and
//! `(W, W+1)` still ring, but instead of importing an unknown exterior
//! site they mark the inner site as *contaminated*. Contamination travels
//! with the swapped contents, so a site's content agrees with the infinite
//! system exactly when it is uncontaminated. The boundary flag of a sample
//! is raised the first time a ring on the origin bond, or on a bond next to
//! the tagged particle, involves a contaminated site.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::{Configuration, Profile};

const OCC: u8 = 1;
const DIRTY: u8 = 2;
const NO_LABEL: u32 = u32::MAX;

/// Per-sample random stream: ChaCha8 keyed by the master seed, with the
/// sample index as the stream id. Results do not depend on scheduling.
pub fn sample_rng(master_seed: u64, sample_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(sample_index);
    rng
}

/// Runs `f` for samples `0..n` in parallel on the current rayon pool and
/// returns the results in sample order.
pub fn par_samples<T, F>(n: u64, master_seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> T + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(master_seed, i);
            f(i, &mut rng)
        })
        .collect()
}

/// Default window: `N·max(|x*|, |x^*|, 1) + 6N√T`, rounded up.
pub fn default_half_width(p: &Profile, n: f64, t_macro: f64) -> usize {
    (n * p.extent().max(1.0) + 6.0 * n * t_macro.sqrt()).ceil() as usize
}

/// Mutable state of one stirring trajectory.
#[derive(Debug, Clone)]
pub struct LatticeState {
    half_width: usize,
    cells: Vec<u8>,
    current: Vec<i64>,
    tagged: Option<usize>,
    labels: Option<Vec<u32>>,
    flag: bool,
}

impl LatticeState {
    pub fn new(init: &Configuration, tagged: bool, labels: bool) -> Result<Self> {
        let w = init.half_width();
        if w == 0 {
            return Err(Error::InvalidArgument("window half-width must be at least 1".into()));
        }
        if tagged && !init.origin_occupied() {
            return Err(Error::InvalidArgument("tagged experiments need the origin occupied".into()));
        }
        let cells: Vec<u8> = init.as_bytes().iter().map(|&b| b & OCC).collect();
        let labels = labels.then(|| {
            let mut next = 0u32;
            cells
                .iter()
                .map(|&c| {
                    if c & OCC != 0 {
                        next += 1;
                        next - 1
                    } else {
                        NO_LABEL
                    }
                })
                .collect()
        });
        Ok(Self {
            half_width: w,
            current: vec![0; 2 * w],
            tagged: tagged.then_some(w),
            labels,
            flag: false,
            cells,
        })
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Number of bonds that ring, including the two outer ones.
    pub fn bond_count(&self) -> usize {
        2 * self.half_width + 2
    }

    #[inline]
    fn index(&self, x: i64) -> usize {
        (x + self.half_width as i64) as usize
    }

    #[inline]
    pub fn occupied(&self, x: i64) -> bool {
        self.cells[self.index(x)] & OCC != 0
    }

    /// Net number of particles that crossed `(x, x+1)` rightwards.
    pub fn bond_current(&self, x: i64) -> i64 {
        self.current[self.index(x)]
    }

    pub fn tagged_position(&self) -> Option<i64> {
        self.tagged.map(|i| i as i64 - self.half_width as i64)
    }

    pub fn boundary_flag(&self) -> bool {
        self.flag
    }

    pub fn occupancy(&self) -> Configuration {
        Configuration::from_bytes(self.half_width, self.cells.iter().map(|c| c & OCC).collect())
    }

    /// True while particle labels read increasing from left to right.
    pub fn order_preserved(&self) -> Option<bool> {
        self.labels.as_ref().map(|l| {
            l.iter()
                .filter(|&&v| v != NO_LABEL)
                .zip(l.iter().filter(|&&v| v != NO_LABEL).skip(1))
                .all(|(a, b)| a < b)
        })
    }

    /// Ring bond `(x, x+1)`, `x ∈ [−W−1, W]`.
    pub fn ring_at(&mut self, x: i64) {
        let w = self.half_width as i64;
        assert!((-w - 1..=w).contains(&x), "bond ({x}, {}) outside the window", x + 1);
        let b = if x == -w - 1 {
            2 * self.half_width
        } else if x == w {
            2 * self.half_width + 1
        } else {
            self.index(x)
        };
        self.ring(b);
    }

    /// Ring bond number `b`: `b < 2W` is `(b−W, b−W+1)`, `2W` and `2W+1` are
    /// the left and right outer bonds.
    #[inline]
    pub fn ring(&mut self, b: usize) {
        let inner = 2 * self.half_width;
        if b >= inner {
            let i = if b == inner { 0 } else { inner };
            self.cells[i] |= DIRTY;
            return;
        }
        let (u, v) = (self.cells[b], self.cells[b + 1]);
        let dirty = (u | v) & DIRTY != 0;
        if dirty && b + 1 == self.half_width {
            self.flag = true;
        }
        if (u ^ v) & OCC != 0 {
            self.current[b] += if u & OCC != 0 { 1 } else { -1 };
            if let Some(t) = self.tagged {
                if t == b {
                    self.tagged = Some(b + 1);
                } else if t == b + 1 {
                    self.tagged = Some(b);
                }
            }
            if let Some(l) = self.labels.as_mut() {
                l.swap(b, b + 1);
            }
        }
        if dirty {
            if let Some(t) = self.tagged {
                if t == b || t == b + 1 {
                    self.flag = true;
                }
            }
        }
        self.cells[b] = v;
        self.cells[b + 1] = u;
    }
}

/// What to record along a trajectory.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SimOptions {
    /// Physical checkpoint times, sorted; the last one is the horizon.
    pub checkpoints: Vec<f64>,
    /// Left sites `x` of bonds `(x, x+1)` whose currents are reported.
    pub track_bonds: Vec<i64>,
    pub tagged: bool,
    /// Track particle labels for the order-conservation check.
    pub labels: bool,
    /// Store the full occupancy at every checkpoint.
    pub snapshots: bool,
    /// Integrate `½∫(η(−1) − η(0))ds` along the trajectory; switches to
    /// explicit exponential waiting times.
    pub compensator: bool,
}

impl SimOptions {
    pub fn at(t: f64) -> Self {
        Self {
            checkpoints: vec![t],
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub time: f64,
    pub j_origin: i64,
    /// Tagged position (0 when no particle is tagged).
    pub x: i64,
    pub boundary_flag: bool,
    /// `(x, J_{x,x+1})` for every tracked bond.
    pub bond_currents: Vec<(i64, i64)>,
    pub compensator: Option<f64>,
    pub occupancy: Option<Configuration>,
    pub order_preserved: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub initial: Configuration,
    pub checkpoints: Vec<Checkpoint>,
    pub final_occupancy: Configuration,
    pub events: u64,
}

fn validate(init: &Configuration, opts: &SimOptions) -> Result<()> {
    let mut prev = 0.0;
    for &t in &opts.checkpoints {
        if !(t >= prev) || !t.is_finite() {
            return Err(Error::InvalidArgument("checkpoints must be finite, non-negative and sorted".into()));
        }
        prev = t;
    }
    let w = init.half_width() as i64;
    for &x in &opts.track_bonds {
        if !(-w..w).contains(&x) {
            return Err(Error::InvalidArgument(format!("tracked bond ({x}, {}) outside the window", x + 1)));
        }
    }
    Ok(())
}

fn record(state: &LatticeState, time: f64, opts: &SimOptions, comp: Option<f64>) -> Checkpoint {
    Checkpoint {
        time,
        j_origin: state.bond_current(-1),
        x: state.tagged_position().unwrap_or(0),
        boundary_flag: state.boundary_flag(),
        bond_currents: opts.track_bonds.iter().map(|&x| (x, state.bond_current(x))).collect(),
        compensator: comp,
        occupancy: opts.snapshots.then(|| state.occupancy()),
        order_preserved: state.order_preserved(),
    }
}

/// Simulates one trajectory from `init` up to the last checkpoint.
pub fn run<R: Rng + ?Sized>(init: &Configuration, opts: &SimOptions, rng: &mut R) -> Result<TrajectorySample> {
    validate(init, opts)?;
    let mut state = LatticeState::new(init, opts.tagged, opts.labels)?;
    let nb = state.bond_count();
    let rate = 0.5 * nb as f64;
    let mut out = Vec::with_capacity(opts.checkpoints.len());
    let mut events = 0u64;

    if !opts.compensator {
        // Event counts per interval are Poisson and the rung bonds iid
        // uniform, which is the same law as explicit waiting times.
        let mut prev = 0.0;
        for &cp in &opts.checkpoints {
            let mean = rate * (cp - prev);
            let k = if mean > 0.0 {
                Poisson::new(mean)
                    .map_err(|e| Error::InvalidArgument(e.to_string()))?
                    .sample(rng) as u64
            } else {
                0
            };
            for _ in 0..k {
                state.ring(rng.random_range(0..nb));
            }
            events += k;
            out.push(record(&state, cp, opts, None));
            prev = cp;
        }
    } else {
        let drift = |s: &LatticeState| 0.5 * (s.occupied(-1) as i8 - s.occupied(0) as i8) as f64;
        let mut t = 0.0;
        let mut comp = 0.0;
        let mut next: f64 = Exp1.sample(rng);
        next /= rate;
        for &cp in &opts.checkpoints {
            while next <= cp {
                comp += drift(&state) * (next - t);
                t = next;
                state.ring(rng.random_range(0..nb));
                events += 1;
                let gap: f64 = Exp1.sample(rng);
                next += gap / rate;
            }
            comp += drift(&state) * (cp - t);
            t = cp;
            out.push(record(&state, cp, opts, Some(comp)));
        }
    }

    Ok(TrajectorySample {
        initial: init.clone(),
        checkpoints: out,
        final_occupancy: state.occupancy(),
        events,
    })
}

impl TrajectorySample {
    fn checkpoint(&self, k: usize) -> Result<&Checkpoint> {
        self.checkpoints
            .get(k)
            .ok_or_else(|| Error::InvalidArgument(format!("no checkpoint {k}")))
    }

    fn snapshot(&self, k: usize) -> Result<&Configuration> {
        self.checkpoint(k)?
            .occupancy
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("occupancy snapshots were not recorded".into()))
    }

    /// `J_{x,x+1}` at checkpoint `k`.
    pub fn bond_current(&self, k: usize, x: i64) -> Result<i64> {
        if x == -1 {
            return Ok(self.checkpoint(k)?.j_origin);
        }
        self.checkpoint(k)?
            .bond_currents
            .iter()
            .find(|(b, _)| *b == x)
            .map(|&(_, j)| j)
            .ok_or(Error::MissingBond(x, x + 1))
    }

    /// `J_{x−1,x} − J_{x,x+1} = η_t(x) − η_0(x)` at every checkpoint, for
    /// every `x` whose two bonds are tracked.
    pub fn check_telescoping(&self) -> Result<bool> {
        let mut ok = true;
        for k in 0..self.checkpoints.len() {
            let eta = self.snapshot(k)?;
            for &(x, _) in &self.checkpoints[k].bond_currents {
                let site = x + 1;
                if let Ok(right) = self.bond_current(k, site) {
                    let left = self.bond_current(k, x)?;
                    let d = eta.get(site) as i64 - self.initial.get(site) as i64;
                    ok &= left - right == d;
                }
            }
        }
        Ok(ok)
    }

    /// Set identity between the tagged position and the origin current at
    /// every checkpoint:
    ///
    /// * `r > 0`: `{X ≥ r} = {J ≥ Σ_{x=0}^{r−1} η_t(x)}`
    /// * `r < 0`: `{X ≤ r} = {J ≤ −1 − Σ_{x=r+1}^{−1} η_t(x)}`
    /// * `r = 0`: `{X ≥ 0} = {J ≥ 0}`
    pub fn check_tagged_current_relation(&self, r: i64) -> Result<bool> {
        let mut ok = true;
        for (k, cp) in self.checkpoints.iter().enumerate() {
            let eta = self.snapshot(k)?;
            let (x, j) = (cp.x, cp.j_origin);
            let holds = if r > 0 {
                let s = (0..r).filter(|&y| eta.get(y)).count() as i64;
                (x >= r) == (j >= s)
            } else if r < 0 {
                let s = (r + 1..0).filter(|&y| eta.get(y)).count() as i64;
                (x <= r) == (j <= -1 - s)
            } else {
                (x >= 0) == (j >= 0)
            };
            ok &= holds;
        }
        Ok(ok)
    }

    /// `(1/N)J_{−1,0} − [Y_t(G_n) − Y_0(G_n) + (1/(nN²)) Σ_{x=1}^{nN} J_{x−1,x}]`
    /// at checkpoint `k`, with `G_n(u) = 1_{[0,n]}(u)(1 − u/n)`. The identity
    /// is algebraic, so the result is zero up to rounding.
    pub fn cutoff_decomposition(&self, k: usize, n: f64, scale: f64) -> Result<f64> {
        let m = (n * scale).round() as i64;
        if m < 1 || ((n * scale) - m as f64).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("n·N = {} must be a positive integer", n * scale)));
        }
        let g = |u: f64| if (0.0..=n).contains(&u) { 1.0 - u / n } else { 0.0 };
        let support = (0.0, n);
        let y_t = empirical_density(self.snapshot(k)?, scale, g, support)?;
        let y_0 = empirical_density(&self.initial, scale, g, support)?;
        let mut sum = 0i64;
        for x in 1..=m {
            sum += self.bond_current(k, x - 1)?;
        }
        let j = self.bond_current(k, -1)? as f64;
        Ok(j / scale - (y_t - y_0 + sum as f64 / (n * scale * scale)))
    }

    /// `−#{x ≥ 0 : η_0(x) = 1} ≤ J_{−1,0} ≤ #{x < 0 : η_0(x) = 1}` at every
    /// checkpoint.
    pub fn check_current_bounds(&self) -> bool {
        let w = self.initial.half_width() as i64;
        let left = self.initial.count_in(-w, -1) as i64;
        let right = self.initial.count_in(0, w) as i64;
        self.checkpoints
            .iter()
            .all(|cp| cp.j_origin <= left && -cp.j_origin <= right)
    }

    /// Particle labels kept their left-to-right order at every checkpoint.
    pub fn check_order(&self) -> Option<bool> {
        self.checkpoints
            .iter()
            .map(|c| c.order_preserved)
            .try_fold(true, |acc, o| o.map(|v| acc && v))
    }

    /// Tagged particle sits on an occupied site at every checkpoint.
    pub fn check_tagged_occupied(&self) -> Result<bool> {
        let mut ok = true;
        for k in 0..self.checkpoints.len() {
            ok &= self.snapshot(k)?.get(self.checkpoints[k].x);
        }
        Ok(ok)
    }
}

/// `Y(G) = (1/N) Σ_x G(x/N) η(x)`; `support` bounds the support of `G` and
/// must lie inside the window.
pub fn empirical_density<G: Fn(f64) -> f64>(
    c: &Configuration,
    scale: f64,
    g: G,
    support: (f64, f64),
) -> Result<f64> {
    let (lo, hi) = support;
    let w = c.half_width() as f64;
    if lo * scale < -w || hi * scale > w {
        return Err(Error::SupportOverflow { lo, hi });
    }
    let a = (lo * scale).ceil() as i64;
    let b = (hi * scale).floor() as i64;
    let s: f64 = (a..=b).filter(|&x| c.get(x)).map(|x| g(x as f64 / scale)).sum();
    Ok(s / scale)
}
