//! Exact continuous-time simulation of the exclusion process with slowed
//! window reservoirs.
//!
//! Sites are `1..=N-1` and stored at index `x - 1`. Bond `b` joins sites `b`
//! and `b + 1` for `b` in `1..=N-2`. Boundary channel `x` on the left acts on
//! site `x`, on the right on site `N - x`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::{cell_counts, GridFunction};
use crate::params::BoundaryParams;

pub type SimRng = ChaCha8Rng;
pub const GENERATOR_NAME: &str = "ChaCha8Rng";

/// Stream used for the dynamics; the initial configuration draws from stream 1.
const DYNAMICS_STREAM: u64 = 0;
const INIT_STREAM: u64 = 1;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// Independent sites, `eta(x) ~ Bernoulli(f0(x/N))`.
    BernoulliProfile(GridFunction),
    ExplicitBits(Vec<u8>),
    ConstantDensity(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scale {
    /// Microscopic time `t N^2`.
    Diffusive,
    /// Microscopic time `t N^{1 + theta}`.
    Subdiffusive,
}

impl Scale {
    pub fn factor(self, n: usize, theta: f64) -> f64 {
        let n = n as f64;
        match self {
            Scale::Diffusive => n * n,
            Scale::Subdiffusive => n.powf(1.0 + theta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    BulkExchange { bond: usize },
    BoundaryFlip { side: Side, x: usize, created: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub dt_micro: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Event(Event),
    Absorbed,
}

/// Jump rates of every transition out of the current configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    /// Indexed by bond `b - 1`.
    pub bulk: Vec<f64>,
    /// Left channels `x = 1..=K`, then right channels `x = 1..=K`.
    pub boundary: Vec<f64>,
    pub total: f64,
}

impl RateTable {
    /// Direct evaluation of the rate formulas, independent of any cached state.
    pub fn reference(state: &LatticeState) -> Self {
        let eta = &state.eta;
        let n = state.n;
        let k = state.k;
        let scale = (n as f64).powf(-state.theta);
        let bulk: Vec<f64> = (0..n - 2)
            .map(|i| if eta[i] != eta[i + 1] { 1.0 } else { 0.0 })
            .collect();
        let channel = |site: &dyn Fn(usize) -> f64, create: &[f64], remove: &[f64], x: usize| {
            let mut full = 1.0;
            let mut empty = 1.0;
            for y in 1..x {
                full *= site(y);
                empty *= 1.0 - site(y);
            }
            scale * (create[x - 1] * full * (1.0 - site(x)) + remove[x - 1] * empty * site(x))
        };
        let left_site = |y: usize| eta[y - 1] as f64;
        let right_site = |y: usize| eta[n - y - 1] as f64;
        let mut boundary = Vec::with_capacity(2 * k);
        for x in 1..=k {
            boundary.push(channel(&left_site, &state.alpha, &state.gamma, x));
        }
        for x in 1..=k {
            boundary.push(channel(&right_site, &state.beta, &state.delta, x));
        }
        let total = bulk.iter().sum::<f64>() + boundary.iter().sum::<f64>();
        Self { bulk, boundary, total }
    }
}

#[derive(Debug, Clone)]
pub struct LatticeState {
    n: usize,
    k: usize,
    theta: f64,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    gamma: Vec<f64>,
    delta: Vec<f64>,
    /// Rates with the `N^{-theta}` factor applied.
    create_left: Vec<f64>,
    remove_left: Vec<f64>,
    create_right: Vec<f64>,
    remove_right: Vec<f64>,
    eta: Vec<u8>,
    t_micro: f64,
    j_current: Vec<i64>,
    k_current: Vec<i64>,
    seed: u64,
    particles: usize,
    /// Discrepant bonds (0-based) and each bond's slot in that list.
    active: Vec<u32>,
    slot: Vec<u32>,
    channel_rate: Vec<f64>,
    left_total: f64,
    right_total: f64,
}

impl LatticeState {
    pub fn init(n: usize, params: &BoundaryParams, initial: &InitialCondition, seed: u64) -> Result<Self> {
        let k = params.k();
        if n < 2 * k + 2 {
            return Err(Error::OverlappingWindows { n, k, min: 2 * k + 2 });
        }
        let mut rng = SimRng::seed_from_u64(seed);
        rng.set_stream(INIT_STREAM);
        let nf = n as f64;
        let eta: Vec<u8> = match initial {
            InitialCondition::ExplicitBits(bits) => {
                if bits.len() != n - 1 {
                    return Err(Error::Invalid(format!(
                        "explicit configuration has {} sites, expected N - 1 = {}",
                        bits.len(),
                        n - 1
                    )));
                }
                if bits.iter().any(|&b| b > 1) {
                    return Err(Error::Invalid("occupation values must be 0 or 1".into()));
                }
                bits.clone()
            }
            InitialCondition::ConstantDensity(rho) => {
                check_density(*rho)?;
                (1..n).map(|_| bernoulli(&mut rng, *rho)).collect()
            }
            InitialCondition::BernoulliProfile(f0) => {
                if !f0.is_density() {
                    return Err(Error::Invalid("initial profile leaves [0, 1]".into()));
                }
                (1..n)
                    .map(|x| bernoulli(&mut rng, f0.at(x as f64 / nf).clamp(0.0, 1.0)))
                    .collect()
            }
        };
        let scale = nf.powf(-params.theta());
        let scaled = |v: &[f64]| v.iter().map(|r| r * scale).collect::<Vec<_>>();
        let mut state = Self {
            n,
            k,
            theta: params.theta(),
            alpha: params.alpha().to_vec(),
            beta: params.beta().to_vec(),
            gamma: params.gamma().to_vec(),
            delta: params.delta().to_vec(),
            create_left: scaled(params.alpha()),
            remove_left: scaled(params.gamma()),
            create_right: scaled(params.beta()),
            remove_right: scaled(params.delta()),
            particles: eta.iter().map(|&e| e as usize).sum(),
            eta,
            t_micro: 0.0,
            j_current: vec![0; n - 2],
            k_current: vec![0; 2 * k],
            seed,
            active: Vec::new(),
            slot: vec![NONE; n - 2],
            channel_rate: vec![0.0; 2 * k],
            left_total: 0.0,
            right_total: 0.0,
        };
        for b in 0..n - 2 {
            if state.eta[b] != state.eta[b + 1] {
                state.toggle_bond(b);
            }
        }
        state.refresh_left();
        state.refresh_right();
        Ok(state)
    }

    /// The generator driving this state's dynamics, derived from its seed.
    pub fn dynamics_rng(&self) -> SimRng {
        let mut rng = SimRng::seed_from_u64(self.seed);
        rng.set_stream(DYNAMICS_STREAM);
        rng
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn t_micro(&self) -> f64 {
        self.t_micro
    }
    /// Occupations of sites `1..=N-1`.
    pub fn occupation(&self) -> &[u8] {
        &self.eta
    }
    pub fn particle_count(&self) -> usize {
        self.particles
    }
    /// Net rightward crossings of bonds `1..=N-2`.
    pub fn j_current(&self) -> &[i64] {
        &self.j_current
    }
    /// Creations minus removals per channel, left `x = 1..=K` then right.
    pub fn k_current(&self) -> &[i64] {
        &self.k_current
    }
    /// Lattice site of each entry of [`k_current`](Self::k_current).
    pub fn boundary_sites(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=self.k).chain((1..=self.k).map(|x| self.n - x))
    }

    pub fn total_rate(&self) -> f64 {
        self.active.len() as f64 + self.left_total + self.right_total
    }

    /// Rates from the incrementally maintained caches.
    pub fn rates(&self) -> RateTable {
        let mut bulk = vec![0.0; self.n - 2];
        for &b in &self.active {
            bulk[b as usize] = 1.0;
        }
        RateTable {
            bulk,
            boundary: self.channel_rate.clone(),
            total: self.total_rate(),
        }
    }

    fn site_of_channel(&self, c: usize) -> (Side, usize, usize) {
        if c < self.k {
            (Side::Left, c + 1, c + 1)
        } else {
            let x = c - self.k + 1;
            (Side::Right, x, self.n - x)
        }
    }

    fn toggle_bond(&mut self, b: usize) {
        let s = self.slot[b];
        if s == NONE {
            self.slot[b] = self.active.len() as u32;
            self.active.push(b as u32);
        } else {
            let last = *self.active.last().expect("slot points into active list");
            self.active.swap_remove(s as usize);
            if last as usize != b {
                self.slot[last as usize] = s;
            }
            self.slot[b] = NONE;
        }
    }

    fn refresh_left(&mut self) {
        let (mut full, mut empty, mut sum) = (true, true, 0.0);
        for i in 0..self.k {
            let occ = self.eta[i] == 1;
            let r = match (occ, full, empty) {
                (false, true, _) => self.create_left[i],
                (true, _, true) => self.remove_left[i],
                _ => 0.0,
            };
            self.channel_rate[i] = r;
            sum += r;
            full &= occ;
            empty &= !occ;
            if !full && !empty {
                self.channel_rate[i + 1..self.k].fill(0.0);
                break;
            }
        }
        self.left_total = sum;
    }

    fn refresh_right(&mut self) {
        let (mut full, mut empty, mut sum) = (true, true, 0.0);
        for x in 1..=self.k {
            let occ = self.eta[self.n - x - 1] == 1;
            let r = match (occ, full, empty) {
                (false, true, _) => self.create_right[x - 1],
                (true, _, true) => self.remove_right[x - 1],
                _ => 0.0,
            };
            self.channel_rate[self.k + x - 1] = r;
            sum += r;
            full &= occ;
            empty &= !occ;
            if !full && !empty {
                self.channel_rate[self.k + x..].fill(0.0);
                break;
            }
        }
        self.right_total = sum;
    }

    fn refresh_near(&mut self, site: usize) {
        if site <= self.k {
            self.refresh_left();
        }
        if site >= self.n - self.k {
            self.refresh_right();
        }
    }

    /// Exchange across bond `b` (1-based), which must be discrepant.
    fn exchange(&mut self, b: usize) {
        let i = b - 1;
        debug_assert_ne!(self.eta[i], self.eta[i + 1]);
        self.j_current[i] += if self.eta[i] == 1 { 1 } else { -1 };
        self.eta.swap(i, i + 1);
        if b >= 2 {
            self.toggle_bond(i - 1);
        }
        if b + 1 <= self.n - 2 {
            self.toggle_bond(i + 1);
        }
        self.refresh_near(b);
        self.refresh_near(b + 1);
    }

    /// Flip the target of channel `c`; returns whether a particle was created.
    fn flip(&mut self, c: usize) -> bool {
        let (_, _, site) = self.site_of_channel(c);
        let i = site - 1;
        let created = self.eta[i] == 0;
        self.eta[i] ^= 1;
        if created {
            self.particles += 1;
            self.k_current[c] += 1;
        } else {
            self.particles -= 1;
            self.k_current[c] -= 1;
        }
        if site >= 2 {
            self.toggle_bond(i - 1);
        }
        if site <= self.n - 2 {
            self.toggle_bond(i);
        }
        self.refresh_near(site);
        created
    }

    /// Pick an event with probability proportional to its rate and apply it.
    fn fire<R: Rng + ?Sized>(&mut self, rng: &mut R, total: f64) -> EventKind {
        let nb = self.active.len();
        let u = rng.random::<f64>() * total;
        if u < nb as f64 {
            let b = self.active[(u as usize).min(nb - 1)] as usize + 1;
            self.exchange(b);
            return EventKind::BulkExchange { bond: b };
        }
        let mut acc = nb as f64;
        let mut chosen = None;
        for (c, &r) in self.channel_rate.iter().enumerate() {
            if r > 0.0 {
                chosen = Some(c);
                acc += r;
                if u < acc {
                    break;
                }
            }
        }
        // rounding can leave u just past the last partial sum; take the last live channel
        let c = chosen.expect("positive total rate with no live channel");
        let (side, x, _) = self.site_of_channel(c);
        let created = self.flip(c);
        EventKind::BoundaryFlip { side, x, created }
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> StepOutcome {
        let total = self.total_rate();
        if total <= 0.0 {
            return StepOutcome::Absorbed;
        }
        let dt: f64 = rng.sample::<f64, _>(Exp1) / total;
        self.t_micro += dt;
        let kind = self.fire(rng, total);
        self.debug_check();
        StepOutcome::Event(Event { kind, dt_micro: dt })
    }

    /// Advance to macroscopic time `t_macro`, calling every observer at each
    /// sample time in `samples` (sorted, macroscopic units, at most `t_macro`).
    /// Times are measured from the start of the trajectory.
    pub fn run_until<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        t_macro: f64,
        scale: Scale,
        samples: &[f64],
        observers: &mut [&mut dyn Observer],
    ) -> Result<RunSummary> {
        if !(t_macro >= 0.0) {
            return Err(Error::Invalid(format!("t_macro = {t_macro} must be >= 0")));
        }
        if samples.windows(2).any(|w| w[1] < w[0]) || samples.iter().any(|&s| s < 0.0 || s > t_macro) {
            return Err(Error::Invalid("sample times must be sorted within [0, t_macro]".into()));
        }
        let factor = scale.factor(self.n, self.theta);
        let t_end = t_macro * factor;
        let mut next = 0;
        let mut events = 0u64;
        loop {
            let total = self.total_rate();
            if total <= 0.0 {
                // frozen configuration: everything up to now has been seen
                let t_micro = self.t_micro;
                while next < samples.len() && samples[next] * factor <= t_micro {
                    notify(observers, samples[next], self);
                    next += 1;
                }
                return Err(Error::Absorbed { t_micro });
            }
            let dt: f64 = rng.sample::<f64, _>(Exp1) / total;
            let t_next = self.t_micro + dt;
            while next < samples.len() && samples[next] * factor < t_next.min(t_end) {
                notify(observers, samples[next], self);
                next += 1;
            }
            if t_next > t_end {
                break;
            }
            self.t_micro = t_next;
            self.fire(rng, total);
            self.debug_check();
            events += 1;
        }
        self.t_micro = self.t_micro.max(t_end);
        while next < samples.len() {
            notify(observers, samples[next], self);
            next += 1;
        }
        Ok(RunSummary { events, t_micro: self.t_micro })
    }

    #[inline]
    fn debug_check(&self) {
        // full scans only on lattices small enough for them to be cheap
        #[cfg(debug_assertions)]
        if self.n <= 64 {
            debug_assert!(self.eta.iter().all(|&e| e <= 1));
            debug_assert_eq!(self.particles, self.eta.iter().map(|&e| e as usize).sum::<usize>());
        }
    }
}

fn notify(observers: &mut [&mut dyn Observer], t: f64, state: &LatticeState) {
    for o in observers.iter_mut() {
        o.observe(t, state);
    }
}

fn check_density(rho: f64) -> Result<()> {
    if (0.0..=1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::Domain { value: rho })
    }
}

fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> u8 {
    (rng.random::<f64>() < p) as u8
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub events: u64,
    pub t_micro: f64,
}

pub trait Observer {
    fn observe(&mut self, t_macro: f64, state: &LatticeState);
}

impl<F: FnMut(f64, &LatticeState)> Observer for F {
    fn observe(&mut self, t_macro: f64, state: &LatticeState) {
        self(t_macro, state)
    }
}

/// What an [`ObservationLog`] records besides mass and currents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileMode {
    None,
    /// Per-cell occupation counts on an `m`-cell grid.
    Cells(usize),
    /// Every site.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t_macro: f64,
    pub particles: u64,
    pub profile: Vec<u32>,
    pub j_total: i64,
    pub k_left: i64,
    pub k_right: i64,
}

/// Samples of one trajectory, or integer sums over several.
///
/// Everything is stored as integer counts, so merging logs is exact and
/// independent of order.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationLog {
    pub n: usize,
    pub mode: ProfileMode,
    pub trajectories: u64,
    pub seeds: Vec<u64>,
    pub samples: Vec<Sample>,
    pub header: Vec<String>,
}

impl ObservationLog {
    pub fn new(n: usize, mode: ProfileMode) -> Self {
        Self {
            n,
            mode,
            trajectories: 1,
            seeds: Vec::new(),
            samples: Vec::new(),
            header: Vec::new(),
        }
    }

    pub fn record(&mut self, t_macro: f64, state: &LatticeState) {
        if self.seeds.is_empty() {
            self.seeds.push(state.seed());
        }
        let k = state.k();
        let profile = match self.mode {
            ProfileMode::None => Vec::new(),
            ProfileMode::Cells(m) => cell_counts(state, m),
            ProfileMode::Full => state.occupation().iter().map(|&e| e as u32).collect(),
        };
        self.samples.push(Sample {
            t_macro,
            particles: state.particle_count() as u64,
            profile,
            j_total: state.j_current().iter().sum(),
            k_left: state.k_current()[..k].iter().sum(),
            k_right: state.k_current()[k..].iter().sum(),
        });
    }

    /// Add another log sampled at the same times.
    pub fn merge(&mut self, other: &ObservationLog) -> Result<()> {
        if other.n != self.n || other.mode != self.mode || other.samples.len() != self.samples.len() {
            return Err(Error::Invalid("merging logs with different layouts".into()));
        }
        for (a, b) in self.samples.iter_mut().zip(&other.samples) {
            if a.t_macro != b.t_macro {
                return Err(Error::Invalid("merging logs with different sample times".into()));
            }
            a.particles += b.particles;
            for (x, y) in a.profile.iter_mut().zip(&b.profile) {
                *x += y;
            }
            a.j_total += b.j_total;
            a.k_left += b.k_left;
            a.k_right += b.k_right;
        }
        self.trajectories += other.trajectories;
        self.seeds.extend_from_slice(&other.seeds);
        self.seeds.sort_unstable();
        Ok(())
    }

    /// Ensemble-mean mass at each sample.
    pub fn mean_mass(&self) -> Vec<f64> {
        let d = (self.trajectories * (self.n as u64 - 1)) as f64;
        self.samples.iter().map(|s| s.particles as f64 / d).collect()
    }

    /// Ensemble-mean profile at a sample, as a grid function when cell counts were kept.
    pub fn mean_profile(&self, sample: usize) -> Option<GridFunction> {
        let ProfileMode::Cells(m) = self.mode else {
            return None;
        };
        let s = &self.samples[sample];
        let values = (0..=m)
            .map(|i| {
                let r = crate::observables::cell_sites(self.n, m, i);
                let width = (r.end() - r.start() + 1) as f64;
                s.profile[i] as f64 / (width * self.trajectories as f64)
            })
            .collect();
        Some(GridFunction { values, t: s.t_macro })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for line in &self.header {
            out.push_str(&format!("# {line}\n"));
        }
        out.push_str(&format!("# N = {}\n", self.n));
        let seeds: Vec<String> = self.seeds.iter().map(|s| s.to_string()).collect();
        out.push_str(&format!("# seeds = [{}]\n", seeds.join(", ")));
        out.push_str(&format!("# generator = {GENERATOR_NAME}\n"));
        out.push_str(&format!("# trajectories = {}\n", self.trajectories));
        out.push_str("t_macro,mass");
        let width = self.samples.first().map_or(0, |s| s.profile.len());
        for i in 0..width {
            out.push_str(&format!(",p{i}"));
        }
        out.push_str(",j_total,k_left,k_right\n");
        let traj = self.trajectories as f64;
        let mass = self.mean_mass();
        for (s, m) in self.samples.iter().zip(mass) {
            out.push_str(&format!("{},{}", s.t_macro, m));
            for &p in &s.profile {
                out.push_str(&format!(",{}", p as f64 / traj));
            }
            out.push_str(&format!(
                ",{},{},{}\n",
                s.j_total as f64 / traj,
                s.k_left as f64 / traj,
                s.k_right as f64 / traj
            ));
        }
        out
    }
}

impl Observer for ObservationLog {
    fn observe(&mut self, t_macro: f64, state: &LatticeState) {
        self.record(t_macro, state)
    }
}
