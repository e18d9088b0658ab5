use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{FloorMode, Resolved, SimConfig};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::scalar_diffusion::DiffusionSpec;

const MAX_HALVINGS: u32 = 10;
const MOVE_LIMIT: f64 = 0.1;
const LANES: usize = 8;

/// Simulated paths sampled at the requested times.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet<T> {
    /// Recording times, snapped to the step grid.
    pub times: Vec<T>,
    /// `ln r` at each recording time, indexed `[time][path]`.
    pub log_r: Vec<Vec<T>>,
    /// `ln r` at the horizon.
    pub terminal: Vec<T>,
    /// Paths that were above the log-coordinate threshold at some step.
    pub exceeded_switch: Vec<bool>,
    pub floor_hits: usize,
    pub clamp_events: u64,
    pub steps: u64,
    pub seed: u64,
}

impl<T> PathSet<T> {
    pub fn paths(&self) -> usize {
        self.terminal.len()
    }

    /// Clamp events per simulated step.
    pub fn clamp_fraction(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.clamp_events as f64 / self.steps as f64
        }
    }
}

struct PathOutcome<T> {
    records: Vec<T>,
    terminal: T,
    exceeded: bool,
    floored: bool,
    clamps: u64,
    steps: u64,
}

/// Euler–Maruyama paths of `spec` from `r0`, sampled at `times` (each in `[0, horizon]`).
///
/// Below the switch threshold the scheme integrates `y = ln r` with drift `b/r - σ²/(2r²)` and
/// diffusion `σ/r`. Steps are halved (up to 10 times) while the drift moves the state by more
/// than a tenth of its distance to the nearest boundary.
pub fn simulate_distance_paths<T: Real>(
    spec: &DiffusionSpec<T>,
    r0: T,
    cfg: &SimConfig<T>,
    times: &[T],
) -> Result<PathSet<T>> {
    if !spec.contains(r0) {
        return Err(Error::InvalidInput(format!("r0 = {r0} outside (0, {})", spec.upper())));
    }
    let res = cfg.resolve(spec)?;
    let mut marks = Vec::with_capacity(times.len());
    for &t in times {
        if !(t >= T::zero() && t <= cfg.horizon * (T::one() + T::lit(1e-12))) {
            return Err(Error::InvalidInput(format!("time {t} outside [0, {}]", cfg.horizon)));
        }
        marks.push((t / res.dt).round().to_usize().unwrap_or(0).min(res.steps));
    }
    let mut order: Vec<usize> = (0..marks.len()).collect();
    order.sort_by_key(|&j| marks[j]);
    let stepper = Stepper::new(spec, &res, &marks, &order);
    let chunks = res.paths.div_ceil(LANES);
    let outcomes: Vec<PathOutcome<T>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * LANES;
            let hi = (lo + LANES).min(res.paths);
            stepper.run_lanes(r0, lo as u64..hi as u64)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let mut log_r = vec![Vec::with_capacity(res.paths); marks.len()];
    let mut set = PathSet {
        times: marks.iter().map(|&k| T::from_usize_lossy(k) * res.dt).collect(),
        log_r: Vec::new(),
        terminal: Vec::with_capacity(res.paths),
        exceeded_switch: Vec::with_capacity(res.paths),
        floor_hits: 0,
        clamp_events: 0,
        steps: 0,
        seed: res.seed,
    };
    for o in outcomes {
        for (slot, v) in log_r.iter_mut().zip(&o.records) {
            slot.push(*v);
        }
        set.terminal.push(o.terminal);
        set.exceeded_switch.push(o.exceeded);
        set.floor_hits += o.floored as usize;
        set.clamp_events += o.clamps;
        set.steps += o.steps;
    }
    set.log_r = log_r;
    Ok(set)
}

struct Stepper<'a, T: Real> {
    spec: &'a DiffusionSpec<T>,
    res: &'a Resolved<T>,
    marks: &'a [usize],
    order: &'a [usize],
    upper: T,
    sqrt_dt: T,
}

struct Lane<T> {
    rng: ChaCha8Rng,
    r: T,
    /// `ln r`, current only while `y_fresh`.
    y: T,
    y_fresh: bool,
    done: bool,
    next_mark: usize,
    /// Step index of the next recording, `usize::MAX` once all are taken.
    next_record: usize,
    out: PathOutcome<T>,
}

impl<T: Real> Lane<T> {
    #[inline]
    fn normal(&mut self) -> T {
        T::lit(self.rng.sample::<f64, _>(StandardNormal))
    }

    #[inline]
    fn log_r(&mut self) -> T {
        if !self.y_fresh {
            self.y = self.r.ln();
            self.y_fresh = true;
        }
        self.y
    }
}

impl<'a, T: Real> Stepper<'a, T> {
    fn new(spec: &'a DiffusionSpec<T>, res: &'a Resolved<T>, marks: &'a [usize], order: &'a [usize]) -> Self {
        Stepper {
            spec,
            res,
            marks,
            order,
            upper: spec.upper(),
            sqrt_dt: res.dt.sqrt(),
        }
    }

    /// Advances a few independent paths in lockstep so their serial dependency chains overlap.
    /// Each path only ever touches its own stream, so results match a one-at-a-time run.
    fn run_lanes(&self, r0: T, indices: std::ops::Range<u64>) -> Result<Vec<PathOutcome<T>>> {
        let mut lanes: Vec<Lane<T>> = indices
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.res.seed);
                rng.set_stream(i);
                Lane {
                    rng,
                    r: r0,
                    y: r0.ln(),
                    y_fresh: true,
                    done: false,
                    next_mark: 0,
                    next_record: self.order.first().map_or(usize::MAX, |&j| self.marks[j]),
                    out: PathOutcome {
                        records: vec![T::zero(); self.marks.len()],
                        terminal: T::zero(),
                        exceeded: r0 > self.res.switch,
                        floored: false,
                        clamps: 0,
                        steps: 0,
                    },
                }
            })
            .collect();
        let freeze = self.res.floor_mode == FloorMode::Freeze;
        let mut live = lanes.len();
        for step in 0..self.res.steps {
            for lane in lanes.iter_mut() {
                if lane.done {
                    continue;
                }
                self.record(lane, step);
                if freeze && lane.out.floored {
                    self.finish(lane)?;
                    live -= 1;
                    continue;
                }
                self.advance(lane)?;
            }
            if live == 0 {
                break;
            }
        }
        for lane in lanes.iter_mut().filter(|l| !l.done) {
            self.record(lane, self.res.steps);
            self.finish(lane)?;
        }
        Ok(lanes.into_iter().map(|l| l.out).collect())
    }

    #[inline]
    fn record(&self, lane: &mut Lane<T>, step: usize) {
        if lane.next_record == step {
            let y = lane.log_r();
            while lane.next_mark < self.order.len() && self.marks[self.order[lane.next_mark]] == step {
                lane.out.records[self.order[lane.next_mark]] = y;
                lane.next_mark += 1;
            }
            lane.next_record = self.order.get(lane.next_mark).map_or(usize::MAX, |&j| self.marks[j]);
        }
    }

    fn finish(&self, lane: &mut Lane<T>) -> Result<()> {
        // A frozen path keeps `ln floor` for every remaining record.
        let y = lane.log_r();
        while lane.next_mark < self.order.len() {
            lane.out.records[self.order[lane.next_mark]] = y;
            lane.next_mark += 1;
        }
        lane.out.terminal = y;
        lane.done = true;
        if !y.is_finite() {
            return Err(reject(lane.r, T::nan(), self.res.dt));
        }
        Ok(())
    }

    /// One step of length `dt`, possibly split into halved substeps.
    #[inline]
    fn advance(&self, lane: &mut Lane<T>) -> Result<()> {
        let (spec, res) = (self.spec, self.res);
        let limit = T::lit(MOVE_LIMIT);
        let half = T::lit(0.5);
        let two = T::lit(2.0);
        if lane.r < res.switch {
            // Log coordinates; below the floor the coefficients stay at their floor values.
            let mut y = lane.log_r();
            let (mut ld, mut sl) = log_coefficients(spec, lane.r.max(res.floor), two);
            if ld.abs() * res.dt <= limit {
                y = y + ld * res.dt + sl * self.sqrt_dt * lane.normal();
                lane.out.steps += 1;
            } else {
                let mut h = res.dt;
                let mut halvings = 0;
                while ld.abs() * h > limit && halvings < MAX_HALVINGS {
                    h = h * half;
                    halvings += 1;
                }
                if ld.abs() * h > limit {
                    return Err(reject(lane.r, ld * h, res.dt));
                }
                let sh = h.sqrt();
                for k in 0..(1usize << halvings) {
                    let r = y.exp();
                    if k > 0 && r > res.floor {
                        (ld, sl) = log_coefficients(spec, r, two);
                    }
                    y = y + ld * h + sl * sh * lane.normal();
                    lane.out.steps += 1;
                }
            }
            lane.y = y;
            lane.y_fresh = true;
            lane.r = y.exp();
        } else {
            let mut r = lane.r;
            let mut b = spec.drift(r);
            let mut v = spec.variance(r);
            let room = r.min(self.upper - r);
            let mut h = res.dt;
            let mut halvings = 0;
            let repelled = |r: T, b: T| self.upper - r < res.switch && b < T::zero();
            while !repelled(r, b) && b.abs() * h > limit * room && halvings < MAX_HALVINGS {
                h = h * half;
                halvings += 1;
            }
            if !repelled(r, b) && b.abs() * h > limit * room && self.upper - r >= res.switch {
                return Err(reject(r, b.abs() * h / room, res.dt));
            }
            let sh = if halvings == 0 { self.sqrt_dt } else { h.sqrt() };
            for k in 0..(1usize << halvings) {
                if k > 0 {
                    b = spec.drift(r);
                    v = spec.variance(r);
                }
                let gap = self.upper - r;
                let z = lane.normal();
                let sig = v.sqrt();
                if repelled(r, b) {
                    // Drift-implicit in the gap u = R - r with drift κ/u, κ = -b·u: the positive root
                    // of u' = a + κh/u' stays inside (0, R) for any noise increment.
                    let a = gap - sig * sh * z;
                    let c = T::lit(4.0) * (-b * gap) * h;
                    let root = (a * a + c).sqrt();
                    let next = if a >= T::zero() { (a + root) * half } else { c * half / (root - a) };
                    r = self.upper - next;
                    lane.y_fresh = false;
                    if r > res.ceiling {
                        r = res.ceiling;
                        lane.out.clamps += 1;
                    }
                    lane.out.steps += 1;
                    if !r.is_finite() {
                        return Err(reject(r, b * h, res.dt));
                    }
                    continue;
                }
                // Otherwise near a finite R the drift displacement is capped at a tenth of the gap.
                let shift = if gap < res.switch {
                    clamp_abs(b * h, limit * r.min(gap))
                } else {
                    b * h
                };
                let candidate = r + shift + sig * sh * z;
                if candidate < r * half {
                    // Large downward move: take this substep in log coordinates instead.
                    let ld = b / r - v / (two * r * r);
                    lane.y = r.ln() + ld * h + sig / r * sh * z;
                    lane.y_fresh = true;
                    r = lane.y.exp();
                } else {
                    r = candidate;
                    lane.y_fresh = false;
                }
                if r > res.ceiling {
                    r = res.ceiling;
                    lane.y_fresh = false;
                    lane.out.clamps += 1;
                }
                lane.out.steps += 1;
                if !r.is_finite() {
                    return Err(reject(r, shift, res.dt));
                }
            }
            lane.r = r;
        }
        if lane.r > res.switch {
            lane.out.exceeded = true;
        }
        if !lane.out.floored && lane.r <= res.floor {
            lane.out.floored = true;
            if res.floor_mode == FloorMode::Freeze {
                lane.r = res.floor;
                lane.y = res.floor.ln();
                lane.y_fresh = true;
            }
        }
        Ok(())
    }
}

#[inline]
fn log_coefficients<T: Real>(spec: &DiffusionSpec<T>, at: T, two: T) -> (T, T) {
    let v = spec.variance(at);
    (spec.drift(at) / at - v / (two * at * at), v.sqrt() / at)
}

fn clamp_abs<T: Real>(v: T, bound: T) -> T {
    v.max(-bound).min(bound)
}

fn reject<T: Real>(r: T, excess: T, dt: T) -> Error {
    Error::StepRejected {
        r: r.as_f64(),
        excess: excess.as_f64(),
        dt: dt.as_f64(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometric() -> DiffusionSpec<f64> {
        DiffusionSpec::new(f64::INFINITY, |x| 0.25 * x, |x| x, 1.0, "geometric").unwrap()
    }

    #[test]
    fn reproducible_single_path() {
        let cfg = SimConfig::new(1e-2, 5.0, 1, 42);
        let a = simulate_distance_paths(&geometric(), 1.0, &cfg, &[1.0, 5.0]).unwrap();
        let b = simulate_distance_paths(&geometric(), 1.0, &cfg, &[1.0, 5.0]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.log_r[1][0], a.terminal[0]);
        let c = simulate_distance_paths(&geometric(), 1.0, &SimConfig::new(1e-2, 5.0, 1, 43), &[5.0]).unwrap();
        assert_ne!(a.terminal, c.terminal);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let cfg = SimConfig::new(1e-2, 2.0, 64, 7);
        let run = |n| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .unwrap()
                .install(|| simulate_distance_paths(&geometric(), 1.0, &cfg, &[1.0, 2.0]).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn log_normal_law_of_geometric_spec() {
        // ln r_T ~ N(-T/4, T) for b = x/4, σ = x.
        let cfg = SimConfig::new(1e-3, 1.0, 4000, 11);
        let set = simulate_distance_paths(&geometric(), 1.0, &cfg, &[]).unwrap();
        let n = set.paths() as f64;
        let mean = set.terminal.iter().sum::<f64>() / n;
        let var = set.terminal.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean + 0.25).abs() < 4.0 / n.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "var {var}");
    }

    #[test]
    fn freeze_and_linearize() {
        let spec = DiffusionSpec::new(f64::INFINITY, |x| -2.0 * x, |x| 0.1 * x, 1.0, "contract").unwrap();
        let mut cfg = SimConfig::new(1e-2, 20.0, 4, 1);
        cfg.floor = Some(1e-6);
        let frozen = simulate_distance_paths(&spec, 1.0, &cfg, &[]).unwrap();
        assert_eq!(frozen.floor_hits, 4);
        assert!(frozen.terminal.iter().all(|&v| v == 1e-6f64.ln()));
        cfg.floor_mode = FloorMode::Linearize;
        let lin = simulate_distance_paths(&spec, 1.0, &cfg, &[]).unwrap();
        assert!(lin.terminal.iter().all(|&v| (v / 20.0 + 2.005).abs() < 0.1));
    }

    #[test]
    fn rejects_bad_input() {
        let cfg = SimConfig::new(1e-2, 1.0, 4, 1);
        assert!(simulate_distance_paths(&geometric(), -1.0, &cfg, &[]).is_err());
        assert!(simulate_distance_paths(&geometric(), 1.0, &cfg, &[2.0]).is_err());
        assert!(simulate_distance_paths(&geometric(), 1.0, &SimConfig::new(2.0, 1.0, 1, 1), &[]).is_err());
    }

    #[test]
    fn stiff_drift_is_rejected() {
        let spec = DiffusionSpec::new(f64::INFINITY, |x: f64| -1e6 * x * x, |x| x, 1.0, "stiff").unwrap();
        let err = simulate_distance_paths(&spec, 1.0, &SimConfig::new(1e-1, 1.0, 1, 1), &[]).unwrap_err();
        assert!(matches!(err, Error::StepRejected { .. }));
    }

    #[test]
    fn repelling_ceiling_is_rarely_clamped() {
        // σ(π) > 0 and the drift repels from π like κ/(π - r).
        let model = crate::sphere_ibf::SphereModel::<f64>::new(3, vec![0.0, 0.5], vec![0.0, 1.0]).unwrap();
        let spec = crate::sphere_ibf::distance_diffusion(&model).unwrap();
        let set = simulate_distance_paths(&spec, 3.0, &SimConfig::new(1e-2, 5.0, 200, 4), &[]).unwrap();
        assert!(set.clamp_fraction() < 1e-3, "{}", set.clamp_fraction());
        assert!(set.terminal.iter().all(|&y: &f64| y.is_finite() && y.exp() < std::f64::consts::PI));
    }
}
