//! Seeded synthetic expert and novice trajectories.
//!
//! The dominant (right) hand follows a suture-like base path at a steady
//! pace, slowed by occasional pauses. The assisting (left) hand mirrors a
//! scaled-down copy of that motion. Both hands then receive band-limited
//! tremor (a sum of sinusoids) and Poisson-timed detour bursts.
//!
//! Random draws never depend on profile magnitudes: bursts and pauses come
//! from a marked Poisson process thinned by the requested rate, and tremor
//! phases are fixed per seed. Two profiles sharing a seed therefore differ
//! only where their parameters differ, and raising a rate only adds events.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    render_manifest, serialize_trajectory, Dataset, Sample, Skill, Trajectory, Trial, TrialMeta,
    DEFAULT_SAMPLE_RATE_HZ, MIN_SAMPLES,
};

/// Detour bursts per second per unit of jerkiness.
const BURSTS_PER_SECOND: f64 = 0.3;
/// Peak detour displacement, cm.
const BURST_AMP: f64 = 3.0;
/// Range of detour durations, s.
const BURST_SECONDS: (f64, f64) = (4.0, 7.0);
/// Scale of the assisting hand's motion relative to the dominant hand.
const ASSIST_SCALE: f64 = 0.5;
/// Arc-length step for estimating the travel direction, cm.
const TANGENT_STEP: f64 = 0.25;
/// Half-width of the smooth speed ramps into and out of a pause, s.
const PAUSE_RAMP: f64 = 0.3;
/// Fraction of normal speed kept during a pause (hesitation, not a stop).
const PAUSE_FLOOR: f64 = 0.2;

/// Stream ids for independent random components of one trajectory.
const STREAM_TREMOR: u64 = 1;
const STREAM_BURSTS: u64 = 100;
const STREAM_PAUSES: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionProfile {
    /// Waypoints of the dominant hand's path, cm.
    pub base_path: Vec<[f64; 3]>,
    /// Tremor amplitude, cm.
    pub tremor_amp: f64,
    pub tremor_freq_hz: f64,
    /// Detour-burst intensity, dimensionless.
    pub jerkiness: f64,
    /// Travel speed along the base path, cm/s.
    pub pace: f64,
    /// Pauses per minute.
    pub pause_rate: f64,
    pub seed: u64,
}

impl MotionProfile {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tremor_amp >= 0.0
            && self.tremor_freq_hz >= 0.0
            && self.jerkiness >= 0.0
            && self.pause_rate >= 0.0
            && self.pace > 0.0
            && [self.tremor_amp, self.tremor_freq_hz, self.jerkiness, self.pause_rate, self.pace]
                .iter()
                .all(|v| v.is_finite());
        if !ok {
            return Err(Error::Param(
                "profile rates and amplitudes must be finite and non-negative, pace positive".into(),
            ));
        }
        if self.base_path.is_empty() || self.base_path.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Param("base path needs at least one finite waypoint".into()));
        }
        Ok(())
    }

    /// Travel time along the base path without pauses.
    pub fn nominal_duration(&self) -> f64 {
        polyline_length(&self.base_path) / self.pace
    }
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn polyline_length(points: &[[f64; 3]]) -> f64 {
    points.windows(2).map(|w| dist(&w[0], &w[1])).sum()
}

/// Point at arc length `s` along a polyline with cumulative lengths `cum`.
fn point_at(points: &[[f64; 3]], cum: &[f64], s: f64) -> [f64; 3] {
    if points.len() == 1 {
        return points[0];
    }
    let seg = match cum.binary_search_by(|c| c.total_cmp(&s)) {
        Ok(i) => i.min(points.len() - 2),
        Err(i) => i.saturating_sub(1).min(points.len() - 2),
    };
    let len = cum[seg + 1] - cum[seg];
    let u = if len > 0.0 { ((s - cum[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
    let (a, b) = (&points[seg], &points[seg + 1]);
    std::array::from_fn(|c| a[c] + u * (b[c] - a[c]))
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Event times of a Poisson process with `rate` events per unit time on
/// `[0, horizon)`, coupled across rates: the mark space is cut into unit
/// stripes, each with its own stream, and marks above `rate` are dropped.
fn coupled_events(seed: u64, stream_base: u64, rate: f64, horizon: f64) -> Vec<(f64, ChaCha8Rng)> {
    let mut events = Vec::new();
    let stripes = rate.ceil() as u64;
    for stripe in 0..stripes {
        let mut rng = stream(seed, stream_base + stripe);
        let mut t = 0.0;
        loop {
            let u: f64 = rng.gen();
            t += -(1.0 - u).ln();
            if t >= horizon {
                break;
            }
            let mark = stripe as f64 + rng.gen::<f64>();
            let detail = stream(rng.gen(), 0);
            if mark < rate {
                events.push((t, detail));
            }
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    events
}

/// Speed multiplier in `[PAUSE_FLOOR, 1]` during a pause starting at `start`.
fn pause_factor(t: f64, start: f64, length: f64) -> f64 {
    let tau = t - start;
    let dip = if tau <= 0.0 || tau >= length {
        0.0
    } else if tau < PAUSE_RAMP {
        0.5 * (1.0 - (PI * tau / PAUSE_RAMP).cos())
    } else if tau > length - PAUSE_RAMP {
        0.5 * (1.0 + (PI * (tau - (length - PAUSE_RAMP)) / PAUSE_RAMP).cos())
    } else {
        1.0
    };
    1.0 - (1.0 - PAUSE_FLOOR) * dip
}

/// A detour: a raised-cosine sideways excursion from the path.
struct Burst {
    start: f64,
    length: f64,
    offset: [f64; 3],
}

impl Burst {
    /// Displacement at time `t`, restricted to the plane normal to the unit
    /// travel direction `tangent`. A normal offset `o` changes the speed
    /// along the path by at most `|o| * curvature * speed`, so detours never
    /// bring the hand to a standstill while `|o| * curvature < 1`.
    fn displacement(&self, t: f64, tangent: &[f64; 3]) -> [f64; 3] {
        let tau = t - self.start;
        if tau <= 0.0 || tau >= self.length {
            return [0.0; 3];
        }
        let w = 0.5 * (1.0 - (2.0 * PI * tau / self.length).cos());
        let along: f64 = (0..3).map(|c| self.offset[c] * tangent[c]).sum();
        std::array::from_fn(|c| w * (self.offset[c] - along * tangent[c]))
    }
}

fn unit_vector(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-9 {
            return v.map(|c| c / n);
        }
    }
}

fn bursts(seed: u64, stream_base: u64, jerkiness: f64, duration: f64, amp_scale: f64) -> Vec<Burst> {
    coupled_events(seed, stream_base, jerkiness * BURSTS_PER_SECOND, duration)
        .into_iter()
        .map(|(start, mut rng)| {
            let length = rng.gen_range(BURST_SECONDS.0..BURST_SECONDS.1);
            let amp = BURST_AMP * amp_scale * rng.gen_range(0.5..1.0);
            let dir = unit_vector(&mut rng);
            Burst { start, length, offset: dir.map(|c| c * amp) }
        })
        .collect()
}

struct Tremor {
    /// Per axis: (amplitude factor, frequency factor, phase) triples.
    parts: [[(f64, f64, f64); 3]; 3],
}

impl Tremor {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        let freq_factors = [0.8, 1.0, 1.3];
        let amp = 1.0 / 3f64.sqrt();
        Tremor {
            parts: std::array::from_fn(|_| {
                std::array::from_fn(|k| (amp, freq_factors[k], rng.gen_range(0.0..2.0 * PI)))
            }),
        }
    }

    fn at(&self, t: f64, amp: f64, freq: f64) -> [f64; 3] {
        std::array::from_fn(|axis| {
            self.parts[axis]
                .iter()
                .map(|(a, f, ph)| amp * a * (2.0 * PI * freq * f * t + ph).sin())
                .sum()
        })
    }
}

/// Generates a 30 Hz two-handed trajectory from `profile`, deterministically.
pub fn gen_trajectory(profile: &MotionProfile) -> Result<Trajectory> {
    profile.validate()?;
    let rate = DEFAULT_SAMPLE_RATE_HZ;
    let dt = 1.0 / rate;
    let path = &profile.base_path;
    let mut cum = vec![0.0];
    for w in path.windows(2) {
        cum.push(cum.last().unwrap() + dist(&w[0], &w[1]));
    }
    let total = *cum.last().unwrap();

    // Progress along the path, slowed to a stop during pauses.
    let horizon = 4.0 * total / profile.pace + 60.0;
    let pauses: Vec<(f64, f64)> = coupled_events(profile.seed, STREAM_PAUSES, profile.pause_rate / 60.0, horizon)
        .into_iter()
        .map(|(start, mut rng)| (start, rng.gen_range(1.0..3.0)))
        .collect();
    let mut progress = vec![0.0];
    if total > 0.0 {
        let mut s = 0.0;
        let mut k = 0usize;
        while s < total {
            let mid = (k as f64 + 0.5) * dt;
            let g: f64 = pauses.iter().map(|&(start, len)| pause_factor(mid, start, len)).product();
            s += profile.pace * g * dt;
            progress.push(s);
            k += 1;
        }
        let scale = total / s;
        progress.iter_mut().for_each(|v| *v *= scale);
    }
    while progress.len() < MIN_SAMPLES.max(2) {
        progress.push(total);
    }
    let n = progress.len();
    let duration = (n - 1) as f64 * dt;

    let origin = path[0];
    let anchor = [origin[0] - 5.0, origin[1], origin[2]];
    let mut tremor_rng = stream(profile.seed, STREAM_TREMOR);
    let tremor_right = Tremor::new(&mut tremor_rng);
    let tremor_left = Tremor::new(&mut tremor_rng);
    let bursts_right = bursts(profile.seed, STREAM_BURSTS, profile.jerkiness, duration, 1.0);
    let bursts_left = bursts(profile.seed, STREAM_BURSTS + 1000, profile.jerkiness, duration, ASSIST_SCALE);

    let samples = progress
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let t = i as f64 * dt;
            let clean = point_at(path, &cum, s);
            let ahead = point_at(path, &cum, (s + TANGENT_STEP).min(total));
            let behind = point_at(path, &cum, (s - TANGENT_STEP).max(0.0));
            let chord: [f64; 3] = std::array::from_fn(|c| ahead[c] - behind[c]);
            let len = dist(&ahead, &behind);
            let t_right = if len > 0.0 { chord.map(|v| v / len) } else { [0.0; 3] };
            let t_left = [-t_right[0], t_right[1], t_right[2]];
            let mut right = clean;
            let mut left: [f64; 3] = std::array::from_fn(|c| {
                let rel = clean[c] - origin[c];
                anchor[c] + ASSIST_SCALE * if c == 0 { -rel } else { rel }
            });
            let tr = tremor_right.at(t, profile.tremor_amp, profile.tremor_freq_hz);
            let tl = tremor_left.at(t, 0.5 * profile.tremor_amp, profile.tremor_freq_hz);
            for c in 0..3 {
                right[c] += tr[c];
                left[c] += tl[c];
            }
            for b in &bursts_right {
                let d = b.displacement(t, &t_right);
                (0..3).for_each(|c| right[c] += d[c]);
            }
            for b in &bursts_left {
                let d = b.displacement(t, &t_left);
                (0..3).for_each(|c| left[c] += d[c]);
            }
            Sample::new(left, right)
        })
        .collect();
    Trajectory::new(samples, rate)
}

/// Waypoints of a running suture: a helix of `turns` loops of the given
/// radius, advancing `pitch` cm per loop along x. The curve is smooth, so
/// clean motion along it at constant speed has constant curvature.
pub fn suture_path(turns: usize, radius: f64, pitch: f64) -> Vec<[f64; 3]> {
    const POINTS_PER_TURN: usize = 96;
    (0..=turns * POINTS_PER_TURN)
        .map(|k| {
            let th = 2.0 * PI * k as f64 / POINTS_PER_TURN as f64;
            [pitch * th / (2.0 * PI), radius * th.sin(), radius * (1.0 - th.cos())]
        })
        .collect()
}

/// Class archetype parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Archetype {
    pub tremor_amp: f64,
    pub jerkiness: f64,
    pub pace: f64,
    pub pause_rate: f64,
}

pub const EXPERT: Archetype = Archetype {
    tremor_amp: 0.02,
    jerkiness: 0.2,
    pace: 1.2,
    pause_rate: 0.5,
};

pub const NOVICE: Archetype = Archetype {
    tremor_amp: 0.2,
    jerkiness: 2.0,
    pace: 0.75,
    pause_rate: 4.0,
};

pub const TREMOR_FREQ_HZ: f64 = 5.0;
const SUTURE_TURNS: usize = 2;
const SUTURE_RADIUS: f64 = 5.0;
const SUTURE_PITCH: f64 = 3.0;
/// Log-scale spread of per-surgeon style offsets at full separation.
const SURGEON_SPREAD: f64 = 0.05;
/// Log-scale spread of per-trial variation.
const TRIAL_SPREAD: f64 = 0.02;

impl Archetype {
    fn values(&self) -> [f64; 4] {
        [self.tremor_amp, self.jerkiness, self.pace, self.pause_rate]
    }

    /// Archetype of `skill` at `separation`: geometric interpolation from the
    /// midpoint of the two classes (0) to the class archetype itself (1).
    pub fn at_separation(skill: Skill, separation: f64) -> Archetype {
        let own = match skill {
            Skill::Expert => EXPERT.values(),
            Skill::Novice => NOVICE.values(),
        };
        let e = EXPERT.values();
        let v = NOVICE.values();
        let out: [f64; 4] = std::array::from_fn(|i| {
            let mid = 0.5 * (e[i].ln() + v[i].ln());
            (mid + separation * (own[i].ln() - mid)).exp()
        });
        Archetype { tremor_amp: out[0], jerkiness: out[1], pace: out[2], pause_rate: out[3] }
    }
}

fn clipped_normal(rng: &mut ChaCha8Rng) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    z.clamp(-2.0, 2.0)
}

/// A generated population: trials, manifest text and file contents.
#[derive(Debug, Clone)]
pub struct Population {
    pub dataset: Dataset,
    pub manifest: String,
    /// `(relative path, contents)` of every trajectory file.
    pub files: Vec<(String, String)>,
}

pub const MANIFEST_FILE: &str = "manifest.csv";

impl Population {
    /// Writes the trajectory files and `manifest.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| Error::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        for (name, text) in &self.files {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(io(&p))?;
        }
        let m = dir.join(MANIFEST_FILE);
        std::fs::write(&m, &self.manifest).map_err(io(&m))
    }
}

/// Generates `n_experts + n_novices` surgeons with `trials_per_surgeon`
/// trials each.
///
/// Each surgeon's parameters are the class archetype at `separation`, times
/// a per-surgeon style factor (scaled by `separation`, so surgeons are
/// interchangeable at 0) and a small per-trial factor. Every factor is
/// bounded, so at separation 1 the two classes' parameters do not overlap.
pub fn gen_population(
    n_experts: usize,
    n_novices: usize,
    trials_per_surgeon: usize,
    separation: f64,
    seed: u64,
) -> Result<Population> {
    if n_experts == 0 || n_novices == 0 || trials_per_surgeon == 0 {
        return Err(Error::Param("surgeon and trial counts must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&separation) {
        return Err(Error::Param(format!("separation must be in [0, 1], got {separation}")));
    }

    let n_surgeons = n_experts + n_novices;
    let mut trials = Vec::new();
    let mut files = Vec::new();
    for s in 0..n_surgeons {
        let skill = if s < n_experts { Skill::Expert } else { Skill::Novice };
        let surgeon_id = format!("S{:02}", s + 1);
        let mut rng = stream(seed, s as u64 + 1);
        let style: [f64; 4] = std::array::from_fn(|_| clipped_normal(&mut rng));
        let base = Archetype::at_separation(skill, separation).values();

        for t in 1..=trials_per_surgeon {
            let trial_z: [f64; 4] = std::array::from_fn(|_| clipped_normal(&mut rng));
            let radius_jitter = rng.gen_range(0.95..1.05);
            let trial_seed: u64 = rng.gen();
            let p: [f64; 4] = std::array::from_fn(|i| {
                base[i] * (separation * SURGEON_SPREAD * style[i] + TRIAL_SPREAD * trial_z[i]).exp()
            });
            let profile = MotionProfile {
                base_path: suture_path(SUTURE_TURNS, SUTURE_RADIUS * radius_jitter, SUTURE_PITCH),
                tremor_amp: p[0],
                tremor_freq_hz: TREMOR_FREQ_HZ,
                jerkiness: p[1],
                pace: p[2],
                pause_rate: p[3],
                seed: trial_seed,
            };
            let trajectory = gen_trajectory(&profile)?;
            let source_path = format!("{surgeon_id}_T{t:02}.csv");
            files.push((source_path.clone(), serialize_trajectory(&trajectory)));
            trials.push(Trial {
                meta: TrialMeta {
                    surgeon_id: surgeon_id.clone(),
                    trial_index: t as u32,
                    skill,
                    source_path,
                },
                trajectory,
            });
        }
    }
    let metas: Vec<TrialMeta> = trials.iter().map(|t| t.meta.clone()).collect();
    Ok(Population {
        dataset: Dataset::new(trials)?,
        manifest: render_manifest(&metas),
        files,
    })
}
