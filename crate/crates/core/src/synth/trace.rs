//! Synthetic per-second bitrate traces.
//!
//! A trace is `exp(s * z_i) * spike_i`, rescaled to the requested mean, where
//! `z` is a unit-variance AR(1) process and `spike_i > 1` at subsegment
//! boundaries. `s` is solved for so the relative stddev hits the requested
//! burstiness exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::trace::{pearson_values, BitrateTrace};

pub const TRACE_AR_COEFF: f64 = 0.8;

/// Largest boundary spike; smaller when the spikes alone would dominate.
pub const SPIKE_FACTOR: f64 = 1.5;

const MAX_LOG_SD: f64 = 64.0;

fn ar1(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let innov = (1.0 - TRACE_AR_COEFF * TRACE_AR_COEFF).sqrt();
    let mut z = Vec::with_capacity(n);
    let mut prev: f64 = StandardNormal.sample(rng);
    z.push(prev);
    for _ in 1..n {
        let e: f64 = StandardNormal.sample(rng);
        prev = TRACE_AR_COEFF * prev + innov * e;
        z.push(prev);
    }
    z
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn relative_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    var.sqrt() / m
}

struct Shaper {
    z: Vec<f64>,
    zmax: f64,
    spikes: Vec<f64>,
}

impl Shaper {
    fn new(z: Vec<f64>, subsegment: f64, burstiness: f64) -> Self {
        let n = z.len();
        let every = (subsegment.round() as usize).max(1);
        let hits = (0..n).filter(|i| i % every == 0).count();
        let q = hits as f64 / n as f64;
        // Relative sd of the spike pattern alone is u*sqrt(q(1-q))/(1+q*u)
        // for factor 1+u; keep it at or below half the target.
        let c = 0.5 * burstiness;
        let denom = (q * (1.0 - q)).sqrt() - c * q;
        let u = if denom > 0.0 { (c / denom).min(SPIKE_FACTOR - 1.0) } else { SPIKE_FACTOR - 1.0 };
        let spikes = (0..n).map(|i| if i % every == 0 { 1.0 + u } else { 1.0 }).collect();
        let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Self { z, zmax, spikes }
    }

    fn values(&self, s: f64) -> Vec<f64> {
        self.z.iter().zip(&self.spikes).map(|(z, k)| (s * (z - self.zmax)).exp() * k).collect()
    }

    fn solve(&self, target: f64) -> Vec<f64> {
        let g = |s: f64| relative_sd(&self.values(s)) - target;
        let (mut lo, mut glo) = (0.0, g(0.0));
        if glo >= 0.0 {
            return self.values(0.0);
        }
        let mut hi = 0.5;
        let mut ghi = g(hi);
        while ghi < 0.0 {
            lo = hi;
            glo = ghi;
            if hi >= MAX_LOG_SD {
                return self.values(hi);
            }
            hi *= 2.0;
            ghi = g(hi);
        }
        // Illinois variant of regula falsi.
        let mut side = 0;
        for _ in 0..200 {
            let s = (lo * ghi - hi * glo) / (ghi - glo);
            let gs = g(s);
            if gs.abs() <= 1e-13 * target || (hi - lo) <= 1e-15 * hi {
                return self.values(s);
            }
            if gs < 0.0 {
                lo = s;
                glo = gs;
                if side == -1 {
                    ghi *= 0.5;
                }
                side = -1;
            } else {
                hi = s;
                ghi = gs;
                if side == 1 {
                    glo *= 0.5;
                }
                side = 1;
            }
        }
        self.values(0.5 * (lo + hi))
    }
}

fn finish(duration: f64, mean_kbps: f64, mut values: Vec<f64>) -> BitrateTrace {
    let m = values.iter().sum::<f64>() / values.len() as f64;
    if m > 0.0 {
        for v in &mut values {
            *v = (*v * mean_kbps / m).max(0.0);
        }
    } else {
        values.fill(mean_kbps);
    }
    BitrateTrace::with_source_duration(1.0, values, duration).expect("finite non-negative values")
}

fn buckets(duration: f64) -> usize {
    (duration.ceil() as usize).max(1)
}

fn shape(duration: f64, z: Vec<f64>, mean_kbps: f64, burstiness: f64, subsegment: f64) -> BitrateTrace {
    let n = z.len();
    if burstiness <= 0.0 || n < 2 || mean_kbps <= 0.0 {
        return finish(duration, mean_kbps, vec![1.0; n]);
    }
    finish(duration, mean_kbps, Shaper::new(z, subsegment, burstiness).solve(burstiness))
}

/// One-second trace of `ceil(duration)` buckets with the given mean and
/// relative standard deviation.
pub fn synth_trace(duration: f64, mean_kbps: f64, burstiness: f64, subsegment: f64, seed: u64) -> BitrateTrace {
    assert!(duration > 0.0 && mean_kbps >= 0.0 && burstiness >= 0.0, "invalid trace parameters");
    let n = buckets(duration);
    let z = ar1(n, &mut stream_rng(seed, 0));
    shape(duration, z, mean_kbps, burstiness, subsegment)
}

/// Traces of one video at several resolutions. Each mixes a shared AR(1)
/// component (weight `rho`) with its own; if any pair correlates below
/// `floor`, all traces fall back to rescaled copies of the shared trace.
pub fn synth_trace_family(
    duration: f64,
    means: &[f64],
    burstiness: f64,
    subsegment: f64,
    rho: f64,
    floor: f64,
    seed: u64,
) -> Vec<BitrateTrace> {
    let n = buckets(duration);
    let shared = ar1(n, &mut stream_rng(seed, 0));
    let own_w = (1.0 - rho * rho).max(0.0).sqrt();
    let traces: Vec<BitrateTrace> = means
        .iter()
        .enumerate()
        .map(|(r, &m)| {
            let z = if own_w == 0.0 {
                shared.clone()
            } else {
                let own = ar1(n, &mut stream_rng(seed, r as u64 + 1));
                shared.iter().zip(own).map(|(s, o)| rho * s + own_w * o).collect()
            };
            shape(duration, z, m, burstiness, subsegment)
        })
        .collect();
    let weak = (0..traces.len()).any(|i| {
        (i + 1..traces.len()).any(|j| {
            pearson_values(traces[i].values(), traces[j].values()).is_ok_and(|c| c < floor)
        })
    });
    if !weak {
        return traces;
    }
    let base = shape(duration, shared, 1.0, burstiness, subsegment);
    means
        .iter()
        .map(|&m| finish(duration, m, base.values().to_vec()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::trace_stats_with;

    #[test]
    fn zero_burstiness_is_constant() {
        let t = synth_trace(100.0, 800.0, 0.0, 5.0, 1);
        assert!(t.values().iter().all(|v| *v == 800.0));
    }

    #[test]
    fn mean_and_burstiness_are_hit() {
        let t = synth_trace(180.0, 1000.0, 0.4, 5.0, 7);
        let m = t.mean().unwrap();
        assert!((950.0..=1050.0).contains(&m), "{m}");
        let b = trace_stats_with(&t, 0.0).unwrap().burstiness.unwrap();
        assert!((b / 0.4 - 1.0).abs() < 1e-9, "{b}");
        assert_eq!(t.len(), 180);
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(synth_trace(90.5, 500.0, 0.3, 5.0, 3), synth_trace(90.5, 500.0, 0.3, 5.0, 3));
        assert_ne!(synth_trace(90.5, 500.0, 0.3, 5.0, 3), synth_trace(90.5, 500.0, 0.3, 5.0, 4));
    }

    #[test]
    fn spikes_sit_on_subsegment_boundaries() {
        // With high burstiness the full spike factor applies; on average the
        // boundary buckets are larger than their neighbours.
        let t = synth_trace(5000.0, 1000.0, 0.6, 5.0, 11);
        let v = t.values();
        let at: f64 = v.iter().step_by(5).sum::<f64>() / v.iter().step_by(5).count() as f64;
        let off: f64 = v.iter().skip(1).step_by(5).sum::<f64>() / v.iter().skip(1).step_by(5).count() as f64;
        assert!(at / off > 1.3, "{at} {off}");
    }

    #[test]
    fn burstiness_accuracy_over_many_seeds() {
        for seed in 0..200 {
            let b = 0.05 + (seed as f64) * 0.01;
            let t = synth_trace(60.0 + seed as f64, 700.0, b, 5.0, seed);
            let got = trace_stats_with(&t, 0.0).unwrap().burstiness.unwrap();
            assert!((got / b - 1.0).abs() < 0.15, "seed {seed}: {got} vs {b}");
        }
    }

    #[test]
    fn family_is_correlated() {
        let ts = synth_trace_family(300.0, &[500.0, 2000.0, 4000.0], 0.35, 5.0, 0.95, 0.75, 21);
        for t in &ts[1..] {
            assert!(pearson_values(ts[0].values(), t.values()).unwrap() >= 0.75);
        }
        let single = synth_trace_family(300.0, &[500.0], 0.35, 5.0, 1.0, 0.75, 21);
        assert_eq!(single[0], synth_trace(300.0, 500.0, 0.35, 5.0, 21));
        let forced = synth_trace_family(300.0, &[500.0, 1000.0], 0.35, 5.0, 0.0, 0.9999, 21);
        assert!((pearson_values(forced[0].values(), forced[1].values()).unwrap() - 1.0).abs() < 1e-12);
    }
}
