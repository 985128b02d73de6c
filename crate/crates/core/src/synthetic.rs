//! Synthetic stand-in for the airfoil self-noise table.
//!
//! Design points mimic the layout of the NASA wind-tunnel sweep (six chords, four
//! free-stream velocities, several angles of attack, one-third-octave frequencies) and the
//! suction-side displacement thickness follows the tripped boundary-layer correlations of the
//! Brooks-Pope-Marcolini airfoil noise model. Sound pressure levels come from a reduced form of
//! that model's turbulent-boundary-layer trailing-edge terms plus Gaussian measurement noise.
//!
//! The output is useful for tests, benchmarks and demos. It is not the measured dataset.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{Dataset, DesignRecord};

const THIRD_OCTAVE_HZ: [f64; 21] = [
    200.0, 250.0, 315.0, 400.0, 500.0, 630.0, 800.0, 1000.0, 1250.0, 1600.0, 2000.0, 2500.0,
    3150.0, 4000.0, 5000.0, 6300.0, 8000.0, 10000.0, 12500.0, 16000.0, 20000.0,
];

const VELOCITIES_M_S: [f64; 4] = [71.3, 55.5, 39.6, 31.7];

/// `(chord in metres, angles of attack in degrees)`
const SWEEP: [(f64, &[f64]); 6] = [
    (0.3048, &[0.0, 1.5, 3.0]),
    (0.2286, &[0.0, 2.0, 4.0, 7.3]),
    (0.1524, &[0.0, 2.7, 5.4, 7.2, 9.9, 12.6, 15.6]),
    (0.1016, &[0.0, 4.2, 8.4, 11.2, 15.4, 19.7]),
    (0.0508, &[0.0, 4.2, 8.4, 11.2, 15.4]),
    (0.0254, &[0.0, 4.8, 9.9, 12.7, 17.4, 22.2]),
];

const KINEMATIC_VISCOSITY: f64 = 1.4529e-5;
const SPEED_OF_SOUND: f64 = 340.46;
const SPAN_M: f64 = 0.4572;
const OBSERVER_M: f64 = 1.22;
/// Shifts the reduced model onto the level range of the published table.
const LEVEL_OFFSET_DB: f64 = 69.0;

/// Same row count as the measured table.
pub const SYNTHETIC_ROWS: usize = 1503;

fn suction_displacement_thickness(chord: f64, velocity: f64, alpha: f64) -> f64 {
    let log_re = (velocity * chord / KINEMATIC_VISCOSITY).log10();
    let zero_aoa = chord * 10f64.powf(3.411 - 1.5397 * log_re + 0.1059 * log_re * log_re);
    let factor = if alpha <= 5.0 {
        10f64.powf(0.0679 * alpha)
    } else if alpha <= 12.5 {
        0.381 * 10f64.powf(0.1516 * alpha)
    } else {
        14.296 * 10f64.powf(0.0258 * alpha)
    };
    zero_aoa * factor
}

fn pressure_displacement_thickness(chord: f64, velocity: f64, alpha: f64) -> f64 {
    let log_re = (velocity * chord / KINEMATIC_VISCOSITY).log10();
    let zero_aoa = chord * 10f64.powf(3.411 - 1.5397 * log_re + 0.1059 * log_re * log_re);
    zero_aoa * 10f64.powf(-0.0432 * alpha + 0.00113 * alpha * alpha)
}

/// Broad spectral shape (dB relative to peak) as a function of `|log10(St / St_peak)|`.
fn spectral_shape(a: f64) -> f64 {
    if a < 0.13 {
        (67.552 - 886.788 * a * a).sqrt() - 8.219
    } else if a <= 0.321 {
        -15.901 * a + 1.098
    } else {
        -4.669 * a.powi(3) + 3.491 * a * a - 16.699 * a + 1.149
    }
}

fn amplitude_k1(re: f64) -> f64 {
    let log_re = re.log10();
    if re < 2.47e5 {
        -4.31 * log_re + 156.3
    } else if re <= 8.0e5 {
        -9.0 * log_re + 181.6
    } else {
        128.5
    }
}

fn sound_pressure_level(freq: f64, alpha: f64, chord: f64, velocity: f64) -> f64 {
    let mach = velocity / SPEED_OF_SOUND;
    let re = velocity * chord / KINEMATIC_VISCOSITY;
    let k1 = amplitude_k1(re);
    let ds = suction_displacement_thickness(chord, velocity, alpha);
    let dp = pressure_displacement_thickness(chord, velocity, alpha);
    let st_peak = 0.02 * mach.powf(-0.6);
    let st_alpha_peak = if alpha < 1.33 {
        st_peak
    } else if alpha <= 12.5 {
        st_peak * 10f64.powf(0.0054 * (alpha - 1.33).powi(2))
    } else {
        4.72 * st_peak
    };
    let level = |thickness: f64, peak: f64| {
        let st = freq * thickness / velocity;
        10.0 * (thickness * mach.powi(5) * SPAN_M / (OBSERVER_M * OBSERVER_M)).log10()
            + spectral_shape((st / peak).log10().abs())
            + k1
            - 3.0
    };
    let suction = level(ds, st_peak);
    let pressure = level(dp, st_peak);
    let angle = level(ds, st_alpha_peak) + 0.35 * alpha;
    10.0 * [suction, pressure, angle]
        .iter()
        .map(|l| 10f64.powf(l / 10.0))
        .sum::<f64>()
        .log10()
}

/// Deterministic airfoil-like dataset with [`SYNTHETIC_ROWS`] records.
pub fn airfoil_like(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let combos: Vec<(f64, f64, f64)> = SWEEP
        .iter()
        .flat_map(|&(chord, angles)| {
            angles
                .iter()
                .flat_map(move |&alpha| VELOCITIES_M_S.iter().map(move |&u| (chord, alpha, u)))
        })
        .collect();
    let base = SYNTHETIC_ROWS / combos.len();
    let extra = SYNTHETIC_ROWS % combos.len();
    let mut records = Vec::with_capacity(SYNTHETIC_ROWS);
    for (k, &(chord, alpha, velocity)) in combos.iter().enumerate() {
        let count = base + usize::from(k < extra);
        // smaller chords radiate at higher frequencies
        let shift = ((0.3048 - chord) / (0.3048 - 0.0254) * 8.0).round() as usize;
        let start = shift.min(THIRD_OCTAVE_HZ.len() - count);
        for &freq in &THIRD_OCTAVE_HZ[start..start + count] {
            let thickness = suction_displacement_thickness(chord, velocity, alpha);
            let spl = sound_pressure_level(freq, alpha, chord, velocity)
                + LEVEL_OFFSET_DB
                + noise.sample(&mut rng);
            records.push(DesignRecord {
                x: [freq, alpha, chord, velocity, thickness],
                y: (spl * 1000.0).round() / 1000.0,
            });
        }
    }
    Dataset::new(records).expect("non-empty finite records")
}
