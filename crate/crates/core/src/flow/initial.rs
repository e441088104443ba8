use std::f64::consts::PI;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{FlowDomain, FlowMode};
use crate::error::{Error, Result};
use crate::field::SampledField;

/// `amplitude · cos(ω k·x + phase)` with `ω = π/R`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierMode {
    pub amplitude: f64,
    pub wavenumber: Vec<i32>,
    #[serde(default)]
    pub phase: f64,
}

/// Built-in initial data. Periodic variants give the periodic part `p`;
/// radial and line variants give the whole potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builtin", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Zero {},
    Fourier {
        modes: Vec<FourierMode>,
    },
    /// Gaussian coefficients on `1 ≤ |k|∞ ≤ max_wavenumber`, scaled by
    /// `exp(-decay |k|²)/|k|²`.
    RandomFourier {
        max_wavenumber: u32,
        amplitude: f64,
        #[serde(default)]
        decay: f64,
    },
    /// Smoothed sawtooth second derivative of amplitude `amplitude`, one
    /// dimension only.
    Sawtooth {
        amplitude: f64,
        smoothing: f64,
        modes: u32,
    },
    Quadratic {
        a: f64,
    },
    /// `a r²/2 + amplitude · exp(-r²/width²)`.
    Bump {
        a: f64,
        amplitude: f64,
        width: f64,
    },
    Csv {
        path: PathBuf,
    },
}

impl InitialData {
    /// Rejects variants that do not fit the domain.
    pub fn validate(&self, d: &FlowDomain) -> Result<()> {
        let periodic = d.mode == FlowMode::Periodic;
        match self {
            InitialData::Zero {} | InitialData::Csv { .. } => Ok(()),
            InitialData::Fourier { modes } => {
                if !periodic {
                    return Err(Error::invalid("Fourier data needs the periodic mode"));
                }
                for m in modes {
                    if m.wavenumber.len() != d.n {
                        return Err(Error::invalid(format!(
                            "wavenumber {:?} does not match dimension {}",
                            m.wavenumber, d.n
                        )));
                    }
                    if !(m.amplitude.is_finite() && m.phase.is_finite()) {
                        return Err(Error::invalid("non-finite Fourier coefficient"));
                    }
                }
                Ok(())
            }
            InitialData::RandomFourier {
                max_wavenumber,
                amplitude,
                decay,
            } => {
                if !periodic {
                    return Err(Error::invalid("random Fourier data needs the periodic mode"));
                }
                if *max_wavenumber == 0 || *max_wavenumber > 64 {
                    return Err(Error::invalid("max_wavenumber must lie in 1..=64"));
                }
                if !(amplitude.is_finite() && decay.is_finite() && *decay >= 0.0) {
                    return Err(Error::invalid("bad random Fourier amplitude or decay"));
                }
                Ok(())
            }
            InitialData::Sawtooth {
                amplitude,
                smoothing,
                modes,
            } => {
                if !periodic || d.n != 1 {
                    return Err(Error::invalid("sawtooth data needs the one-dimensional periodic mode"));
                }
                if !(amplitude.is_finite() && smoothing.is_finite() && *smoothing >= 0.0) || *modes == 0 {
                    return Err(Error::invalid("bad sawtooth parameters"));
                }
                Ok(())
            }
            InitialData::Quadratic { a } => {
                if periodic {
                    return Err(Error::invalid("use the background matrix for periodic quadratics"));
                }
                if !a.is_finite() {
                    return Err(Error::invalid("non-finite quadratic coefficient"));
                }
                Ok(())
            }
            InitialData::Bump { a, amplitude, width } => {
                if periodic {
                    return Err(Error::invalid("bump data needs the radial or line mode"));
                }
                if !(a.is_finite() && amplitude.is_finite() && *width > 0.0 && width.is_finite()) {
                    return Err(Error::invalid("bad bump parameters"));
                }
                Ok(())
            }
        }
    }

    /// Node values on `d`; `seed` drives the random variant.
    pub fn sample(&self, d: &FlowDomain, seed: u64) -> Result<Vec<f64>> {
        self.validate(d)?;
        let count = d.node_count();
        let omega = PI / d.half_width;
        let xs: Vec<[f64; 3]> = (0..count).map(|i| d.point(i)).collect();
        let radius = |x: &[f64; 3]| match d.mode {
            FlowMode::Radial => x[0],
            _ => x[0].abs(),
        };
        Ok(match self {
            InitialData::Zero {} => vec![0.0; count],
            InitialData::Fourier { modes } => xs
                .iter()
                .map(|x| {
                    modes
                        .iter()
                        .map(|m| {
                            let kx: f64 = m.wavenumber.iter().zip(x).map(|(&k, &xi)| k as f64 * xi).sum();
                            m.amplitude * (omega * kx + m.phase).cos()
                        })
                        .sum()
                })
                .collect(),
            InitialData::RandomFourier {
                max_wavenumber,
                amplitude,
                decay,
            } => {
                let modes = random_modes(d.n, *max_wavenumber as i32, *amplitude, *decay, seed);
                InitialData::Fourier { modes }.sample(d, seed)?
            }
            InitialData::Sawtooth {
                amplitude,
                smoothing,
                modes,
            } => {
                let coef: Vec<f64> = (1..=*modes)
                    .map(|m| {
                        let m = m as f64;
                        let sign = if m as u32 % 2 == 1 { 1.0 } else { -1.0 };
                        2.0 * amplitude / PI * sign / m * (-(m * smoothing).powi(2) / 2.0).exp()
                    })
                    .collect();
                xs.iter()
                    .map(|x| {
                        -coef
                            .iter()
                            .enumerate()
                            .map(|(i, b)| {
                                let w = (i + 1) as f64 * omega;
                                b * (w * x[0]).sin() / (w * w)
                            })
                            .sum::<f64>()
                    })
                    .collect()
            }
            InitialData::Quadratic { a } => xs.iter().map(|x| 0.5 * a * radius(x).powi(2)).collect(),
            InitialData::Bump { a, amplitude, width } => xs
                .iter()
                .map(|x| {
                    let r = radius(x);
                    0.5 * a * r * r + amplitude * (-(r / width).powi(2)).exp()
                })
                .collect(),
            InitialData::Csv { path } => {
                let f = SampledField::read_csv(std::fs::File::open(path)?)?;
                field_values(&f, d)?
            }
        })
    }
}

fn random_modes(n: usize, kmax: i32, amplitude: f64, decay: f64, seed: u64) -> Vec<FourierMode> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = (2 * kmax + 1) as usize;
    let mut modes = Vec::new();
    for combo in 0..side.pow(n as u32) {
        let mut rest = combo;
        let mut k = Vec::with_capacity(n);
        for _ in 0..n {
            k.push((rest % side) as i32 - kmax);
            rest /= side;
        }
        // one representative of each ±k pair
        let first = k.iter().find(|&&c| c != 0);
        if first.is_none_or(|&c| c < 0) {
            continue;
        }
        let k2: f64 = k.iter().map(|&c| (c * c) as f64).sum();
        let g: f64 = rng.sample(StandardNormal);
        let phase = rng.random_range(0.0..2.0 * PI);
        modes.push(FourierMode {
            amplitude: amplitude * g * (-decay * k2).exp() / k2,
            wavenumber: k,
            phase,
        });
    }
    modes
}

/// Values of a CSV snapshot of the full potential laid on the nodes of `d`.
fn field_values(f: &SampledField, d: &FlowDomain) -> Result<Vec<f64>> {
    let h = d.h();
    let (shape, lower) = match d.mode {
        FlowMode::Periodic => (vec![d.resolution; d.n], vec![-d.half_width; d.n]),
        FlowMode::Radial => (vec![d.resolution + 1], vec![0.0]),
        FlowMode::Line => (vec![d.resolution + 1], vec![-d.half_width]),
    };
    let tol = 1e-9 * (1.0 + d.half_width);
    if f.shape() != shape.as_slice()
        || (f.h() - h).abs() > 1e-9 * h
        || f.lower().iter().zip(&lower).any(|(a, b)| (a - b).abs() > tol)
    {
        return Err(Error::invalid(format!(
            "CSV grid {:?} (h = {}) does not match the flow grid {:?} (h = {h})",
            f.shape(),
            f.h(),
            shape
        )));
    }
    Ok(f.values().iter().enumerate().map(|(i, v)| v - d.background(i)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SymMatrix;

    fn periodic(n: usize) -> FlowDomain {
        FlowDomain::periodic(SymMatrix::identity(n).unwrap(), PI, 32).unwrap()
    }

    #[test]
    fn json_round_trip() {
        let j = r#"{"builtin":"fourier","modes":[{"amplitude":0.1,"wavenumber":[1,2]}]}"#;
        let d: InitialData = serde_json::from_str(j).unwrap();
        let back: InitialData = serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
        assert_eq!(d, back);
        assert!(serde_json::from_str::<InitialData>(r#"{"builtin":"zero","extra":1}"#).is_err());
    }

    #[test]
    fn random_fourier_is_seeded() {
        let d = periodic(2);
        let data = InitialData::RandomFourier {
            max_wavenumber: 3,
            amplitude: 0.05,
            decay: 0.1,
        };
        let a = data.sample(&d, 7).unwrap();
        assert_eq!(a, data.sample(&d, 7).unwrap());
        assert_ne!(a, data.sample(&d, 8).unwrap());
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn sawtooth_second_derivative() {
        let d = FlowDomain::periodic(SymMatrix::from_diag(&[0.5]).unwrap(), PI, 1024).unwrap();
        let data = InitialData::Sawtooth {
            amplitude: 0.5,
            smoothing: 0.02,
            modes: 200,
        };
        let p = data.sample(&d, 0).unwrap();
        let s = super::super::PotentialState::new(d, p, 0.0).unwrap();
        // p″ ≈ a·x/π away from the jump at ±π
        let mid = s.domain.node_count() / 2 + 100;
        let x = s.domain.point(mid)[0];
        let pxx = s.hessians()[mid].get(0, 0) - 0.5;
        assert!((pxx - 0.5 * x / PI).abs() < 1e-2, "{pxx} vs {}", 0.5 * x / PI);
    }

    #[test]
    fn mode_mismatch_rejected() {
        let r = FlowDomain::radial(2, 1.0, 32).unwrap();
        assert!(InitialData::Fourier { modes: vec![] }.sample(&r, 0).is_err());
        assert!(InitialData::Quadratic { a: 1.0 }.sample(&periodic(1), 0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let d = periodic(2);
        let data = InitialData::Fourier {
            modes: vec![FourierMode {
                amplitude: 0.2,
                wavenumber: vec![1, 1],
                phase: 0.3,
            }],
        };
        let p = data.sample(&d, 0).unwrap();
        let full = (0..p.len()).map(|i| p[i] + d.background(i)).collect();
        let f = SampledField::new(&[-PI, -PI], &[32, 32], d.h(), full).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        f.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
        let q = InitialData::Csv { path }.sample(&d, 0).unwrap();
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
