//! Discretization of a one-dimensional marginal `m` into an empirical `m_N`.

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Atom, EmpiricalMeasure, ParamPoint, Space};
use crate::transport::{wasserstein1, MetricSpec};

/// Number of resamples behind [`estimate_d1`].
pub const D1_RESAMPLES: usize = 5;

/// A marginal on the real line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceDistribution {
    Uniform { a: f64, b: f64 },
    Exponential { rate: f64 },
    /// Equal-weight points, e.g. loaded from a file.
    Sample { points: Vec<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantizeMethod {
    Sample,
    Grid,
}

impl std::str::FromStr for QuantizeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample" => Ok(QuantizeMethod::Sample),
            "grid" => Ok(QuantizeMethod::Grid),
            other => Err(Error::invalid(format!("unknown quantization method `{other}`"))),
        }
    }
}

impl SourceDistribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SourceDistribution::Uniform { a, b } if !(a.is_finite() && b.is_finite() && b > a) => {
                Err(Error::invalid(format!("uniform({a}, {b}) needs finite a < b")))
            }
            SourceDistribution::Exponential { rate } if !(rate.is_finite() && rate > 0.0) => {
                Err(Error::invalid(format!("exponential rate {rate} must be positive")))
            }
            SourceDistribution::Sample { ref points } if points.is_empty() || points.iter().any(|p| !p.is_finite()) => {
                Err(Error::invalid("sample needs at least one finite point"))
            }
            _ => Ok(()),
        }
    }

    pub fn dimension(&self) -> usize {
        1
    }

    /// Parse `uniform:a,b`, `exponential:rate` or `sample:p1,p2,...`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (kind, args) = spec.split_once(':').unwrap_or((spec, ""));
        let nums = args
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<f64>().map_err(|e| Error::invalid(format!("bad number `{s}`: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        let dist = match (kind, nums.as_slice()) {
            ("uniform", []) => SourceDistribution::Uniform { a: 0.0, b: 1.0 },
            ("uniform", [a, b]) => SourceDistribution::Uniform { a: *a, b: *b },
            ("exponential" | "exp", []) => SourceDistribution::Exponential { rate: 1.0 },
            ("exponential" | "exp", [rate]) => SourceDistribution::Exponential { rate: *rate },
            ("sample", pts) => SourceDistribution::Sample { points: pts.to_vec() },
            _ => return Err(Error::invalid(format!("cannot parse distribution `{spec}`"))),
        };
        dist.validate()?;
        Ok(dist)
    }

    /// `F⁻¹(p)` for `p ∈ [0, 1]`; for a sample, the left-continuous empirical quantile.
    pub fn quantile(&self, p: f64) -> f64 {
        match self {
            SourceDistribution::Uniform { a, b } => a + (b - a) * p,
            SourceDistribution::Exponential { rate } => -(-p).ln_1p() / rate,
            SourceDistribution::Sample { points } => {
                let mut sorted = points.clone();
                sorted.sort_by(f64::total_cmp);
                let idx = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
                sorted[idx]
            }
        }
    }

    /// Mass dropped by [`quantize_grid`] before renormalizing.
    pub fn truncation_mass(&self, n: usize) -> f64 {
        match self {
            SourceDistribution::Exponential { .. } => 1.0 / (4.0 * n as f64),
            _ => 0.0,
        }
    }

    fn draw(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        Ok(match self {
            SourceDistribution::Uniform { a, b } => {
                let u = Uniform::new(*a, *b).map_err(|e| Error::invalid(e.to_string()))?;
                (0..n).map(|_| u.sample(rng)).collect()
            }
            SourceDistribution::Exponential { rate } => {
                let e = Exp::new(*rate).map_err(|e| Error::invalid(e.to_string()))?;
                (0..n).map(|_| e.sample(rng)).collect()
            }
            SourceDistribution::Sample { points } => {
                let u = Uniform::new(0, points.len()).map_err(|e| Error::invalid(e.to_string()))?;
                (0..n).map(|_| points[u.sample(rng)]).collect()
            }
        })
    }

    /// `∫_{−∞}^x F`.
    fn cdf_integral(&self, x: f64) -> f64 {
        match *self {
            SourceDistribution::Uniform { a, .. } if x <= a => 0.0,
            SourceDistribution::Uniform { a, b } if x <= b => (x - a).powi(2) / (2.0 * (b - a)),
            SourceDistribution::Uniform { a, b } => (b - a) / 2.0 + (x - b),
            SourceDistribution::Exponential { .. } if x <= 0.0 => 0.0,
            SourceDistribution::Exponential { rate } => x + (-rate * x).exp_m1() / rate,
            SourceDistribution::Sample { .. } => unreachable!("finite samples use exact transport"),
        }
    }

    /// `∫_x^∞ (1 − F)`.
    fn survival_integral(&self, x: f64) -> f64 {
        match *self {
            SourceDistribution::Uniform { b, .. } if x >= b => 0.0,
            SourceDistribution::Uniform { a, b } if x >= a => (b - x).powi(2) / (2.0 * (b - a)),
            SourceDistribution::Uniform { a, b } => (a - x) + (b - a) / 2.0,
            SourceDistribution::Exponential { rate } if x >= 0.0 => (-rate * x).exp() / rate,
            SourceDistribution::Exponential { rate } => 1.0 / rate - x,
            SourceDistribution::Sample { .. } => unreachable!("finite samples use exact transport"),
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        match *self {
            SourceDistribution::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            SourceDistribution::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            SourceDistribution::Sample { .. } => unreachable!("finite samples use exact transport"),
        }
    }

    fn to_measure(&self) -> Result<EmpiricalMeasure> {
        match self {
            SourceDistribution::Sample { points } => {
                EmpiricalMeasure::uniform_x(points.iter().map(|&p| ParamPoint::scalar(p)).collect())
            }
            _ => Err(Error::invalid("continuous distribution has no finite support")),
        }
    }
}

fn points_to_measure(points: Vec<f64>) -> Result<EmpiricalMeasure> {
    EmpiricalMeasure::uniform_x(points.into_iter().map(ParamPoint::scalar).collect())
}

/// `N` i.i.d. draws with weight `1/N` each.
pub fn quantize_sample(dist: &SourceDistribution, n: usize, seed: u64) -> Result<EmpiricalMeasure> {
    dist.validate()?;
    if n == 0 {
        return Err(Error::invalid("N must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    points_to_measure(dist.draw(n, &mut rng)?)
}

/// Cell medians `F⁻¹((i + ½)/N)`, `i = 0..N`, each with mass `1/N`.
///
/// The exponential law is first truncated at its `1 − 1/(4N)` quantile and
/// renormalized; see [`SourceDistribution::truncation_mass`].
pub fn quantize_grid(dist: &SourceDistribution, n: usize) -> Result<EmpiricalMeasure> {
    dist.validate()?;
    if n == 0 {
        return Err(Error::invalid("N must be at least 1"));
    }
    let top = 1.0 - dist.truncation_mass(n);
    let points = (0..n).map(|i| dist.quantile(top * (i as f64 + 0.5) / n as f64)).collect();
    points_to_measure(points)
}

/// Quantize with the chosen method; `seed` only matters for sampling.
pub fn quantize(dist: &SourceDistribution, n: usize, method: QuantizeMethod, seed: u64) -> Result<EmpiricalMeasure> {
    match method {
        QuantizeMethod::Sample => quantize_sample(dist, n, seed),
        QuantizeMethod::Grid => quantize_grid(dist, n),
    }
}

/// Exact `d₁(m, m_N) = ∫ |F − F_N|` on the real line.
pub fn exact_d1_1d(dist: &SourceDistribution, m_n: &EmpiricalMeasure) -> Result<f64> {
    dist.validate()?;
    if m_n.space() != Space::X || m_n.atoms().iter().any(|a| a.x.0.len() != 1) {
        return Err(Error::invalid("exact d₁ needs a one-dimensional measure on X"));
    }
    if let SourceDistribution::Sample { .. } = dist {
        return wasserstein1(&dist.to_measure()?, m_n, &MetricSpec::Euclidean);
    }
    let mut atoms: Vec<(f64, f64)> = m_n.atoms().iter().map(|a| (a.x.value(), a.w)).collect();
    atoms.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut total = dist.cdf_integral(atoms[0].0) + dist.survival_integral(atoms[atoms.len() - 1].0);
    let mut level = 0.0;
    for pair in atoms.windows(2) {
        level += pair[0].1;
        let (l, r) = (pair[0].0, pair[1].0);
        if r <= l {
            continue;
        }
        let c = level.min(1.0);
        let cross = if c <= dist.cdf(l) {
            l
        } else if c >= dist.cdf(r) {
            r
        } else {
            dist.quantile(c).clamp(l, r)
        };
        let below = c * (cross - l) - (dist.cdf_integral(cross) - dist.cdf_integral(l));
        let above = (dist.cdf_integral(r) - dist.cdf_integral(cross)) - c * (r - cross);
        total += below + above;
    }
    Ok(total)
}

/// Monte-Carlo `d₁(m, m_N)`: exact transport from `sample_size` fresh draws to `m_N`,
/// repeated [`D1_RESAMPLES`] times. Returns `(mean, standard error)`.
pub fn estimate_d1(dist: &SourceDistribution, m_n: &EmpiricalMeasure, sample_size: usize, seed: u64) -> Result<(f64, f64)> {
    dist.validate()?;
    if sample_size < 10 * m_n.len() {
        return Err(Error::invalid(format!("sample size {sample_size} is below 10·|supp m_N| = {}", 10 * m_n.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(D1_RESAMPLES);
    for r in 0..D1_RESAMPLES {
        rng.set_stream(r as u64);
        let sample = points_to_measure(dist.draw(sample_size, &mut rng)?)?;
        values.push(wasserstein1(&sample, m_n, &MetricSpec::Euclidean)?);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Atoms of `m` shifted by `c`.
pub fn translate(m: &EmpiricalMeasure, c: f64) -> Result<EmpiricalMeasure> {
    let atoms = m.atoms().iter().map(|a| Atom::on_x(ParamPoint::new(a.x.0.iter().map(|v| v + c).collect()), a.w)).collect();
    EmpiricalMeasure::new(Space::X, atoms)
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT: SourceDistribution = SourceDistribution::Uniform { a: 0.0, b: 1.0 };

    #[test]
    fn single_sample_is_a_dirac() {
        let m = quantize_sample(&UNIT, 1, 3).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.atoms()[0].w, 1.0);
    }

    #[test]
    fn sample_mean_within_clt_band() {
        let m = quantize_sample(&UNIT, 10_000, 42).unwrap();
        let mean = m.integrate(|a| a.x.value());
        let sigma = (1.0f64 / (12.0 * 1e4)).sqrt();
        assert!((mean - 0.5).abs() <= 3.0 * sigma);
    }

    #[test]
    fn exponential_samples_non_negative() {
        let m = quantize_sample(&SourceDistribution::Exponential { rate: 1.0 }, 100, 0).unwrap();
        assert!(m.atoms().iter().all(|a| a.x.value() >= 0.0));
    }

    #[test]
    fn grid_on_unit_interval() {
        let m1 = quantize_grid(&UNIT, 1).unwrap();
        assert_eq!(m1.atoms()[0].x.value(), 0.5);
        assert!((exact_d1_1d(&UNIT, &m1).unwrap() - 0.25).abs() <= 1e-15);
        let m2 = quantize_grid(&UNIT, 2).unwrap();
        let xs: Vec<f64> = m2.atoms().iter().map(|a| a.x.value()).collect();
        assert_eq!(xs, vec![0.25, 0.75]);
        assert!((exact_d1_1d(&UNIT, &m2).unwrap() - 0.125).abs() <= 1e-15);
    }

    #[test]
    fn exact_d1_matches_quadrature() {
        let dist = SourceDistribution::Exponential { rate: 2.0 };
        let m = EmpiricalMeasure::new(
            Space::X,
            vec![Atom::on_x(ParamPoint::scalar(0.1), 0.3), Atom::on_x(ParamPoint::scalar(0.9), 0.7)],
        )
        .unwrap();
        let steps = 400_000;
        let h = 20.0 / steps as f64;
        let quad: f64 = (0..steps)
            .map(|i| {
                let x = (i as f64 + 0.5) * h;
                let g = if x < 0.1 { 0.0 } else if x < 0.9 { 0.3 } else { 1.0 };
                (dist.cdf(x) - g).abs() * h
            })
            .sum();
        assert!((exact_d1_1d(&dist, &m).unwrap() - quad).abs() <= 1e-6);
    }

    #[test]
    fn exponential_grid_is_truncated() {
        let dist = SourceDistribution::Exponential { rate: 1.0 };
        let m = quantize_grid(&dist, 4).unwrap();
        let top = m.atoms().iter().map(|a| a.x.value()).fold(0.0, f64::max);
        assert!(top < dist.quantile(1.0 - 1.0 / 16.0));
        assert_eq!(dist.truncation_mass(4), 1.0 / 16.0);
    }

    #[test]
    fn grid_beats_sampling() {
        for n in [2, 4, 8, 16, 32] {
            let grid = exact_d1_1d(&UNIT, &quantize_grid(&UNIT, n).unwrap()).unwrap();
            let sample = exact_d1_1d(&UNIT, &quantize_sample(&UNIT, n, n as u64).unwrap()).unwrap();
            assert!(grid < sample);
        }
    }

    #[test]
    fn estimator_recovers_grid_error() {
        let m2 = quantize_grid(&UNIT, 2).unwrap();
        let (est, se) = estimate_d1(&UNIT, &m2, 400, 7).unwrap();
        assert!((est - 0.125).abs() <= 4.0 * se + 0.02);
        let c = 2.0;
        let (shifted, se2) = estimate_d1(&UNIT, &translate(&m2, c).unwrap(), 400, 7).unwrap();
        assert!((shifted - est).abs() <= c + 1e-12);
        assert!((shifted - exact_d1_1d(&UNIT, &translate(&m2, c).unwrap()).unwrap()).abs() <= 4.0 * se2 + 0.02);
        assert!(estimate_d1(&UNIT, &m2, 5, 0).is_err());
    }

    #[test]
    fn estimator_on_finite_source_vanishes() {
        let dist = SourceDistribution::Sample { points: vec![0.0, 1.0] };
        let m = dist.to_measure().unwrap();
        let (small, _) = estimate_d1(&dist, &m, 40, 1).unwrap();
        let (large, _) = estimate_d1(&dist, &m, 1000, 1).unwrap();
        assert!(large < small.max(1e-3) + 1e-12);
        assert_eq!(exact_d1_1d(&dist, &m).unwrap(), 0.0);
    }

    #[test]
    fn parse_specs() {
        assert_eq!(SourceDistribution::parse("uniform:0,0.2").unwrap(), SourceDistribution::Uniform { a: 0.0, b: 0.2 });
        assert_eq!(SourceDistribution::parse("exponential:2").unwrap(), SourceDistribution::Exponential { rate: 2.0 });
        assert!(SourceDistribution::parse("uniform:1,0").is_err());
        assert!(SourceDistribution::parse("cauchy").is_err());
    }
}
