// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sample paths of piecewise-stationary GCINAR processes built from thinning
//! operators, plus the catalogue of simulation models used in the studies.
//!
//! A segment follows `X_t = Σ_k β_k ⋄ X_{t-k} + Z_t`, where `β ⋄ X` sums `X`
//! i.i.d. counting variables with mean `β` and `Z_t` has mean `β0`.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Geometric, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{LrsmError, Result};
use crate::rng::{domain, substream};
use crate::series::{ChangePointSet, CountSeries, GcinarParams, DEFAULT_DELTA};

/// Default number of discarded warm-up steps before the first segment.
pub const DEFAULT_BURN_IN: usize = 500;

/// Counting-variable law of a thinning operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThinningFamily {
    /// Bernoulli counts, `β ∘ X ~ Bin(X, β)`.
    Binomial,
    /// Geometric counts with mean `β`.
    NegativeBinomial,
    /// Poisson counts with mean `β`, `β • X ~ Poi(βX)`.
    Poisson,
}

impl ThinningFamily {
    fn check(self, beta: f64) -> Result<()> {
        let ok = match self {
            ThinningFamily::Binomial => (0.0..=1.0).contains(&beta),
            _ => beta >= 0.0 && beta.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(LrsmError::InvalidParams(format!(
                "{self:?} thinning requires a {} weight, got {beta}",
                if self == ThinningFamily::Binomial {
                    "[0, 1]"
                } else {
                    "non-negative"
                }
            )))
        }
    }
}

/// Innovation law, parameterized by its mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InnovationFamily {
    Poisson {
        mean: f64,
    },
    /// Failures before the first success with success probability `1/(1+mean)`.
    Geometric {
        mean: f64,
    },
}

impl InnovationFamily {
    pub fn mean(&self) -> f64 {
        match *self {
            InnovationFamily::Poisson { mean } | InnovationFamily::Geometric { mean } => mean,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match *self {
            InnovationFamily::Poisson { mean } => poisson(mean, rng),
            InnovationFamily::Geometric { mean } => Geometric::new(1.0 / (1.0 + mean))
                .expect("geometric success probability in (0, 1]")
                .sample(rng),
        }
    }
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean)
        .expect("finite positive mean")
        .sample(rng) as u64
}

/// Draws `β ⋄ x`.
pub fn thin<R: Rng + ?Sized>(
    family: ThinningFamily,
    beta: f64,
    x: u64,
    rng: &mut R,
) -> Result<u64> {
    family.check(beta)?;
    Ok(thin_unchecked(family, beta, x, rng))
}

fn thin_unchecked<R: Rng + ?Sized>(family: ThinningFamily, beta: f64, x: u64, rng: &mut R) -> u64 {
    if x == 0 || beta == 0.0 {
        return 0;
    }
    match family {
        ThinningFamily::Binomial => Binomial::new(x, beta)
            .expect("binomial weight in [0, 1]")
            .sample(rng),
        ThinningFamily::Poisson => poisson(beta * x as f64, rng),
        // A sum of x geometric counts with mean β is negative binomial,
        // drawn here as a gamma-mixed Poisson.
        ThinningFamily::NegativeBinomial => {
            let rate = Gamma::new(x as f64, beta)
                .expect("positive gamma shape and scale")
                .sample(rng);
            poisson(rate, rng)
        }
    }
}

/// Generative description of one stationary segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub params: GcinarParams,
    pub thinning: ThinningFamily,
    pub innovation: InnovationFamily,
}

impl SegmentSpec {
    /// The innovation mean doubles as `β0`.
    pub fn new(
        thinning: ThinningFamily,
        betas: Vec<f64>,
        innovation: InnovationFamily,
    ) -> Result<Self> {
        for &b in &betas {
            thinning.check(b)?;
        }
        let sum: f64 = betas.iter().sum();
        if sum >= 1.0 {
            return Err(LrsmError::InvalidParams(format!(
                "segment is not stationary: sum of weights {sum} >= 1"
            )));
        }
        if !(innovation.mean() > 0.0) {
            return Err(LrsmError::InvalidParams(format!(
                "innovation mean must be positive, got {}",
                innovation.mean()
            )));
        }
        let params = GcinarParams::new(innovation.mean(), betas, DEFAULT_DELTA)?;
        Ok(Self {
            params,
            thinning,
            innovation,
        })
    }

    /// Poisson-thinning, Poisson-innovation segment with the given parameters.
    pub fn poisson_inar(params: &GcinarParams) -> Result<Self> {
        Self::new(
            ThinningFamily::Poisson,
            params.betas().to_vec(),
            InnovationFamily::Poisson {
                mean: params.beta0(),
            },
        )
    }

    pub fn order(&self) -> usize {
        self.params.order()
    }

    /// One step of the recursion; `history` ends with the most recent value.
    pub(crate) fn step<R: Rng + ?Sized>(&self, history: &[u64], rng: &mut R) -> u64 {
        let len = history.len();
        let mut x = self.innovation.sample(rng);
        for (k, &beta) in self.params.betas().iter().enumerate() {
            if let Some(&lag) = len.checked_sub(k + 1).and_then(|i| history.get(i)) {
                x += thin_unchecked(self.thinning, beta, lag, rng);
            }
        }
        x
    }

    /// Appends `count` new observations to `buf`, using its tail as lags.
    pub(crate) fn extend<R: Rng + ?Sized>(&self, buf: &mut Vec<u64>, count: usize, rng: &mut R) {
        buf.reserve(count);
        for _ in 0..count {
            let x = self.step(buf, rng);
            buf.push(x);
        }
    }
}

/// A multiple change-point model: `m + 1` segments over `n` observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McpSpec {
    pub segments: Vec<SegmentSpec>,
    pub taus: ChangePointSet,
    pub n: usize,
}

impl McpSpec {
    pub fn new(segments: Vec<SegmentSpec>, taus: Vec<usize>, n: usize) -> Result<Self> {
        if segments.len() != taus.len() + 1 {
            return Err(LrsmError::InvalidArgument(format!(
                "{} segments for {} change-points",
                segments.len(),
                taus.len()
            )));
        }
        let taus = ChangePointSet::new(taus, n)?;
        Ok(Self { segments, taus, n })
    }

    pub fn single(segment: SegmentSpec, n: usize) -> Result<Self> {
        Self::new(vec![segment], Vec::new(), n)
    }

    pub fn m(&self) -> usize {
        self.taus.len()
    }
}

/// Simulates an MCP-GCINAR path.
///
/// Segment `j` draws from the stream `(seed, j)`; the warm-up run uses the
/// first segment's model and stream and starts from all-zero lags. Each later
/// segment takes its first lags from the tail of the previous one.
pub fn simulate_mcp(spec: &McpSpec, burn_in: usize, seed: u64) -> CountSeries {
    let bounds = spec.taus.boundaries(spec.n);
    let max_p = spec
        .segments
        .iter()
        .map(SegmentSpec::order)
        .max()
        .unwrap_or(0);
    let offset = max_p + burn_in;
    let mut buf = vec![0u64; max_p];
    for (j, seg) in spec.segments.iter().enumerate() {
        let mut rng = substream(seed, &[domain::SIMULATE, j as u64]);
        if j == 0 {
            seg.extend(&mut buf, burn_in, &mut rng);
        }
        seg.extend(&mut buf, bounds[j + 1] - bounds[j], &mut rng);
    }
    CountSeries::new(buf.split_off(offset)).expect("n >= 1")
}

/// Simulates one stationary segment of length `n`.
pub fn simulate_gcinar(
    segment: &SegmentSpec,
    n: usize,
    burn_in: usize,
    seed: u64,
) -> Result<CountSeries> {
    let spec = McpSpec::single(segment.clone(), n)?;
    Ok(simulate_mcp(&spec, burn_in, seed))
}

/// Segment table `(betas, innovation mean)` shared by the B and C families.
const MODEL_B_SEGMENTS: [(&[f64], f64); 10] = [
    (&[0.5], 0.5),
    (&[0.249, 0.254, 0.297], 1.0),
    (&[0.4], 0.5),
    (&[0.014, 0.041, 0.29, 0.454], 2.0),
    (&[0.332, 0.268], 0.5),
    (&[0.2], 4.0),
    (&[0.109, 0.306, 0.305], 3.0),
    (&[0.3], 0.5),
    (&[0.202, 0.127, 0.179, 0.392], 1.0),
    (&[0.3], 2.0),
];

/// Change-point positions in tenths of `n`, for `m = 1..=9`.
const MODEL_B_TENTHS: [&[usize]; 9] = [
    &[5],
    &[3, 6],
    &[2, 5, 8],
    &[2, 4, 6, 8],
    &[1, 3, 6, 7, 9],
    &[1, 2, 3, 5, 8, 9],
    &[1, 2, 3, 4, 5, 8, 9],
    &[1, 2, 3, 4, 5, 7, 8, 9],
    &[1, 2, 3, 4, 5, 6, 7, 8, 9],
];

/// Names accepted by [`builtin_model`].
pub fn builtin_model_names() -> Vec<String> {
    std::iter::once("A1".to_string())
        .chain((1..=9).map(|i| format!("B{i}")))
        .chain((1..=9).map(|i| format!("C{i}")))
        .collect()
}

/// One of the catalogued simulation models at sample size `n`.
///
/// * `A1`: three binomial-thinning segments with Poisson innovations,
///   changes at `[0.3n]` and `[0.6n]`. Its middle segment uses the weights
///   `(0.126, 0.254, 0.297)`; the B family's second segment uses
///   `(0.249, 0.254, 0.297)`.
/// * `B1..B9`: the first `m + 1` segments of `MODEL_B_SEGMENTS` with binomial
///   thinning and Poisson innovations.
/// * `C1..C9`: the same weights and innovation means with negative binomial
///   thinning and geometric innovations.
pub fn builtin_model(name: &str, n: usize) -> Result<McpSpec> {
    let upper = name.trim().to_ascii_uppercase();
    let tau_at = |tenths: usize| tenths * n / 10;
    if upper == "A1" {
        let segs = [
            (vec![0.5], 0.5),
            (vec![0.126, 0.254, 0.297], 1.0),
            (vec![0.4], 2.0),
        ];
        let segments = segs
            .into_iter()
            .map(|(b, mean)| {
                SegmentSpec::new(
                    ThinningFamily::Binomial,
                    b,
                    InnovationFamily::Poisson { mean },
                )
            })
            .collect::<Result<Vec<_>>>()?;
        return McpSpec::new(segments, vec![tau_at(3), tau_at(6)], n);
    }
    let (family, rest) = upper.split_at(upper.len().min(1));
    let m: usize = rest
        .parse()
        .ok()
        .filter(|m| (1..=9).contains(m))
        .ok_or_else(|| LrsmError::UnknownModel(name.to_string()))?;
    let (thinning, geometric) = match family {
        "B" => (ThinningFamily::Binomial, false),
        "C" => (ThinningFamily::NegativeBinomial, true),
        _ => return Err(LrsmError::UnknownModel(name.to_string())),
    };
    let segments = MODEL_B_SEGMENTS[..=m]
        .iter()
        .map(|&(betas, mean)| {
            let innovation = if geometric {
                InnovationFamily::Geometric { mean }
            } else {
                InnovationFamily::Poisson { mean }
            };
            SegmentSpec::new(thinning, betas.to_vec(), innovation)
        })
        .collect::<Result<Vec<_>>>()?;
    let taus = MODEL_B_TENTHS[m - 1].iter().map(|&t| tau_at(t)).collect();
    McpSpec::new(segments, taus, n)
}
