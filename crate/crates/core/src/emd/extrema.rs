//! Local extremum detection and boundary extension of the extremum trains.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub position: f64,
    pub value: f64,
}

impl Extremum {
    fn at(index: usize, value: f64) -> Self {
        Self {
            position: index as f64,
            value,
        }
    }
}

/// Maxima and minima of a sequence, optionally with synthetic boundary points.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExtremaSet {
    pub maxima: Vec<Extremum>,
    pub minima: Vec<Extremum>,
    pub includes_synthetic_endpoints: bool,
}

impl ExtremaSet {
    pub fn count(&self) -> usize {
        self.maxima.len() + self.minima.len()
    }
}

/// How envelopes are anchored beyond the first and last samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    /// Continue the line through the two outermost same-kind extrema.
    #[default]
    LinearExtrapolation,
    /// Reflect the outermost extrema about each endpoint.
    MirrorReflection,
    /// Use the end samples as both maximum and minimum anchors.
    ClampEndpointsAsExtrema,
}

impl std::str::FromStr for BoundaryPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" | "linear_extrapolation" => Ok(Self::LinearExtrapolation),
            "mirror" | "mirror_reflection" => Ok(Self::MirrorReflection),
            "clamp" | "clamp_endpoints_as_extrema" => Ok(Self::ClampEndpointsAsExtrema),
            other => Err(Error::invalid(
                "boundary_policy",
                format!("unknown policy {other:?} (linear, mirror, clamp)"),
            )),
        }
    }
}

/// Interior local extrema by three-point comparison.
///
/// A plateau of equal values bounded by lower (higher) neighbours on both sides
/// counts as one maximum (minimum) at its centre index, rounded down.
pub fn find_extrema(x: &[f64]) -> Result<ExtremaSet> {
    if x.len() < 3 {
        return Err(Error::TooShort {
            required: 3,
            actual: x.len(),
        });
    }
    let mut set = ExtremaSet::default();

    // Runs of equal values as (start, end) inclusive.
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=x.len() {
        if i == x.len() || x[i] != x[start] {
            runs.push((start, i - 1));
            start = i;
        }
    }

    for k in 1..runs.len().saturating_sub(1) {
        let (s, e) = runs[k];
        let v = x[s];
        let prev = x[runs[k - 1].1];
        let next = x[runs[k + 1].0];
        let centre = (s + e) / 2;
        if v > prev && v > next {
            set.maxima.push(Extremum::at(centre, v));
        } else if v < prev && v < next {
            set.minima.push(Extremum::at(centre, v));
        }
    }
    Ok(set)
}

/// True when the sequence never changes direction (equal neighbours allowed).
pub fn is_monotone(x: &[f64]) -> bool {
    let non_decreasing = x.windows(2).all(|w| w[1] >= w[0]);
    let non_increasing = x.windows(2).all(|w| w[1] <= w[0]);
    non_decreasing || non_increasing
}

/// Appends synthetic extrema beyond both ends so envelopes cover `[0, N-1]`.
///
/// Linear extrapolation needs two extrema of each kind and mirror reflection
/// one; otherwise both fall back to clamping the end samples.
pub fn extend_extrema(
    extrema: &ExtremaSet,
    x: &[f64],
    policy: BoundaryPolicy,
) -> Result<ExtremaSet> {
    let n = x.len();
    if n < 2 {
        return Err(Error::TooShort {
            required: 2,
            actual: n,
        });
    }
    let (maxima, minima) = (&extrema.maxima, &extrema.minima);
    let policy = match policy {
        BoundaryPolicy::LinearExtrapolation if maxima.len() < 2 || minima.len() < 2 => {
            BoundaryPolicy::ClampEndpointsAsExtrema
        }
        BoundaryPolicy::MirrorReflection if maxima.is_empty() || minima.is_empty() => {
            BoundaryPolicy::ClampEndpointsAsExtrema
        }
        p => p,
    };
    let last = (n - 1) as f64;

    let extend = |points: &[Extremum], clamp_first: f64, clamp_last: f64, upper: bool| -> Vec<Extremum> {
        match policy {
            BoundaryPolicy::LinearExtrapolation => {
                // Synthetic extrema never cut inside the end samples; without this
                // a steep line drags the envelope through the data and repeated
                // sifting amplifies the error.
                let enclose = |v: f64, end: f64| if upper { v.max(end) } else { v.min(end) };
                let mut out = linear_extension(points, last);
                for p in out.iter_mut() {
                    if p.position <= 0.0 {
                        p.value = enclose(p.value, clamp_first);
                    } else if p.position >= last {
                        p.value = enclose(p.value, clamp_last);
                    }
                }
                out
            }
            BoundaryPolicy::MirrorReflection => {
                let first = points[0];
                let end = points[points.len() - 1];
                let mut out = Vec::with_capacity(points.len() + 2);
                out.push(Extremum {
                    position: -first.position,
                    value: first.value,
                });
                out.extend_from_slice(points);
                out.push(Extremum {
                    position: 2.0 * last - end.position,
                    value: end.value,
                });
                out
            }
            BoundaryPolicy::ClampEndpointsAsExtrema => {
                let mut out = Vec::with_capacity(points.len() + 2);
                out.push(Extremum::at(0, clamp_first));
                out.extend(
                    points
                        .iter()
                        .filter(|p| p.position > 0.0 && p.position < last),
                );
                out.push(Extremum::at(n - 1, clamp_last));
                out
            }
        }
    };

    Ok(ExtremaSet {
        maxima: extend(maxima, x[0], x[n - 1], true),
        minima: extend(minima, x[0], x[n - 1], false),
        includes_synthetic_endpoints: true,
    })
}

/// Continues the line through the outermost pair at each end, stepping by the
/// pair's spacing until the sample range is covered.
fn linear_extension(points: &[Extremum], last: f64) -> Vec<Extremum> {
    let k = points.len();
    let mut left = Vec::new();
    {
        let (a, b) = (points[0], points[1]);
        let gap = b.position - a.position;
        let slope = (b.value - a.value) / gap;
        let mut step = 1.0;
        loop {
            let pos = a.position - step * gap;
            left.push(Extremum {
                position: pos,
                value: a.value - slope * step * gap,
            });
            if pos <= 0.0 {
                break;
            }
            step += 1.0;
        }
        left.reverse();
    }
    let mut out = left;
    out.extend_from_slice(points);
    {
        let (a, b) = (points[k - 2], points[k - 1]);
        let gap = b.position - a.position;
        let slope = (b.value - a.value) / gap;
        let mut step = 1.0;
        loop {
            let pos = b.position + step * gap;
            out.push(Extremum {
                position: pos,
                value: b.value + slope * step * gap,
            });
            if pos >= last {
                break;
            }
            step += 1.0;
        }
    }
    out
}
