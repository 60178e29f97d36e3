//! Duration likelihood models.
//!
//! Key-holding durations, normalized as d' = d/(r v), follow a two-component
//! GIG mixture; damper-lifting durations follow a single GIG. Both are fitted
//! to a histogram (bin width 0.05 on (0, 3], overflow pooled into the last
//! bin) by grid search minimizing the squared error between model density at
//! bin centers and histogram density; the last bin compares pooled tail mass
//! on both sides. The search is fully deterministic: a
//! coarse scan over fixed grids, then one refinement pass around the
//! incumbent, ties resolved toward lexicographically smaller parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gig::{GigDensity, GigParams};
use crate::rational::ScoreTime;

pub const HIST_BINS: usize = 60;
pub const HIST_BIN_WIDTH: f64 = 0.05;
pub const HIST_MAX: f64 = 3.0;

/// Two-component GIG mixture over normalized key-holding durations.
/// Component one carries the larger weight by convention.
#[derive(Clone, Debug, PartialEq)]
pub struct GigMixture {
    pub w1: f64,
    pub gig1: GigParams,
    pub w2: f64,
    pub gig2: GigParams,
}

impl GigMixture {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.w1 >= 0.0) || !(self.w2 >= 0.0) {
            return Err(format!("mixture weights must be non-negative, got {} and {}", self.w1, self.w2));
        }
        if ((self.w1 + self.w2) - 1.0).abs() > 1e-9 {
            return Err(format!("mixture weights sum to {}, want 1", self.w1 + self.w2));
        }
        self.gig1.validate()?;
        self.gig2.validate()
    }

    /// Cached evaluator; computes both normalizers once.
    pub fn evaluator(&self) -> MixtureDensity {
        MixtureDensity {
            w1: self.w1,
            g1: GigDensity::new(self.gig1),
            w2: self.w2,
            g2: GigDensity::new(self.gig2),
        }
    }
}

/// Mixture density with precomputed normalizers.
#[derive(Clone, Debug)]
pub struct MixtureDensity {
    w1: f64,
    g1: GigDensity,
    w2: f64,
    g2: GigDensity,
}

impl MixtureDensity {
    pub fn pdf(&self, x: f64) -> f64 {
        self.w1 * self.g1.pdf(x) + self.w2 * self.g2.pdf(x)
    }

    /// Log density via log-sum-exp; -inf for x <= 0.
    pub fn log_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let l1 = if self.w1 > 0.0 { self.w1.ln() + self.g1.log_pdf(x) } else { f64::NEG_INFINITY };
        let l2 = if self.w2 > 0.0 { self.w2.ln() + self.g2.log_pdf(x) } else { f64::NEG_INFINITY };
        let m = l1.max(l2);
        if m == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        m + ((l1 - m).exp() + (l2 - m).exp()).ln()
    }
}

/// Fitted duration likelihoods: the key-holding mixture `g` and the
/// damper-lifting density `gbar`.
#[derive(Clone, Debug, PartialEq)]
pub struct DurationModel {
    pub g: GigMixture,
    pub gbar: GigParams,
}

impl DurationModel {
    /// Bundled defaults fitted on a large piano-performance corpus; also the
    /// contents of the shipped `durmodel.json`.
    pub fn bundled() -> DurationModel {
        DurationModel {
            g: GigMixture {
                w1: 0.814,
                gig1: GigParams::new(2.24, 0.24, 0.69),
                w2: 0.186,
                gig2: GigParams::new(13.8, 15.2, -1.22),
            },
            gbar: GigParams::new(0.94, 0.51, 0.80),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.g.validate().map_err(Error::Model)?;
        self.gbar.validate().map_err(Error::Model)
    }

    fn mirror(&self) -> ModelJson {
        ModelJson {
            g: MixtureJson {
                w1: self.g.w1,
                a1: self.g.gig1.a,
                b1: self.g.gig1.b,
                h1: self.g.gig1.h,
                w2: self.g.w2,
                a2: self.g.gig2.a,
                b2: self.g.gig2.b,
                h2: self.g.gig2.h,
            },
            gbar: SingleJson { a3: self.gbar.a, b3: self.gbar.b, h3: self.gbar.h },
        }
    }

    fn from_mirror(m: ModelJson) -> DurationModel {
        DurationModel {
            g: GigMixture {
                w1: m.g.w1,
                gig1: GigParams { a: m.g.a1, b: m.g.b1, h: m.g.h1 },
                w2: m.g.w2,
                gig2: GigParams { a: m.g.a2, b: m.g.b2, h: m.g.h2 },
            },
            gbar: GigParams { a: m.gbar.a3, b: m.gbar.b3, h: m.gbar.h3 },
        }
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.mirror()).expect("duration model serialize");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str) -> Result<DurationModel> {
        serde_json::from_str(text).map_err(|e| Error::Model(format!("duration model JSON: {e}")))
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_json_string()).map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<DurationModel> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_json_str(&text)
    }
}

impl Serialize for DurationModel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.mirror().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DurationModel {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let model = DurationModel::from_mirror(ModelJson::deserialize(deserializer)?);
        model.validate().map_err(serde::de::Error::custom)?;
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    g: MixtureJson,
    gbar: SingleJson,
}

#[derive(Serialize, Deserialize)]
struct MixtureJson {
    w1: f64,
    a1: f64,
    b1: f64,
    h1: f64,
    w2: f64,
    a2: f64,
    b2: f64,
    h2: f64,
}

#[derive(Serialize, Deserialize)]
struct SingleJson {
    a3: f64,
    b3: f64,
    h3: f64,
}

/// d / (r v): actual duration in units of the notated length at the local
/// tempo. Errors on non-positive inputs.
pub fn normalized_duration(d: f64, r: ScoreTime, v: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::InvalidInput(format!("duration must be positive and finite, got {d}")));
    }
    if !r.is_positive() {
        return Err(Error::InvalidInput(format!("note value must be positive, got {r}")));
    }
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidInput(format!("tempo must be positive and finite, got {v}")));
    }
    Ok(d / (r.to_f64() * v))
}

// ---------------------------------------------------------------------------
// Histogram fitting.
// ---------------------------------------------------------------------------

struct Histogram {
    /// Bin centers; bin i covers (0.05 i, 0.05 (i + 1)].
    centers: [f64; HIST_BINS],
    /// Empirical density per bin; the last bin also holds all mass above 3.
    density: [f64; HIST_BINS],
}

fn build_histogram(samples: &[f64]) -> Result<Histogram> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("cannot fit a duration model to zero samples".into()));
    }
    let mut counts = [0u64; HIST_BINS];
    for &x in samples {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::InvalidInput(format!(
                "normalized durations must be positive and finite, got {x}"
            )));
        }
        let bin = ((x / HIST_BIN_WIDTH).ceil() as usize).saturating_sub(1).min(HIST_BINS - 1);
        counts[bin] += 1;
    }
    let n = samples.len() as f64;
    let mut centers = [0.0; HIST_BINS];
    let mut density = [0.0; HIST_BINS];
    for i in 0..HIST_BINS {
        centers[i] = (i as f64 + 0.5) * HIST_BIN_WIDTH;
        density[i] = counts[i] as f64 / (n * HIST_BIN_WIDTH);
    }
    Ok(Histogram { centers, density })
}

/// Model density at every bin center, normalizer computed once. The last
/// bin pools the model's entire tail mass above its left edge, mirroring
/// how the histogram pools overflow there; without this the overflow spike
/// would drag fits toward fat tails.
fn density_row(p: &GigParams, centers: &[f64; HIST_BINS]) -> [f64; HIST_BINS] {
    let ev = GigDensity::new(*p);
    let mut row = [0.0; HIST_BINS];
    for (r, &x) in row.iter_mut().zip(centers) {
        *r = ev.pdf(x);
    }
    row[HIST_BINS - 1] = pooled_tail_density(p, &ev);
    row
}

/// Tail mass above the last bin's left edge, expressed as a density over
/// one bin width. Simpson quadrature in log space, truncated where the
/// exponential factor alone is below e^-745.
fn pooled_tail_density(p: &GigParams, ev: &GigDensity) -> f64 {
    let left = HIST_MAX - HIST_BIN_WIDTH;
    let lo = left.ln();
    let hi = (HIST_MAX + 760.0 / p.a).ln();
    let n = 128;
    let step = (hi - lo) / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let x = (lo + i as f64 * step).exp();
        let wgt = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += wgt * ev.pdf(x) * x;
    }
    acc * step / 3.0 / HIST_BIN_WIDTH
}

fn squared_error(row: &[f64; HIST_BINS], hist: &Histogram) -> f64 {
    row.iter().zip(&hist.density).map(|(m, h)| (m - h) * (m - h)).sum()
}

/// Coarse axes: a and b log-spaced over [0.05, 50] (40 points), h linear
/// over [-3, 3] (25 points).
fn coarse_axes() -> (Vec<f64>, Vec<f64>) {
    let lo: f64 = 0.05;
    let hi: f64 = 50.0;
    let ab: Vec<f64> =
        (0..40).map(|i| lo * (hi / lo).powf(i as f64 / 39.0)).collect();
    let h: Vec<f64> = (0..25).map(|i| -3.0 + 6.0 * i as f64 / 24.0).collect();
    (ab, h)
}

/// Refined axis around `value` on a log scale: 9 points spanning the coarse
/// neighbors of the incumbent.
fn refine_log_axis(axis: &[f64], value: f64) -> Vec<f64> {
    let pos = axis.iter().position(|&a| a == value).unwrap_or(0);
    let lo = axis[pos.saturating_sub(1)];
    let hi = axis[(pos + 1).min(axis.len() - 1)];
    (0..9).map(|i| lo * (hi / lo).powf(i as f64 / 8.0)).collect()
}

fn refine_linear_axis(axis: &[f64], value: f64) -> Vec<f64> {
    let pos = axis.iter().position(|&a| a == value).unwrap_or(0);
    let lo = axis[pos.saturating_sub(1)];
    let hi = axis[(pos + 1).min(axis.len() - 1)];
    (0..9).map(|i| lo + (hi - lo) * i as f64 / 8.0).collect()
}

/// Best single GIG over the given axes; ties toward smaller (a, b, h).
fn scan_single(
    hist: &Histogram,
    a_axis: &[f64],
    b_axis: &[f64],
    h_axis: &[f64],
) -> (f64, GigParams) {
    let mut best_err = f64::INFINITY;
    let mut best = GigParams { a: a_axis[0], b: b_axis[0], h: h_axis[0] };
    for &a in a_axis {
        for &b in b_axis {
            for &h in h_axis {
                let p = GigParams { a, b, h };
                let err = squared_error(&density_row(&p, &hist.centers), hist);
                if err < best_err {
                    best_err = err;
                    best = p;
                }
            }
        }
    }
    (best_err, best)
}

fn fit_single(hist: &Histogram) -> GigParams {
    let (ab, h) = coarse_axes();
    let (_, coarse) = scan_single(hist, &ab, &ab, &h);
    let a_axis = refine_log_axis(&ab, coarse.a);
    let b_axis = refine_log_axis(&ab, coarse.b);
    let h_axis = refine_linear_axis(&h, coarse.h);
    let (_, fine) = scan_single(hist, &a_axis, &b_axis, &h_axis);
    fine
}

/// Joint sweep over one component and the weight, the other component held
/// fixed. `w` weights the swept component. Returns (error, params, w);
/// iteration order makes ties lexicographic in (a, b, h, w).
fn sweep_component(
    hist: &Histogram,
    a_axis: &[f64],
    b_axis: &[f64],
    h_axis: &[f64],
    w_axis: &[f64],
    fixed_row: &[f64; HIST_BINS],
) -> (f64, GigParams, f64) {
    let mut best_err = f64::INFINITY;
    let mut best_p = GigParams { a: a_axis[0], b: b_axis[0], h: h_axis[0] };
    let mut best_w = w_axis[0];
    for &a in a_axis {
        for &b in b_axis {
            for &h in h_axis {
                let p = GigParams { a, b, h };
                let row = density_row(&p, &hist.centers);
                // err(w) = suu w^2 + 2 suv w + svv with u = row - fixed,
                // v = fixed - hist.
                let mut suu = 0.0;
                let mut suv = 0.0;
                let mut svv = 0.0;
                for i in 0..HIST_BINS {
                    let u = row[i] - fixed_row[i];
                    let v = fixed_row[i] - hist.density[i];
                    suu += u * u;
                    suv += u * v;
                    svv += v * v;
                }
                for &w in w_axis {
                    let err = suu * w * w + 2.0 * suv * w + svv;
                    if err < best_err {
                        best_err = err;
                        best_p = p;
                        best_w = w;
                    }
                }
            }
        }
    }
    (best_err, best_p, best_w)
}

/// Deterministic coordinate descent for the two-component mixture over the
/// given axes, starting from `(comp1, comp2, w1)`.
#[allow(clippy::too_many_arguments)]
fn descend_mixture(
    hist: &Histogram,
    a1_axis: &[f64],
    b1_axis: &[f64],
    h1_axis: &[f64],
    a2_axis: &[f64],
    b2_axis: &[f64],
    h2_axis: &[f64],
    w_axis: &[f64],
    mut comp1: GigParams,
    mut comp2: GigParams,
    mut w1: f64,
) -> (GigParams, GigParams, f64) {
    let mut best_err = {
        let r1 = density_row(&comp1, &hist.centers);
        let r2 = density_row(&comp2, &hist.centers);
        let mixed: f64 = (0..HIST_BINS)
            .map(|i| {
                let m = w1 * r1[i] + (1.0 - w1) * r2[i];
                (m - hist.density[i]) * (m - hist.density[i])
            })
            .sum();
        mixed
    };
    for _round in 0..30 {
        let before = best_err;
        // Sweep component one (weight w) against fixed component two.
        let fixed2 = density_row(&comp2, &hist.centers);
        let (e1, p1, w_new) = sweep_component(hist, a1_axis, b1_axis, h1_axis, w_axis, &fixed2);
        if e1 < best_err {
            best_err = e1;
            comp1 = p1;
            w1 = w_new;
        }
        // Sweep component two (weight 1 - w1): reuse the same machinery by
        // sweeping it as the weighted component against fixed component one.
        let fixed1 = density_row(&comp1, &hist.centers);
        let (e2, p2, w2_new) = sweep_component(hist, a2_axis, b2_axis, h2_axis, w_axis, &fixed1);
        if e2 < best_err {
            best_err = e2;
            comp2 = p2;
            w1 = 1.0 - w2_new;
        }
        if best_err >= before {
            break;
        }
    }
    (comp1, comp2, w1)
}

fn fit_mixture(hist: &Histogram) -> GigMixture {
    let (ab, h) = coarse_axes();
    let w_axis: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();

    // Initialize with the best single fit as component two and no mass on
    // component one; the first sweep then grows component one jointly with
    // its weight.
    let (_, single) = scan_single(hist, &ab, &ab, &h);
    let (c1, c2, w1) =
        descend_mixture(hist, &ab, &ab, &h, &ab, &ab, &h, &w_axis, single, single, 0.0);

    // Refinement pass on local axes around the incumbent.
    let a1_axis = refine_log_axis(&ab, c1.a);
    let b1_axis = refine_log_axis(&ab, c1.b);
    let h1_axis = refine_linear_axis(&h, c1.h);
    let a2_axis = refine_log_axis(&ab, c2.a);
    let b2_axis = refine_log_axis(&ab, c2.b);
    let h2_axis = refine_linear_axis(&h, c2.h);
    let w_fine: Vec<f64> =
        (-4..=4i32).map(|k| (w1 + 0.005 * k as f64).clamp(0.0, 1.0)).collect();
    let (c1, c2, w1) = descend_mixture(
        hist, &a1_axis, &b1_axis, &h1_axis, &a2_axis, &b2_axis, &h2_axis, &w_fine, c1, c2, w1,
    );

    // Canonical order: heavier component first; exact ties by parameters.
    let w2 = 1.0 - w1;
    if w1 > w2 || (w1 == w2 && (c1.a, c1.b, c1.h) <= (c2.a, c2.b, c2.h)) {
        GigMixture { w1, gig1: c1, w2, gig2: c2 }
    } else {
        GigMixture { w1: w2, gig1: c2, w2: w1, gig2: c1 }
    }
}

/// Fits the key-holding mixture to `dprime` and the damper-lifting density
/// to `dbar_prime`. Deterministic; intended for 10^3 samples or more each.
pub fn fit_duration_models(dprime: &[f64], dbar_prime: &[f64]) -> Result<DurationModel> {
    let hist_g = build_histogram(dprime)?;
    let hist_gbar = build_histogram(dbar_prime)?;
    let model = DurationModel { g: fit_mixture(&hist_g), gbar: fit_single(&hist_gbar) };
    model.validate()?;
    Ok(model)
}
