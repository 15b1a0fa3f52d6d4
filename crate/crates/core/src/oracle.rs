//! Slow, independent reference computations used to check the solvers.
//!
//! Nothing here touches the E-step or M-step code: expectations come from
//! adaptive quadrature of the density and maximum-likelihood estimates from
//! brute-force grid refinement of the observed log-likelihood.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::data::{Dataset, IntervalObservation};
use crate::dist::{truncated_quantile, ModelKind, ModelParams};
use crate::error::FitError;

/// Node budget for a single integral.
pub const MAX_NODES: usize = 1_000_000;

/// Function of `z` whose conditional expectation is wanted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrand {
    Mean,
    SecondMoment,
    LogZ,
    /// `z^beta`
    ZPower(f64),
    /// `|z - mu|`
    AbsDev(f64),
}

impl Integrand {
    pub fn eval(self, z: f64) -> f64 {
        match self {
            Integrand::Mean => z,
            Integrand::SecondMoment => z * z,
            Integrand::LogZ => z.ln(),
            Integrand::ZPower(b) => z.powf(b),
            Integrand::AbsDev(mu) => (z - mu).abs(),
        }
    }

    /// Point where the integrand has a kink, if any.
    fn kink(self) -> Option<f64> {
        match self {
            Integrand::AbsDev(mu) => Some(mu),
            _ => None,
        }
    }
}

// 15-point Kronrod rule with its embedded 7-point Gauss rule, on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One application of the 15-point rule: `(estimate, error estimate)`.
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = kronrod.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let (f1, f2) = (f(center - dx), f(center + dx));
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = kronrod * half;
    let asc = asc * half.abs();
    let abs_sum = abs_sum * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && err != 0.0 {
        err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
    }
    if abs_sum > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * abs_sum);
    }
    (result, err)
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive Gauss-Kronrod integration of `f` over the finite `[a, b]`.
///
/// Stops once the summed error estimate is below `max(abs_tol, rel_tol |I|)`.
/// `rel_tol` is raised to `100 eps` if set tighter.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<(f64, f64), FitError> {
    let rel_tol = rel_tol.max(100.0 * f64::EPSILON);
    let mut nodes = 15;
    let (value, err) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value, err });
    let (mut total, mut total_err) = (value, err);
    // Pieces too narrow to split further keep their contribution here.
    let (mut frozen, mut frozen_err) = (0.0, 0.0);
    loop {
        if !total.is_finite() || !total_err.is_finite() {
            return Err(FitError::Quadrature {
                nodes,
                estimate: total_err,
            });
        }
        if total_err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok((total, total_err));
        }
        let Some(worst) = heap.pop() else {
            return Ok((total, total_err));
        };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            frozen += worst.value;
            frozen_err += worst.err;
            total = frozen + heap.iter().map(|p| p.value).sum::<f64>();
            total_err = frozen_err + heap.iter().map(|p| p.err).sum::<f64>();
            if heap.is_empty() {
                return Ok((total, total_err));
            }
            continue;
        }
        if nodes + 30 > MAX_NODES {
            return Err(FitError::Quadrature {
                nodes,
                estimate: total_err,
            });
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        nodes += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Piece { a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, err: e2 });
        // Re-sum now and then so the running totals do not drift.
        if nodes % 3000 == 15 {
            total = frozen + heap.iter().map(|p| p.value).sum::<f64>();
            total_err = frozen_err + heap.iter().map(|p| p.err).sum::<f64>();
        }
    }
}

/// Change of variable from a finite `t` range onto `[lower, upper]`.
#[derive(Debug, Clone, Copy)]
enum Mapping {
    Finite(f64, f64),
    /// `z = a + s t / (1 - t)`, `t` in `[0, 1)`.
    Upper(f64, f64),
    /// `z = b - s t / (1 - t)`, `t` in `[0, 1)`.
    Lower(f64, f64),
    /// `z = c + s t / (1 - t^2)`, `t` in `(-1, 1)`.
    Both(f64, f64),
}

impl Mapping {
    fn new(lower: f64, upper: f64, center: f64, scale: f64) -> Self {
        match (lower.is_finite(), upper.is_finite()) {
            (true, true) => Mapping::Finite(lower, upper),
            (true, false) => Mapping::Upper(lower, scale),
            (false, true) => Mapping::Lower(upper, scale),
            (false, false) => Mapping::Both(center, scale),
        }
    }

    fn range(self) -> (f64, f64) {
        match self {
            Mapping::Finite(a, b) => (a, b),
            Mapping::Upper(..) | Mapping::Lower(..) => (0.0, 1.0),
            Mapping::Both(..) => (-1.0, 1.0),
        }
    }

    /// `(z, dz/dt)`.
    fn map(self, t: f64) -> (f64, f64) {
        match self {
            Mapping::Finite(..) => (t, 1.0),
            Mapping::Upper(a, s) => {
                let r = 1.0 - t;
                (a + s * t / r, s / (r * r))
            }
            Mapping::Lower(b, s) => {
                let r = 1.0 - t;
                (b - s * t / r, s / (r * r))
            }
            Mapping::Both(c, s) => {
                let r = 1.0 - t * t;
                (c + s * t / r, s * (1.0 + t * t) / (r * r))
            }
        }
    }

    /// `t` for a point `z` inside the range.
    fn inverse(self, z: f64) -> f64 {
        match self {
            Mapping::Finite(..) => z,
            Mapping::Upper(a, s) => {
                let u = (z - a) / s;
                u / (1.0 + u)
            }
            Mapping::Lower(b, s) => {
                let u = (b - z) / s;
                u / (1.0 + u)
            }
            Mapping::Both(c, s) => {
                let u = (z - c) / s;
                if u == 0.0 {
                    0.0
                } else {
                    (-1.0 + (1.0 + 4.0 * u * u).sqrt()) / (2.0 * u)
                }
            }
        }
    }
}

/// `E[g(Z) | lower <= Z <= upper]` by quadrature of the density.
pub fn quadrature_estep(
    model: &ModelParams,
    obs: &IntervalObservation,
    integrand: Integrand,
) -> Result<f64, FitError> {
    if obs.is_exact() {
        return Err(FitError::DegenerateInterval);
    }
    let mut lower = obs.lower();
    let upper = obs.upper();
    if model.kind().nonnegative_support() {
        lower = lower.max(0.0);
        if upper <= lower {
            return Err(FitError::ZeroMass { index: 0 });
        }
    }
    let (center, scale) = model.model().typical_scale();
    let mapping = Mapping::new(lower, upper, center, scale);
    let (t0, t1) = mapping.range();

    // Shift log densities by their largest sampled value so far tails do not underflow.
    let shift = (0..=64)
        .map(|i| {
            let t = t0 + (t1 - t0) * (i as f64 + 0.5) / 65.0;
            model.ln_pdf(mapping.map(t).0)
        })
        .chain([lower, upper].into_iter().filter(|x| x.is_finite()).map(|x| model.ln_pdf(x)))
        .fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return Err(FitError::ZeroMass { index: 0 });
    }
    let weight = |t: f64| {
        let (z, jac) = mapping.map(t);
        let lp = model.ln_pdf(z);
        if lp == f64::NEG_INFINITY || !z.is_finite() {
            (z, 0.0)
        } else {
            (z, (lp - shift).exp() * jac)
        }
    };

    let mut kinks: Vec<f64> = integrand.kink().into_iter().collect();
    if let ModelParams::Laplace(l) = model {
        kinks.push(l.location);
    }
    kinks.sort_by(f64::total_cmp);
    kinks.dedup();
    let mut breaks = vec![t0];
    for k in kinks {
        if k > lower && k < upper {
            breaks.push(mapping.inverse(k));
        }
    }
    breaks.push(t1);

    let mut mass = 0.0;
    let mut moment = 0.0;
    for w in breaks.windows(2) {
        mass += integrate(|t| weight(t).1, w[0], w[1], 1e-300, 1e-13)?.0;
    }
    if !(mass > 0.0) {
        return Err(FitError::ZeroMass { index: 0 });
    }
    for w in breaks.windows(2) {
        let f = |t: f64| {
            let (z, wt) = weight(t);
            if wt == 0.0 {
                0.0
            } else {
                integrand.eval(z) * wt
            }
        };
        moment += integrate(f, w[0], w[1], 1e-12 * mass, 1e-13)?.0;
    }
    Ok(moment / mass)
}

/// `E[g(Z) | lower <= Z <= upper]` as `int_0^1 g(Q(xi)) dxi` over the truncated quantile function.
///
/// A second route to the same number that exercises the quantile code instead of the density.
pub fn quantile_route_estep(
    model: &ModelParams,
    obs: &IntervalObservation,
    integrand: Integrand,
) -> Result<f64, FitError> {
    if obs.is_exact() {
        return Err(FitError::DegenerateInterval);
    }
    let mut failure = None;
    // Nodes of tiny subintervals next to an end can round onto it.
    let top = 1.0 - f64::EPSILON / 2.0;
    let mut f = |xi: f64| match truncated_quantile(model, obs, xi.clamp(f64::MIN_POSITIVE, top)) {
        Ok(z) => integrand.eval(z),
        Err(e) => {
            failure.get_or_insert(e);
            0.0
        }
    };
    let mut kinks: Vec<f64> = integrand.kink().into_iter().collect();
    if let ModelParams::Laplace(l) = model {
        kinks.push(l.location);
    }
    kinks.sort_by(f64::total_cmp);
    kinks.dedup();
    let mut breaks = vec![0.0];
    for k in kinks {
        if k > obs.lower() && k < obs.upper() {
            let m = model.model();
            let (fa, fb) = (m.cdf(obs.lower()), m.cdf(obs.upper()));
            let level = (m.cdf(k) - fa) / (fb - fa);
            if level > 1e-9 && level < 1.0 - 1e-9 {
                breaks.push(level);
            }
        }
    }
    breaks.push(1.0);
    let mut value = 0.0;
    for w in breaks.windows(2) {
        value += integrate(&mut f, w[0], w[1], 1e-13, 1e-13)?.0;
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// Whether coordinate `j` of `kind` is a positive parameter searched on a log scale.
fn log_scaled(kind: ModelKind, j: usize) -> bool {
    !(matches!(kind, ModelKind::Normal | ModelKind::Laplace) && j == 0)
}

const GRID_POINTS: usize = 81;
const SHRINK: f64 = 10.0;
const MIN_ROUNDS: usize = 8;
const MAX_MOVES: usize = 200;

/// Maximizes the observed log-likelihood over `bounds` by iterated grid refinement.
///
/// Each round evaluates a full grid over the current box, then shrinks the box
/// tenfold around the best point. A best point on the edge of a refined box
/// moves the box instead of shrinking it; a best point on the edge of the
/// original box is an error. If the likelihood is flat along a coordinate the
/// midpoint of the flat stretch is returned.
pub fn mle_grid_refine(
    kind: ModelKind,
    dataset: &Dataset,
    bounds: &[(f64, f64)],
) -> Result<ModelParams, FitError> {
    let dim = kind.parameter_names().len();
    if bounds.len() != dim {
        return Err(FitError::InvalidConfig(format!(
            "{kind} needs {dim} search bounds, got {}",
            bounds.len()
        )));
    }
    let names = kind.parameter_names();
    let to_u = |j: usize, x: f64| if log_scaled(kind, j) { x.ln() } else { x };
    let from_u = |j: usize, u: f64| if log_scaled(kind, j) { u.exp() } else { u };
    let mut outer = Vec::with_capacity(dim);
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo < hi) || (log_scaled(kind, j) && !(lo > 0.0)) || !lo.is_finite() || !hi.is_finite() {
            return Err(FitError::InvalidConfig(format!(
                "bad search bounds [{lo}, {hi}] for '{}'",
                names[j]
            )));
        }
        outer.push((to_u(j, lo), to_u(j, hi)));
    }
    let distinct = distinct_with_counts(dataset);
    let loglik = |u: &[f64]| -> f64 {
        let x: Vec<f64> = u.iter().enumerate().map(|(j, &v)| from_u(j, v)).collect();
        match ModelParams::from_coordinates(kind, &x) {
            Ok(p) => weighted_loglik(&p, &distinct),
            Err(_) => f64::NEG_INFINITY,
        }
    };

    let mut boxes = outer.clone();
    let mut best = vec![0.0; dim];
    let mut rounds = 0;
    let mut moves = 0;
    let mut index = vec![0usize; dim];
    loop {
        let steps: Vec<f64> = boxes
            .iter()
            .map(|&(lo, hi)| (hi - lo) / (GRID_POINTS - 1) as f64)
            .collect();
        let mut best_val = f64::NEG_INFINITY;
        let mut best_idx = vec![0usize; dim];
        index.iter_mut().for_each(|i| *i = 0);
        let mut u = vec![0.0; dim];
        loop {
            for j in 0..dim {
                u[j] = boxes[j].0 + steps[j] * index[j] as f64;
            }
            let v = loglik(&u);
            if v > best_val {
                best_val = v;
                best_idx.copy_from_slice(&index);
            }
            // Odometer increment over the grid.
            let mut j = 0;
            while j < dim {
                index[j] += 1;
                if index[j] < GRID_POINTS {
                    break;
                }
                index[j] = 0;
                j += 1;
            }
            if j == dim {
                break;
            }
        }
        if best_val == f64::NEG_INFINITY {
            return Err(FitError::InvalidConfig(
                "log-likelihood is -inf over the whole search box".into(),
            ));
        }
        for j in 0..dim {
            best[j] = boxes[j].0 + steps[j] * best_idx[j] as f64;
        }

        let mut moved = false;
        for j in 0..dim {
            let at_edge = best_idx[j] == 0 || best_idx[j] == GRID_POINTS - 1;
            if !at_edge {
                continue;
            }
            let (olo, ohi) = outer[j];
            let tol = 1e-12 * (ohi - olo);
            if (best[j] - olo).abs() <= tol || (best[j] - ohi).abs() <= tol {
                return Err(FitError::BoxBoundary(names[j].to_string()));
            }
            let half = 0.5 * (boxes[j].1 - boxes[j].0);
            boxes[j] = ((best[j] - half).max(olo), (best[j] + half).min(ohi));
            moved = true;
        }
        if moved {
            moves += 1;
            if moves > MAX_MOVES {
                return Err(FitError::InvalidConfig(
                    "grid refinement kept drifting; the search box is too wide".into(),
                ));
            }
            continue;
        }

        rounds += 1;
        let width_left = boxes
            .iter()
            .zip(&outer)
            .map(|(b, o)| (b.1 - b.0) / (o.1 - o.0))
            .fold(0.0, f64::max);
        if rounds >= MIN_ROUNDS && width_left < 1e-10 {
            break;
        }
        for j in 0..dim {
            let half = 0.5 * (boxes[j].1 - boxes[j].0) / SHRINK;
            boxes[j] = ((best[j] - half).max(outer[j].0), (best[j] + half).min(outer[j].1));
        }
    }

    center_flat_stretch(&loglik, &mut best, &outer);
    let x: Vec<f64> = best.iter().enumerate().map(|(j, &v)| from_u(j, v)).collect();
    ModelParams::from_coordinates(kind, &x)
}

/// Distinct observations with their multiplicities.
fn distinct_with_counts(dataset: &Dataset) -> Vec<(IntervalObservation, f64)> {
    let mut out: Vec<(IntervalObservation, f64)> = Vec::new();
    for obs in dataset {
        match out.iter_mut().find(|(o, _)| o == obs) {
            Some((_, c)) => *c += 1.0,
            None => out.push((*obs, 1.0)),
        }
    }
    out
}

fn weighted_loglik(params: &ModelParams, distinct: &[(IntervalObservation, f64)]) -> f64 {
    distinct
        .iter()
        .map(|(obs, c)| {
            let term = if obs.is_exact() {
                params.ln_pdf(obs.lower())
            } else {
                params.model().ln_mass(obs.lower(), obs.upper())
            };
            c * term
        })
        .sum()
}

/// Moves each coordinate to the middle of the stretch where the log-likelihood
/// stays within rounding of its maximum.
fn center_flat_stretch(loglik: &dyn Fn(&[f64]) -> f64, best: &mut [f64], outer: &[(f64, f64)]) {
    let top = loglik(best);
    let tol = 1e-12 * top.abs().max(1.0);
    for j in 0..best.len() {
        let flat = |u: f64, best: &[f64]| {
            let mut p = best.to_vec();
            p[j] = u;
            loglik(&p) >= top - tol
        };
        let mut ends = [best[j]; 2];
        for (side, end) in ends.iter_mut().enumerate() {
            let limit = if side == 0 { outer[j].0 } else { outer[j].1 };
            // Bisect between a flat point and the first non-flat point found walking outward.
            let mut inside = best[j];
            let mut step = 1e-6 * (outer[j].1 - outer[j].0);
            let mut outside = None;
            while outside.is_none() {
                let probe = if side == 0 { inside - step } else { inside + step };
                let probe = if side == 0 { probe.max(limit) } else { probe.min(limit) };
                if flat(probe, best) {
                    if probe == limit {
                        break;
                    }
                    inside = probe;
                    step *= 2.0;
                } else {
                    outside = Some(probe);
                }
            }
            if let Some(mut out) = outside {
                for _ in 0..200 {
                    let mid = 0.5 * (inside + out);
                    if mid == inside || mid == out {
                        break;
                    }
                    if flat(mid, best) {
                        inside = mid;
                    } else {
                        out = mid;
                    }
                }
            }
            *end = inside;
        }
        best[j] = 0.5 * (ends[0] + ends[1]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn integrates_polynomials_and_singular_logs() {
        let (v, _) = integrate(|x| x * x, 0.0, 3.0, 1e-14, 1e-14).unwrap();
        assert_relative_eq!(v, 9.0, max_relative = 1e-14);
        let (v, _) = integrate(|x: f64| x.ln(), 0.0, 1.0, 1e-13, 1e-13).unwrap();
        assert_relative_eq!(v, -1.0, max_relative = 1e-12);
    }

    #[test]
    fn node_budget_is_enforced() {
        let err = integrate(|x: f64| 1.0 / x, 0.0, 1.0, 1e-14, 1e-14).unwrap_err();
        assert!(matches!(err, FitError::Quadrature { .. }));
    }

    #[test]
    fn estep_examples() {
        let e = ModelParams::exponential(1.0).unwrap();
        let obs = IntervalObservation::right_censored(6.0).unwrap();
        assert_relative_eq!(quadrature_estep(&e, &obs, Integrand::Mean).unwrap(), 7.0, max_relative = 1e-12);

        let n = ModelParams::normal(0.0, 1.0).unwrap();
        let obs = IntervalObservation::right_censored(0.0).unwrap();
        let m = quadrature_estep(&n, &obs, Integrand::Mean).unwrap();
        assert_relative_eq!(m, (2.0 / std::f64::consts::PI).sqrt(), max_relative = 1e-12);

        let w = ModelParams::weibull(1.0, 2.0).unwrap();
        let obs = IntervalObservation::right_censored(0.0).unwrap();
        let m = quadrature_estep(&w, &obs, Integrand::ZPower(2.0)).unwrap();
        assert_relative_eq!(m, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn far_tails_and_kinks() {
        let n = ModelParams::normal(0.0, 1.0).unwrap();
        let obs = IntervalObservation::right_censored(40.0).unwrap();
        let m = quadrature_estep(&n, &obs, Integrand::Mean).unwrap();
        // Mills-ratio expansion: E[Z | Z > a] = a + 1/a - 2/a^3 + 10/a^5 - 74/a^7 + ...
        let a = 40.0f64;
        let series = a + 1.0 / a - 2.0 / a.powi(3) + 10.0 / a.powi(5) - 74.0 / a.powi(7);
        assert_relative_eq!(m, series, max_relative = 1e-13);

        let l = ModelParams::laplace(0.0, 1.0).unwrap();
        let obs = IntervalObservation::new(-1.0, 1.0).unwrap();
        let m = quadrature_estep(&l, &obs, Integrand::AbsDev(0.0)).unwrap();
        let exact = (1.0 - 2.0 / std::f64::consts::E) / (1.0 - 1.0 / std::f64::consts::E);
        assert_relative_eq!(m, exact, max_relative = 1e-12);
    }

    #[test]
    fn quantile_route_agrees() {
        let r = ModelParams::rayleigh(2.0).unwrap();
        let obs = IntervalObservation::new(1.0, 3.0).unwrap();
        for g in [Integrand::Mean, Integrand::SecondMoment, Integrand::LogZ] {
            let a = quadrature_estep(&r, &obs, g).unwrap();
            let b = quantile_route_estep(&r, &obs, g).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-10);
        }
    }

    #[test]
    fn degenerate_and_empty_intervals_error() {
        let e = ModelParams::exponential(1.0).unwrap();
        let obs = IntervalObservation::exact(1.0).unwrap();
        assert_eq!(quadrature_estep(&e, &obs, Integrand::Mean), Err(FitError::DegenerateInterval));
        let obs = IntervalObservation::new(-3.0, -1.0).unwrap();
        assert!(matches!(quadrature_estep(&e, &obs, Integrand::Mean), Err(FitError::ZeroMass { .. })));
    }

    #[test]
    fn grid_mle_complete_exponential() {
        let ds = Dataset::from_pairs([(1.0, 1.0), (2.0, 2.0), (4.0, 4.0), (1.0, 1.0)]).unwrap();
        let p = mle_grid_refine(ModelKind::Exponential, &ds, &[(1e-3, 10.0)]).unwrap();
        assert_relative_eq!(p.coordinates()[0], 0.5, max_relative = 1e-8);
        assert!(matches!(
            mle_grid_refine(ModelKind::Exponential, &ds, &[(1.0, 10.0)]),
            Err(FitError::BoxBoundary(_))
        ));
    }

    #[test]
    fn grid_mle_flat_laplace_location_is_centered() {
        let ds = Dataset::from_pairs([(1.0, 1.0), (2.0, 2.0), (4.0, 4.0), (7.0, 7.0)]).unwrap();
        let p = mle_grid_refine(ModelKind::Laplace, &ds, &[(-10.0, 20.0), (0.01, 100.0)]).unwrap();
        let c = p.coordinates();
        assert_relative_eq!(c[0], 3.0, max_relative = 1e-7);
        assert_relative_eq!(c[1], 2.0, max_relative = 1e-7);
    }
}
