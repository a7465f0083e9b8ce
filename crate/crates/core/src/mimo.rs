//! MRT precoding, MMSE combining, SINR and rate evaluation, minimum-power search.
//!
//! Each fleet sends one common stream. Its precoder is the dominant right
//! singular vector of its stacked channel scaled to the fleet power budget,
//! which reduces to classical MRT when the receiver has a single antenna.
//! The effective channel of fleet `j` is `h_j = H_j w_j`; the receiver
//! combines fleet `k` with `u_k = (Σ_j h_j h_jᴴ + σ² I)⁻¹ h_k`.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::StackedChannel;
use crate::error::{Error, Result};

type CVec = DVector<Complex64>;
type CMat = DMatrix<Complex64>;

#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    pub fleet: usize,
    pub w: CVec,
    pub power_w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Combiner {
    pub fleet: usize,
    pub u: CVec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub sinr: Vec<f64>,
    /// bps/Hz per fleet.
    pub rate: Vec<f64>,
    pub sum_rate: f64,
}

impl RatePoint {
    pub fn from_sinr(sinr: Vec<f64>) -> Self {
        let rate: Vec<f64> = sinr.iter().map(|s| (1.0 + s).log2()).collect();
        let sum_rate = rate.iter().sum();
        Self {
            sinr,
            rate,
            sum_rate,
        }
    }

    pub fn zero(fleets: usize) -> Self {
        Self::from_sinr(vec![0.0; fleets])
    }

    pub fn min_rate(&self) -> f64 {
        self.rate.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Rotates `v` so its first non-negligible entry is real and positive.
fn normalize_phase(v: &mut CVec) {
    let peak = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if let Some(first) = v.iter().find(|c| c.norm() > 1e-12 * peak).copied() {
        let rot = first.conj() / first.norm();
        v.iter_mut().for_each(|c| *c *= rot);
    }
}

/// Unit right singular vector of `h` for its largest singular value.
pub fn dominant_right_singular(h: &CMat) -> Result<CVec> {
    if h.ncols() == 0 || h.nrows() == 0 || h.iter().all(|c| c.norm_sqr() == 0.0) {
        return Err(Error::DegenerateChannel);
    }
    if h.ncols() == 1 {
        return Ok(CVec::from_element(1, Complex64::new(1.0, 0.0)));
    }
    let svd = h.clone().svd(false, true);
    let v_t = svd.v_t.ok_or(Error::DegenerateChannel)?;
    let best = svd.singular_values.argmax().0;
    let mut v: CVec = v_t.row(best).transpose().map(|c| c.conj());
    let n = v.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::DegenerateChannel);
    }
    v.unscale_mut(n);
    normalize_phase(&mut v);
    Ok(v)
}

pub fn mrt_precoder(channel: &StackedChannel, power_w: f64) -> Result<Precoder> {
    if !(power_w >= 0.0) || !power_w.is_finite() {
        return Err(Error::out_of_range("power_w", power_w, ">= 0"));
    }
    let v = dominant_right_singular(&channel.h)?;
    Ok(Precoder {
        fleet: channel.fleet,
        w: v * Complex64::from(power_w.sqrt()),
        power_w,
    })
}

fn check_dims(effective: &[CVec]) -> Result<usize> {
    let n = effective
        .first()
        .ok_or(Error::Empty("effective channels"))?
        .len();
    if let Some(bad) = effective.iter().find(|h| h.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "effective channel of length {} alongside length {n}",
            bad.len()
        )));
    }
    Ok(n)
}

/// Solves `(Σ_{j∈set} h_j h_jᴴ + σ² I) x = b`. The system is normalized by σ²
/// so the identity term keeps it well conditioned at any absolute power scale.
fn solve_loaded(effective: &[&CVec], noise: f64, b: &CVec) -> Result<CVec> {
    let n = b.len();
    let mut a = CMat::identity(n, n);
    for h in effective {
        a.ger(
            Complex64::from(1.0 / noise),
            h,
            &h.map(|c| c.conj()),
            Complex64::from(1.0),
        );
    }
    let rhs = b / Complex64::from(noise);
    if let Some(ch) = Cholesky::new(a.clone()) {
        return Ok(ch.solve(&rhs));
    }
    // Not numerically positive definite: load the diagonal and retry.
    let trace: f64 = a.diagonal().iter().map(|c| c.re).sum();
    let load = (1e-15 * trace / n as f64).max(f64::MIN_POSITIVE);
    for i in 0..n {
        a[(i, i)] += Complex64::from(load);
    }
    if let Some(ch) = Cholesky::new(a.clone()) {
        return Ok(ch.solve(&rhs));
    }
    a.lu()
        .solve(&rhs)
        .ok_or_else(|| Error::DimensionMismatch("singular interference-plus-noise matrix".into()))
}

pub fn mmse_combiner(effective: &[CVec], k: usize, noise: f64) -> Result<Combiner> {
    check_dims(effective)?;
    if k >= effective.len() {
        return Err(Error::DimensionMismatch(format!(
            "fleet index {k} with {} fleets",
            effective.len()
        )));
    }
    if !(noise > 0.0) {
        return Err(Error::out_of_range("noise_w", noise, "> 0"));
    }
    let all: Vec<&CVec> = effective.iter().collect();
    Ok(Combiner {
        fleet: k,
        u: solve_loaded(&all, noise, &effective[k])?,
    })
}

pub fn sinr(k: usize, effective: &[CVec], u: &CVec, noise: f64) -> Result<f64> {
    let n = check_dims(effective)?;
    if u.len() != n || k >= effective.len() {
        return Err(Error::DimensionMismatch(format!(
            "combiner length {} for channels of length {n}",
            u.len()
        )));
    }
    let unorm = u.norm_squared();
    if unorm == 0.0 {
        return Err(Error::ZeroCombiner);
    }
    let signal = u.dotc(&effective[k]).norm_sqr();
    let interference: f64 = effective
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(_, h)| u.dotc(h).norm_sqr())
        .sum();
    Ok(signal / (interference + noise * unorm))
}

/// Closed-form MMSE SINR, `h_kᴴ (Σ_{j≠k} h_j h_jᴴ + σ² I)⁻¹ h_k`.
pub fn mmse_sinr_closed_form(effective: &[CVec], k: usize, noise: f64) -> Result<f64> {
    check_dims(effective)?;
    let others: Vec<&CVec> = effective
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(_, h)| h)
        .collect();
    let x = solve_loaded(&others, noise, &effective[k])?;
    Ok(effective[k].dotc(&x).re.max(0.0))
}

/// MMSE SINRs for every fleet given effective channels; silent fleets get 0.
pub fn rates_from_effective(effective: &[CVec], noise: f64) -> Result<RatePoint> {
    check_dims(effective)?;
    let mut out = Vec::with_capacity(effective.len());
    for k in 0..effective.len() {
        if effective[k].norm_squared() == 0.0 {
            out.push(0.0);
            continue;
        }
        let c = mmse_combiner(effective, k, noise)?;
        out.push(sinr(k, effective, &c.u, noise)?);
    }
    Ok(RatePoint::from_sinr(out))
}

/// Per-fleet unit-power effective channels `H_k v_k`.
pub fn unit_effective(channels: &[StackedChannel]) -> Result<Vec<CVec>> {
    channels
        .iter()
        .map(|c| Ok(&c.h * dominant_right_singular(&c.h)?))
        .collect()
}

fn scaled(unit: &[CVec], powers: &[f64]) -> Result<Vec<CVec>> {
    if unit.len() != powers.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} fleets, {} power budgets",
            unit.len(),
            powers.len()
        )));
    }
    Ok(unit
        .iter()
        .zip(powers)
        .map(|(g, &p)| g * Complex64::from(p.sqrt()))
        .collect())
}

pub fn slot_rates(channels: &[StackedChannel], powers: &[f64], noise: f64) -> Result<RatePoint> {
    if channels.len() != powers.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} channels, {} power budgets",
            channels.len(),
            powers.len()
        )));
    }
    let mut effective = Vec::with_capacity(channels.len());
    for (c, &p) in channels.iter().zip(powers) {
        let w = mrt_precoder(c, p)?;
        effective.push(&c.h * &w.w);
    }
    rates_from_effective(&effective, noise)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateMetric {
    /// Every fleet must reach the target on its own.
    #[default]
    PerFleet,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBracket {
    pub min_w: f64,
    pub max_w: f64,
}

impl Default for PowerBracket {
    fn default() -> Self {
        Self {
            min_w: 1e-4,
            max_w: 1e7,
        }
    }
}

/// Frozen fading realization over a set of slots; every power probe sees the
/// same channels.
#[derive(Debug, Clone)]
pub struct PowerSearchProblem {
    slots: Vec<Vec<CVec>>,
    noise: f64,
}

impl PowerSearchProblem {
    pub fn new(slots: &[Vec<StackedChannel>], noise: f64) -> Result<Self> {
        if slots.is_empty() {
            return Err(Error::Empty("slots"));
        }
        let slots = slots
            .iter()
            .map(|s| unit_effective(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { slots, noise })
    }

    /// Time-averaged rates with every fleet at `power_w`.
    pub fn average_rates(&self, power_w: f64) -> Result<RatePoint> {
        let fleets = self.slots[0].len();
        let mut acc = vec![0.0; fleets];
        for unit in &self.slots {
            let rp = rates_from_effective(&scaled(unit, &vec![power_w; unit.len()])?, self.noise)?;
            for (a, r) in acc.iter_mut().zip(&rp.rate) {
                *a += r;
            }
        }
        let n = self.slots.len() as f64;
        let rate: Vec<f64> = acc.iter().map(|a| a / n).collect();
        Ok(RatePoint {
            sinr: rate.iter().map(|r| 2f64.powf(*r) - 1.0).collect(),
            sum_rate: rate.iter().sum(),
            rate,
        })
    }

    pub fn metric(&self, power_w: f64, metric: RateMetric) -> Result<f64> {
        let rp = self.average_rates(power_w)?;
        Ok(match metric {
            RateMetric::PerFleet => rp.min_rate(),
            RateMetric::Sum => rp.sum_rate,
        })
    }
}

/// Smallest common per-fleet power meeting `target`, by bisection on log10(P)
/// to within `tol_db`.
pub fn min_power_for_rate(
    problem: &PowerSearchProblem,
    target: f64,
    metric: RateMetric,
    bracket: PowerBracket,
    tol_db: f64,
) -> Result<f64> {
    if !(bracket.min_w > 0.0) || !(bracket.max_w > bracket.min_w) {
        return Err(Error::out_of_range(
            "power bracket",
            format!("[{}, {}]", bracket.min_w, bracket.max_w),
            "0 < min < max",
        ));
    }
    if target <= 0.0 || problem.metric(bracket.min_w, metric)? >= target {
        return Ok(bracket.min_w);
    }
    let top = problem.metric(bracket.max_w, metric)?;
    if top < target {
        return Err(Error::Unreachable {
            target,
            achieved: top,
        });
    }
    let (mut lo, mut hi) = (bracket.min_w.log10(), bracket.max_w.log10());
    while (hi - lo) * 10.0 > tol_db {
        let mid = 0.5 * (lo + hi);
        if problem.metric(10f64.powf(mid), metric)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(10f64.powf(hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cv(v: &[Complex64]) -> CVec {
        CVec::from_column_slice(v)
    }

    fn stacked(h: CMat) -> StackedChannel {
        StackedChannel {
            fleet: 0,
            sats: vec![],
            h,
        }
    }

    fn random_cvec(rng: &mut ChaCha8Rng, n: usize) -> CVec {
        CVec::from_fn(n, |_, _| {
            c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn single_transmitter_mrt() {
        let h = CMat::from_column_slice(3, 1, &[c(1.0, 1.0), c(0.5, 0.0), c(0.0, -2.0)]);
        let w = mrt_precoder(&stacked(h.clone()), 4.0).unwrap();
        assert_eq!(w.w.len(), 1);
        assert_abs_diff_eq!(w.w[0].re, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            (&h * &w.w).norm_squared(),
            4.0 * h.norm_squared(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn orthogonal_columns_put_all_power_on_the_stronger() {
        let h = CMat::from_column_slice(
            3,
            2,
            &[
                c(2.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 1.0),
                c(0.0, 0.0),
            ],
        );
        let w = mrt_precoder(&stacked(h.clone()), 9.0).unwrap();
        assert_abs_diff_eq!(w.w[0].re, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.w[0].im, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.w[1].norm(), 0.0, epsilon = 1e-12);

        let w2 = mrt_precoder(&stacked(h * Complex64::from(1e-7)), 9.0).unwrap();
        assert!((w2.w - w.w).norm() < 1e-9);
    }

    #[test]
    fn degenerate_channel_rejected() {
        assert_eq!(
            mrt_precoder(&stacked(CMat::zeros(4, 2)), 1.0),
            Err(Error::DegenerateChannel)
        );
    }

    #[test]
    fn precoder_power_and_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let h = CMat::from_fn(6, 3, |_, _| {
                c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            let p = 0.1 + 20.0 * rng.random::<f64>();
            let w = mrt_precoder(&stacked(h), p).unwrap();
            assert!((w.w.norm_squared() - p).abs() <= 1e-9 * p);
            assert!(w.w[0].re > 0.0 && w.w[0].im.abs() < 1e-12);
        }
    }

    #[test]
    fn matched_filter_without_interference() {
        let h = cv(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let u = mmse_combiner(std::slice::from_ref(&h), 0, 1.0).unwrap().u;
        assert_abs_diff_eq!(u[1].norm() + u[2].norm(), 0.0, epsilon = 1e-15);
        assert!(u[0].re > 0.0);
        let s = sinr(0, std::slice::from_ref(&h), &(&h / c(h.norm(), 0.0)), 0.5).unwrap();
        assert_abs_diff_eq!(s, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn orthogonal_fleets_do_not_leak() {
        let h1 = cv(&[c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)]);
        let h2 = cv(&[c(0.0, 1.0), c(1.0, 0.0), c(2.0, 0.0)]);
        assert_abs_diff_eq!(h1.dotc(&h2).norm(), 0.0, epsilon = 1e-15);
        let hs = [h1.clone(), h2.clone()];
        let u1 = mmse_combiner(&hs, 0, 0.3).unwrap().u;
        let u2 = mmse_combiner(&hs, 1, 0.3).unwrap().u;
        assert_abs_diff_eq!(u1.dotc(&h2).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u2.dotc(&h1).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn hand_inverted_two_by_two() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let h1 = cv(&[c(1.0, 0.0), c(0.0, 0.0)]);
        let h2 = cv(&[c(r, 0.0), c(r, 0.0)]);
        // A = h1h1ᴴ + h2h2ᴴ + 0.1 I = [[1.6, 0.5], [0.5, 0.6]], det = 0.71
        // u1 = A⁻¹ h1 = [0.6, -0.5] / 0.71
        let u = mmse_combiner(&[h1, h2], 0, 0.1).unwrap().u;
        assert_abs_diff_eq!(u[0].re, 0.6 / 0.71, epsilon = 1e-12);
        assert_abs_diff_eq!(u[1].re, -0.5 / 0.71, epsilon = 1e-12);
        assert_abs_diff_eq!(u[0].im.abs() + u[1].im.abs(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn sinr_edge_cases() {
        let h = cv(&[c(1.0, 0.0), c(0.0, 0.0)]);
        let ortho = cv(&[c(0.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(sinr(0, std::slice::from_ref(&h), &ortho, 1.0).unwrap(), 0.0);
        assert_eq!(
            sinr(0, std::slice::from_ref(&h), &CVec::zeros(2), 1.0),
            Err(Error::ZeroCombiner)
        );
        assert!(mmse_combiner(&[h.clone(), CVec::zeros(3)], 0, 1.0).is_err());
    }

    #[test]
    fn mmse_identity_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let hs: Vec<CVec> = (0..3).map(|_| random_cvec(&mut rng, 8)).collect();
            let noise = 0.01 + rng.random::<f64>();
            for k in 0..3 {
                let u = mmse_combiner(&hs, k, noise).unwrap().u;
                let direct = sinr(k, &hs, &u, noise).unwrap();
                let closed = mmse_sinr_closed_form(&hs, k, noise).unwrap();
                assert!(
                    (direct - closed).abs() <= 1e-9 * closed,
                    "{direct} vs {closed}"
                );
                let scaled = &u * c(-2.5, 0.7);
                assert!((sinr(k, &hs, &scaled, noise).unwrap() - direct).abs() <= 1e-12 * direct);
            }
        }
    }

    #[test]
    fn rate_basics() {
        let rp = RatePoint::from_sinr(vec![1.0, 3.0]);
        assert_eq!(rp.rate, vec![1.0, 2.0]);
        assert_eq!(rp.sum_rate, 3.0);
        let h = CMat::from_element(4, 2, c(1.0, 0.0));
        let chans = [stacked(h.clone()), stacked(h)];
        let rp = slot_rates(&chans, &[0.0, 0.0], 1.0).unwrap();
        assert_eq!(rp.sum_rate, 0.0);
    }

    #[test]
    fn joint_power_scaling_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let chans: Vec<StackedChannel> = (0..2)
                .map(|_| {
                    stacked(CMat::from_fn(5, 2, |_, _| {
                        c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                    }))
                })
                .collect();
            let mut prev = vec![0.0; 2];
            for alpha in [1.0, 1.5, 3.0, 10.0, 100.0] {
                let rp = slot_rates(&chans, &[alpha, alpha], 0.2).unwrap();
                for (now, before) in rp.sinr.iter().zip(&prev) {
                    assert!(*now >= before * (1.0 - 1e-12));
                }
                prev = rp.sinr;
            }
        }
    }

    #[test]
    fn scalar_min_power_matches_shannon_inverse() {
        let g: f64 = 3.7e-15;
        let noise = 4.0e-14;
        let h = CMat::from_element(1, 1, c(g.sqrt(), 0.0));
        let problem = PowerSearchProblem::new(&[vec![stacked(h)]], noise).unwrap();
        for target in [0.5, 3.0, 6.0, 12.0] {
            let p = min_power_for_rate(
                &problem,
                target,
                RateMetric::PerFleet,
                PowerBracket::default(),
                0.01,
            )
            .unwrap();
            let exact = noise * (2f64.powf(target) - 1.0) / g;
            let err_db = 10.0 * (p / exact).log10();
            assert!((0.0..=0.01 + 1e-9).contains(&err_db), "{target}: {err_db}");
        }
        let min = PowerBracket::default().min_w;
        assert_eq!(
            min_power_for_rate(
                &problem,
                0.0,
                RateMetric::PerFleet,
                PowerBracket::default(),
                0.01
            )
            .unwrap(),
            min
        );
    }

    #[test]
    fn colinear_fleets_saturate() {
        // Both fleets arrive along the same direction: SINR -> |a|²/|b|² as P grows.
        let h1 = CMat::from_column_slice(2, 1, &[c(1.0, 0.0), c(1.0, 0.0)]);
        let h2 = CMat::from_column_slice(2, 1, &[c(0.5, 0.0), c(0.5, 0.0)]);
        let mut b = stacked(h2);
        b.fleet = 1;
        let problem = PowerSearchProblem::new(&[vec![stacked(h1), b]], 1.0).unwrap();
        let res = min_power_for_rate(
            &problem,
            10.0,
            RateMetric::Sum,
            PowerBracket::default(),
            0.01,
        );
        assert!(matches!(res, Err(Error::Unreachable { .. })), "{res:?}");
    }
}
