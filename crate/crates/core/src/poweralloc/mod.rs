//! Max-min fair power allocation under a radar SIR constraint.
//!
//! For a target SINR `t` every constraint is linear in the powers
//! `η = [η_R, η_1, …, η_K]`:
//!
//! ```text
//! η_k γ_k ≥ t (Σ_j η_j ξ_kj + η_R ζ_k + σ²)    for every user k
//! η_R + Σ_k η_k ≤ budget
//! η_R g_R ≥ ρ* Σ_k η_k g_k
//! ```
//!
//! so feasibility at fixed `t` is a linear program, and the largest feasible
//! `t` is found by bisection.

pub mod simplex;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::rate::RateCoefficients;
use crate::{CVector, Error, Result};
use simplex::{solve_feasibility, LpOutcome};

/// Relative tolerance when certifying a feasible point in physical units.
pub const VERIFY_TOLERANCE: f64 = 1e-9;
/// Default bisection bracket width relative to the best feasible target.
pub const DEFAULT_TOL_EPS: f64 = 1e-4;
/// Relative tightening of the SINR target inside each feasibility program.
pub const TARGET_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    eta_radar: f64,
    eta_users: Vec<f64>,
    budget: f64,
    achieved_t: Option<f64>,
}

impl PowerAllocation {
    pub fn new(eta_radar: f64, eta_users: Vec<f64>, budget: f64, achieved_t: Option<f64>) -> Result<Self> {
        if !(budget.is_finite() && budget > 0.0) {
            return Err(Error::invalid("budget", format!("{budget} is not positive")));
        }
        if eta_users
            .iter()
            .chain(std::iter::once(&eta_radar))
            .any(|e| !(e.is_finite() && *e >= 0.0))
        {
            return Err(Error::invalid("powers", "powers must be finite and nonnegative"));
        }
        let total = eta_radar + eta_users.iter().sum::<f64>();
        if total > budget * (1.0 + VERIFY_TOLERANCE) {
            return Err(Error::invalid("powers", format!("total power {total} exceeds budget {budget}")));
        }
        Ok(Self {
            eta_radar,
            eta_users,
            budget,
            achieved_t,
        })
    }

    pub fn eta_radar(&self) -> f64 {
        self.eta_radar
    }

    pub fn eta_users(&self) -> &[f64] {
        &self.eta_users
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    /// Certified min-SINR for optimised allocations.
    pub fn achieved_t(&self) -> Option<f64> {
        self.achieved_t
    }

    pub fn total_power(&self) -> f64 {
        self.eta_radar + self.eta_users.iter().sum::<f64>()
    }

    /// `η_R g_R / Σ_k η_k g_k`; infinite when no power leaks toward the target.
    pub fn radar_sir(&self, sir: &RadarSirCoefficients) -> f64 {
        let leak: f64 = self.eta_users.iter().zip(&sir.user_gains).map(|(e, g)| e * g).sum();
        if leak == 0.0 {
            f64::INFINITY
        } else {
            self.eta_radar * sir.radar_gain / leak
        }
    }
}

/// Beam gains toward the surveillance direction, `‖a aᴴ w‖² = N_A |aᴴ w|²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarSirCoefficients {
    pub radar_gain: f64,
    pub user_gains: Vec<f64>,
}

impl RadarSirCoefficients {
    pub fn new(radar_gain: f64, user_gains: Vec<f64>) -> Result<Self> {
        if user_gains
            .iter()
            .chain(std::iter::once(&radar_gain))
            .any(|g| !(g.is_finite() && *g >= 0.0))
        {
            return Err(Error::invalid("gains", "SIR gains must be finite and nonnegative"));
        }
        Ok(Self { radar_gain, user_gains })
    }

    pub fn from_beams(steering: &CVector, radar_beam: &CVector, user_beams: &[CVector]) -> Result<Self> {
        let n = steering.len() as f64;
        let gain = |w: &CVector| -> Result<f64> {
            if w.len() != steering.len() {
                return Err(Error::DimensionMismatch {
                    context: "beam length",
                    expected: steering.len(),
                    actual: w.len(),
                });
            }
            Ok(n * steering.dotc(w).norm_sqr())
        };
        Self::new(gain(radar_beam)?, user_beams.iter().map(gain).collect::<Result<_>>()?)
    }
}

/// Problem data shared by every feasibility call.
#[derive(Debug, Clone, Copy)]
pub struct AllocationProblem<'a> {
    pub coeffs: &'a RateCoefficients,
    pub sir: &'a RadarSirCoefficients,
    pub budget: f64,
    pub rho_star: f64,
}

impl AllocationProblem<'_> {
    fn validate(&self) -> Result<()> {
        if self.sir.user_gains.len() != self.coeffs.num_users() {
            return Err(Error::DimensionMismatch {
                context: "SIR user gains",
                expected: self.coeffs.num_users(),
                actual: self.sir.user_gains.len(),
            });
        }
        if !(self.budget.is_finite() && self.budget > 0.0) {
            return Err(Error::invalid("budget", format!("{} is not positive", self.budget)));
        }
        if !(self.rho_star.is_finite() && self.rho_star >= 0.0) {
            return Err(Error::invalid("rho_star", format!("{} is negative", self.rho_star)));
        }
        Ok(())
    }

    /// Rows of `A x ≤ b` in budget-normalised variables `x = η / budget`,
    /// ordered `[x_R, x_1, …, x_K]`. Each row is scaled to unit max-abs
    /// coefficient.
    fn constraints(&self, t: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let c = self.coeffs;
        let k_users = c.num_users();
        let mut a = Vec::with_capacity(k_users + 2);
        let mut b = Vec::with_capacity(k_users + 2);
        for k in 0..k_users {
            let mut row = vec![0.0; k_users + 1];
            row[0] = t * c.zeta_radar[k];
            for j in 0..k_users {
                row[j + 1] = t * c.xi[(k, j)];
            }
            row[k + 1] -= c.gamma[k];
            push_scaled(&mut a, &mut b, row, -t * c.noise_var / self.budget);
        }
        push_scaled(&mut a, &mut b, vec![1.0; k_users + 1], 1.0);
        let mut row = vec![-self.sir.radar_gain];
        row.extend(self.sir.user_gains.iter().map(|g| self.rho_star * g));
        push_scaled(&mut a, &mut b, row, 0.0);
        (a, b)
    }

    /// Checks a candidate point in physical units.
    fn verify(&self, t: f64, eta_radar: f64, eta_users: &[f64]) -> bool {
        let c = self.coeffs;
        let sinr_ok = (0..c.num_users()).all(|k| {
            let lhs = eta_users[k] * c.gamma[k];
            let rhs = t * c.denominator(k, eta_users, eta_radar);
            lhs >= rhs - VERIFY_TOLERANCE * lhs.max(rhs)
        });
        let total = eta_radar + eta_users.iter().sum::<f64>();
        let budget_ok = total <= self.budget * (1.0 + VERIFY_TOLERANCE);
        let leak: f64 = eta_users.iter().zip(&self.sir.user_gains).map(|(e, g)| e * g).sum();
        let radar = eta_radar * self.sir.radar_gain;
        let sir_ok = radar >= self.rho_star * leak - VERIFY_TOLERANCE * radar.max(self.rho_star * leak);
        sinr_ok && budget_ok && sir_ok
    }
}

fn push_scaled(a: &mut Vec<Vec<f64>>, b: &mut Vec<f64>, mut row: Vec<f64>, rhs: f64) {
    let scale = row.iter().fold(rhs.abs(), |m, v| m.max(v.abs()));
    if scale > 0.0 {
        row.iter_mut().for_each(|v| *v /= scale);
        a.push(row);
        b.push(rhs / scale);
    } else {
        a.push(row);
        b.push(rhs);
    }
}

/// Outcome of one feasibility program.
#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible { eta_radar: f64, eta_users: Vec<f64> },
    /// Farkas multipliers of the row-scaled normalised system.
    Infeasible { certificate: Vec<f64> },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Self::Feasible { .. })
    }
}

fn iteration_cap(k_users: usize) -> usize {
    200 * (2 * k_users + 4)
}

/// Solves the linear feasibility program for a target SINR `t`.
pub fn feasibility(problem: AllocationProblem<'_>, t: f64) -> Result<Feasibility> {
    problem.validate()?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::invalid("t", format!("{t} is not a nonnegative target")));
    }
    // Solving at a slightly stricter target leaves slack for the rounding
    // error of the simplex, so the point passes verification at `t`.
    let (a, b) = problem.constraints(t * (1.0 + TARGET_MARGIN));
    match solve_feasibility(&a, &b, iteration_cap(problem.coeffs.num_users()))? {
        LpOutcome::Infeasible { certificate } => Ok(Feasibility::Infeasible { certificate }),
        LpOutcome::Feasible(x) => {
            let eta_radar = x[0] * problem.budget;
            let eta_users: Vec<f64> = x[1..].iter().map(|v| v * problem.budget).collect();
            let repaired = minimal_user_powers(problem.coeffs, t * (1.0 + 0.5 * TARGET_MARGIN), eta_radar);
            if let Some(eta_users) = repaired.filter(|e| problem.verify(t, eta_radar, e)) {
                Ok(Feasibility::Feasible { eta_radar, eta_users })
            } else if problem.verify(t, eta_radar, &eta_users) {
                Ok(Feasibility::Feasible { eta_radar, eta_users })
            } else {
                Err(Error::Numerical(format!(
                    "simplex point fails verification at t = {t:e}"
                )))
            }
        }
    }
}

/// Smallest user powers meeting SINR `t` for every user at radar power
/// `eta_radar`, from `(Γ − tΞ) η = t (ζ η_R + σ²)`.
///
/// When any nonnegative solution exists this one is componentwise smallest,
/// so swapping it into a feasible simplex point keeps the budget and radar
/// SIR rows satisfied while removing the simplex rounding error.
fn minimal_user_powers(c: &RateCoefficients, t: f64, eta_radar: f64) -> Option<Vec<f64>> {
    let k_users = c.num_users();
    if t <= 0.0 {
        return None;
    }
    let m = DMatrix::from_fn(k_users, k_users, |k, j| {
        let diag = if k == j { c.gamma[k] } else { 0.0 };
        diag - t * c.xi[(k, j)]
    });
    let rhs = DVector::from_fn(k_users, |k, _| t * (c.zeta_radar[k] * eta_radar + c.noise_var));
    let eta = m.lu().solve(&rhs)?;
    eta.iter().all(|e| e.is_finite() && *e > 0.0).then(|| eta.iter().copied().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct BisectionOptions {
    /// Lower bracket; 0 when absent.
    pub t_min: Option<f64>,
    /// Upper bracket; derived from the coefficients when absent.
    pub t_max: Option<f64>,
    /// Absolute bracket width at termination.
    pub tol_eps: Option<f64>,
    /// Bracket width relative to the best feasible target; used when
    /// `tol_eps` is absent, `DEFAULT_TOL_EPS` when both are.
    pub rel_tol: Option<f64>,
}

/// `min_k γ_k B / (ξ_kk B + σ²)`: no user can exceed its single-user SINR
/// at full power.
pub fn default_t_max(coeffs: &RateCoefficients, budget: f64) -> f64 {
    (0..coeffs.num_users())
        .map(|k| coeffs.gamma[k] * budget / (coeffs.xi[(k, k)] * budget + coeffs.noise_var))
        .fold(f64::INFINITY, f64::min)
}

/// Largest min-SINR by bisection over feasibility programs.
///
/// The final feasible point is scaled up until the budget binds; this keeps
/// the SIR constraint and only raises every SINR.
pub fn max_min_allocate(problem: AllocationProblem<'_>, options: BisectionOptions) -> Result<PowerAllocation> {
    problem.validate()?;
    let k_users = problem.coeffs.num_users();
    if k_users == 0 {
        return Err(Error::invalid("users", "max-min allocation needs at least one user"));
    }
    let mut lo = options.t_min.unwrap_or(0.0);
    let mut hi = options.t_max.unwrap_or_else(|| default_t_max(problem.coeffs, problem.budget));
    if !(hi.is_finite() && hi > lo && lo >= 0.0) {
        return Err(Error::invalid("t_max", format!("bracket [{lo}, {hi}] is not valid")));
    }
    let rel_tol = options.rel_tol.unwrap_or(DEFAULT_TOL_EPS);
    if options.tol_eps.is_some_and(|t| !(t > 0.0)) || !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::invalid("tol_eps", "tolerance must be positive"));
    }
    // Below this the bracket holds no representable positive target.
    let floor = hi * f64::EPSILON;

    let mut best = match feasibility(problem, lo)? {
        Feasibility::Feasible { eta_radar, eta_users } => (lo, eta_radar, eta_users),
        Feasibility::Infeasible { .. } => {
            return Err(Error::Infeasible(format!("constraints cannot be met at t = {lo:e}")))
        }
    };
    // A simplex point that fails verification in physical units counts as
    // infeasible; this happens near tight brackets and vanishing targets.
    match feasibility(problem, hi) {
        Ok(Feasibility::Feasible { eta_radar, eta_users }) => {
            best = (hi, eta_radar, eta_users);
            lo = hi;
        }
        Ok(Feasibility::Infeasible { .. }) | Err(Error::Numerical(_)) => {}
        Err(e) => return Err(e),
    }
    loop {
        let done = if lo > 0.0 {
            hi - lo <= options.tol_eps.unwrap_or(rel_tol * lo)
        } else {
            // Keep halving until some positive target is feasible.
            hi <= floor
        };
        if done {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match feasibility(problem, mid) {
            Ok(Feasibility::Feasible { eta_radar, eta_users }) => {
                best = (mid, eta_radar, eta_users);
                lo = mid;
            }
            Ok(Feasibility::Infeasible { .. }) | Err(Error::Numerical(_)) => hi = mid,
            Err(e) => return Err(e),
        }
    }
    let (t, mut eta_radar, mut eta_users) = best;
    if t == 0.0 {
        return Err(Error::Infeasible(
            "no positive min-SINR is compatible with the radar SIR constraint".into(),
        ));
    }
    let total = eta_radar + eta_users.iter().sum::<f64>();
    if total > 0.0 {
        let c = problem.budget / total;
        if c > 1.0 {
            eta_radar *= c;
            eta_users.iter_mut().for_each(|e| *e *= c);
        }
    }
    let eta_radar = eta_radar.min(problem.budget);
    let total = eta_radar + eta_users.iter().sum::<f64>();
    if total > problem.budget {
        let c = problem.budget / total;
        eta_users.iter_mut().for_each(|e| *e *= c);
    }
    PowerAllocation::new(eta_radar, eta_users, problem.budget, Some(t))
}

/// `η_k = P_DL / (K M N)` and `η_R = RCR · P_DL / (M N)`.
pub fn uniform_allocate(p_dl: f64, rcr: f64, k_users: usize, m: usize, n: usize) -> Result<PowerAllocation> {
    if !(p_dl.is_finite() && p_dl > 0.0) {
        return Err(Error::invalid("p_dl", format!("{p_dl} is not positive")));
    }
    if !(rcr.is_finite() && rcr >= 0.0) {
        return Err(Error::invalid("rcr", format!("{rcr} is negative")));
    }
    if m == 0 || n == 0 {
        return Err(Error::invalid("grid", "the OFDM grid must be non-empty"));
    }
    let per_symbol = p_dl / (m * n) as f64;
    let eta_users = if k_users == 0 {
        Vec::new()
    } else {
        vec![per_symbol / k_users as f64; k_users]
    };
    PowerAllocation::new(rcr * per_symbol, eta_users, (1.0 + rcr) * per_symbol, None)
}

/// Per-symbol budget shared by allocators: `(1 + RCR) · P_DL / (M N)`.
pub fn symbol_budget(p_dl: f64, rcr: f64, m: usize, n: usize) -> f64 {
    (1.0 + rcr) * p_dl / (m * n) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::EstimatorKind;
    use crate::rate::FrameTiming;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn coeffs(gamma: Vec<f64>, xi: DMatrix<f64>, zeta: Vec<f64>, noise: f64) -> RateCoefficients {
        RateCoefficients::new(
            EstimatorKind::Pm,
            gamma,
            xi,
            zeta,
            noise,
            FrameTiming::new(1e6, 200, 4).unwrap(),
        )
        .unwrap()
    }

    fn random_instance(rng: &mut ChaCha8Rng, k: usize) -> (RateCoefficients, RadarSirCoefficients) {
        let gamma = (0..k).map(|_| rng.random_range(5.0..20.0)).collect();
        let xi = DMatrix::from_fn(k, k, |_, _| rng.random_range(0.0..1.0));
        let zeta = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        let sir = RadarSirCoefficients::new(
            rng.random_range(5.0..16.0),
            (0..k).map(|_| rng.random_range(0.0..2.0)).collect(),
        )
        .unwrap();
        (coeffs(gamma, xi, zeta, rng.random_range(0.05..0.5)), sir)
    }

    fn min_sinr(c: &RateCoefficients, p: &PowerAllocation) -> f64 {
        c.sinr(p.eta_users(), p.eta_radar()).unwrap().into_iter().fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn uniform_examples() {
        let p = uniform_allocate(2.0, 2.0, 10, 512, 14).unwrap();
        assert!(p.eta_users().iter().all(|e| (e - 2.0 / 71680.0).abs() < 1e-20));
        assert!((p.eta_radar() - 2.0 * 2.0 / 7168.0).abs() < 1e-18);
        let p = uniform_allocate(2.0, 1.0, 10, 512, 14).unwrap();
        assert!((p.eta_radar() - 2.0 / 7168.0).abs() < 1e-18);
        assert!((p.total_power() - p.budget()).abs() < 1e-15);
        assert!(uniform_allocate(0.0, 1.0, 1, 1, 1).is_err());
        assert!(uniform_allocate(1.0, -1.0, 1, 1, 1).is_err());
    }

    #[test]
    fn zero_target_is_feasible_at_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (c, sir) = random_instance(&mut rng, 3);
        let problem = AllocationProblem {
            coeffs: &c,
            sir: &sir,
            budget: 1.0,
            rho_star: 0.0,
        };
        match feasibility(problem, 0.0).unwrap() {
            Feasibility::Feasible { eta_radar, eta_users } => {
                assert_eq!(eta_radar, 0.0);
                assert!(eta_users.iter().all(|e| *e == 0.0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_user_upper_bound() {
        let c = coeffs(vec![4.0], DMatrix::from_element(1, 1, 0.5), vec![0.3], 0.2);
        let sir = RadarSirCoefficients::new(1.0, vec![1.0]).unwrap();
        let problem = AllocationProblem {
            coeffs: &c,
            sir: &sir,
            budget: 2.0,
            rho_star: 0.0,
        };
        let bound = 4.0 * 2.0 / (0.5 * 2.0 + 0.2);
        assert!(!feasibility(problem, bound * 1.001).unwrap().is_feasible());
        let p = max_min_allocate(problem, BisectionOptions::default()).unwrap();
        assert!((p.eta_users()[0] - 2.0).abs() < 1e-9);
        assert!((p.achieved_t().unwrap() - bound).abs() <= DEFAULT_TOL_EPS * bound);
    }

    #[test]
    fn symmetric_instance_gives_equal_powers() {
        let k = 4;
        let xi = DMatrix::from_fn(k, k, |i, j| if i == j { 0.4 } else { 0.1 });
        let c = coeffs(vec![10.0; k], xi, vec![0.2; k], 0.3);
        let sir = RadarSirCoefficients::new(10.0, vec![0.5; k]).unwrap();
        let problem = AllocationProblem {
            coeffs: &c,
            sir: &sir,
            budget: 1.0,
            rho_star: 0.0,
        };
        let p = max_min_allocate(problem, BisectionOptions::default()).unwrap();
        let mean = p.eta_users().iter().sum::<f64>() / k as f64;
        for e in p.eta_users() {
            assert!((e - mean).abs() < 1e-3 * mean, "{:?}", p.eta_users());
        }
        assert!((p.total_power() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn radar_constraint_without_radar_gain_is_infeasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (c, _) = random_instance(&mut rng, 2);
        let sir = RadarSirCoefficients::new(0.0, vec![1.0, 1.0]).unwrap();
        let problem = AllocationProblem {
            coeffs: &c,
            sir: &sir,
            budget: 1.0,
            rho_star: 2.0,
        };
        assert!(matches!(
            max_min_allocate(problem, BisectionOptions::default()),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn feasibility_is_monotone_and_allocation_is_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (c, sir) = random_instance(&mut rng, 3);
            let budget = rng.random_range(0.5..3.0);
            let rho_star = rng.random_range(0.0..4.0);
            let problem = AllocationProblem {
                coeffs: &c,
                sir: &sir,
                budget,
                rho_star,
            };
            let p = max_min_allocate(problem, BisectionOptions::default()).unwrap();
            let t = p.achieved_t().unwrap();
            assert!(min_sinr(&c, &p) >= t - 1e-9);
            assert!(p.total_power() <= budget * (1.0 + 1e-9));
            assert!((p.total_power() - budget).abs() <= 1e-6 * budget);
            assert!(p.radar_sir(&sir) >= rho_star * (1.0 - 1e-6));
            for frac in [0.1, 0.5, 0.9, 0.999] {
                assert!(feasibility(problem, t * frac).unwrap().is_feasible());
            }
            assert!(!feasibility(problem, t * 1.01 + 1e-3 * default_t_max(&c, budget)).unwrap().is_feasible());

            let uniform = PowerAllocation::new(
                rho_star / (1.0 + rho_star) * budget,
                vec![budget / (1.0 + rho_star) / 3.0; 3],
                budget,
                None,
            )
            .unwrap();
            if uniform.radar_sir(&sir) >= rho_star {
                let tol = DEFAULT_TOL_EPS * default_t_max(&c, budget);
                assert!(t >= min_sinr(&c, &uniform) - tol);
            }
        }
    }

    #[test]
    fn grid_search_agrees_on_small_instances() {
        // K = 2 with ρ* = 0: the budget binds at the optimum, so the search
        // runs over the 2-simplex of (x_R, x_1, x_2) with x_R = 0 optimal.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let (c, sir) = random_instance(&mut rng, 2);
            let problem = AllocationProblem {
                coeffs: &c,
                sir: &sir,
                budget: 1.0,
                rho_star: 0.0,
            };
            let p = max_min_allocate(problem, BisectionOptions::default()).unwrap();
            let steps = 100_000;
            let mut best: f64 = 0.0;
            for i in 0..=steps {
                let x1 = i as f64 / steps as f64;
                let s = c.sinr(&[x1, 1.0 - x1], 0.0).unwrap();
                best = best.max(s[0].min(s[1]));
            }
            let tol = DEFAULT_TOL_EPS * default_t_max(&c, 1.0);
            assert!((p.achieved_t().unwrap() - best).abs() <= 10.0 * tol, "{} {best}", p.achieved_t().unwrap());
        }
    }

    #[test]
    fn sir_coefficients_from_beams() {
        use crate::array::{steering_vector, ArrayGeometry, Direction};
        use crate::beamform::pbr_beam;
        let g = ArrayGeometry::half_wavelength(3, 3, 0.1).unwrap();
        let d = Direction::new(0.3, 1.2).unwrap();
        let a = steering_vector(&g, d);
        let w = pbr_beam(&g, d);
        let sir = RadarSirCoefficients::from_beams(&a, &w, &[w.clone()]).unwrap();
        let direct = (&a * a.adjoint() * &w).norm_squared();
        assert!((sir.radar_gain - direct).abs() < 1e-9 * direct);
        assert!((sir.radar_gain - 81.0).abs() < 1e-9);
    }

    #[test]
    fn allocation_validation() {
        assert!(PowerAllocation::new(-1.0, vec![], 1.0, None).is_err());
        assert!(PowerAllocation::new(0.6, vec![0.6], 1.0, None).is_err());
        assert!(PowerAllocation::new(0.5, vec![0.5], 0.0, None).is_err());
        assert!(RadarSirCoefficients::new(-1.0, vec![]).is_err());
    }
}
