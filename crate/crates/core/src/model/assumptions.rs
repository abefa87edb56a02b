//! Randomized verification of the structural assumptions on `S*`.
//!
//! Sampling distribution: `θ` log-uniform on `[theta_min, 1e3]`, tensor
//! components uniform on `[−10, 10]` (the symmetric tensor is built from three
//! independent draws). Deterministic corner cases are appended: `D = 0`,
//! `|D| = 1e−8`, `|D| = 1e3`, and a radial sweep of `|D|` over
//! `[1e−6, 1e3]` in a fixed direction, so that both the degenerate origin and
//! the growth regime are always probed.
//!
//! Each check reports its worst margin divided by a scale: `(1+|D₁|+|D₂|)^p`
//! for monotonicity and `(1+|D|)^p` for the others. A check passes when that
//! normalized margin is at least `−1e−10`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stress::StressModel;
use super::tensor::Sym2;

pub const MARGIN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assumption {
    Monotonicity,
    Coercivity,
    Growth,
    Stability,
}

impl Assumption {
    pub const ALL: [Assumption; 4] = [
        Assumption::Monotonicity,
        Assumption::Coercivity,
        Assumption::Growth,
        Assumption::Stability,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Assumption::Monotonicity => "(i) monotonicity (S1-S2):(D1-D2) >= 0",
            Assumption::Coercivity => "(ii) coercivity S:D >= nu_low|D|^p - nu_high",
            Assumption::Growth => "(iii) growth |S| <= nu_high(1+|D|)^(p-1), S(theta,0) = 0",
            Assumption::Stability => "(iv) stability S:D >= mu_low(1+|D|)^(p-2)|D|^2",
        }
    }
}

/// The sample at which a check attained its worst margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub theta: f64,
    pub d1: Sym2,
    pub d2: Option<Sym2>,
    pub d_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub assumption: Assumption,
    /// Worst normalized margin over all samples.
    pub worst_margin: f64,
    pub witness: Witness,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub model: String,
    pub samples: usize,
    pub seed: u64,
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn check(&self, a: Assumption) -> &AssumptionCheck {
        self.checks
            .iter()
            .find(|c| c.assumption == a)
            .expect("all four assumptions are checked")
    }

    pub fn passes(&self, a: Assumption) -> bool {
        self.check(a).pass
    }

    /// (i)–(iii), which existence and continuity rely on.
    pub fn existence_assumptions_pass(&self) -> bool {
        [
            Assumption::Monotonicity,
            Assumption::Coercivity,
            Assumption::Growth,
        ]
        .iter()
        .all(|&a| self.passes(a))
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

struct Tracker {
    worst: f64,
    witness: Witness,
}

impl Tracker {
    fn new() -> Self {
        Self {
            worst: f64::INFINITY,
            witness: Witness {
                theta: f64::NAN,
                d1: Sym2::ZERO,
                d2: None,
                d_norm: f64::NAN,
            },
        }
    }

    fn record(&mut self, margin: f64, witness: Witness) {
        if margin < self.worst || margin.is_nan() {
            self.worst = margin;
            self.witness = witness;
        }
    }
}

fn random_sym(rng: &mut ChaCha8Rng) -> Sym2 {
    Sym2::new(
        rng.gen_range(-10.0..10.0),
        rng.gen_range(-10.0..10.0),
        rng.gen_range(-10.0..10.0),
    )
}

fn with_norm(d: Sym2, r: f64) -> Sym2 {
    let n = d.norm();
    if n == 0.0 {
        Sym2::diag(r / 2f64.sqrt(), -r / 2f64.sqrt())
    } else {
        d.scale(r / n)
    }
}

/// Samples `samples` random triples `(θ, D₁, D₂)` plus the deterministic
/// corner cases and reports the worst margin of each assumption.
pub fn verify_assumptions(
    model: &StressModel,
    samples: usize,
    seed: u64,
    theta_min: f64,
) -> AssumptionReport {
    let p = model.p();
    let nu_low = model.nu_low();
    let nu_high = model.nu_high();
    let mu_low = model.mu_low();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta_min = theta_min.clamp(1e-12, 1e3);
    let log_lo = theta_min.ln();
    let log_hi = 1e3f64.ln();

    let mut trackers: Vec<Tracker> = (0..4).map(|_| Tracker::new()).collect();

    let mut evaluate = |theta: f64, d1: Sym2, d2: Sym2| {
        let s1 = model.eval(theta, d1);
        let s2 = model.eval(theta, d2);
        let n1_sq = d1.norm_sq();
        let n1 = n1_sq.sqrt();
        let n2 = d2.norm();
        let w1 = Witness {
            theta,
            d1,
            d2: None,
            d_norm: n1,
        };

        let mono = (s1 - s2).ddot(d1 - d2) / (1.0 + n1 + n2).powf(p);
        trackers[0].record(mono, Witness { d2: Some(d2), ..w1 });

        let scale = (1.0 + n1).powf(p);
        let sd = s1.ddot(d1);
        trackers[1].record((sd - (nu_low * n1.powf(p) - nu_high)) / scale, w1);

        let zero_stress = model.eval(theta, Sym2::ZERO).norm();
        let growth = nu_high * (1.0 + n1).powf(p - 1.0) - s1.norm() - zero_stress;
        trackers[2].record(growth / scale, w1);

        let stab = sd - mu_low * (1.0 + n1).powf(p - 2.0) * n1_sq;
        trackers[3].record(stab / scale, w1);
    };

    for _ in 0..samples.max(1) {
        let theta = (log_lo + (log_hi - log_lo) * rng.gen::<f64>()).exp();
        let d1 = random_sym(&mut rng);
        let d2 = random_sym(&mut rng);
        evaluate(theta, d1, d2);
    }

    let thetas = [theta_min, 1.0_f64.max(theta_min), 1e3];
    let dir = Sym2::new(0.6, -0.3, 0.2);
    for &theta in &thetas {
        let corners = [
            Sym2::ZERO,
            with_norm(dir, 1e-8),
            with_norm(dir, 1e3),
            with_norm(Sym2::new(-0.1, 0.9, 0.4), 1e3),
        ];
        for &a in &corners {
            for &b in &corners {
                evaluate(theta, a, b);
            }
        }
        for k in 0..=90 {
            let r = 10f64.powf(-6.0 + 9.0 * k as f64 / 90.0);
            let d = with_norm(dir, r);
            evaluate(theta, d, Sym2::ZERO);
            evaluate(theta, d, d.scale(0.5));
        }
    }

    let checks = Assumption::ALL
        .iter()
        .zip(trackers)
        .map(|(&assumption, t)| AssumptionCheck {
            assumption,
            worst_margin: t.worst,
            witness: t.witness,
            pass: t.worst >= -MARGIN_TOLERANCE,
        })
        .collect();

    AssumptionReport {
        model: model.id(),
        samples,
        seed,
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounded_power_law_satisfies_all_four() {
        let m = StressModel::bounded_power_law(3.0, 1.0, 1.0, 1.0).unwrap();
        let r = verify_assumptions(&m, 2000, 7, 0.1);
        assert!(r.all_pass(), "{r:#?}");
    }

    #[test]
    fn pure_power_law_fails_stability_near_origin() {
        let m = StressModel::pure_power_law(3.0, 1.0, 1.0, 0.5).unwrap();
        let r = verify_assumptions(&m, 2000, 7, 0.1);
        assert!(r.existence_assumptions_pass());
        let st = r.check(Assumption::Stability);
        assert!(!st.pass);
        assert!(
            st.witness.d_norm < 1.0,
            "witness |D| = {}",
            st.witness.d_norm
        );
    }

    #[test]
    fn newtonian_stability_margin_is_zero() {
        let m = StressModel::newtonian(1.0);
        let r = verify_assumptions(&m, 1000, 3, 0.1);
        assert!(r.all_pass());
        assert!(r.check(Assumption::Stability).worst_margin.abs() < 1e-15);
    }

    // Brute-force scan independent of the sampler: the stability defect of the
    // pure power law is negative for every |D| in (0, 1).
    #[test]
    fn brute_force_scan_exhibits_stability_defect() {
        let m = StressModel::pure_power_law(3.0, 1.0, 1.0, 0.5).unwrap();
        let mut found = false;
        for k in 0..=600 {
            let r = 10f64.powf(-6.0 + 6.0 * k as f64 / 600.0);
            if r >= 1.0 {
                break;
            }
            let d = Sym2::diag(r / 2f64.sqrt(), -r / 2f64.sqrt());
            let lhs = m.eval(1.0, d).ddot(d);
            let rhs = 0.5 * (1.0 + r) * r * r;
            assert!(lhs < rhs);
            found = true;
        }
        assert!(found);
    }

    #[test]
    fn same_seed_same_report() {
        let m = StressModel::bounded_power_law(4.0, 1.0, 2.0, 0.5).unwrap();
        assert_eq!(
            verify_assumptions(&m, 500, 11, 0.5),
            verify_assumptions(&m, 500, 11, 0.5)
        );
    }
}
