#![allow(dead_code)]

pub mod dd;

use granular::kernel::{collide, CollisionOutcome};
use dd::{norm2, normal_component, ulp, Dd};

/// Exact `-(1-e²)/2 (u·ω)²` in double-double.
pub fn exact_dissipation(v: &[f64], vs: &[f64], omega: &[f64], e: f64) -> Dd {
    let n = normal_component(v, vs, omega);
    let f = Dd::from(1.0).sub(Dd::from(e).mul(Dd::from(e))).scale(-0.5);
    n.mul(n).mul(f)
}

/// Violations of the per-collision identities, as ratios to their budgets
/// (a ratio above 1 is a failure).
#[derive(Debug, Default, Clone, Copy)]
pub struct IdentityCheck {
    pub shared_impulse: bool,
    pub momentum: f64,
    pub booked_energy_ulps: f64,
    pub output_rounding: f64,
    pub impulse_rounding: f64,
    pub float_sum_exact: bool,
}

pub fn check_identities(v: &[f64], vs: &[f64], omega: &[f64], e: f64) -> IdentityCheck {
    let out: CollisionOutcome<f64> = collide(v, vs, omega, e).unwrap();
    let d = v.len();
    let shared_impulse = (0..d).all(|k| out.v_prime[k] == v[k] - out.impulse[k] && out.vstar_prime[k] == vs[k] + out.impulse[k]);

    let mut momentum = 0.0f64;
    let mut float_sum_exact = true;
    for k in 0..d {
        let before = Dd::from(v[k]).add(Dd::from(vs[k]));
        let after = Dd::from(out.v_prime[k]).add(Dd::from(out.vstar_prime[k]));
        let budget = 0.5 * ulp(out.v_prime[k]) + 0.5 * ulp(out.vstar_prime[k]);
        momentum = momentum.max(after.sub(before).to_f64().abs() / budget);
        float_sum_exact &= out.v_prime[k] + out.vstar_prime[k] == v[k] + vs[k];
    }

    let formula = exact_dissipation(v, vs, omega, e);
    let booked_energy_ulps = if formula.to_f64() == 0.0 {
        out.delta_energy.abs() / f64::MIN_POSITIVE
    } else {
        Dd::from(out.delta_energy).sub(formula).to_f64().abs() / ulp(formula.to_f64())
    };

    let before = norm2(v).add(norm2(vs));
    let after = norm2(&out.v_prime).add(norm2(&out.vstar_prime));
    let mut under_impulse = Dd::ZERO;
    for k in 0..d {
        let u = Dd::from(v[k]).sub(Dd::from(vs[k]));
        let j = Dd::from(out.impulse[k]);
        under_impulse = under_impulse.add(u.mul(j).scale(-2.0)).add(j.mul(j).scale(2.0));
    }
    let rounding_budget: f64 = out.v_prime.iter().chain(&out.vstar_prime).map(|x| x.abs() * ulp(*x)).sum();
    let output_rounding = ratio(after.sub(before).sub(under_impulse).to_f64().abs(), rounding_budget);

    let eps = f64::EPSILON;
    let c = 0.5 * (1.0 + e) * normal_component(v, vs, omega).to_f64();
    let norm_defect = norm2(omega).sub(Dd::from(1.0)).to_f64().abs();
    let impulse_budget: f64 = (0..d)
        .map(|k| (out.v_prime[k] - out.vstar_prime[k]).abs() * (ulp(out.impulse[k]) + 4.0 * eps * out.impulse[k].abs()))
        .sum::<f64>()
        + 2.0 * c * c * norm_defect
        + ulp(formula.to_f64());
    let impulse_rounding = ratio(under_impulse.sub(formula).to_f64().abs(), impulse_budget);

    IdentityCheck { shared_impulse, momentum, booked_energy_ulps, output_rounding, impulse_rounding, float_sum_exact }
}

fn ratio(err: f64, budget: f64) -> f64 {
    if err == 0.0 {
        0.0
    } else {
        err / budget.max(f64::MIN_POSITIVE)
    }
}
