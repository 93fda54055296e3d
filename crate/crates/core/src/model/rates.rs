use rand::Rng;

use super::query::ThresholdPair;
use crate::error::{Error, Result};

/// Number of cells in the inverse-CDF table.
pub const CDF_CELLS: usize = 1 << 12;

/// Default minimum gap between consecutive breakpoint inequalities.
pub const DEFAULT_SEPARATION: f64 = 0.02;

const SIMPSON_STEPS: usize = 8;
const EPS: f64 = 1e-12;

/// Corner points of the trapezoid `f` that shapes the rate density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBreakpoints {
    pub qmin: f64,
    pub q1: f64,
    pub q2: f64,
    pub qmax: f64,
}

impl RateBreakpoints {
    pub fn new(qmin: f64, q1: f64, q2: f64, qmax: f64) -> Self {
        Self { qmin, q1, q2, qmax }
    }

    /// Narrow-gap preset for `B = (1 + eps) A`: `q1 = a - 2eps`, `q2 = b + 2eps`,
    /// and both ramps of width `sqrt(eps)`.
    pub fn epsilon_preset(thresholds: &ThresholdPair, eps: f64) -> Self {
        let q1 = thresholds.ratio_a() - 2.0 * eps;
        let q2 = thresholds.ratio_b() + 2.0 * eps;
        let ramp = eps.sqrt();
        Self {
            qmin: q1 - ramp,
            q1,
            q2,
            qmax: q2 + ramp,
        }
    }

    /// The trapezoid: 0 outside `(qmin, qmax)`, 1 on `[q1, q2]`, linear ramps between.
    pub fn f(&self, q: f64) -> f64 {
        if q <= self.qmin || q >= self.qmax {
            0.0
        } else if q < self.q1 {
            (q - self.qmin) / (self.q1 - self.qmin)
        } else if q <= self.q2 {
            1.0
        } else {
            (self.qmax - q) / (self.qmax - self.q2)
        }
    }

    fn ordered(&self) -> bool {
        0.0 < self.qmin && self.qmin < self.q1 && self.q1 < self.q2 && self.q2 < self.qmax && self.qmax < 1.0
    }
}

/// Outcome of [`validate_rate_breakpoints`]: one message per violated inequality.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BreakpointCheck {
    pub failures: Vec<String>,
}

impl BreakpointCheck {
    pub fn is_ok(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::Breakpoints(self.failures.join("; ")))
        }
    }
}

/// Checks `0 < qmin < q1 < (A - pool)/n` and `B/n < q2 < qmax < 1`, each step by
/// at least `separation`.
pub fn validate_rate_breakpoints(
    thresholds: &ThresholdPair,
    pool_bound: u32,
    bp: &RateBreakpoints,
    separation: f64,
) -> BreakpointCheck {
    let n = thresholds.n() as f64;
    let upper_q1 = (thresholds.lower() as f64 - pool_bound as f64) / n;
    let lower_q2 = thresholds.upper() as f64 / n;
    let chain = [
        ("0", 0.0, "qmin", bp.qmin),
        ("qmin", bp.qmin, "q1", bp.q1),
        ("q1", bp.q1, "(A-|L|)/n", upper_q1),
        ("B/n", lower_q2, "q2", bp.q2),
        ("q2", bp.q2, "qmax", bp.qmax),
        ("qmax", bp.qmax, "1", 1.0),
    ];
    let mut check = BreakpointCheck::default();
    for q in [bp.qmin, bp.q1, bp.q2, bp.qmax] {
        if !(q > 0.0 && q < 1.0) {
            check.failures.push(format!("rate {q} outside (0,1)"));
        }
    }
    for (lname, lo, hname, hi) in chain {
        if hi - lo < separation - EPS {
            check.failures.push(format!(
                "{lname} = {lo:.4} < {hname} = {hi:.4} needs a gap of {separation}"
            ));
        }
    }
    check
}

/// Rate density proportional to `f(q) / (q (1 - q))` on `[qmin, qmax]`.
#[derive(Debug, Clone)]
pub struct RateDistribution {
    bp: RateBreakpoints,
    c_nu: f64,
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl RateDistribution {
    pub fn new(bp: RateBreakpoints) -> Result<Self> {
        if !bp.ordered() {
            return Err(Error::Breakpoints(format!(
                "need 0 < qmin < q1 < q2 < qmax < 1, got {bp:?}"
            )));
        }
        let step = (bp.qmax - bp.qmin) / CDF_CELLS as f64;
        let grid: Vec<f64> = (0..=CDF_CELLS)
            .map(|i| if i == CDF_CELLS { bp.qmax } else { bp.qmin + step * i as f64 })
            .collect();
        let mut cdf = Vec::with_capacity(CDF_CELLS + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for w in grid.windows(2) {
            acc += integrate_unnormalized(&bp, w[0], w[1]);
            cdf.push(acc);
        }
        let total = acc;
        cdf.iter_mut().for_each(|c| *c /= total);
        Ok(Self {
            bp,
            c_nu: 1.0 / total,
            grid,
            cdf,
        })
    }

    /// Like [`RateDistribution::new`] but also enforces the threshold and pool constraints.
    pub fn validated(bp: RateBreakpoints, thresholds: &ThresholdPair, pool_bound: u32, separation: f64) -> Result<Self> {
        validate_rate_breakpoints(thresholds, pool_bound, &bp, separation).into_result()?;
        Self::new(bp)
    }

    pub fn breakpoints(&self) -> &RateBreakpoints {
        &self.bp
    }

    pub fn qmin(&self) -> f64 {
        self.bp.qmin
    }

    pub fn qmax(&self) -> f64 {
        self.bp.qmax
    }

    /// Normalising constant `C_nu`.
    pub fn c_nu(&self) -> f64 {
        self.c_nu
    }

    pub fn f(&self, q: f64) -> f64 {
        self.bp.f(q)
    }

    pub fn density(&self, q: f64) -> f64 {
        if q <= 0.0 || q >= 1.0 {
            return 0.0;
        }
        self.c_nu * self.bp.f(q) / (q * (1.0 - q))
    }

    /// Tabulated CDF, linear between knots.
    pub fn cdf(&self, q: f64) -> f64 {
        if q <= self.bp.qmin {
            return 0.0;
        }
        if q >= self.bp.qmax {
            return 1.0;
        }
        let i = self.grid.partition_point(|&g| g <= q).clamp(1, CDF_CELLS);
        let (g0, g1) = (self.grid[i - 1], self.grid[i]);
        let t = (q - g0) / (g1 - g0);
        self.cdf[i - 1] + t * (self.cdf[i] - self.cdf[i - 1])
    }

    /// Value of the tabulated CDF at its last knot, 1 by construction.
    pub fn table_total(&self) -> f64 {
        *self.cdf.last().unwrap()
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let i = self.cdf.partition_point(|&c| c < u).clamp(1, CDF_CELLS);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        let q = self.grid[i - 1] + t * (self.grid[i] - self.grid[i - 1]);
        q.clamp(self.bp.qmin, self.bp.qmax)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }

    /// `E_nu[g(q)]` by Simpson quadrature on each smooth piece.
    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        let h = |q: f64| g(q) * self.density(q);
        let pieces = [
            (self.bp.qmin, self.bp.q1),
            (self.bp.q1, self.bp.q2),
            (self.bp.q2, self.bp.qmax),
        ];
        pieces.iter().map(|&(a, b)| simpson(&h, a, b, 2048)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|q| q)
    }

    /// Splits `[qmin, qmax]` into `cells` equal-width cells and returns each
    /// midpoint with the probability mass of its cell.
    pub fn discretize(&self, cells: usize) -> Vec<(f64, f64)> {
        let step = (self.bp.qmax - self.bp.qmin) / cells as f64;
        (0..cells)
            .map(|i| {
                let lo = self.bp.qmin + step * i as f64;
                let hi = if i + 1 == cells { self.bp.qmax } else { lo + step };
                ((lo + hi) / 2.0, self.cdf(hi) - self.cdf(lo))
            })
            .collect()
    }
}

fn simpson(g: &impl Fn(f64) -> f64, a: f64, b: f64, steps: usize) -> f64 {
    let steps = steps + steps % 2;
    let h = (b - a) / steps as f64;
    let mut s = g(a) + g(b);
    for i in 1..steps {
        let x = a + h * i as f64;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(x);
    }
    s * h / 3.0
}

fn integrate_unnormalized(bp: &RateBreakpoints, a: f64, b: f64) -> f64 {
    let g = |q: f64| bp.f(q) / (q * (1.0 - q));
    let mut cuts = vec![a];
    for k in [bp.q1, bp.q2] {
        if k > a && k < b {
            cuts.push(k);
        }
    }
    cuts.push(b);
    cuts.windows(2).map(|w| simpson(&g, w[0], w[1], SIMPSON_STEPS)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RngHandle;
    use proptest::prelude::*;

    fn default_bp() -> RateBreakpoints {
        RateBreakpoints::new(0.1, 0.2, 0.55, 0.7)
    }

    // Closed-form antiderivatives of each piece of f(q)/(q(1-q)), via
    // 1/(q(1-q)) = 1/q + 1/(1-q).
    fn exact_mass(bp: &RateBreakpoints) -> f64 {
        let ramp_up = |q: f64| (-bp.qmin * q.ln() - (1.0 - bp.qmin) * (1.0 - q).ln()) / (bp.q1 - bp.qmin);
        let flat = |q: f64| q.ln() - (1.0 - q).ln();
        let ramp_down = |q: f64| (bp.qmax * q.ln() + (1.0 - bp.qmax) * (1.0 - q).ln()) / (bp.qmax - bp.q2);
        (ramp_up(bp.q1) - ramp_up(bp.qmin)) + (flat(bp.q2) - flat(bp.q1)) + (ramp_down(bp.qmax) - ramp_down(bp.q2))
    }

    // Mean in closed form: q f(q)/(q(1-q)) = f(q)/(1-q).
    fn exact_mean(bp: &RateBreakpoints) -> f64 {
        let up = |q: f64| (-(q - bp.qmin) - (1.0 - bp.qmin) * (1.0 - q).ln()) / (bp.q1 - bp.qmin);
        let flat = |q: f64| -(1.0 - q).ln();
        let down = |q: f64| (q + (1.0 - bp.qmax) * (1.0 - q).ln()) / (bp.qmax - bp.q2);
        let num = (up(bp.q1) - up(bp.qmin)) + (flat(bp.q2) - flat(bp.q1)) + (down(bp.qmax) - down(bp.q2));
        num / exact_mass(bp)
    }

    #[test]
    fn normalisation_matches_closed_form() {
        for bp in [default_bp(), RateBreakpoints::new(0.1, 0.2, 0.25, 0.35), RateBreakpoints::new(0.05, 0.15, 0.55, 0.7)] {
            let d = RateDistribution::new(bp).unwrap();
            assert!((d.c_nu() * exact_mass(&bp) - 1.0).abs() < 1e-9, "{bp:?}");
            assert!((d.table_total() - 1.0).abs() < 1e-9);
            assert!((d.expect(|_| 1.0) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn trapezoid_values() {
        let bp = default_bp();
        assert_eq!(bp.f(bp.qmin), 0.0);
        assert_eq!(bp.f(bp.qmax), 0.0);
        assert_eq!(bp.f(bp.q1), 1.0);
        assert_eq!(bp.f(bp.q2), 1.0);
        assert!((bp.f((bp.qmin + bp.q1) / 2.0) - 0.5).abs() < 1e-15);
        assert!((bp.f((bp.q2 + bp.qmax) / 2.0) - 0.5).abs() < 1e-15);
        assert_eq!(bp.f(0.05), 0.0);
        assert_eq!(bp.f(0.9), 0.0);
    }

    #[test]
    fn breakpoint_validation_examples() {
        let t = ThresholdPair::new(300, 500, 1000).unwrap();
        let ok = RateBreakpoints::new(0.05, 0.15, 0.55, 0.70);
        assert!(validate_rate_breakpoints(&t, 50, &ok, DEFAULT_SEPARATION).is_ok());
        let bad = RateBreakpoints::new(0.05, 0.26, 0.55, 0.70);
        let check = validate_rate_breakpoints(&t, 50, &bad, DEFAULT_SEPARATION);
        assert!(!check.is_ok());
        assert!(check.failures.iter().any(|f| f.contains("(A-|L|)/n")), "{check:?}");

        let fig = RateBreakpoints::new(0.1, 0.2, 0.25, 0.35);
        let t = ThresholdPair::new(2250, 2280, 10_000).unwrap();
        assert!(validate_rate_breakpoints(&t, 20, &fig, DEFAULT_SEPARATION).is_ok());
    }

    #[test]
    fn validation_flags_upper_side() {
        let t = ThresholdPair::new(300, 500, 1000).unwrap();
        let bp = RateBreakpoints::new(0.05, 0.15, 0.51, 0.99);
        let check = validate_rate_breakpoints(&t, 50, &bp, DEFAULT_SEPARATION);
        assert_eq!(check.failures.len(), 2, "{check:?}");
        assert!(check.into_result().is_err());
    }

    #[test]
    fn epsilon_preset_shape() {
        let t = ThresholdPair::new(3000, 3300, 10_000).unwrap();
        let bp = RateBreakpoints::epsilon_preset(&t, 0.01);
        assert!((bp.q1 - 0.28).abs() < 1e-12);
        assert!((bp.q2 - 0.35).abs() < 1e-12);
        assert!((bp.q1 - bp.qmin - 0.1).abs() < 1e-12);
        assert!((bp.qmax - bp.q2 - 0.1).abs() < 1e-12);
        assert!(RateDistribution::new(bp).is_ok());
    }

    #[test]
    fn sample_mean_matches_quadrature() {
        let bp = default_bp();
        let d = RateDistribution::new(bp).unwrap();
        let oracle = exact_mean(&bp);
        assert!((d.mean() - oracle).abs() < 1e-9);
        let var = d.expect(|q| (q - oracle).powi(2));
        let mut rng = RngHandle::new(1, 0).rng();
        let m = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..m {
            let q = d.sample(&mut rng);
            assert!((bp.qmin..=bp.qmax).contains(&q));
            sum += q;
        }
        let se = (var / m as f64).sqrt();
        assert!((sum / m as f64 - oracle).abs() < 3.0 * se, "mean {} vs {oracle}", sum / m as f64);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let d = RateDistribution::new(default_bp()).unwrap();
        for i in 1..100 {
            let u = i as f64 / 100.0;
            assert!((d.cdf(d.quantile(u)) - u).abs() < 1e-9);
        }
    }

    #[test]
    fn discretized_mass_sums_to_one() {
        let d = RateDistribution::new(default_bp()).unwrap();
        let cells = d.discretize(1024);
        let total: f64 = cells.iter().map(|c| c.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let mean: f64 = cells.iter().map(|c| c.0 * c.1).sum();
        assert!((mean - d.mean()).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn normalised_for_any_ordered_breakpoints(
            qmin in 0.01f64..0.3, a in 0.02f64..0.2, b in 0.02f64..0.2, c in 0.02f64..0.2,
        ) {
            let bp = RateBreakpoints::new(qmin, qmin + a, qmin + a + b, qmin + a + b + c);
            prop_assume!(bp.qmax < 0.99);
            let d = RateDistribution::new(bp).unwrap();
            prop_assert!((d.c_nu() * exact_mass(&bp) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn f_is_continuous(q in 0.0f64..1.0) {
            let bp = default_bp();
            let h = 1e-9;
            prop_assert!((bp.f(q + h) - bp.f(q)).abs() < 1e-6);
        }
    }
}
