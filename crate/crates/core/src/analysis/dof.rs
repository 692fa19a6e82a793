//! Maximum symmetric DoF under Zipf popularity with the most popular objects
//! cached everywhere, and membership in the corresponding DoF region.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionParams {
    pub n: usize,
    pub cache_size: usize,
    /// Popularity of objects by rank, descending and normalized.
    pub popularity: Vec<f64>,
    /// Backhaul rate per BS at DoF scale.
    pub backhaul: f64,
    /// Cache read rate per BS at DoF scale.
    pub read_rate: f64,
    pub d_a: f64,
    pub d_b: f64,
}

impl RegionParams {
    pub fn objects(&self) -> usize {
        self.popularity.len()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Input(msg));
        if self.n == 0 {
            return fail("at least one BS is required".into());
        }
        if self.cache_size > self.objects() {
            return fail(format!(
                "cache size {} exceeds library {}",
                self.cache_size,
                self.objects()
            ));
        }
        if !(self.d_b >= 0.0 && self.d_b <= self.d_a) {
            return fail(format!("need 0 <= D_B <= D_A, got D_A={} D_B={}", self.d_a, self.d_b));
        }
        if !(self.backhaul >= 0.0) || !(self.read_rate >= 0.0) {
            return fail("rates must be non-negative".into());
        }
        let sum: f64 = self.popularity.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.popularity.windows(2).any(|w| w[0] < w[1]) {
            return fail("popularity must be normalized and descending".into());
        }
        Ok(())
    }

    /// Popularity mass of uncached objects.
    pub fn tail(&self) -> f64 {
        self.popularity[self.cache_size..].iter().sum()
    }

    /// Backhaul needed to serve everyone at `D_A` through CoMP.
    pub fn r_a_star(&self) -> f64 {
        self.n as f64 * self.d_a * self.tail()
    }

    /// Backhaul needed to serve everyone at `D_B` through coordinated transmission.
    pub fn r_b_star(&self) -> f64 {
        self.d_b * self.tail()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Backhaul suffices for full CoMP.
    Comp,
    /// Backhaul-limited, coordinated only.
    Coordinated,
    /// Time sharing between the two modes.
    Mixed,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Comp => "comp",
            Branch::Coordinated => "coordinated",
            Branch::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SumDof {
    /// Per-user DoF `d`.
    pub d_star: f64,
    pub alpha_star: f64,
    pub branch: Branch,
    pub n_times_d: f64,
    /// Library size times `d`, the literal form of the headline expression.
    pub k_times_d: f64,
    pub r_a_star: f64,
    pub r_b_star: f64,
}

/// Closed-form maximum symmetric DoF.
pub fn max_sum_dof(p: &RegionParams) -> Result<SumDof> {
    p.validate()?;
    let n = p.n as f64;
    let required = n * p.d_a;
    if p.read_rate < required {
        return Err(Error::UnsupportedRegime {
            required,
            actual: p.read_rate,
        });
    }
    let tau = p.tail();
    let (ra, rb) = (p.r_a_star(), p.r_b_star());
    let r_d = p.backhaul;

    let (d_star, alpha_star, branch) = if r_d >= ra {
        (p.d_a, 0.0, Branch::Comp)
    } else if r_d <= rb {
        (r_d / tau, 1.0, Branch::Coordinated)
    } else {
        let denom = ra - n * rb;
        let hat = (ra - n * r_d) / denom;
        let hat_ok = denom != 0.0 && (0.0..=1.0).contains(&hat) && (1.0 - hat) * ra / n + hat * rb <= hat * p.d_b;
        let alpha = if hat_ok {
            hat
        } else {
            (ra - r_d) / (ra - n * rb + (n - 1.0) * p.d_b)
        };
        ((1.0 - alpha) * p.d_a + alpha * p.d_b, alpha, Branch::Mixed)
    };
    Ok(SumDof {
        d_star,
        alpha_star,
        branch,
        n_times_d: n * d_star,
        k_times_d: p.objects() as f64 * d_star,
        r_a_star: ra,
        r_b_star: rb,
    })
}

/// Whether the system `a . y <= b` over two variables has a solution, by
/// checking every vertex of the arrangement. The set must be bounded.
pub fn feasible_2d(constraints: &[([f64; 2], f64)], tol: f64) -> bool {
    let satisfies = |y: [f64; 2]| {
        constraints
            .iter()
            .all(|(a, b)| a[0] * y[0] + a[1] * y[1] <= b + tol * (1.0 + b.abs()))
    };
    for i in 0..constraints.len() {
        for j in (i + 1)..constraints.len() {
            let ([a1, a2], b1) = constraints[i];
            let ([c1, c2], b2) = constraints[j];
            let det = a1 * c2 - a2 * c1;
            if det.abs() < 1e-14 {
                continue;
            }
            let y = [(b1 * c2 - a2 * b2) / det, (a1 * b2 - b1 * c1) / det];
            if satisfies(y) {
                return true;
            }
        }
    }
    false
}

/// Feasibility of per-user DoF `d` at time-sharing fraction `alpha`, in the
/// coordinated tail and head loads `(y_t, y_h)`.
fn reduced_feasible(p: &RegionParams, tau: f64, alpha: f64, d: f64) -> bool {
    let n = p.n as f64;
    let cons = [
        ([-1.0, 0.0], 0.0),
        ([1.0, 0.0], d * tau),
        ([0.0, -1.0], 0.0),
        ([0.0, 1.0], d * (1.0 - tau)),
        ([1.0, 1.0], alpha * p.d_b),
        ([-1.0, -1.0], (1.0 - alpha) * p.d_a - d),
        ([1.0 - n, 0.0], p.backhaul - n * d * tau),
    ];
    feasible_2d(&cons, 1e-12)
}

/// Largest feasible `d` at a fixed `alpha`, by bisection.
pub fn max_d_at_alpha(p: &RegionParams, alpha: f64) -> f64 {
    let tau = p.tail();
    let (mut lo, mut hi) = (0.0, p.d_a.max(p.d_b));
    if reduced_feasible(p, tau, alpha, hi) {
        return hi;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if reduced_feasible(p, tau, alpha, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Exhaustive search over `alpha` on a grid of step `step`.
pub fn grid_alpha_oracle(p: &RegionParams, step: f64) -> Result<(f64, f64)> {
    p.validate()?;
    let steps = (1.0 / step).round() as usize;
    let mut best = (0.0, 0.0);
    for i in 0..=steps {
        let alpha = i as f64 / steps as f64;
        let d = max_d_at_alpha(p, alpha);
        if d > best.0 {
            best = (d, alpha);
        }
    }
    Ok(best)
}

/// Membership of the DoF tuple `d[j][k]` in the region achievable with the
/// `cache_size` most demanded objects cached at every BS. Each user's
/// coordinated share is bounded by `alpha * D_B`, its CoMP share by
/// `(1 - alpha) * D_A`.
pub fn dof_region_membership(d: &[Vec<f64>], p: &RegionParams) -> Result<bool> {
    if d.len() != p.n || d.iter().any(|row| row.len() != p.objects()) {
        return Err(Error::Input(format!("DoF tuple must be {} x {}", p.n, p.objects())));
    }
    if d.iter().flatten().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::Input("DoF entries must be finite and non-negative".into()));
    }
    if p.cache_size > p.objects() || p.d_b > p.d_a || p.backhaul < 0.0 || p.read_rate < 0.0 {
        return Err(Error::Input("invalid region parameters".into()));
    }
    let k_total = p.objects();
    let mut demand = vec![0.0; k_total];
    for row in d {
        for (acc, &x) in demand.iter_mut().zip(row) {
            *acc += x;
        }
    }
    let mut order: Vec<usize> = (0..k_total).collect();
    order.sort_by(|&a, &b| demand[b].total_cmp(&demand[a]).then(a.cmp(&b)));
    let mut cached = vec![false; k_total];
    for &k in &order[..p.cache_size] {
        cached[k] = true;
    }
    let head: Vec<f64> = d
        .iter()
        .map(|row| row.iter().zip(&cached).filter(|c| *c.1).map(|c| c.0).sum())
        .collect();
    let total: Vec<f64> = d.iter().map(|row| row.iter().sum()).collect();

    let slack = |alpha: f64| -> f64 {
        let mut worst = f64::INFINITY;
        let comp: Vec<f64> = total.iter().map(|&t| (t - alpha * p.d_b).max(0.0)).collect();
        let comp_head: Vec<f64> = comp.iter().zip(&head).map(|(&m, &h)| m.min(h)).collect();
        let comp_tail: Vec<f64> = comp.iter().zip(&comp_head).map(|(&m, &h)| m - h).collect();
        for j in 0..p.n {
            worst = worst.min((1.0 - alpha) * p.d_a - comp[j]);
        }
        let tail_sum: f64 = comp_tail.iter().sum();
        let comp_sum: f64 = comp.iter().sum();
        for n in 0..p.n {
            let own_tail = total[n] - head[n];
            worst = worst.min(p.backhaul - (own_tail + tail_sum - comp_tail[n]));
            worst = worst.min(p.backhaul + p.read_rate - (total[n] + comp_sum - comp[n]));
        }
        worst
    };

    // The slack is concave in alpha: coarse grid, then golden-section refinement.
    let grid = 1000;
    let (mut best_i, mut best) = (0usize, f64::NEG_INFINITY);
    for i in 0..=grid {
        let s = slack(i as f64 / grid as f64);
        if s > best {
            best = s;
            best_i = i;
        }
    }
    let (mut lo, mut hi) = (
        best_i.saturating_sub(1) as f64 / grid as f64,
        (best_i + 1).min(grid) as f64 / grid as f64,
    );
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if slack(a) < slack(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    best = best.max(slack(0.5 * (lo + hi)));
    Ok(best >= -1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::zipf_popularity;

    fn example(r_d: f64) -> RegionParams {
        RegionParams {
            n: 2,
            cache_size: 2,
            popularity: zipf_popularity(4, 1.0).unwrap(),
            backhaul: r_d,
            read_rate: 10.0,
            d_a: 1.0,
            d_b: 0.5,
        }
    }

    #[test]
    fn mixed_branch_by_hand() {
        let p = example(0.3);
        assert!((p.tail() - 0.28).abs() < 1e-12);
        assert!((p.r_a_star() - 0.56).abs() < 1e-12);
        assert!((p.r_b_star() - 0.14).abs() < 1e-12);
        let s = max_sum_dof(&p).unwrap();
        assert_eq!(s.branch, Branch::Mixed);
        assert!((s.alpha_star - 1.0 / 3.0).abs() < 1e-12);
        assert!((s.d_star - 5.0 / 6.0).abs() < 1e-12);
        let (oracle, _) = grid_alpha_oracle(&p, 1e-4).unwrap();
        assert!((oracle - 5.0 / 6.0).abs() < 1e-3);
    }

    #[test]
    fn comp_branch_when_backhaul_ample() {
        let s = max_sum_dof(&example(0.6)).unwrap();
        assert_eq!(s.branch, Branch::Comp);
        assert_eq!(s.d_star, 1.0);
    }

    #[test]
    fn full_cache_reaches_comp_dof() {
        let mut p = example(1e-6);
        p.cache_size = 4;
        assert_eq!(max_sum_dof(&p).unwrap().d_star, 1.0);
    }

    #[test]
    fn coordinated_branch_scales_with_backhaul() {
        let s = max_sum_dof(&example(0.1)).unwrap();
        assert_eq!(s.branch, Branch::Coordinated);
        assert!((s.d_star - 0.1 / 0.28).abs() < 1e-12);
    }

    #[test]
    fn slow_storage_is_rejected() {
        let mut p = example(0.3);
        p.read_rate = 1.0;
        assert!(matches!(max_sum_dof(&p), Err(Error::UnsupportedRegime { .. })));
    }

    #[test]
    fn pure_comp_needs_full_backhaul() {
        let p = example(0.5);
        assert!(max_d_at_alpha(&p, 0.0) < 1.0);
        assert!((max_d_at_alpha(&example(0.56), 0.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn origin_is_in_region() {
        let p = example(0.0);
        assert!(dof_region_membership(&vec![vec![0.0; 4]; 2], &p).unwrap());
    }

    #[test]
    fn per_user_cap_is_enforced() {
        let p = example(100.0);
        let d = vec![vec![0.3, 0.3, 0.3, 0.2], vec![0.0; 4]];
        assert!(!dof_region_membership(&d, &p).unwrap());
    }

    #[test]
    fn negative_entries_are_rejected() {
        let p = example(0.3);
        let d = vec![vec![-0.1, 0.0, 0.0, 0.0], vec![0.0; 4]];
        assert!(matches!(dof_region_membership(&d, &p), Err(Error::Input(_))));
    }

    #[test]
    fn vertex_feasibility_basics() {
        let square = [
            ([1.0, 0.0], 1.0),
            ([-1.0, 0.0], 0.0),
            ([0.0, 1.0], 1.0),
            ([0.0, -1.0], 0.0),
        ];
        assert!(feasible_2d(&square, 0.0));
        let mut empty = square.to_vec();
        empty.push(([1.0, 1.0], -0.5));
        assert!(!feasible_2d(&empty, 0.0));
    }
}
