//! Independent feasibility check. Reads the separation matrix directly and
//! shares nothing with the solver code paths.

use crate::model::{Assignment, FrequencyPlan, SolutionMetrics};
use crate::nfd::SeparationMatrix;

/// Verifies one index in `[1, N_f]` per link, every pairwise separation, and
/// the range cap when given.
///
/// `fail_count` counts links with a missing or out-of-plan index or at least
/// one violated separation. When only the range cap is broken, the links on
/// the highest used index are counted as failing so that `fail_count == 0`
/// exactly when the assignment is feasible.
pub fn check_feasibility(
    a: &Assignment,
    sep: &SeparationMatrix,
    plan: &FrequencyPlan,
    range_cap: Option<f64>,
) -> SolutionMetrics {
    let n = sep.len();
    let idx = a.indices();
    let mut failing = vec![false; n];
    if idx.len() != n {
        // wrong shape: every link lacks a well-defined index
        return SolutionMetrics {
            used_count: 0,
            range: 0.0,
            feasible: n == 0 && idx.is_empty(),
            fail_count: n.max(idx.len()),
        };
    }
    let n_f = plan.count();
    for (v, &k) in idx.iter().enumerate() {
        if k == 0 || k > n_f {
            failing[v] = true;
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let need = sep.get(i, j) as i64;
            if need == 0 {
                continue;
            }
            let gap = (idx[i] as i64 - idx[j] as i64).abs();
            if gap < need {
                failing[i] = true;
                failing[j] = true;
            }
        }
    }

    let mut distinct: Vec<u32> = idx.iter().copied().filter(|&k| k != 0).collect();
    distinct.sort_unstable();
    distinct.dedup();
    let range = match (distinct.first(), distinct.last()) {
        (Some(&lo), Some(&hi)) => (hi - lo) as f64 * plan.step + plan.bandwidth,
        _ => 0.0,
    };
    if let (Some(cap), Some(&hi)) = (range_cap, distinct.last()) {
        if range > cap + 1e-9 * cap.abs().max(1.0) {
            for (v, &k) in idx.iter().enumerate() {
                if k == hi {
                    failing[v] = true;
                }
            }
        }
    }
    let fail_count = failing.iter().filter(|&&f| f).count();
    SolutionMetrics {
        used_count: distinct.len(),
        range,
        feasible: fail_count == 0,
        fail_count,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan() -> FrequencyPlan {
        FrequencyPlan::new(0.0, 20.0, 1.0, 1.0).unwrap()
    }

    fn sep3() -> SeparationMatrix {
        SeparationMatrix::from_quantized(vec![0, 1, 2], 1.0, &[vec![0, 4, 0], vec![4, 0, 2], vec![0, 2, 0]])
    }

    #[test]
    fn feasible_assignment_passes() {
        let m = check_feasibility(&Assignment::new(vec![1, 5, 1]), &sep3(), &plan(), None);
        assert!(m.feasible);
        assert_eq!(m.fail_count, 0);
        assert_eq!(m.used_count, 2);
        assert_eq!(m.range, 5.0);
    }

    #[test]
    fn corrupted_boundary_fails_both_ends() {
        let m = check_feasibility(&Assignment::new(vec![1, 4, 10]), &sep3(), &plan(), None);
        assert!(!m.feasible);
        assert_eq!(m.fail_count, 2);
    }

    #[test]
    fn empty_instance_is_feasible() {
        let sep = SeparationMatrix::empty(vec![], 1.0);
        let m = check_feasibility(&Assignment::new(vec![]), &sep, &plan(), None);
        assert!(m.feasible);
        assert_eq!(m.fail_count, 0);
    }

    #[test]
    fn missing_and_out_of_plan_indices_fail() {
        let p = plan();
        let m = check_feasibility(&Assignment::new(vec![0, 9, 1]), &sep3(), &p, None);
        assert_eq!(m.fail_count, 1);
        let m = check_feasibility(&Assignment::new(vec![1, 9, p.count() + 1]), &sep3(), &p, None);
        assert_eq!(m.fail_count, 1);
        let m = check_feasibility(&Assignment::new(vec![1, 9]), &sep3(), &p, None);
        assert!(!m.feasible);
    }

    #[test]
    fn range_cap_is_enforced() {
        let a = Assignment::new(vec![1, 5, 1]);
        assert!(check_feasibility(&a, &sep3(), &plan(), Some(5.0)).feasible);
        let m = check_feasibility(&a, &sep3(), &plan(), Some(4.9));
        assert!(!m.feasible);
        assert_eq!(m.fail_count, 1);
    }
}
