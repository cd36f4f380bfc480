use super::{IntegerProgram, IpSolution, MipBackend, MipError, Sense, SolveParams, SolveStatus};
use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, Solution, Variable};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

const INT_EPS: f64 = 1e-6;

/// Best-first branch and bound over LP relaxations solved with `microlp`.
///
/// Children are warm-started from their parent's simplex state. Each
/// branch dives on its up child first, which finds incumbents quickly on
/// flow problems.
#[derive(Clone, Debug)]
pub struct BranchAndBound {
    pub node_limit: usize,
}

impl Default for BranchAndBound {
    fn default() -> Self {
        BranchAndBound { node_limit: 1_000_000 }
    }
}

struct Node {
    bound: f64,
    depth: usize,
    lp: Solution,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap: smaller bound first, deeper first on ties.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(self.depth.cmp(&other.depth))
    }
}

fn lp_error(e: microlp::Error) -> MipError {
    match e {
        microlp::Error::Unbounded => MipError::Unbounded,
        other => MipError::Backend(other.to_string()),
    }
}

fn sense_op(s: Sense) -> ComparisonOp {
    match s {
        Sense::Le => ComparisonOp::Le,
        Sense::Ge => ComparisonOp::Ge,
        Sense::Eq => ComparisonOp::Eq,
    }
}

impl BranchAndBound {
    fn relaxation(program: &IntegerProgram) -> (Problem, Vec<Variable>) {
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<Variable> = program
            .objective
            .iter()
            .zip(&program.upper)
            .map(|(&c, &u)| lp.add_var(c, (0.0, u)))
            .collect();
        for row in &program.rows {
            let mut expr = LinearExpr::empty();
            for &(j, a) in &row.coeffs {
                expr.add(vars[j], a);
            }
            lp.add_constraint(expr, sense_op(row.sense), row.rhs);
        }
        (lp, vars)
    }

    fn most_fractional(program: &IntegerProgram, lp: &Solution, vars: &[Variable]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for (j, &v) in vars.iter().enumerate() {
            if !program.integer[j] {
                continue;
            }
            let x = *lp.var_value(v);
            let frac = (x - x.floor()).min(x.ceil() - x);
            if frac > INT_EPS && best.map_or(true, |(_, _, f)| frac > f + 1e-12) {
                best = Some((j, x, frac));
            }
        }
        best.map(|(j, x, _)| (j, x))
    }
}

impl MipBackend for BranchAndBound {
    fn name(&self) -> &'static str {
        "branch-and-bound"
    }

    fn solve(&self, program: &IntegerProgram, params: &SolveParams) -> Result<IpSolution, MipError> {
        let started = Instant::now();
        let integral = program.has_integral_objective();
        let tighten = |b: f64| if integral { (b - INT_EPS).ceil() } else { b };
        let (lp, vars) = Self::relaxation(program);

        let infeasible = || IpSolution {
            status: SolveStatus::Infeasible,
            values: Vec::new(),
            objective: f64::INFINITY,
            dual_bound: f64::INFINITY,
        };
        let root = match lp.solve() {
            Ok(s) => s,
            Err(microlp::Error::Infeasible) => return Ok(infeasible()),
            Err(e) => return Err(lp_error(e)),
        };

        let mut incumbent: Option<(f64, Vec<f64>)> = None;
        let mut open = BinaryHeap::new();
        open.push(Node { bound: tighten(root.objective()), depth: 0, lp: root });
        let mut processed = 0usize;
        let mut limited = false;

        while let Some(node) = open.peek() {
            if let Some((best, _)) = &incumbent {
                if node.bound >= best - params.tolerance.allowed_gap(*best) {
                    break;
                }
            }
            let over_time = params.time_limit.is_some_and(|l| started.elapsed() >= l);
            if over_time || processed >= self.node_limit {
                limited = true;
                break;
            }
            let node = open.pop().expect("peeked");
            processed += 1;

            // Dive: keep following the up branch, shelving the down branch.
            let mut current = node;
            loop {
                if let Some((best, _)) = &incumbent {
                    if current.bound >= best - INT_EPS {
                        break;
                    }
                }
                match Self::most_fractional(program, &current.lp, &vars) {
                    None => {
                        let values: Vec<f64> = vars
                            .iter()
                            .enumerate()
                            .map(|(j, &v)| {
                                let x = *current.lp.var_value(v);
                                if program.integer[j] {
                                    x.round()
                                } else {
                                    x
                                }
                            })
                            .collect();
                        let obj = program.evaluate(&values);
                        if incumbent.as_ref().map_or(true, |(b, _)| obj < *b) {
                            incumbent = Some((obj, values));
                        }
                        break;
                    }
                    Some((j, x)) => {
                        let depth = current.depth + 1;
                        let down = current.lp.clone().add_constraint([(vars[j], 1.0)], ComparisonOp::Le, x.floor());
                        match down {
                            Ok(s) => open.push(Node { bound: tighten(s.objective()), depth, lp: s }),
                            Err(microlp::Error::Infeasible) => {}
                            Err(e) => return Err(lp_error(e)),
                        }
                        match current.lp.add_constraint([(vars[j], 1.0)], ComparisonOp::Ge, x.ceil()) {
                            Ok(s) => current = Node { bound: tighten(s.objective()), depth, lp: s },
                            Err(microlp::Error::Infeasible) => break,
                            Err(e) => return Err(lp_error(e)),
                        }
                    }
                }
            }
        }

        let open_bound = open.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
        Ok(match incumbent {
            Some((objective, values)) => {
                let dual_bound = open_bound.min(objective);
                let status = if limited {
                    SolveStatus::TimeLimit
                } else if objective - dual_bound <= super::GAP_FLOOR {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::FeasibleWithinTolerance
                };
                IpSolution { status, values, objective, dual_bound }
            }
            None if limited => IpSolution {
                status: SolveStatus::TimeLimit,
                values: Vec::new(),
                objective: f64::INFINITY,
                dual_bound: open_bound,
            },
            None => infeasible(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mip::Tolerance;
    use proptest::prelude::*;

    fn knapsack(values: &[f64], weights: &[f64], cap: f64) -> IntegerProgram {
        let mut ip = IntegerProgram::default();
        for &v in values {
            ip.add_column(-v, 1.0, true);
        }
        ip.add_row(weights.iter().copied().enumerate().collect(), Sense::Le, cap);
        ip
    }

    fn brute_knapsack(values: &[f64], weights: &[f64], cap: f64) -> f64 {
        let n = values.len();
        (0..1u32 << n)
            .filter_map(|mask| {
                let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| weights[i]).sum();
                (w <= cap).then(|| -(0..n).filter(|i| mask >> i & 1 == 1).map(|i| values[i]).sum::<f64>())
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn small_knapsack() {
        let ip = knapsack(&[10.0, 13.0, 7.0, 8.0], &[4.0, 6.0, 3.0, 5.0], 10.0);
        let sol = BranchAndBound::default().solve(&ip, &SolveParams::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.objective, -23.0);
        assert!(ip.max_violation(&sol.values) < 1e-9);
    }

    #[test]
    fn infeasible_program() {
        let mut ip = IntegerProgram::default();
        let x = ip.add_column(1.0, 10.0, true);
        ip.add_row(vec![(x, 2.0)], Sense::Eq, 3.0);
        let sol = BranchAndBound::default().solve(&ip, &SolveParams::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
        assert!(!sol.has_solution());
    }

    #[test]
    fn loose_tolerance_still_bounds() {
        let ip = knapsack(&[10.0, 13.0, 7.0, 8.0, 9.0], &[4.0, 6.0, 3.0, 5.0, 4.0], 11.0);
        let params = SolveParams { tolerance: Tolerance::Absolute(5.0), time_limit: None };
        let sol = BranchAndBound::default().solve(&ip, &params).unwrap();
        let opt = brute_knapsack(&[10.0, 13.0, 7.0, 8.0, 9.0], &[4.0, 6.0, 3.0, 5.0, 4.0], 11.0);
        assert!(sol.dual_bound <= opt + 1e-9);
        assert!(sol.objective - opt <= 5.0 + 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn matches_enumeration(
            items in prop::collection::vec((1u32..30, 1u32..15), 1..9),
            cap in 5u32..40,
        ) {
            let values: Vec<f64> = items.iter().map(|i| i.0 as f64).collect();
            let weights: Vec<f64> = items.iter().map(|i| i.1 as f64).collect();
            let ip = knapsack(&values, &weights, cap as f64);
            let sol = BranchAndBound::default().solve(&ip, &SolveParams::default()).unwrap();
            prop_assert_eq!(sol.objective, brute_knapsack(&values, &weights, cap as f64));
            prop_assert_eq!(sol.status, SolveStatus::Optimal);
        }
    }
}
