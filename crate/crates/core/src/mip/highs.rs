use super::{IntegerProgram, IpSolution, MipBackend, MipError, Sense, SolveParams, SolveStatus, Tolerance, GAP_FLOOR};
use highs::{Col, HighsModelStatus, RowProblem};
use std::ffi::CString;

/// The HiGHS mixed-integer solver.
#[derive(Clone, Debug, Default)]
pub struct HighsBackend;

fn double_info(model: &highs::SolvedModel, name: &str) -> Option<f64> {
    let key = CString::new(name).ok()?;
    let mut value = 0.0;
    // SAFETY: the pointer comes from a live solved model and `key` outlives the call.
    let status = unsafe { highs_sys::Highs_getDoubleInfoValue(model.as_ptr(), key.as_ptr(), &mut value) };
    (status == 0).then_some(value)
}

fn int_info(model: &highs::SolvedModel, name: &str) -> Option<i64> {
    let key = CString::new(name).ok()?;
    let mut value: highs_sys::HighsInt = 0;
    // SAFETY: as above.
    let status = unsafe { highs_sys::Highs_getIntInfoValue(model.as_ptr(), key.as_ptr(), &mut value) };
    (status == 0).then_some(value as i64)
}

impl MipBackend for HighsBackend {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn solve(&self, program: &IntegerProgram, params: &SolveParams) -> Result<IpSolution, MipError> {
        let mut pb = RowProblem::new();
        let cols: Vec<Col> = (0..program.num_columns())
            .map(|j| pb.add_column_with_integrality(program.objective[j], 0.0..=program.upper[j], program.integer[j]))
            .collect();
        for row in &program.rows {
            let factors: Vec<(Col, f64)> = row.coeffs.iter().map(|&(j, a)| (cols[j], a)).collect();
            match row.sense {
                Sense::Le => pb.add_row(..=row.rhs, &factors),
                Sense::Ge => pb.add_row(row.rhs.., &factors),
                Sense::Eq => pb.add_row(row.rhs..=row.rhs, &factors),
            }
        }
        let has_integers = program.integer.iter().any(|&b| b);

        let mut model = pb.optimise(highs::Sense::Minimise);
        model.make_quiet();
        model.set_option("random_seed", 0);
        match params.tolerance {
            Tolerance::Relative(r) => {
                model.set_option("mip_rel_gap", r.max(0.0));
                model.set_option("mip_abs_gap", GAP_FLOOR);
            }
            Tolerance::Absolute(a) => {
                model.set_option("mip_rel_gap", 0.0);
                model.set_option("mip_abs_gap", a.max(GAP_FLOOR));
            }
        }
        if let Some(limit) = params.time_limit {
            model.set_option("time_limit", limit.as_secs_f64());
        }
        let solved = model.solve();

        let status = solved.status();
        let primal_ok = int_info(&solved, "primal_solution_status") == Some(2);
        let values: Vec<f64> = if primal_ok {
            solved
                .get_solution()
                .columns()
                .iter()
                .zip(&program.integer)
                .map(|(&x, &int)| if int { x.round() } else { x })
                .collect()
        } else {
            Vec::new()
        };
        let objective = if primal_ok { program.evaluate(&values) } else { f64::INFINITY };
        let dual_bound = if has_integers {
            double_info(&solved, "mip_dual_bound").unwrap_or(f64::NEG_INFINITY).min(objective)
        } else if primal_ok {
            objective
        } else {
            f64::NEG_INFINITY
        };

        let status = match status {
            HighsModelStatus::Optimal | HighsModelStatus::ModelEmpty if primal_ok || program.num_columns() == 0 => {
                if objective - dual_bound <= GAP_FLOOR || !has_integers {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::FeasibleWithinTolerance
                }
            }
            HighsModelStatus::Infeasible => SolveStatus::Infeasible,
            HighsModelStatus::Unbounded | HighsModelStatus::UnboundedOrInfeasible => {
                return Err(MipError::Unbounded);
            }
            HighsModelStatus::ReachedTimeLimit | HighsModelStatus::ReachedIterationLimit => SolveStatus::TimeLimit,
            other => return Err(MipError::Backend(format!("HiGHS returned {other:?}"))),
        };
        let (values, objective, dual_bound) = if status == SolveStatus::Infeasible {
            (Vec::new(), f64::INFINITY, f64::INFINITY)
        } else if program.num_columns() == 0 {
            (Vec::new(), 0.0, 0.0)
        } else {
            (values, objective, dual_bound)
        };
        Ok(IpSolution { status, values, objective, dual_bound })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mip::BranchAndBound;
    use proptest::prelude::*;

    fn assignment(costs: &[Vec<u32>]) -> IntegerProgram {
        let n = costs.len();
        let mut ip = IntegerProgram::default();
        for row in costs {
            for &c in row {
                ip.add_column(c as f64, 1.0, true);
            }
        }
        for i in 0..n {
            ip.add_row((0..n).map(|j| (i * n + j, 1.0)).collect(), Sense::Eq, 1.0);
            ip.add_row((0..n).map(|j| (j * n + i, 1.0)).collect(), Sense::Eq, 1.0);
        }
        ip
    }

    #[test]
    fn solves_assignment() {
        let ip = assignment(&[vec![4, 1, 3], vec![2, 0, 5], vec![3, 2, 2]]);
        let sol = HighsBackend.solve(&ip, &SolveParams::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.objective, 5.0);
        assert_eq!(sol.dual_bound, 5.0);
    }

    #[test]
    fn reports_infeasible() {
        let mut ip = IntegerProgram::default();
        let x = ip.add_column(1.0, 10.0, true);
        ip.add_row(vec![(x, 2.0)], Sense::Eq, 3.0);
        assert_eq!(HighsBackend.solve(&ip, &SolveParams::default()).unwrap().status, SolveStatus::Infeasible);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn agrees_with_branch_and_bound(costs in prop::collection::vec(prop::collection::vec(0u32..20, 4), 4)) {
            let ip = assignment(&costs);
            let a = HighsBackend.solve(&ip, &SolveParams::default()).unwrap();
            let b = BranchAndBound::default().solve(&ip, &SolveParams::default()).unwrap();
            prop_assert_eq!(a.objective, b.objective);
        }
    }
}
