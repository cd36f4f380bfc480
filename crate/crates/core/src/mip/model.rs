use super::{IntegerProgram, MipBackend, MipError, Sense, SolveParams, SolveStatus};
use crate::instance::{Cost, TripId};
use crate::timenet::{LayeredNetwork, NodeKey};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("trip {0} has no trip arc in any layer")]
    EmptyCover(TripId),
    #[error(transparent)]
    Backend(#[from] MipError),
    #[error("backend returned a flow violating the model by {violation}")]
    Inconsistent { violation: f64 },
}

/// The integer multicommodity flow program of a layered network.
///
/// Column `columns[l][a]` carries the flow of vehicles from depot layer `l`
/// over arc `a` of that layer. Each station node has a conservation row and
/// each trip a cover row over its trip arcs in all layers. Flows are capped
/// at the trip count: some optimal flow splits into at most that many walks.
#[derive(Clone, Debug)]
pub struct FlowModel {
    pub program: IntegerProgram,
    pub columns: Vec<Vec<usize>>,
    pub cover_rows: Vec<usize>,
}

impl FlowModel {
    pub fn num_trips(&self) -> usize {
        self.cover_rows.len()
    }
}

pub fn build_model(network: &LayeredNetwork) -> Result<FlowModel, ModelError> {
    let mut program = IntegerProgram::default();
    let mut columns = Vec::with_capacity(network.layers.len());
    let mut trip_columns: Vec<Vec<usize>> = vec![Vec::new(); network.num_trips()];
    let cap = network.num_trips() as f64;

    for layer in &network.layers {
        let cols: Vec<usize> = layer
            .arcs
            .iter()
            .map(|a| program.add_column(a.cost as f64, if a.kind.trip().is_some() { cap.min(1.0) } else { cap }, true))
            .collect();

        let node_index: HashMap<NodeKey, usize> = layer
            .nodes
            .iter()
            .filter(|n| matches!(n, NodeKey::Station { .. }))
            .enumerate()
            .map(|(i, &n)| (n, i))
            .collect();
        let mut balance: Vec<Vec<(usize, f64)>> = vec![Vec::new(); node_index.len()];
        for (a, arc) in layer.arcs.iter().enumerate() {
            if let Some(&i) = node_index.get(&arc.tail) {
                balance[i].push((cols[a], 1.0));
            }
            if let Some(&i) = node_index.get(&arc.head) {
                balance[i].push((cols[a], -1.0));
            }
        }
        for coeffs in balance {
            program.add_row(coeffs, Sense::Eq, 0.0);
        }
        for (trip, arcs) in layer.trip_arcs.iter().enumerate() {
            trip_columns[trip].extend(arcs.iter().map(|&a| cols[a]));
        }
        columns.push(cols);
    }

    let mut cover_rows = Vec::with_capacity(trip_columns.len());
    for (trip, cols) in trip_columns.into_iter().enumerate() {
        if cols.is_empty() {
            return Err(ModelError::EmptyCover(TripId(trip as u32)));
        }
        cover_rows.push(program.rows.len());
        program.add_row(cols.into_iter().map(|c| (c, 1.0)).collect(), Sense::Eq, 1.0);
    }
    Ok(FlowModel { program, columns, cover_rows })
}

/// Integral arc flows of a solved flow model.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowSolution {
    pub status: SolveStatus,
    /// `flows[l][a]`; empty when the backend found no feasible flow.
    pub flows: Vec<Vec<i64>>,
    pub objective: Cost,
    /// Lower bound on the model optimum reported by the backend.
    pub dual_bound: f64,
}

impl FlowSolution {
    pub fn has_flow(&self) -> bool {
        !self.flows.is_empty()
    }

    /// Smallest integer not below the dual bound; valid since costs are integers.
    pub fn lower_bound(&self) -> Cost {
        if self.dual_bound.is_finite() {
            (self.dual_bound - 1e-6).ceil() as Cost
        } else if self.dual_bound > 0.0 {
            Cost::MAX
        } else {
            Cost::MIN
        }
    }
}

pub fn solve_model(
    model: &FlowModel,
    backend: &dyn MipBackend,
    params: &SolveParams,
) -> Result<FlowSolution, ModelError> {
    let sol = backend.solve(&model.program, params)?;
    if !sol.has_solution() {
        let objective = if sol.status == SolveStatus::Infeasible { Cost::MAX } else { 0 };
        return Ok(FlowSolution { status: sol.status, flows: Vec::new(), objective, dual_bound: sol.dual_bound });
    }
    let violation = model.program.max_violation(&sol.values);
    if violation > 1e-6 {
        return Err(ModelError::Inconsistent { violation });
    }
    let flows: Vec<Vec<i64>> = model
        .columns
        .iter()
        .map(|cols| cols.iter().map(|&c| sol.values[c].round() as i64).collect())
        .collect();
    let objective: Cost = model
        .columns
        .iter()
        .zip(&flows)
        .flat_map(|(cols, f)| cols.iter().zip(f).map(|(&c, &x)| model.program.objective[c] as Cost * x))
        .sum();
    Ok(FlowSolution { status: sol.status, flows, objective, dual_bound: sol.dual_bound.min(objective as f64) })
}
