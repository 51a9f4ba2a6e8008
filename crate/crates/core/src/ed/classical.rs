//! Exhaustive enumeration of sz configurations at zero field.

use super::model::SpinModel;
use super::operator::IsingOperator;

/// Minimal Ising energy and every configuration attaining it (to a relative
/// rounding tolerance). The transverse field of the model is ignored.
pub fn classical_ground_states(model: &SpinModel) -> (f64, Vec<u32>) {
    let op = IsingOperator::from_model(&model.with_field(0.0));
    let energies = op.diagonal();
    let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-10 * model.norm_bound().max(1.0);
    let states = energies
        .iter()
        .enumerate()
        .filter(|(_, e)| **e - e0 <= tol)
        .map(|(b, _)| b as u32)
        .collect();
    (e0, states)
}

pub fn classical_ground_count(model: &SpinModel) -> (f64, usize) {
    let (e0, states) = classical_ground_states(model);
    (e0, states.len())
}
