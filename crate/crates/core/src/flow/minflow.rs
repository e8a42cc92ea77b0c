use alloc::vec::Vec;

use super::{minimize_pointwise_max, reachable_triplets, DesignOutcome, DesignReport, Objective};
use crate::mdp::MdpSpec;
use crate::{Error, Result, Table};

/// Per-triplet visit targets `c_h(s, a) >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoveringTarget(Table);

impl CoveringTarget {
    pub fn new(target: Table) -> Result<Self> {
        if let Some(i) = target.as_slice().iter().position(|c| !(*c >= 0.0) || !c.is_finite()) {
            let (h, s, a) = target.shape().unindex(i);
            return Err(Error::InvalidArgument(alloc::format!(
                "covering target must be finite and non-negative at (h={h}, s={s}, a={a})"
            )));
        }
        Ok(Self(target))
    }

    /// `value` on every reachable triplet and zero elsewhere.
    pub fn uniform_on_reachable(mdp: &MdpSpec, value: f64) -> Result<Self> {
        let (_, mask) = reachable_triplets(mdp);
        let values = mask.iter().map(|&m| if m { value } else { 0.0 }).collect();
        Self::new(Table::from_vec(mdp.shape(), values)?)
    }

    pub fn table(&self) -> &Table {
        &self.0
    }
}

/// `phi*(c)` and a minimal covering flow.
#[derive(Clone, Debug)]
pub struct MinFlow {
    pub value: f64,
    /// `eta = phi* · rho`: conserves flow with initial mass `phi*` and
    /// satisfies `eta >= c`.
    pub flow: Table,
    pub report: DesignReport,
}

/// `phi*(c) = min_{rho in Omega} max_{h,s,a} c_h(s,a) / rho_h(s,a)`, the
/// smallest total flow through the layered graph covering `c`.
pub fn min_flow_phi(mdp: &MdpSpec, target: &CoveringTarget, tol: f64) -> Result<MinFlow> {
    let c = target.table();
    let shape = mdp.shape();
    if c.shape() != shape {
        return Err(Error::Dimension(alloc::format!(
            "target shape {:?} does not match MDP shape {shape:?}",
            c.shape()
        )));
    }
    let (_, mask) = reachable_triplets(mdp);
    if let Some(i) = (0..mask.len()).find(|&i| !mask[i] && c.as_slice()[i] > 0.0) {
        let (h, s, a) = shape.unindex(i);
        return Err(Error::InfeasibleTarget { h, s, a });
    }

    let objectives: Vec<Objective> = c
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, &v)| {
            let mut single = Table::zeros(shape);
            single.as_mut_slice()[i] = v;
            Objective::inverse(single)
        })
        .collect();
    if objectives.is_empty() {
        let report = minimize_pointwise_max(mdp, &[Objective::inverse(Table::zeros(shape))], tol)?
            .into_report()
            .expect("zero objective is finite");
        return Ok(MinFlow { value: 0.0, flow: Table::zeros(shape), report });
    }
    let report = match minimize_pointwise_max(mdp, &objectives, tol)? {
        DesignOutcome::Solved(report) => report,
        DesignOutcome::Unbounded { h, s, a, .. } => return Err(Error::InfeasibleTarget { h, s, a }),
    };
    let value = report.value;
    let flow = report.optimizer.table().scale(value);
    Ok(MinFlow { value, flow, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Shape;
    use alloc::vec;

    #[test]
    fn bandit_closed_form() {
        let mdp = MdpSpec::bandit(&[0.0, 0.0]).unwrap();
        let ones = CoveringTarget::uniform_on_reachable(&mdp, 1.0).unwrap();
        assert!((min_flow_phi(&mdp, &ones, 1e-9).unwrap().value - 2.0).abs() < 1e-7);
        let c = CoveringTarget::new(Table::from_vec(mdp.shape(), vec![1.0, 3.0]).unwrap()).unwrap();
        let phi = min_flow_phi(&mdp, &c, 1e-9).unwrap();
        assert!((phi.value - 4.0).abs() < 1e-7);
        assert!((phi.flow.get(0, 0, 0) - 1.0).abs() < 1e-6);
        assert!(phi.flow.as_slice().iter().zip(c.table().as_slice()).all(|(e, c)| *e >= c * (1.0 - 1e-12)));
    }

    #[test]
    fn unreachable_target_rejected() {
        let shape = Shape::new(1, 2, 1).unwrap();
        let mdp = MdpSpec::new(shape, 0, vec![], vec![0.0, 0.0]).unwrap();
        let c = CoveringTarget::new(Table::from_vec(shape, vec![1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(min_flow_phi(&mdp, &c, 1e-6).unwrap_err(), Error::InfeasibleTarget { h: 0, s: 1, a: 0 });
    }

    #[test]
    fn zero_target() {
        let mdp = MdpSpec::bandit(&[0.0, 0.0]).unwrap();
        let c = CoveringTarget::uniform_on_reachable(&mdp, 0.0).unwrap();
        assert_eq!(min_flow_phi(&mdp, &c, 1e-6).unwrap().value, 0.0);
    }

    #[test]
    fn branching_flow() {
        // s0 splits evenly into s0/s1 at stage 2; covering both stage-2
        // states once needs a unit of flow through each branch.
        let shape = Shape::new(2, 2, 1).unwrap();
        let mdp = MdpSpec::new(shape, 0, vec![0.5, 0.5, 0.5, 0.5], vec![0.0; 4]).unwrap();
        let c = CoveringTarget::new(Table::from_vec(shape, vec![0.0, 0.0, 1.0, 1.0]).unwrap()).unwrap();
        assert!((min_flow_phi(&mdp, &c, 1e-9).unwrap().value - 2.0).abs() < 1e-7);
    }
}
