//! Closed-form DoF analysis, exhaustive oracles and flow-balance auditing.

pub mod dof;
pub mod flow_balance;
pub mod oracles;

pub use dof::{dof_region_membership, grid_alpha_oracle, max_sum_dof, Branch, RegionParams, SumDof};
pub use flow_balance::{cache_key, check_conditional_flow_balance, FlowBalanceReport, FrameFlows};
pub use oracles::{brute_force_cache_oracle, brute_force_control_oracle};
