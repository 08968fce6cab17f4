//! Online walking planner: ZMP reference with DCM step adjustment, vertical
//! COM reference, support-constraint generation and the time-varying MPC.

pub mod gait;
pub mod horizon;
pub mod mpc;
pub mod step_adjust;
pub mod vertical;

pub use gait::{zmp_reference, Footstep, GaitClock, GaitSchedule, GaitTiming, Interval, Phase, WalkPattern};
pub use horizon::{build_horizon, AxisPlan, HorizonPlan, InputLimits, PlanSample};
pub use mpc::{assemble_qp, AxisOutput, ControlOutput, Controller, ControllerConfig, Estimate};
pub use step_adjust::{adjust_step, dcm_extrapolation, Reach, StepAdjustPolicy};
pub use vertical::{vertical_reference, VerticalParams, VerticalSample};
