use crate::harness::trace::Trace;

/// Tolerance on the support bounds when counting violations.
pub const VIOLATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metrics {
    pub max_tracking_error: [f64; 2],
    pub hard_violations: usize,
    pub slack_activations: usize,
    pub max_dcm_support_dist: f64,
    pub completed: bool,
    /// Row index and reason when the run stopped early.
    pub abort: Option<(usize, String)>,
}

impl Metrics {
    pub fn from_trace(trace: &Trace, completed: bool) -> Self {
        let mut m = Metrics {
            completed,
            ..Default::default()
        };
        for row in &trace.rows {
            let mut violated = false;
            let mut softened = false;
            for (axis, a) in row.axes.iter().enumerate() {
                m.max_tracking_error[axis] = m.max_tracking_error[axis].max((a.zmp_true - a.zmp_ref).abs());
                violated |= a.zmp_true > a.zmp_hi + VIOLATION_TOL || a.zmp_true < a.zmp_lo - VIOLATION_TOL;
                softened |= a.qp_status != "optimal";
            }
            m.hard_violations += usize::from(violated);
            m.slack_activations += usize::from(softened);
            m.max_dcm_support_dist = m.max_dcm_support_dist.max(row.dcm_support_dist);
        }
        m
    }

    /// Success in the sense of the CLI exit code.
    pub fn is_clean(&self) -> bool {
        self.completed && self.hard_violations == 0
    }
}
