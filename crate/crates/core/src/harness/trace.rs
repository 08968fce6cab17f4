//! Per-cycle record of a closed-loop run and its CSV form.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AxisRecord {
    pub zmp_ref: f64,
    /// ZMP of the plant under its true pendulum frequency.
    pub zmp_true: f64,
    pub zmp_measured: f64,
    pub zmp_lo: f64,
    pub zmp_hi: f64,
    pub pos: f64,
    pub vel: f64,
    pub acc: f64,
    pub dcm: f64,
    pub jerk: f64,
    pub qp_status: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TraceRow {
    pub time: f64,
    pub axes: [AxisRecord; 2],
    pub z_ref: f64,
    pub step: usize,
    /// Distance from the DCM to the nearest foot in contact.
    pub dcm_support_dist: f64,
    pub landing: [f64; 2],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

const AXIS_FIELDS: [&str; 11] = [
    "zmp_ref",
    "zmp_true",
    "zmp_measured",
    "zmp_lo",
    "zmp_hi",
    "com_pos",
    "com_vel",
    "com_acc",
    "dcm",
    "jerk",
    "qp_status",
];

pub fn csv_header() -> String {
    let mut cols = vec!["time".to_string()];
    for axis in ["x", "y"] {
        cols.extend(AXIS_FIELDS.iter().map(|f| format!("{axis}_{f}")));
    }
    cols.extend(
        ["z_ref", "step", "dcm_support_dist", "landing_x", "landing_y"]
            .iter()
            .map(|s| s.to_string()),
    );
    cols.join(",")
}

fn num(out: &mut String, v: f64) {
    // Nine significant digits.
    let _ = write!(out, "{v:.8e}");
}

impl TraceRow {
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        num(&mut s, self.time);
        for a in &self.axes {
            for v in [
                a.zmp_ref,
                a.zmp_true,
                a.zmp_measured,
                a.zmp_lo,
                a.zmp_hi,
                a.pos,
                a.vel,
                a.acc,
                a.dcm,
                a.jerk,
            ] {
                s.push(',');
                num(&mut s, v);
            }
            s.push(',');
            s.push_str(a.qp_status);
        }
        s.push(',');
        num(&mut s, self.z_ref);
        let _ = write!(s, ",{}", self.step);
        for v in [self.dcm_support_dist, self.landing[0], self.landing[1]] {
            s.push(',');
            num(&mut s, v);
        }
        s
    }
}

impl Trace {
    pub fn to_csv(&self) -> String {
        let mut s = csv_header();
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.to_csv());
            s.push('\n');
        }
        s
    }
}

pub fn emit_csv(trace: &Trace, path: &Path) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(trace.to_csv().as_bytes()).map_err(io)?;
    Ok(())
}
