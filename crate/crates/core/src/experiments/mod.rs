//! Monte-Carlo sweeps over the noise strength.

mod bounds;
mod clt;
mod moments;
mod moser;
mod runner;
mod schedule;

pub use bounds::{
    fit_moser_ln_r, fit_rate_constant, initial_moment_factor, moment_h_range, moment_scale, moser_bound, moser_r,
    moser_series, moser_zeta, rate_leading, rate_tail, MoserSeries,
};
pub use clt::{clt_experiment, CltReport, CltRow, CltSpec};
pub use moments::{moment_experiment, MomentReport, MomentRow};
pub use moser::{estimate_inf_dphi, moser_experiment, MoserReport, MoserRow, MoserSpec};
pub use runner::{pick_dt, RunMeta, RunSettings};
pub use schedule::{fixed_schedule, make_schedule, ScalingSchedule, ScheduleRow};
