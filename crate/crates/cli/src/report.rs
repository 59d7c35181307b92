//! Stable JSON report schema and human-readable rendering.
//!
//! Field names and nesting are fixed; the machine-readable description lives
//! in `schema/report.schema.json`.

use serde::Serialize;
use std::time::Duration;
use tensor_dnn::{ApproxReport, CopositivityVerdict, SolveStatus};

#[derive(Serialize)]
pub struct ResidualsJson {
    pub primal_psd: f64,
    pub primal_nn: f64,
    pub affine: f64,
    pub rel_gap: f64,
}

#[derive(Serialize)]
pub struct SolverJson {
    pub f_dnn_raw: f64,
    pub iters: usize,
    pub status: String,
    pub residuals: ResidualsJson,
}

#[derive(Serialize)]
pub struct ApproxJson {
    pub kind: &'static str,
    pub lambda: f64,
    pub f_dnn: f64,
    pub f_app: f64,
    pub apperr: f64,
    pub apperrnm: f64,
    pub sigma2: f64,
    pub tight: bool,
    pub zero_tensor: bool,
    pub x_star: Vec<Vec<f64>>,
    pub best_tensor_norm_sq: f64,
    pub wall_time_ms: u128,
    pub wall_time: String,
}

#[derive(Serialize)]
pub struct CopositJson {
    pub kind: &'static str,
    pub verdict: String,
    pub f_dnn: f64,
    pub f_app: f64,
    pub wall_time_ms: u128,
    pub wall_time: String,
}

pub fn status_str(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Converged => "converged",
        SolveStatus::MaxIters => "max_iters",
        SolveStatus::NumericalFailure => "numerical_failure",
    }
}

/// `h:mm:ss` wall time, sub-second durations rendered as seconds.
pub fn hms(d: Duration) -> String {
    let secs = d.as_secs_f64();
    if secs < 60.0 {
        return format!("{secs:.2}");
    }
    let total = d.as_secs();
    let (h, m, s) = (total / 3600, (total % 3600) / 60, total % 60);
    if h > 0 {
        format!("{h}:{m:02}:{s:02}")
    } else {
        format!("{m}:{s:02}")
    }
}

pub fn approx_json(rep: &ApproxReport) -> ApproxJson {
    ApproxJson {
        kind: "approx",
        lambda: rep.lambda,
        f_dnn: rep.extraction.f_dnn,
        f_app: rep.extraction.f_app,
        apperr: rep.extraction.apperr,
        apperrnm: rep.extraction.apperrnm,
        sigma2: rep.extraction.sigma2,
        tight: rep.extraction.tight,
        zero_tensor: rep.extraction.zero_tensor,
        x_star: rep.extraction.x_star.blocks.clone(),
        best_tensor_norm_sq: rep.best_tensor_norm_sq,
        wall_time_ms: rep.wall_time.as_millis(),
        wall_time: hms(rep.wall_time),
    }
}

pub fn solver_json(rep: &ApproxReport) -> SolverJson {
    SolverJson {
        f_dnn_raw: rep.solver.f_dnn_raw,
        iters: rep.solver.iters,
        status: status_str(rep.solver.status).to_string(),
        residuals: ResidualsJson {
            primal_psd: rep.solver.residuals.primal_psd,
            primal_nn: rep.solver.residuals.primal_nn,
            affine: rep.solver.residuals.affine,
            rel_gap: rep.solver.residuals.rel_gap,
        },
    }
}

#[derive(Serialize)]
pub struct ApproxJsonFull {
    #[serde(flatten)]
    pub report: ApproxJson,
    pub solver: SolverJson,
}

pub fn coposit_json(v: &CopositivityVerdict, wall: Duration) -> CopositJson {
    CopositJson {
        kind: "coposit",
        verdict: v.verdict.to_string(),
        f_dnn: v.f_dnn,
        f_app: v.f_app,
        wall_time_ms: wall.as_millis(),
        wall_time: hms(wall),
    }
}

pub fn print_approx_text(rep: &ApproxReport) {
    let e = &rep.extraction;
    println!("lambda          {:.6}", rep.lambda);
    println!("f_dnn           {:.6}", e.f_dnn);
    println!("f_app           {:.6}", e.f_app);
    println!("apperr          {:.4e}", e.apperr);
    println!("apperrnm        {:.4e}", e.apperrnm);
    println!("tight           {} (sigma2 = {:.3e})", e.tight, e.sigma2);
    println!("zero_tensor     {}", e.zero_tensor);
    for (g, b) in e.x_star.blocks.iter().enumerate() {
        let comps: Vec<String> = b.iter().map(|v| format!("{v:.4}")).collect();
        println!("x_star[{}]       ({})", g + 1, comps.join(", "));
    }
    println!("residual_norm2  {:.6e}", rep.best_tensor_norm_sq);
    println!(
        "solver          {} iters, status {}, max residual {:.2e}",
        rep.solver.iters,
        status_str(rep.solver.status),
        rep.solver
            .residuals
            .primal_psd
            .max(rep.solver.residuals.primal_nn)
    );
    println!(
        "time            {} ({} ms)",
        hms(rep.wall_time),
        rep.wall_time.as_millis()
    );
}
