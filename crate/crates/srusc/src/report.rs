//! JSON and CSV renderings of run results.

use serde_json::{json, Map, Value};
use srusc_core::metrics::MetricsReport;
use srusc_core::pipeline::{EigenCurve, RunReport};
use srusc_core::spectral::EigenMethod;
use srusc_core::synth::{Dataset, SynthData};

pub fn dataset_name(d: Dataset) -> &'static str {
    match d {
        Dataset::FourSpheres => "four-spheres",
        Dataset::ThreeCubes => "three-cubes",
    }
}

pub fn run_report_json(r: &RunReport) -> Value {
    let timings: Map<String, Value> = r.timings.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    json!({
        "method": r.method.name(),
        "rows": r.labels.rows(),
        "cols": r.labels.cols(),
        "k_used": r.k_used,
        "sigma_used": r.sigma_used,
        "sigma_grid": r.sigma_grid,
        "eigencurves": r.eigencurves.iter().map(|c| json!({
            "sigma": c.sigma,
            "eigenvalues": c.eigenvalues,
        })).collect::<Vec<_>>(),
        "timings_secs": timings,
        "config": {
            "knn_k": r.knn_k,
            "radius": r.radius,
            "k_max": r.k_max,
            "eigen_tol": r.eigen_tol,
        },
        "seed": r.seed,
        "kmeans_objective": r.kmeans_objective,
        "eigen_method": r.eigen_method.map(|m| match m {
            EigenMethod::BlockLanczos => "block_lanczos",
            EigenMethod::Dense => "dense",
        }),
        "warnings": r.warnings,
    })
}

pub fn metrics_json(m: &MetricsReport) -> Value {
    json!({
        "oa": m.oa,
        "aa": m.aa,
        "kappa": m.kappa,
        "alignment": m.alignment
            .iter()
            .enumerate()
            .map(|(p, g)| json!({"pred": p + 1, "gt": g}))
            .collect::<Vec<_>>(),
        "confusion": m.confusion.rows(),
    })
}

pub fn provenance_json(d: &SynthData) -> Value {
    let mut v = json!({
        "dataset": dataset_name(d.spec.dataset),
        "seed": d.spec.seed,
        "rows": d.cube.rows(),
        "cols": d.cube.cols(),
        "bands": d.cube.bands(),
        "generator": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
    });
    if d.spec.dataset == Dataset::ThreeCubes {
        v["swap_count"] = json!(d.spec.swap_count);
        v["swap_region"] = json!("centered half-size subwindow of each cube's block");
        v["swaps"] = d
            .swaps
            .iter()
            .map(|(a, b)| json!({"cube1": [a.row, a.col], "cube3": [b.row, b.col]}))
            .collect();
    }
    v
}

/// One row per scale: `sigma,lambda_1,...,lambda_m`.
pub fn eigencurves_csv(curves: &[EigenCurve]) -> String {
    let width = curves.iter().map(|c| c.eigenvalues.len()).max().unwrap_or(0);
    let mut out = String::from("sigma");
    for i in 1..=width {
        out.push_str(&format!(",lambda_{i}"));
    }
    out.push('\n');
    for c in curves {
        out.push_str(&format!("{:e}", c.sigma));
        for v in &c.eigenvalues {
            out.push_str(&format!(",{v:e}"));
        }
        out.push('\n');
    }
    out
}
