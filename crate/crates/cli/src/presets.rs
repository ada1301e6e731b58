//! Built-in experiment configs.

const W_GRID: &str = "[0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5]";

pub const NAMES: [&str; 8] = [
    "fig2-nontrivial",
    "fig2-trivial",
    "fig2-nontrivial-disorder",
    "fig2-trivial-disorder",
    "fig3-pump",
    "fig3-plateau",
    "chern-scan",
    "winding-scan",
];

fn quench(theta_pi: f64, disorder: bool) -> String {
    let d = if disorder {
        r#", "disorder": {"W": 0.2, "samples": 30}"#
    } else {
        ""
    };
    format!(
        r#"{{"model": {{"p": 2, "N": 8, "g0": 1, "g1": 1, "theta_pi": {theta_pi}}},
"protocol": {{"quench": {{"lengths": [4, 8, 16], "t_max": 50, "dt": 0.02}}}}{d}}}"#
    )
}

/// Config text of preset `name`.
pub fn preset(name: &str) -> Option<String> {
    let text = match name {
        "fig2-nontrivial" => quench(0.1, false),
        "fig2-trivial" => quench(0.9, false),
        "fig2-nontrivial-disorder" => quench(0.1, true),
        "fig2-trivial-disorder" => quench(0.9, true),
        "fig3-pump" => r#"{"model": {"p": 3, "N": 6, "g0": 1, "g1": 1},
"protocol": {"pump": {"omega": 0.39, "phi0_pi": 1, "cell": 3, "bands": [1, 2, 3]}}}"#
            .to_string(),
        "fig3-plateau" => format!(
            r#"{{"model": {{"p": 3, "N": 6, "g0": 1, "g1": 1}},
"protocol": {{"sweep": {{"parameter": "W", "values": {W_GRID},
  "experiment": {{"pump": {{"omega": 0.39, "cell": 3, "bands": [1, 2]}}}}}}}},
"disorder": {{"W": 0, "samples": 50}}}}"#
        ),
        "chern-scan" => format!(
            r#"{{"model": {{"p": 3, "N": 4, "g1": 1}},
"protocol": {{"sweep": {{"parameter": "g0", "values": {W_GRID},
  "experiment": {{"chern": {{"nq": 24, "ntheta": 24}}}}}}}}}}"#
        ),
        "winding-scan" => r#"{"model": {"p": 2, "N": 8, "g0": 1, "g1": 1},
"protocol": {"sweep": {"parameter": "theta_pi",
  "values": [0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9],
  "experiment": {"winding": {"nk": 256}}}}}"#
            .to_string(),
        _ => return None,
    };
    Some(text)
}
