//! Generated tables for `docs/repro.md`. Regenerate with
//! `cargo run -p sasn --example repro_tables > docs/repro.md`.

use std::fmt::Write as _;

use ndarray::Array2;

use crate::encoder::{cumulative_receptive_fields, param_count, tdnn_forward, RECEPTIVE_FIELD};
use crate::features::FeatureMatrix;
use crate::numerics::{ParamId, ParameterStore};
use crate::N_MELS;

pub const REPRO_D_A: usize = 512;
pub const REPRO_HEADS: [usize; 3] = [5, 10, 20];
pub const REPRO_FRAMES: [usize; 4] = [15, 180, 300, 600];

fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Markdown with the per-tensor breakdown, the parameter-count table and the
/// input/output width table. Pure function of the code; no I/O.
pub fn emit_repro_tables() -> String {
    let mut md = String::new();
    md.push_str("# Reproduction tables\n\n");
    md.push_str("Generated by `cargo run -p sasn --example repro_tables`. Do not edit by hand;\n");
    md.push_str("`cargo test` fails if this file drifts from the code.\n\n");

    md.push_str(&format!(
        "## Tensor shapes (d_a = {REPRO_D_A}, d_r = 5)\n\n"
    ));
    md.push_str("| tensor | shape | scalars |\n|---|---|---:|\n");
    for id in ParamId::ALL {
        let (r, c) = id.shape(REPRO_D_A, 5);
        let _ = writeln!(md, "| {} | {r} × {c} | {} |", id.name(), thousands(r * c));
    }

    md.push_str(&format!("\n## Parameter count (d_a = {REPRO_D_A})\n\n"));
    md.push_str("| d_r | with TDNN biases | without |\n|---:|---:|---:|\n");
    for d_r in REPRO_HEADS {
        let _ = writeln!(
            md,
            "| {d_r} | {} | {} |",
            thousands(param_count(REPRO_D_A, d_r, true)),
            thousands(param_count(REPRO_D_A, d_r, false))
        );
    }

    let [l1, l2, l3] = cumulative_receptive_fields();
    md.push_str("\n## Frame widths\n\n");
    let _ = writeln!(
        md,
        "Receptive field after each TDNN layer: {l1}, {l2}, {l3}. An input of T frames\nyields T − {} output frames.\n",
        RECEPTIVE_FIELD - 1
    );
    md.push_str("| T | T' |\n|---:|---:|\n");
    // widths come from an actual forward pass, not from the formula above
    let params = ParameterStore::zeros(1, 1).expect("nonzero sizes");
    for t in REPRO_FRAMES {
        let feats =
            FeatureMatrix::new(Array2::zeros((N_MELS, t))).expect("zero features are valid");
        let out = tdnn_forward(&feats, &params).expect("width at or above receptive field");
        let _ = writeln!(md, "| {t} | {} |", out.frames());
    }
    md
}
