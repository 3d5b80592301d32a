use std::path::Path;

use anyhow::{bail, Context};
use rayon::prelude::*;

use spade_core::data_io::{generate_synthetic, load_binary, load_csv, SyntheticConfig};
use spade_core::Dataset;

use crate::args::SyntheticArgs;

pub fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Every protein in a dataset file.
pub fn load(path: &Path) -> anyhow::Result<Vec<Dataset>> {
    let datasets = if is_csv(path) {
        load_csv(path).with_context(|| format!("reading {}", path.display()))?
    } else {
        vec![load_binary(path).with_context(|| format!("reading {}", path.display()))?]
    };
    if datasets.is_empty() {
        bail!("{} holds no ligands", path.display());
    }
    Ok(datasets)
}

pub fn synthetic_config(args: &SyntheticArgs, i: usize) -> SyntheticConfig {
    SyntheticConfig {
        protein_id: format!("syn{i:02}"),
        ligands: args.ligands,
        dim: args.dim,
        bit_density: args.density,
        frac_above_8: args.frac_above_8,
        frac_above_8_5: args.frac_above_8_5,
        seed: args.data_seed.wrapping_add(i as u64),
        ..SyntheticConfig::default()
    }
}

/// Proteins `syn00`, `syn01`, … generated in parallel, returned in order.
pub fn synthetic_suite(args: &SyntheticArgs) -> anyhow::Result<Vec<Dataset>> {
    (0..args.proteins)
        .into_par_iter()
        .map(|i| generate_synthetic(&synthetic_config(args, i)).context("generating synthetic protein"))
        .collect()
}
