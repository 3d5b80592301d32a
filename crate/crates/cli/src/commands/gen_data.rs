use anyhow::{bail, Context};

use spade_core::data_io::{save_binary, save_csv};

use crate::args::GenDataArgs;
use crate::datasets::{is_csv, synthetic_suite};

pub fn run(a: &GenDataArgs) -> anyhow::Result<()> {
    if !is_csv(&a.out) && a.synthetic.proteins != 1 {
        bail!("the binary format holds one protein; pass --proteins 1 or a .csv path");
    }
    let data = synthetic_suite(&a.synthetic)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    if is_csv(&a.out) {
        save_csv(&a.out, &data)
    } else {
        save_binary(&a.out, &data[0])
    }
    .with_context(|| format!("writing {}", a.out.display()))?;
    for d in &data {
        let above = d.pics().iter().filter(|p| **p >= 8.0).count();
        println!(
            "{}: {} ligands, {} at PIC >= 8, max {:.2}",
            d.protein_id(),
            d.len(),
            above,
            d.pics().iter().copied().fold(f64::NEG_INFINITY, f64::max)
        );
    }
    println!("wrote {}", a.out.display());
    Ok(())
}
