use std::path::{Path, PathBuf};

use trialgen_core::{contour_grid, ContourGrid};

use crate::args::ContourArgs;
use crate::error::CliError;
use crate::io::{ensure_dir, fmt_num, CsvOut};

/// Long format, one row per grid cell, R²_τ varying slowest.
pub fn write_contour(dir: &Path, grid: &ContourGrid) -> Result<PathBuf, CliError> {
    let mut csv = CsvOut::new(dir.join("contour.csv"), &["r2_tau", "r2_s", "bound", "reversal"])?;
    for (i, &rt) in grid.r2_tau_axis.iter().enumerate() {
        for (j, &rs) in grid.r2_s_axis.iter().enumerate() {
            csv.row([
                fmt_num(rt),
                fmt_num(rs),
                fmt_num(grid.bound[i][j]),
                grid.reversal_mask[i][j].to_string(),
            ])?;
        }
    }
    csv.finish()
}

pub fn run(args: &ContourArgs) -> Result<(), CliError> {
    let grid = contour_grid(
        args.sigma_tau,
        args.var_s,
        args.r2_s_x,
        args.tau_x,
        args.resolution,
    )?;
    ensure_dir(&args.out_dir)?;
    println!("wrote {}", write_contour(&args.out_dir, &grid)?.display());
    Ok(())
}
