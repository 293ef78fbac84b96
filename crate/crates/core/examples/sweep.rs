//! Runs all four regimes over several seeds on a small problem and prints the
//! summary table. Pass a directory to keep per-run artifacts.
//!
//! cargo run --release --example sweep -- [out_dir]

use learned_sensing::data::{SyntheticDataset, SyntheticParams};
use learned_sensing::optics::MicroscopeConfig;
use learned_sensing::train::{run_sweep, summary_csv, Hyperparams, PreparedDataset, Regime, SweepOptions};

fn main() -> learned_sensing::Result<()> {
    let synthetic = SyntheticParams { n_per_class: 20, augment_translations: 2, grid_n: 64, canvas_n: 32, seed: 0 };
    let data =
        PreparedDataset::new(&SyntheticDataset::generate(synthetic)?, &MicroscopeConfig::mini(), [0.6, 0.2, 0.2], 0)?;
    let hyper = Hyperparams { epochs: 3, batch_size: 8, ..Default::default() };
    let opts = SweepOptions { out_dir: std::env::args().nth(1).map(Into::into), progress: true, ..Default::default() };
    let summaries = run_sweep(&Regime::ALL, 3, &data, &hyper, &opts)?;
    print!("{}", summary_csv(&summaries, None));
    Ok(())
}
