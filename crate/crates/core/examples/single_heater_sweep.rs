//! Drive one heater at a time and fit the per-heater thermal coefficients.

use cca_core::calibration::fit_single_heater;
use cca_core::device::{generate_dataset, generate_device, DeviceRanges, NoiseSpec, Protocol};

fn main() -> cca_core::Result<()> {
    let device = generate_device(2, 8, &DeviceRanges::default())?;
    let sweep = generate_dataset(&device, &Protocol::ramps(10, 0), &NoiseSpec::default())?;
    println!("heater  alpha fit  alpha true  beta'/alpha to n+1");
    for heater in 0..8 {
        let records =
            sweep.records.iter().filter(|r| r.profile.driven().iter().all(|&h| h == heater)).cloned().collect();
        let fit = fit_single_heater(&sweep.with_records(records), heater)?;
        let ratio = fit.ratio(heater + 1).map(|r| format!("{r:.5}")).unwrap_or_else(|| "-".into());
        println!("{heater:6} {:10.5} {:11.5}  {ratio}", fit.alpha, device.model.alpha[heater]);
    }
    Ok(())
}
