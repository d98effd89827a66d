//! Nearest-neighbour crosstalk ratio and the shape of the thermal shift
//! produced by a single heater.

use cca_core::device::{generate_device, DeviceRanges};
use cca_core::thermal::{delta_mu, eta, eta_at, orbit_table, VoltageProfile};

fn main() -> cca_core::Result<()> {
    let device = generate_device(4, 8, &DeviceRanges::default())?;
    let model = device.model.without_offsets();
    println!("eta = {}", eta(&model, 3)?);
    for v in [0.2, 0.5, 0.8] {
        println!("eta from shifts at {v} V = {:.6}", eta_at(&model, 3, v)?);
    }
    let shifts = delta_mu(&model, &VoltageProfile::single(8, 3, 0.6)?)?;
    println!("shift per site with heater 3 at 0.6 V (nm):");
    for (n, s) in shifts.iter().enumerate() {
        println!("  {n}: {s:+.6}");
    }
    let table = orbit_table();
    println!("{} cross-term orbits:", table.n_orbits());
    for k in 0..table.n_orbits() {
        println!("  {k:2}: {:?}", table.representative(k));
    }
    Ok(())
}
