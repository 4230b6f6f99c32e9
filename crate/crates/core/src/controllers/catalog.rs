use super::ControllerSpec;
use crate::dynamics::System;
use crate::error::{Error, Result};

// Constants are truncated to a few decimals; that is intentional.
const PENDULUM: &[(&str, &str)] = &[
    ("landajuela_a1", "-7.08*x1 - (13.39*x1 + 3.12*x2) / x0 + 0.27"),
    ("7A_AG", "-((1.074*(x2*x0) + 3.064*x1) / 0.482)"),
    ("9A_AG", "-((((1.303*x2 + 4.180*x1) * x0) + 0.364*x1) / 0.519)"),
    ("13A_AG", "(((x2*1.168 + x1*4.4618) * x0) / ((x2 * (-x2 * 0.014)) - 0.207))"),
    ("17A_AG", "(((0.567*x2 + 2.032*x1) * x0 * 1.381) / ((x2 * ((x2 * (x0*x0)) * -0.034)) - 0.112))"),
    ("19A_AG", "(((1.627*x2 + (x1 / 0.161)) * x0) / ((((x1 / 0.168) + 0.993*x2) * (-x2 * 0.085)) - 0.754))"),
    ("7A_CMA", "-((2.865*(x2*x0) + 6.973*x1) / 1.048)"),
    ("9A_CMA", "((((-105.902*x2 - 424.711*x1) * x0) + 12.033*x1) / 50.577)"),
    ("13A_CMA", "(((x2*31.252 + x1*122.785) * x0) / ((x2 * (-x2 * 1.426)) - 11.029))"),
    ("17A_CMA", "(((4.813*x2 + 11.061*x1) * x0 * 20.311) / ((x2 * (-(x2 * (x0*x0)) * 9.437)) - 15.478))"),
    ("19A_CMA", "(((7.943*x2 + (x1 / 0.070)) * x0) / ((((x1 / 1.567) - 0.335*x2) * (x2 * 0.540)) - 0.639))"),
];

const CARTPOLE: &[(&str, &str)] = &[
    ("cartpole_k17", "((x3*92.07) + 35.31*x4) / (((x4 * ((x3*14.61) + 2.56*x4)) * -3.52) - 12.62)"),
    ("cartpole_k19", "((x3*5.04) + 1.42*x4) / ((((-1.83*x4 + 1.35*x3) * ((x3*3.35) + 0.50*x4)) * 0.33) - 1.15)"),
    ("cartpole_k21", "((x3*6.76) + 3.62*x4) / (((((x3*3.25) + 0.66*x4) * ((x3*9.13) + 1.20*x4)) * -0.75) + -0.14)"),
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    PENDULUM.iter().chain(CARTPOLE).map(|(n, _)| *n).chain(["zero_pendulum", "zero_cartpole"])
}

/// Look up a controller from the built-in catalog.
pub fn builtin(name: &str) -> Result<ControllerSpec> {
    match name {
        "zero_pendulum" => return Ok(ControllerSpec::zero(System::Pendulum)),
        "zero_cartpole" => return Ok(ControllerSpec::zero(System::CartpoleSwingup)),
        _ => {}
    }
    if let Some((n, f)) = PENDULUM.iter().find(|(n, _)| *n == name) {
        return ControllerSpec::from_formula(n, System::Pendulum, f);
    }
    if let Some((n, f)) = CARTPOLE.iter().find(|(n, _)| *n == name) {
        return ControllerSpec::from_formula(n, System::CartpoleSwingup, f);
    }
    Err(Error::UnknownController(name.to_string()))
}
