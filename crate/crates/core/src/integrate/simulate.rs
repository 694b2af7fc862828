//! Config-driven box-scheme runs with diagnostics written as CSV.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::{LagrangianDensity, Potential};

use super::box_scheme::{BoxScheme, FieldState, Grid1P1};
use super::diagnostics::{cell_densities, energy_balance_residual, node_energy_flux, totals, DiagnosticsRow};
use super::exact::ExactSolution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub model: String,
    pub potential: String,
    pub grid: GridConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub length: f64,
    pub dt: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub sample_every: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { sample_every: 1 }
    }
}

impl Default for SimulationConfig {
    /// Sine-Gordon kink, `c = 0.5`, 1000 steps at CFL 0.5.
    fn default() -> Self {
        let mut params = BTreeMap::new();
        params.insert("c".to_string(), 0.5);
        params.insert("x0".to_string(), 20.0);
        Self {
            model: "nonlinear_wave".into(),
            potential: "sine_gordon".into(),
            grid: GridConfig {
                nx: 400,
                length: 40.0,
                dt: 0.05,
                t_end: 50.0,
            },
            initial: InitialConfig {
                name: "sg_kink".into(),
                params,
            },
            diagnostics: DiagnosticsConfig { sample_every: 10 },
        }
    }
}

impl SimulationConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn grid(&self) -> Result<Grid1P1> {
        let g = self.grid;
        Grid1P1::new(g.nx, g.length, g.dt, g.t_end)
    }

    pub fn lagrangian(&self) -> Result<LagrangianDensity> {
        if self.model != "nonlinear_wave" {
            return Err(Error::UnsupportedModel(format!(
                "simulation supports `nonlinear_wave`, got `{}`",
                self.model
            )));
        }
        let potential: Potential = self.potential.parse()?;
        Ok(LagrangianDensity::nonlinear_wave(1, 1, potential))
    }

    pub fn initial(&self) -> Result<ExactSolution> {
        ExactSolution::from_name(&self.initial.name, &self.initial.params)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub rows: Vec<DiagnosticsRow>,
    pub final_state: FieldState,
    pub steps: usize,
    pub max_newton_iterations: usize,
}

/// Writes diagnostics rows with round-trippable floats.
pub struct DiagnosticsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> DiagnosticsWriter<W> {
    pub fn new(w: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(w);
        inner.write_record(DiagnosticsRow::HEADER)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, row: &DiagnosticsRow) -> Result<()> {
        self.inner
            .write_record(row.fields().iter().map(|v| format!("{v:.16e}")))?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Runs the configured simulation; when `csv_path` is given the rows are
/// streamed there and whatever was produced is flushed even on failure.
pub fn simulate(config: &SimulationConfig, csv_path: Option<&Path>) -> Result<SimulationOutput> {
    let mut writer = match csv_path {
        Some(p) => Some(DiagnosticsWriter::new(File::create(p)?)?),
        None => None,
    };
    let result = run(config, writer.as_mut());
    if let Some(w) = writer.as_mut() {
        w.flush()?;
    }
    result
}

fn run(config: &SimulationConfig, mut writer: Option<&mut DiagnosticsWriter<File>>) -> Result<SimulationOutput> {
    let l = config.lagrangian()?;
    let grid = config.grid()?;
    let initial = config.initial()?;
    let every = config.diagnostics.sample_every.max(1);
    let scheme = BoxScheme::new(l.clone(), grid)?;
    let mut state = FieldState::from_section(&l, &initial.patch(), &grid, 0.0, vec![initial.twist()])?;
    let mut rows = Vec::new();
    let mut emit = |row: DiagnosticsRow, rows: &mut Vec<DiagnosticsRow>| -> Result<()> {
        if let Some(w) = writer.as_mut() {
            w.write(&row)?;
        }
        rows.push(row);
        Ok(())
    };
    let (e, m, a) = totals(&l, &state, &grid)?;
    emit(
        DiagnosticsRow {
            t: 0.0,
            energy: e,
            momentum: m,
            wave_action: a,
            max_div_residual: 0.0,
        },
        &mut rows,
    )?;
    let steps = grid.steps();
    let mut cells = cell_densities(&l, &state, &grid)?;
    let mut div_max = 0.0f64;
    let mut max_iter = 0;
    for step in 0..steps {
        let (next, info) = scheme.step(&state, step)?;
        max_iter = max_iter.max(info.iterations);
        let next_cells = cell_densities(&l, &next, &grid)?;
        let flux = node_energy_flux(&l, &state, &next, &grid)?;
        div_max = div_max.max(energy_balance_residual(&cells, &next_cells, &flux, scheme.dt(), grid.dx()));
        state = next;
        cells = next_cells;
        if (step + 1) % every == 0 || step + 1 == steps {
            let (e, m, a) = totals(&l, &state, &grid)?;
            emit(
                DiagnosticsRow {
                    t: state.t,
                    energy: e,
                    momentum: m,
                    wave_action: a,
                    max_div_residual: div_max,
                },
                &mut rows,
            )?;
            div_max = 0.0;
        }
    }
    Ok(SimulationOutput {
        rows,
        final_state: state,
        steps,
        max_newton_iterations: max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_through_toml() {
        let c = SimulationConfig::default();
        assert_eq!(SimulationConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = SimulationConfig::default().to_toml();
        text = text.replace("[grid]", "[grid]\nspacing = 2.0");
        let err = SimulationConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("spacing"), "{err}");
    }

    #[test]
    fn zero_data_keeps_diagnostics_constant() {
        let text = r#"
model = "nonlinear_wave"
potential = "sine_gordon"
[grid]
nx = 16
length = 8.0
dt = 0.1
t_end = 1.0
[initial]
name = "constant"
params = { value = 0.0 }
"#;
        let c = SimulationConfig::from_toml(text).unwrap();
        let out = simulate(&c, None).unwrap();
        assert_eq!(out.rows.len(), 11);
        for r in &out.rows {
            assert_eq!((r.energy, r.momentum, r.wave_action, r.max_div_residual), (0.0, 0.0, 0.0, 0.0));
        }
    }
}
