//! Experiment configuration: presets, TOML files and `section.key=value`
//! overrides, resolved in that order, then validated eagerly.

// Checks are written as `!(x > 0.0)` so that NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use ddlab_core::diagnostics::cone_check;
use ddlab_core::evolve::{Dealias, Integrator, OneSidedData, SolverConfig, Tail};
use ddlab_core::weights::{build_cutoff_family, CutoffFamily};
use ddlab_core::{Grid, Model};
use serde::{Deserialize, Serialize};

use crate::LabError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    PolyDecayZk,
    ExpDecayZk,
    PolyDecayKdv,
    ExpDecayKdv,
    SolitonValidate,
    LinearGrowth,
    PsidoSuite,
    WeightsSuite,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 8] = [
        ExperimentId::PolyDecayZk,
        ExperimentId::ExpDecayZk,
        ExperimentId::PolyDecayKdv,
        ExperimentId::ExpDecayKdv,
        ExperimentId::SolitonValidate,
        ExperimentId::LinearGrowth,
        ExperimentId::PsidoSuite,
        ExperimentId::WeightsSuite,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::PolyDecayZk => "poly-decay-zk",
            ExperimentId::ExpDecayZk => "exp-decay-zk",
            ExperimentId::PolyDecayKdv => "poly-decay-kdv",
            ExperimentId::ExpDecayKdv => "exp-decay-kdv",
            ExperimentId::SolitonValidate => "soliton-validate",
            ExperimentId::LinearGrowth => "linear-growth",
            ExperimentId::PsidoSuite => "psido-suite",
            ExperimentId::WeightsSuite => "weights-suite",
        }
    }

    /// The evolution model, for experiments that evolve a single grid.
    pub fn model(self) -> Option<Model> {
        match self {
            ExperimentId::PolyDecayZk | ExperimentId::ExpDecayZk | ExperimentId::LinearGrowth => Some(Model::Zk),
            ExperimentId::PolyDecayKdv | ExperimentId::ExpDecayKdv => Some(Model::Kdv),
            _ => None,
        }
    }

    pub fn is_decay(self) -> bool {
        matches!(
            self,
            ExperimentId::PolyDecayZk | ExperimentId::ExpDecayZk | ExperimentId::PolyDecayKdv | ExperimentId::ExpDecayKdv
        )
    }

    pub fn is_exponential(self) -> bool {
        matches!(self, ExperimentId::ExpDecayZk | ExperimentId::ExpDecayKdv)
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self, LabError> {
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| LabError::Config(format!("unknown experiment '{s}'")))
    }
}

/// Box lengths and point counts, one entry per axis or a single entry for
/// an isotropic grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub box_length: Vec<f64>,
    pub points: Vec<usize>,
}

impl GridSection {
    fn iso(box_length: f64, points: usize) -> GridSection {
        GridSection { box_length: vec![box_length], points: vec![points] }
    }

    pub fn build(&self, dim: usize) -> Result<Arc<Grid>, String> {
        let expand = |v: &[f64]| if v.len() == 1 { vec![v[0]; dim] } else { v.to_vec() };
        let lengths = expand(&self.box_length);
        let points: Vec<usize> = if self.points.len() == 1 { vec![self.points[0]; dim] } else { self.points.clone() };
        if lengths.len() != dim || points.len() != dim {
            return Err(format!(
                "grid needs 1 or {dim} entries for box_length and points, got {} and {}",
                self.box_length.len(),
                self.points.len()
            ));
        }
        Grid::new(&lengths, &points, dim).map_err(|e| e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub dt: f64,
    pub t_end: f64,
    pub dealias: Dealias,
    pub integrator: Integrator,
    pub snapshot_stride: usize,
    /// Every `save_every`-th recorded snapshot is written to disk.
    pub save_every: usize,
}

impl SolverSection {
    pub fn solver_config(&self, model: Model) -> SolverConfig {
        SolverConfig {
            dealias: self.dealias,
            integrator: self.integrator,
            snapshot_stride: self.snapshot_stride,
            ..SolverConfig::new(model, self.dt, self.t_end)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSection {
    /// Polynomial weight exponent.
    pub r: f64,
    /// Exponential weight rate.
    pub b: f64,
    pub eps: f64,
    pub tau: f64,
    pub sigma: [f64; 2],
    pub nu: f64,
    pub kappa: f64,
    pub delta: f64,
    /// Weight exponent of the control diagnostic, expected to diverge.
    pub control_r: f64,
    /// Spacing of the regularity grid `s ∈ {0, s_step, …, ⌊2r⌋}`.
    pub s_step: f64,
    pub radii_start: f64,
    pub radii_step: f64,
    pub radii_count: usize,
    /// Largest derivative order of the exponential scan.
    pub beta_max: u32,
}

impl WeightSection {
    pub fn cutoff(&self) -> Result<CutoffFamily, String> {
        build_cutoff_family(self.eps, self.tau).map_err(|e| e.to_string())
    }

    pub fn s_grid(&self) -> Vec<f64> {
        let k = (2.0 * self.r).floor();
        let n = (k / self.s_step).round() as usize;
        (0..=n).map(|i| (i as f64 * self.s_step).min(k)).collect()
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.radii_count).map(|k| self.radii_start + self.radii_step * k as f64).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailKind {
    Poly,
    Exp,
}

/// One-sided initial data; see [`OneSidedData`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub amplitude: f64,
    pub tail: TailKind,
    /// `ρ` of a polynomial tail or `b` of an exponential one.
    pub decay: f64,
    pub left_power: f64,
    pub scale: f64,
    pub blend: f64,
    pub cut_right: f64,
    pub cut_left: f64,
    pub transverse_width: f64,
    pub carrier: f64,
}

impl DataSection {
    pub fn one_sided(&self, sigma: [f64; 2]) -> OneSidedData {
        OneSidedData {
            amplitude: self.amplitude,
            sigma,
            tail: match self.tail {
                TailKind::Poly => Tail::Poly { rho: self.decay },
                TailKind::Exp => Tail::Exp { b: self.decay },
            },
            left_power: self.left_power,
            scale: self.scale,
            blend: self.blend,
            cut_right: self.cut_right,
            cut_left: self.cut_left,
            transverse_width: self.transverse_width,
            carrier: self.carrier,
        }
    }
}

/// Weighted energy identity checked under time-step refinement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySection {
    pub enabled: bool,
    pub grid: GridSection,
    pub dts: Vec<f64>,
    pub t_end: f64,
    pub eps: f64,
    pub tau: f64,
    pub nu: f64,
    pub kappa: f64,
    /// Initial data `amplitude · exp(-|x|²/width²)`.
    pub amplitude: f64,
    pub width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolitonSection {
    /// Wave speed of both solitons.
    pub c: f64,
    pub kdv_grid: GridSection,
    pub kdv_x0: f64,
    pub kdv_dt: f64,
    pub kdv_t_end: f64,
    pub zk_shift: f64,
    pub zk_dt: f64,
    pub zk_t_end: f64,
    /// Grid of the scaling-law check, finer than the main grid because the
    /// scaled profile is sharper.
    pub scaling_grid: GridSection,
    pub scaling_c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSection {
    pub r_values: Vec<f64>,
    pub t_start: f64,
    pub t_stop: f64,
    pub t_step: f64,
    /// Gaussian data `exp(-|x|²/2w²)`.
    pub width: f64,
}

impl LinearSection {
    pub fn times(&self) -> Vec<f64> {
        let n = ((self.t_stop - self.t_start) / self.t_step).round() as usize;
        (0..=n).map(|k| self.t_start + self.t_step * k as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsidoSection {
    pub oracle_points: usize,
    pub oracle_box: f64,
    pub composition_grid: GridSection,
    pub max_terms: usize,
    pub continuity_box: f64,
    pub continuity_points: usize,
    pub continuity_refined_points: usize,
    pub interpolation_grid: GridSection,
    pub ensemble_count: usize,
    pub slack: f64,
    pub commutator_grid: GridSection,
    pub commutator_eps: f64,
    pub commutator_tau: f64,
    pub commutator_offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSuiteSection {
    /// `(ε, τ)` pairs checked for the cutoff properties.
    pub cutoffs: Vec<[f64; 2]>,
    pub samples: usize,
    pub b: f64,
    pub etas: Vec<f64>,
    pub truncation_levels: Vec<f64>,
    pub truncation_powers: Vec<f64>,
    /// A plateau holds when no level exceeds this factor times the first.
    pub plateau_factor: f64,
}

/// A fully resolved experiment configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub grid: GridSection,
    pub solver: SolverSection,
    pub weights: WeightSection,
    pub data: DataSection,
    pub energy: EnergySection,
    pub soliton: SolitonSection,
    pub linear: LinearSection,
    pub psido: PsidoSection,
    pub weights_suite: WeightsSuiteSection,
}

impl ExperimentConfig {
    /// Desk-scale defaults for `id`.
    pub fn preset(id: ExperimentId) -> ExperimentConfig {
        let zk = matches!(id, ExperimentId::PolyDecayZk | ExperimentId::ExpDecayZk);
        let kdv = matches!(id, ExperimentId::PolyDecayKdv | ExperimentId::ExpDecayKdv);
        let exp = id.is_exponential();
        let grid = match id {
            _ if kdv => GridSection::iso(80.0, 512),
            ExperimentId::LinearGrowth => GridSection::iso(256.0, 256),
            ExperimentId::SolitonValidate => GridSection::iso(64.0, 256),
            _ => GridSection::iso(80.0, 256),
        };
        let solver = SolverSection {
            dt: if kdv { 0.005 } else { 0.01 },
            t_end: 1.0,
            dealias: Dealias::TwoThirds,
            integrator: Integrator::Etdrk4,
            snapshot_stride: 1,
            save_every: if kdv { 20 } else { 10 },
        };
        let weights = WeightSection {
            r: 2.0,
            b: 0.5,
            eps: 1.0,
            tau: 5.0,
            sigma: [1.0, 0.0],
            nu: 0.1,
            kappa: -1.0,
            delta: 0.1,
            control_r: 4.0,
            s_step: 0.5,
            radii_start: 4.0,
            radii_step: 2.0,
            radii_count: 12,
            beta_max: 4,
        };
        let data = DataSection {
            amplitude: 0.1,
            tail: if exp { TailKind::Exp } else { TailKind::Poly },
            decay: if exp { 0.75 } else { 3.25 },
            left_power: 0.5,
            scale: if exp { 10.0 } else { 6.0 },
            blend: if exp { 6.0 } else { 4.0 },
            cut_right: 24.0,
            cut_left: 16.0,
            transverse_width: 4.0,
            carrier: if exp { 0.6 } else { 0.0 },
        };
        let energy = EnergySection {
            enabled: matches!(id, ExperimentId::PolyDecayZk | ExperimentId::PolyDecayKdv),
            grid: if zk || !kdv {
                GridSection { box_length: vec![60.0, 60.0], points: vec![512, 128] }
            } else {
                GridSection::iso(100.0, 1024)
            },
            dts: vec![0.04, 0.02, 0.01],
            t_end: 0.4,
            eps: 3.0,
            tau: 15.0,
            nu: 0.5,
            kappa: 9.0,
            amplitude: 0.5,
            width: 2.0,
        };
        let soliton = SolitonSection {
            c: 1.0,
            kdv_grid: GridSection::iso(200.0, 1024),
            kdv_x0: -20.0,
            kdv_dt: 0.005,
            kdv_t_end: 1.0,
            zk_shift: -10.0,
            zk_dt: 0.005,
            zk_t_end: 0.5,
            scaling_grid: GridSection::iso(64.0, 512),
            scaling_c: 4.0,
        };
        let linear = LinearSection { r_values: vec![0.5, 1.0, 2.0], t_start: 1.0, t_stop: 8.0, t_step: 0.25, width: 2.5 };
        let psido = PsidoSection {
            oracle_points: 16,
            oracle_box: 12.0,
            composition_grid: GridSection::iso(30.0, 64),
            max_terms: 3,
            continuity_box: 40.0,
            continuity_points: 64,
            continuity_refined_points: 128,
            interpolation_grid: GridSection::iso(40.0, 64),
            ensemble_count: 100,
            slack: 1.05,
            commutator_grid: GridSection::iso(40.0, 64),
            commutator_eps: 5.0,
            commutator_tau: 25.0,
            commutator_offset: 5.0,
        };
        let weights_suite = WeightsSuiteSection {
            cutoffs: vec![[0.5, 5.0], [1.0, 5.0], [1.0, 15.0], [3.0, 15.0]],
            samples: 2048,
            b: 0.5,
            etas: vec![1.0, 0.1, 0.01, 0.0],
            truncation_levels: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            truncation_powers: vec![0.25, 0.5, 0.75],
            plateau_factor: 1.5,
        };
        ExperimentConfig {
            experiment: id,
            seed: 1,
            output: None,
            grid,
            solver,
            weights,
            data,
            energy,
            soliton,
            linear,
            psido,
            weights_suite,
        }
    }

    /// Preset for the file's experiment, overlaid with the file and then
    /// with `overrides` of the form `section.key=value`, `key=value` or deeper dotted paths.
    pub fn resolve(file: Option<&str>, experiment: Option<ExperimentId>, overrides: &[String]) -> Result<Self, LabError> {
        let file_table: toml::Table = match file {
            Some(text) => text.parse().map_err(|e: toml::de::Error| LabError::Config(e.to_string()))?,
            None => toml::Table::new(),
        };
        let parsed_overrides = overrides.iter().map(|o| parse_override(o)).collect::<Result<Vec<_>, _>>()?;
        let from_overrides = parsed_overrides
            .iter()
            .find(|(path, _)| path.len() == 1 && path[0] == "experiment")
            .and_then(|(_, v)| v.as_str().map(str::to_string));
        let id = match (experiment, from_overrides, file_table.get("experiment")) {
            (Some(id), _, _) => id,
            (None, Some(s), _) => s.parse()?,
            (None, None, Some(v)) => v
                .as_str()
                .ok_or_else(|| LabError::Config("'experiment' must be a string".into()))?
                .parse()?,
            (None, None, None) => return Err(LabError::Config("no experiment given".into())),
        };
        let mut value = toml::Value::try_from(ExperimentConfig::preset(id)).map_err(|e| LabError::Config(e.to_string()))?;
        merge(&mut value, toml::Value::Table(file_table));
        for (path, v) in parsed_overrides {
            set_path(&mut value, &path, v)?;
        }
        if let Some(t) = value.as_table_mut() {
            t.insert("experiment".into(), toml::Value::String(id.as_str().into()));
        }
        value.try_into().map_err(|e: toml::de::Error| LabError::Config(e.to_string()))
    }

    pub fn load(path: &Path, experiment: Option<ExperimentId>, overrides: &[String]) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        ExperimentConfig::resolve(Some(&text), experiment, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Every violated precondition of the operations this experiment
    /// invokes. Conditions only knowable mid-run (seam contact, non-finite
    /// states, ground-state convergence) are checked at run time.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let id = self.experiment;
        if id.is_decay() {
            let model = id.model().expect("decay experiments evolve one model");
            self.check_evolution(model, &mut v);
            self.check_weights(model, &mut v);
            self.check_data(&mut v);
            if self.energy.enabled {
                self.check_energy(model, &mut v);
            }
        }
        match id {
            ExperimentId::SolitonValidate => self.check_soliton(&mut v),
            ExperimentId::LinearGrowth => {
                if let Err(e) = self.grid.build(2) {
                    v.push(format!("grid: {e}"));
                }
                let l = &self.linear;
                if l.r_values.is_empty() || l.r_values.iter().any(|r| !(*r >= 0.0)) {
                    v.push("linear.r_values must be nonempty and nonnegative".into());
                }
                if !(l.t_step > 0.0 && l.t_stop > l.t_start && l.t_start >= 0.0) {
                    v.push("linear times need 0 <= t_start < t_stop and t_step > 0".into());
                }
                if !(l.width > 0.0) {
                    v.push("linear.width must be positive".into());
                }
            }
            ExperimentId::PsidoSuite => self.check_psido(&mut v),
            ExperimentId::WeightsSuite => self.check_weights_suite(&mut v),
            _ => {}
        }
        v
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(LabError::Validation(v))
        }
    }

    fn check_evolution(&self, model: Model, v: &mut Vec<String>) {
        match self.grid.build(model.dim()) {
            Ok(g) => v.extend(self.solver.solver_config(model).violations(&g).into_iter().map(|m| format!("solver: {m}"))),
            Err(e) => v.push(format!("grid: {e}")),
        }
        if self.solver.save_every == 0 {
            v.push("solver.save_every must be at least 1".into());
        }
    }

    fn check_weights(&self, model: Model, v: &mut Vec<String>) {
        let w = &self.weights;
        if let Err(e) = w.cutoff() {
            v.push(format!("weights: {e}"));
        }
        let sigma = &w.sigma[..model.dim()];
        match cone_check(sigma) {
            Ok(rep) if !rep.holds() => v.push(format!("weights: sigma = {sigma:?} violates the cone condition")),
            Err(e) => v.push(format!("weights: {e}")),
            _ => {}
        }
        if model == Model::Kdv && w.sigma[1] != 0.0 {
            v.push("weights: a 1D sigma must have a zero second component".into());
        }
        if !(w.nu > 0.0) {
            v.push(format!("weights: nu = {} must be positive", w.nu));
        }
        if !(w.delta > 0.0 && w.delta < self.solver.t_end) {
            v.push(format!("weights: delta = {} must lie in (0, t_end)", w.delta));
        }
        if self.experiment.is_exponential() {
            if !(w.b > 0.0) {
                v.push(format!("weights: b = {} must be positive", w.b));
            }
            if w.beta_max > ddlab_core::spectral::DERIVATIVE_CAP {
                v.push(format!("weights: beta_max = {} exceeds the derivative cap", w.beta_max));
            }
        } else {
            if !((2.0 * w.r).floor() >= 1.0) {
                v.push(format!("weights: r = {} must be at least 1/2", w.r));
            }
            if !(w.s_step > 0.0) {
                v.push("weights: s_step must be positive".into());
            }
            if !(w.control_r > w.r) {
                v.push(format!("weights: control_r = {} must exceed r = {}", w.control_r, w.r));
            }
            if w.radii_count < 2 || !(w.radii_step > 0.0) {
                v.push("weights: truncation scan needs radii_count >= 2 and radii_step > 0".into());
            }
        }
    }

    fn check_data(&self, v: &mut Vec<String>) {
        let d = &self.data;
        for (name, val) in [
            ("scale", d.scale),
            ("blend", d.blend),
            ("cut_right", d.cut_right),
            ("cut_left", d.cut_left),
            ("transverse_width", d.transverse_width),
            ("decay", d.decay),
        ] {
            if !(val > 0.0 && val.is_finite()) {
                v.push(format!("data: {name} = {val} must be positive"));
            }
        }
        if !d.amplitude.is_finite() || !d.carrier.is_finite() || !d.left_power.is_finite() {
            v.push("data: amplitude, carrier and left_power must be finite".into());
        }
        if self.experiment.is_exponential() != (d.tail == TailKind::Exp) {
            v.push(format!("data: tail {:?} does not match experiment {}", d.tail, self.experiment));
        }
    }

    fn check_energy(&self, model: Model, v: &mut Vec<String>) {
        let e = &self.energy;
        if let Err(m) = build_cutoff_family(e.eps, e.tau) {
            v.push(format!("energy: {m}"));
        }
        if e.dts.len() < 2 {
            v.push("energy: needs at least two time steps".into());
        }
        if e.dts.windows(2).any(|w| (w[0] / w[1] - 2.0).abs() > 1e-12) {
            v.push("energy: consecutive dts must halve".into());
        }
        match e.grid.build(model.dim()) {
            Ok(g) => {
                for &dt in &e.dts {
                    let cfg = SolverConfig::new(model, dt, e.t_end);
                    v.extend(cfg.violations(&g).into_iter().map(|m| format!("energy: {m}")));
                    if cfg.steps() < 2 {
                        v.push(format!("energy: dt = {dt} leaves fewer than two steps"));
                    }
                }
            }
            Err(m) => v.push(format!("energy grid: {m}")),
        }
        if !(e.width > 0.0) {
            v.push("energy: width must be positive".into());
        }
    }

    fn check_soliton(&self, v: &mut Vec<String>) {
        let s = &self.soliton;
        if !(s.c > 0.0) || !(s.scaling_c > 0.0) {
            v.push("soliton: wave speeds must be positive".into());
        }
        match self.grid.build(2) {
            Ok(g) => {
                v.extend(SolverConfig::new(Model::Zk, s.zk_dt, s.zk_t_end).violations(&g).into_iter().map(|m| format!("soliton zk: {m}")))
            }
            Err(e) => v.push(format!("grid: {e}")),
        }
        match s.kdv_grid.build(1) {
            Ok(g) => v.extend(
                SolverConfig::new(Model::Kdv, s.kdv_dt, s.kdv_t_end).violations(&g).into_iter().map(|m| format!("soliton kdv: {m}")),
            ),
            Err(e) => v.push(format!("soliton.kdv_grid: {e}")),
        }
        if let Err(e) = s.scaling_grid.build(2) {
            v.push(format!("soliton.scaling_grid: {e}"));
        }
    }

    fn check_psido(&self, v: &mut Vec<String>) {
        let p = &self.psido;
        for (name, g) in [
            ("composition_grid", &p.composition_grid),
            ("interpolation_grid", &p.interpolation_grid),
            ("commutator_grid", &p.commutator_grid),
        ] {
            if let Err(e) = g.build(1) {
                v.push(format!("psido.{name}: {e}"));
            }
        }
        if !(2..=4).contains(&p.max_terms) {
            v.push(format!("psido: max_terms = {} outside 2..=4", p.max_terms));
        }
        if p.ensemble_count < 2 {
            v.push("psido: ensemble_count must be at least 2".into());
        }
        if !(p.slack >= 1.0) {
            v.push(format!("psido: slack = {} below 1", p.slack));
        }
        if p.continuity_refined_points <= p.continuity_points {
            v.push("psido: continuity_refined_points must exceed continuity_points".into());
        }
        if p.oracle_points < 4 {
            v.push("psido: oracle_points must be at least 4".into());
        }
        if let Err(e) = build_cutoff_family(p.commutator_eps, p.commutator_tau) {
            v.push(format!("psido commutator: {e}"));
        }
    }

    fn check_weights_suite(&self, v: &mut Vec<String>) {
        let w = &self.weights_suite;
        for [eps, tau] in &w.cutoffs {
            if let Err(e) = build_cutoff_family(*eps, *tau) {
                v.push(format!("weights_suite: {e}"));
            }
        }
        if w.samples < 16 {
            v.push("weights_suite: samples must be at least 16".into());
        }
        if !(w.b > 0.0) {
            v.push(format!("weights_suite: b = {} must be positive", w.b));
        }
        if w.etas.iter().any(|e| !(*e >= 0.0)) {
            v.push("weights_suite: etas must be nonnegative".into());
        }
        if w.truncation_levels.iter().any(|n| !(*n >= 1.0)) || w.truncation_levels.is_empty() {
            v.push("weights_suite: truncation levels must be >= 1".into());
        }
    }
}

fn parse_override(s: &str) -> Result<(Vec<String>, toml::Value), LabError> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| LabError::Config(format!("override '{s}' is not of the form key=value")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.iter().any(String::is_empty) {
        return Err(LabError::Config(format!("override key '{key}' has an empty component")));
    }
    // bare words are strings; everything else uses TOML literal syntax
    let value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    Ok((path, value))
}

fn set_path(root: &mut toml::Value, path: &[String], value: toml::Value) -> Result<(), LabError> {
    let mut node = root;
    for key in &path[..path.len() - 1] {
        node = node
            .get_mut(key.as_str())
            .filter(|n| n.is_table())
            .ok_or_else(|| LabError::Config(format!("unknown section '{key}'")))?;
    }
    let table = node.as_table_mut().expect("checked above");
    let last = &path[path.len() - 1];
    if !table.contains_key(last) && last != "output" {
        return Err(LabError::Config(format!("unknown key '{}'", path.join("."))));
    }
    table.insert(last.clone(), value);
    Ok(())
}

fn merge(base: &mut toml::Value, overlay: toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(existing) if existing.is_table() && v.is_table() => merge(existing, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for id in ExperimentId::ALL {
            let cfg = ExperimentConfig::preset(id);
            assert!(cfg.violations().is_empty(), "{id}: {:?}", cfg.violations());
        }
    }

    #[test]
    fn presets_round_trip_through_toml() {
        for id in ExperimentId::ALL {
            let cfg = ExperimentConfig::preset(id);
            let back = ExperimentConfig::resolve(Some(&cfg.to_toml()), None, &[]).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn overrides_take_precedence() {
        let file = "experiment = \"poly-decay-kdv\"\n[solver]\ndt = 0.0025\n";
        let cfg = ExperimentConfig::resolve(Some(file), None, &["solver.dt=0.001".into(), "seed=7".into()]).unwrap();
        assert_eq!(cfg.solver.dt, 0.001);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.solver.t_end, 1.0);
    }

    #[test]
    fn override_parses_strings_and_arrays() {
        let cfg = ExperimentConfig::resolve(
            None,
            Some(ExperimentId::PolyDecayZk),
            &["solver.dealias=none".into(), "weights.sigma=[1.0, 0.5]".into()],
        )
        .unwrap();
        assert_eq!(cfg.solver.dealias, Dealias::None);
        assert_eq!(cfg.weights.sigma, [1.0, 0.5]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::resolve(None, Some(ExperimentId::PolyDecayZk), &["solver.dtt=1".into()]).is_err());
        assert!(ExperimentConfig::resolve(Some("experiment = \"psido-suite\"\nbogus = 1\n"), None, &[]).is_err());
        assert!(ExperimentConfig::resolve(None, None, &[]).is_err());
    }

    #[test]
    fn s_grid_reaches_floor_two_r() {
        let w = ExperimentConfig::preset(ExperimentId::PolyDecayZk).weights;
        assert_eq!(w.s_grid(), vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0]);
    }
}
