use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sample_circular, System};
use crate::error::{Error, Result};
use crate::integrate::{rk45_reference, TimeGrid, Trajectory};
use crate::rng::{substream, DATA};

const MAX_ATTEMPTS: u64 = 1000;

/// How initial conditions are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampler {
    /// Every coordinate uniform on `[low, high]`.
    UniformBox { low: f64, high: f64 },
    /// Perturbed circular three-body orbit.
    CircularOrbit {
        radius: [f64; 2],
        momentum_scale: [f64; 2],
    },
}

impl Sampler {
    pub fn default_for(system: &System) -> Self {
        match system {
            System::Nonseparable(_) => Sampler::UniformBox {
                low: -1.0,
                high: 1.0,
            },
            System::ThreeBody(_) => Sampler::CircularOrbit {
                radius: [0.9, 1.2],
                momentum_scale: [0.8, 1.2],
            },
        }
    }

    fn sample(&self, system: &System, rng: &mut rand_chacha::ChaCha8Rng) -> Result<crate::integrate::State> {
        use rand::Rng;
        match (self, system) {
            (Sampler::UniformBox { low, high }, _) => {
                if !(low < high) {
                    return Err(Error::Structural(format!("empty sampling box [{low}, {high}]")));
                }
                let d = system.dim();
                let y: Vec<f64> = (0..2 * d).map(|_| rng.gen_range(*low..=*high)).collect();
                Ok(crate::integrate::State::from_slice(&y))
            }
            (Sampler::CircularOrbit { radius, momentum_scale }, System::ThreeBody(params)) => {
                Ok(sample_circular(rng, params, *radius, *momentum_scale))
            }
            (Sampler::CircularOrbit { .. }, _) => Err(Error::Structural(
                "circular-orbit sampling requires the three-body system".into(),
            )),
        }
    }
}

/// Everything needed to regenerate a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub system: System,
    pub sampler: Sampler,
    pub start: f64,
    pub end: f64,
    pub step: f64,
    pub count: usize,
    pub rel_tol: f64,
    /// Distinguishes independent datasets drawn from one seed.
    #[serde(default)]
    pub stream: u64,
}

impl DatasetSpec {
    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::over(self.start, self.end, self.step)
    }

    pub fn nonseparable_train() -> Self {
        Self {
            system: System::nonseparable(),
            sampler: Sampler::default_for(&System::nonseparable()),
            start: 0.0,
            end: 3.0,
            step: 0.1,
            count: 120,
            rel_tol: 1e-10,
            stream: 0,
        }
    }

    pub fn nonseparable_test() -> Self {
        Self {
            end: 60.0,
            count: 30,
            stream: 1,
            ..Self::nonseparable_train()
        }
    }

    pub fn three_body_train(end: f64) -> Self {
        Self {
            system: System::three_body(),
            sampler: Sampler::default_for(&System::three_body()),
            start: 0.0,
            end,
            step: 0.1,
            count: 30,
            rel_tol: 1e-9,
            stream: 0,
        }
    }

    pub fn three_body_test() -> Self {
        Self {
            end: 30.0,
            stream: 1,
            ..Self::three_body_train(30.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub spec: DatasetSpec,
    pub grid: TimeGrid,
    pub seed: u64,
    /// `(trajectory index, attempts)` for samples that had to be redrawn.
    #[serde(default)]
    pub redrawn: Vec<(usize, u64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub trajectories: Vec<Trajectory>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.meta.grid
    }

    pub fn dim(&self) -> usize {
        self.trajectories[0].dim()
    }

    pub fn system(&self) -> &System {
        &self.meta.spec.system
    }

    /// A dataset restricted to the first `n` trajectories.
    pub fn take(&self, n: usize) -> Self {
        Self {
            meta: self.meta.clone(),
            trajectories: self.trajectories.iter().take(n).cloned().collect(),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let meta = serde_json::to_string_pretty(&self.meta)?;
        let path = dir.join("meta.json");
        fs::write(&path, meta).map_err(|e| Error::io(&path, e))?;
        for (i, t) in self.trajectories.iter().enumerate() {
            t.write_csv(&dir.join(trajectory_file(i)))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("meta.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let meta: DatasetMeta =
            serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
        let trajectories = (0..meta.spec.count)
            .map(|i| Trajectory::read_csv(&dir.join(trajectory_file(i))))
            .collect::<Result<Vec<_>>>()?;
        for (i, t) in trajectories.iter().enumerate() {
            if t.grid.steps != meta.grid.steps || (t.grid.step - meta.grid.step).abs() > 1e-12 * meta.grid.step {
                return Err(Error::format(
                    dir.join(trajectory_file(i)),
                    "grid differs from meta.json",
                ));
            }
        }
        Ok(Self { meta, trajectories })
    }
}

fn trajectory_file(i: usize) -> String {
    format!("traj_{i:04}.csv")
}

/// Integrates `spec.count` reference trajectories. Trajectory `i` draws its
/// initial condition from the substream `(seed, data, stream, i, attempt)`;
/// an initial condition whose integration stalls is redrawn with the next
/// attempt number.
pub fn generate_dataset(spec: &DatasetSpec, seed: u64) -> Result<Dataset> {
    if spec.count == 0 {
        return Err(Error::Structural("dataset count must be at least 1".into()));
    }
    spec.system.validate()?;
    let grid = spec.grid()?;
    let results: Vec<Result<(Trajectory, u64)>> = (0..spec.count)
        .into_par_iter()
        .map(|i| {
            for attempt in 0..MAX_ATTEMPTS {
                let mut rng = substream(seed, &[DATA, spec.stream, i as u64, attempt]);
                let init = spec.sampler.sample(&spec.system, &mut rng)?;
                match rk45_reference(&spec.system, &init, &grid, spec.rel_tol) {
                    Ok(t) => return Ok((t, attempt)),
                    Err(Error::Stiffness { t }) => {
                        log::warn!("trajectory {i}: step size underflow at t={t}, redrawing");
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(Error::Stiffness { t: f64::NAN })
        })
        .collect();
    let mut trajectories = Vec::with_capacity(spec.count);
    let mut redrawn = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        let (t, attempts) = r.map_err(|e| match e {
            Error::Stiffness { t } => Error::Stiffness { t },
            other => Error::Structural(format!("trajectory {i}: {other}")),
        })?;
        if attempts > 0 {
            redrawn.push((i, attempts));
        }
        trajectories.push(t);
    }
    Ok(Dataset {
        meta: DatasetMeta {
            spec: spec.clone(),
            grid,
            seed,
            redrawn,
        },
        trajectories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_train_shape() {
        let spec = DatasetSpec {
            count: 4,
            ..DatasetSpec::nonseparable_train()
        };
        let d = generate_dataset(&spec, 5).unwrap();
        assert_eq!(d.len(), 4);
        assert!(d.trajectories.iter().all(|t| t.states.len() == 31));
    }

    #[test]
    fn zero_count_is_rejected() {
        let spec = DatasetSpec {
            count: 0,
            ..DatasetSpec::nonseparable_train()
        };
        assert!(matches!(generate_dataset(&spec, 1), Err(Error::Structural(_))));
    }

    #[test]
    fn regeneration_is_bit_identical_and_round_trips() {
        let spec = DatasetSpec {
            count: 3,
            end: 1.0,
            ..DatasetSpec::three_body_train(1.0)
        };
        let a = generate_dataset(&spec, 42).unwrap();
        let b = generate_dataset(&spec, 42).unwrap();
        assert_eq!(a, b);
        let dir = tempfile::tempdir().unwrap();
        a.save(dir.path()).unwrap();
        let c = Dataset::load(dir.path()).unwrap();
        assert_eq!(a.trajectories, c.trajectories);
        assert_eq!(a.meta, c.meta);
    }

    #[test]
    fn ground_truth_conserves_energy() {
        for spec in [
            DatasetSpec {
                count: 4,
                ..DatasetSpec::nonseparable_train()
            },
            DatasetSpec {
                count: 4,
                ..DatasetSpec::three_body_train(3.0)
            },
        ] {
            let d = generate_dataset(&spec, 8).unwrap();
            for t in &d.trajectories {
                let h0 = spec.system.hamiltonian(t.initial()).unwrap();
                for s in &t.states {
                    let h = spec.system.hamiltonian(s).unwrap();
                    assert!((h - h0).abs() <= 1e-6 * h0.abs(), "{h} vs {h0}");
                }
            }
        }
    }
}
