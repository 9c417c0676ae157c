use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::config::TrainConfig;
use super::loss::Perceptual;
use super::step::{train_step, TrainState};
use crate::data::SceneInstance;
use crate::error::{Error, Result};
use crate::model::GridGeometry;
use crate::real::Real;
use crate::tensor::checkpoint::Checkpoint;

pub const LOG_FILE: &str = "train_log.csv";
pub const CONFIG_FILE: &str = "config.json";
pub const LATEST: &str = "latest.ckpt";

pub fn checkpoint_name(step: u64) -> String {
    format!("step_{step:08}.ckpt")
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub step: u64,
    pub lr: f64,
    pub loss: f64,
    /// `(γ_self, γ_cross)` per block after the update.
    pub gammas: Vec<(f64, f64)>,
}

impl LogRow {
    pub fn header(layers: usize) -> String {
        let mut h = String::from("step,lr,loss");
        for l in 0..layers {
            h.push_str(&format!(",gamma_self_{l},gamma_cross_{l}"));
        }
        h
    }

    pub fn csv(&self) -> String {
        let mut s = format!("{},{},{}", self.step, self.lr, self.loss);
        for (a, b) in &self.gammas {
            s.push_str(&format!(",{a},{b}"));
        }
        s
    }
}

/// Where a run writes its log, config echo and checkpoints.
pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    pub fn new(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        fs::create_dir_all(&path).map_err(Error::io(&path))?;
        Ok(Self { path })
    }

    pub fn save<T: Real>(&self, state: &TrainState<T>) -> Result<PathBuf> {
        let ckpt = state.to_checkpoint();
        let p = self.path.join(checkpoint_name(state.step));
        ckpt.save(&p)?;
        ckpt.save(self.path.join(LATEST))?;
        Ok(p)
    }

    fn write_config(&self, config: &TrainConfig) -> Result<()> {
        let p = self.path.join(CONFIG_FILE);
        let text = serde_json::to_string_pretty(config).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(&p, text + "\n").map_err(Error::io(&p))
    }

    fn open_log(&self, layers: usize, append: bool) -> Result<BufWriter<File>> {
        let p = self.path.join(LOG_FILE);
        let exists = p.exists();
        let file = if append {
            OpenOptions::new().create(true).append(true).open(&p)
        } else {
            File::create(&p)
        }
        .map_err(Error::io(&p))?;
        let mut w = BufWriter::new(file);
        if !(append && exists) {
            writeln!(w, "{}", LogRow::header(layers)).map_err(Error::io(&p))?;
        }
        Ok(w)
    }
}

/// Loads a training state saved by [`RunDir::save`].
pub fn load_state<T: Real>(config: &TrainConfig, path: impl AsRef<Path>) -> Result<TrainState<T>> {
    TrainState::from_checkpoint(config, &Checkpoint::load(path)?)
}

pub struct RunOptions<'a, T: Real = f64> {
    /// State to continue from instead of a fresh model.
    pub resume: Option<TrainState<T>>,
    pub dir: Option<&'a RunDir>,
    /// Stop before `config.steps`; the learning-rate schedule still spans
    /// the full run.
    pub stop_at: Option<u64>,
}

impl<T: Real> Default for RunOptions<'_, T> {
    fn default() -> Self {
        Self {
            resume: None,
            dir: None,
            stop_at: None,
        }
    }
}

/// Trains until `config.steps` (or `stop_at`). With a run directory, writes
/// the config echo, a CSV log (appended when resuming) and checkpoints every
/// `checkpoint_every` steps plus at the end.
pub fn run<T: Real>(
    dataset: &[SceneInstance],
    config: &TrainConfig,
    perceptual: &dyn Perceptual<T>,
    options: RunOptions<'_, T>,
    mut on_step: impl FnMut(&LogRow),
) -> Result<TrainState<T>> {
    let RunOptions { resume, dir, stop_at } = options;
    let end = stop_at.map_or(config.steps, |s| s.min(config.steps));
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Data("training needs at least one scene".into()));
    }
    for scene in dataset {
        scene.validate()?;
    }
    let resuming = resume.is_some();
    let mut state = match resume {
        Some(s) => s,
        None => TrainState::new(config)?,
    };
    let grid = GridGeometry::<T>::new(config.model.grid);
    let mut log = match dir {
        Some(d) => {
            d.write_config(config)?;
            Some(d.open_log(config.model.layers, resuming)?)
        }
        None => None,
    };
    if let (Some(d), false) = (dir, resuming) {
        if config.steps == 0 || config.checkpoint_every > 0 {
            d.save(&state)?;
        }
    }
    while state.step < end {
        let (loss, lr) = train_step(&mut state, dataset, &grid, config, perceptual)?;
        let row = LogRow {
            step: state.step,
            lr,
            loss,
            gammas: state.model.gammas(),
        };
        if let (Some(w), Some(d)) = (log.as_mut(), dir) {
            let p = d.path.join(LOG_FILE);
            writeln!(w, "{}", row.csv()).map_err(Error::io(&p))?;
        }
        on_step(&row);
        if let Some(d) = dir {
            let periodic = config.checkpoint_every > 0 && state.step % config.checkpoint_every == 0;
            if periodic || state.step == end {
                d.save(&state)?;
            }
        }
    }
    if let (Some(mut w), Some(d)) = (log, dir) {
        w.flush().map_err(Error::io(d.path.join(LOG_FILE)))?;
    }
    Ok(state)
}
