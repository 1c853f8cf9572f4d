use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the modelling and optimization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("drive cycle row {row}: {reason}")]
    CycleRow { row: usize, reason: String },

    #[error("invalid drive cycle: {0}")]
    Cycle(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("invalid modulation configuration: {0}")]
    Modulation(String),

    #[error("frequency {frequency} Hz outside harmonic curve grid [{min}, {max}] Hz")]
    FrequencyOutOfGrid { frequency: f64, min: f64, max: f64 },

    #[error("empty spectrum window [{min}, {max}] Hz")]
    EmptyWindow { min: f64, max: f64 },

    #[error("no feasible chip area up to {cap} mm² for {switch} at n = {speed} rpm, M = {torque} Nm")]
    NoFeasibleArea {
        switch: String,
        speed: f64,
        torque: f64,
        cap: f64,
    },

    #[error("operating point n = {speed} rpm, M = {torque} Nm infeasible: {reason}")]
    InfeasiblePoint {
        speed: f64,
        torque: f64,
        reason: String,
    },

    #[error("no switching frequency on the grid satisfies the constraint")]
    NoFeasibleFrequency,

    #[error("design `{design}` cannot serve {} operating point(s): {}", .points.len(), format_points(.points))]
    UnservablePoints {
        design: String,
        points: Vec<(usize, f64, f64)>,
    },

    #[error("area factor {factor} below structural minimum {floor:.4} of family `{family}`")]
    BelowStructuralFloor {
        family: String,
        factor: f64,
        floor: f64,
    },

    #[error("cycle distance is zero; energy per distance undefined")]
    ZeroDistance,

    #[error("configuration error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

fn format_points(points: &[(usize, f64, f64)]) -> String {
    let shown: Vec<String> = points
        .iter()
        .take(8)
        .map(|(i, n, m)| format!("#{i} ({n:.1} rpm, {m:.1} Nm)"))
        .collect();
    let mut out = shown.join(", ");
    if points.len() > 8 {
        out.push_str(&format!(", ... {} more", points.len() - 8));
    }
    out
}

impl Error {
    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            already @ Error::Stage { .. } => already,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
