//! Run configuration: a JSON file, overridden field by field by flags.

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Constants,
    Fiber,
    Bubbles,
    GroundState,
    MuSweep,
    Defocusing,
    Dynamics,
    Blowup,
}

/// Fully resolved settings of one run; echoed verbatim into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    #[serde(rename = "N")]
    pub dim: usize,
    pub q: f64,
    pub a: f64,
    pub mu: f64,
    /// Solver default when absent.
    pub grid_nodes: Option<usize>,
    pub r_max: Option<f64>,
    pub eps_list: Vec<f64>,
    pub mu_list: Vec<f64>,
    pub out: PathBuf,
    pub seed: u64,
    /// Profiles drawn by `fiber`.
    pub samples: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Initial dilation of the blow-up datum.
    pub s: f64,
    /// Width of the first cell of the blow-up grid.
    pub first_cell: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            dim: 3,
            q: 4.0,
            a: 1.0,
            mu: 1.0,
            grid_nodes: None,
            r_max: None,
            // small enough for the mountain-pass bound to drop below its limit
            eps_list: (0..8).map(|k| 0.1 / f64::powi(2.0, k)).collect(),
            mu_list: vec![2.0, 1.0, 0.5, 0.25, 0.1, 0.05],
            out: PathBuf::from("out"),
            seed: 0,
            samples: 8,
            dt: 1e-3,
            t_end: 1.0,
            s: 0.05,
            first_cell: 1e-12,
        }
    }
}

/// Flags shared by every command. Each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Space dimension
    #[arg(long = "N", value_name = "N")]
    pub dim: Option<usize>,
    /// Subcritical-side exponent, 2 < q < 2*
    #[arg(long)]
    pub q: Option<f64>,
    /// Prescribed L2 norm
    #[arg(long)]
    pub a: Option<f64>,
    /// Coupling of the |u|^{q-2}u term
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    /// Nodes of the solver or probe grid
    #[arg(long)]
    pub grid_nodes: Option<usize>,
    /// Outer radius of the solver or probe grid
    #[arg(long)]
    pub r_max: Option<f64>,
    /// Comma-separated, decreasing
    #[arg(long, value_delimiter = ',')]
    pub eps_list: Option<Vec<f64>>,
    /// Comma-separated
    #[arg(long, value_delimiter = ',')]
    pub mu_list: Option<Vec<f64>>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed of the random test profiles
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random profiles drawn by `fiber`
    #[arg(long)]
    pub samples: Option<usize>,
    /// Largest time step
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time of a propagation
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Initial dilation of the blow-up datum
    #[arg(long)]
    pub s: Option<f64>,
    /// First cell width of the blow-up grid
    #[arg(long)]
    pub first_cell: Option<f64>,
}

impl RunConfig {
    pub fn apply(mut self, command: Option<Command>, o: Overrides) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = o.$f { self.$f = v; } )* };
        }
        take!(dim, q, a, mu, eps_list, mu_list, out, seed, samples, dt, t_end, s, first_cell);
        if o.grid_nodes.is_some() {
            self.grid_nodes = o.grid_nodes;
        }
        if o.r_max.is_some() {
            self.r_max = o.r_max;
        }
        if command.is_some() {
            self.command = command;
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_the_file() {
        let file: RunConfig = serde_json::from_str(r#"{"command":"mu-sweep","N":4,"q":3.5,"seed":9}"#).unwrap();
        let o = Overrides {
            q: Some(3.2),
            ..Default::default()
        };
        let c = file.apply(None, o);
        assert_eq!(c.command, Some(Command::MuSweep));
        assert_eq!((c.dim, c.q, c.seed), (4, 3.2, 9));
        assert_eq!(c.a, 1.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"dimension":3}"#).is_err());
    }
}
