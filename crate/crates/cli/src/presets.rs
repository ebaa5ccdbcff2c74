//! Experiment presets, one per reproduced experiment.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Convergence of the miss-probability rate and the LLR rate.
    Fig1,
    /// Miss probability against `t` for several noise levels.
    FigPmissSigma,
    /// Fitted slope against `σ` with the `μ1²/2σ²` and `μ2²/2σ²` curves.
    FigExponentVsBound,
    /// `μ1 = 0`: fitted slopes against the type-space lower bound.
    FigMu1Zero,
    /// Synthetic dishwasher with measured power levels.
    FigDishwasher,
}

pub const ALL: [Preset; 5] = [
    Preset::Fig1,
    Preset::FigPmissSigma,
    Preset::FigExponentVsBound,
    Preset::FigMu1Zero,
    Preset::FigDishwasher,
];

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::FigPmissSigma => "fig_pmiss_sigma",
            Preset::FigExponentVsBound => "fig_exponent_vs_bound",
            Preset::FigMu1Zero => "fig_mu1zero",
            Preset::FigDishwasher => "fig_dishwasher",
        }
    }

    pub fn from_name(name: &str) -> Option<Preset> {
        ALL.into_iter().find(|p| p.name() == name)
    }

    /// Key/value layer applied above the defaults. `run.runs` is the full
    /// published run count; `run.scale` shrinks it.
    pub fn entries(self) -> Vec<(&'static str, &'static str)> {
        let uniform3 = [
            ("model.delta", "3"),
            ("model.mu1", "2"),
            ("model.mu2", "5"),
            ("model.sigma", "10"),
            ("model.mu0", "0"),
            ("run.alpha", "0.01"),
            ("run.runs", "100000"),
        ];
        let mut e: Vec<(&str, &str)> = Vec::new();
        match self {
            Preset::Fig1 => {
                e.extend(uniform3);
                e.push(("run.horizon", "300"));
            }
            Preset::FigPmissSigma => {
                e.extend(uniform3);
                e.push(("run.horizon", "200"));
                e.push(("run.sigma_grid", "10,15,20,25,30"));
            }
            Preset::FigExponentVsBound => {
                e.extend(uniform3);
                e.push(("run.horizon", "200"));
                e.push(("run.sigma_grid", "5,10,15,20,25,30,35,40,45,50"));
            }
            Preset::FigMu1Zero => e.extend([
                ("model.delta", "2"),
                ("model.mu1", "0"),
                ("model.mu2", "1"),
                ("model.sigma", "0.3"),
                ("model.mu0", "0"),
                ("run.alpha", "0.01"),
                ("run.runs", "100000"),
                ("run.horizon", "200"),
                ("run.sigma_grid", "0.2,0.25,0.3,0.33,0.37,0.4,0.45,0.5,0.55,0.6"),
                ("run.budget", "1000000"),
                ("run.tail_fraction", "0.8"),
            ]),
            Preset::FigDishwasher => e.extend([
                ("model.delta", "10"),
                ("model.mu1", "66"),
                ("model.mu2", "2200"),
                ("model.sigma", "90"),
                ("model.mu0", "90"),
                ("run.alpha", "0.01"),
                ("run.runs", "100000"),
                ("run.horizon", "30"),
                ("run.sigma_grid", "70,80,90,100,110"),
            ]),
        }
        e
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
