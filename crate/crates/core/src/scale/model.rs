use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// How one factor of `Ω_i = λ_i D_i A_i D_i'` is constrained across components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constraint {
    Equal,
    Varying,
    Identity,
}

impl Constraint {
    fn count(self, g: usize, per_component: usize) -> usize {
        match self {
            Constraint::Identity => 0,
            Constraint::Equal => per_component,
            Constraint::Varying => g * per_component,
        }
    }
}

/// The fourteen eigen-decomposed scale structures. The three letters give the
/// constraint on volume `λ`, shape `A` and orientation `D` in that order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ScaleModel {
    EII,
    VII,
    EEI,
    VEI,
    EVI,
    VVI,
    EEE,
    VEE,
    EVE,
    VVE,
    EEV,
    VEV,
    EVV,
    VVV,
}

impl ScaleModel {
    pub const ALL: [ScaleModel; 14] = [
        ScaleModel::EII,
        ScaleModel::VII,
        ScaleModel::EEI,
        ScaleModel::VEI,
        ScaleModel::EVI,
        ScaleModel::VVI,
        ScaleModel::EEE,
        ScaleModel::VEE,
        ScaleModel::EVE,
        ScaleModel::VVE,
        ScaleModel::EEV,
        ScaleModel::VEV,
        ScaleModel::EVV,
        ScaleModel::VVV,
    ];

    /// The ten structures available in mclust (excludes VEE, EVE, VVE, EVV).
    pub const MCLUST: [ScaleModel; 10] = [
        ScaleModel::EII,
        ScaleModel::VII,
        ScaleModel::EEI,
        ScaleModel::VEI,
        ScaleModel::EVI,
        ScaleModel::VVI,
        ScaleModel::EEE,
        ScaleModel::EEV,
        ScaleModel::VEV,
        ScaleModel::VVV,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScaleModel::EII => "EII",
            ScaleModel::VII => "VII",
            ScaleModel::EEI => "EEI",
            ScaleModel::VEI => "VEI",
            ScaleModel::EVI => "EVI",
            ScaleModel::VVI => "VVI",
            ScaleModel::EEE => "EEE",
            ScaleModel::VEE => "VEE",
            ScaleModel::EVE => "EVE",
            ScaleModel::VVE => "VVE",
            ScaleModel::EEV => "EEV",
            ScaleModel::VEV => "VEV",
            ScaleModel::EVV => "EVV",
            ScaleModel::VVV => "VVV",
        }
    }

    fn letter(self, pos: usize) -> Constraint {
        match self.name().as_bytes()[pos] {
            b'E' => Constraint::Equal,
            b'V' => Constraint::Varying,
            _ => Constraint::Identity,
        }
    }

    pub fn volume(self) -> Constraint {
        self.letter(0)
    }

    pub fn shape(self) -> Constraint {
        self.letter(1)
    }

    pub fn orientation(self) -> Constraint {
        self.letter(2)
    }

    /// Number of free scale parameters for `g` components in `p` dimensions.
    pub fn n_params(self, g: usize, p: usize) -> usize {
        self.volume().count(g, 1)
            + self.shape().count(g, p.saturating_sub(1))
            + self.orientation().count(g, p * p.saturating_sub(1) / 2)
    }
}

/// Free scale parameters of `model` with `g` components in `p` dimensions.
pub fn count_scale_params(model: ScaleModel, g: usize, p: usize) -> usize {
    model.n_params(g, p)
}

impl fmt::Display for ScaleModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScaleModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        ScaleModel::ALL
            .into_iter()
            .find(|m| m.name() == upper)
            .ok_or_else(|| Error::Input(format!("unknown scale model '{s}'")))
    }
}

impl TryFrom<String> for ScaleModel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Error> {
        s.parse()
    }
}

impl From<ScaleModel> for String {
    fn from(m: ScaleModel) -> String {
        m.name().to_string()
    }
}
