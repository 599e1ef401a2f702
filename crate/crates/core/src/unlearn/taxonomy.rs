//! Teacher-student view of unlearning methods.
//!
//! Each method is described by the teacher it uses on the deletion set
//! (how knowledge is measured and how it is corrupted), the teacher on the
//! retained set (measure and reference model) and which parameters it trains.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::unlearn::config::Method;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KnowledgeMeasure {
    Loss,
    Rep,
    Logit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Corruption {
    Grad,
    Data,
    Model,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Retention {
    OriginalF,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Density {
    Dense,
    Sparse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Placement {
    Internal,
    External,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamScope {
    pub density: Density,
    pub placement: Placement,
}

const DENSE: ParamScope = ParamScope { density: Density::Dense, placement: Placement::Internal };
const SPARSE: ParamScope = ParamScope { density: Density::Sparse, placement: Placement::Internal };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TeacherSpec {
    /// Measure used by the teacher on `D_f`; empty when `D_f` is not used.
    pub forget_km: &'static [KnowledgeMeasure],
    pub corrupt: Corruption,
    /// Measure used by the teacher on `D_r`; empty when `D_r` is not used.
    pub retain_km: &'static [KnowledgeMeasure],
    pub retain: Retention,
    pub scope: ParamScope,
}

use KnowledgeMeasure::{Logit, Loss, Rep};

impl Method {
    pub fn teacher_spec(self) -> TeacherSpec {
        match self {
            Method::ExactRetrain => TeacherSpec {
                forget_km: &[],
                corrupt: Corruption::None,
                retain_km: &[Loss],
                retain: Retention::OriginalF,
                scope: DENSE,
            },
            Method::NegGrad => TeacherSpec {
                forget_km: &[Loss],
                corrupt: Corruption::Grad,
                retain_km: &[],
                retain: Retention::None,
                scope: DENSE,
            },
            Method::RandLabel => TeacherSpec {
                forget_km: &[Loss],
                corrupt: Corruption::Data,
                retain_km: &[Loss],
                retain: Retention::OriginalF,
                scope: DENSE,
            },
            Method::BadT => TeacherSpec {
                forget_km: &[Logit],
                corrupt: Corruption::Model,
                retain_km: &[Logit],
                retain: Retention::OriginalF,
                scope: DENSE,
            },
            Method::Scrub => TeacherSpec {
                forget_km: &[Loss],
                corrupt: Corruption::Grad,
                retain_km: &[Loss, Rep],
                retain: Retention::OriginalF,
                scope: DENSE,
            },
            Method::Salun => TeacherSpec {
                forget_km: &[Loss],
                corrupt: Corruption::Data,
                retain_km: &[Loss],
                retain: Retention::OriginalF,
                scope: SPARSE,
            },
            Method::L1SparseFt => TeacherSpec {
                forget_km: &[],
                corrupt: Corruption::None,
                retain_km: &[Loss],
                retain: Retention::OriginalF,
                scope: SPARSE,
            },
        }
    }
}

fn km_str(km: &[KnowledgeMeasure]) -> String {
    if km.is_empty() {
        return "--".into();
    }
    km.iter()
        .map(|k| match k {
            Loss => "Loss",
            Rep => "Rep.",
            Logit => "Logit",
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

impl fmt::Display for TeacherSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let corrupt = match self.corrupt {
            Corruption::Grad => "Grad",
            Corruption::Data => "Data",
            Corruption::Model => "Model",
            Corruption::None => "--",
        };
        let retain = match self.retain {
            Retention::OriginalF => "f",
            Retention::None => "--",
        };
        let density = match self.scope.density {
            Density::Dense => "Dense",
            Density::Sparse => "Sparse",
        };
        let placement = match self.scope.placement {
            Placement::Internal => "Internal",
            Placement::External => "External",
        };
        write!(
            f,
            "{} | {} | {} | {} | {}, {}",
            km_str(self.forget_km),
            corrupt,
            km_str(self.retain_km),
            retain,
            density,
            placement
        )
    }
}
