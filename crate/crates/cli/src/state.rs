//! `--state` strings such as `number:3`, `coherent:1,-0.5` or `random:100,7@128`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use subplanck_core::dynamics::{coherent_wavefunction, evolve, fock_projection, EvolutionConfig};
use subplanck_core::fock::{make_coherent, make_compass, make_number, make_random, make_squeezed, make_thermal};
use subplanck_core::{ComplexAmplitude, DensityOp, PureState, ThermalParams};

use crate::Invalid;

/// Fock dimension used when nothing else is requested.
pub const DEFAULT_TRUNC: usize = 64;
/// Largest Fock dimension searched when projecting an evolved wave function.
pub const CHAOTIC_MAX_DIM: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateKind {
    Coherent { nu1: f64, nu2: f64 },
    Squeezed { u: f64 },
    Number { n: usize },
    Compass { a: f64 },
    Random { dim: usize, seed: u64 },
    Thermal { nbar: f64 },
    Chaotic { x0: f64, p0: f64, t_final: f64 },
}

/// A catalog state plus an optional Fock truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct StateSpec {
    pub kind: StateKind,
    pub trunc: Option<usize>,
}

pub enum Built {
    Pure(PureState<f64>),
    Mixed(DensityOp<f64>),
}

fn nums(s: &str) -> Result<Vec<f64>, Invalid> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| Invalid(format!("not a number: {p:?}")))).collect()
}

fn count(x: f64, what: &str) -> Result<usize, Invalid> {
    if x >= 0.0 && x.fract() == 0.0 {
        Ok(x as usize)
    } else {
        Err(Invalid(format!("{what} must be a non-negative integer, got {x}")))
    }
}

impl FromStr for StateSpec {
    type Err = Invalid;

    fn from_str(s: &str) -> Result<Self, Invalid> {
        let (body, trunc) = match s.split_once('@') {
            Some((b, t)) => (b, Some(t.parse::<usize>().map_err(|_| Invalid(format!("bad truncation {t:?}")))?)),
            None => (s, None),
        };
        let (name, args) = body.split_once(':').unwrap_or((body, ""));
        let v = nums(args)?;
        let need = |n: usize| -> Result<(), Invalid> {
            if v.len() == n {
                Ok(())
            } else {
                Err(Invalid(format!("state {name:?} takes {n} parameter(s), got {}", v.len())))
            }
        };
        let kind = match name {
            "vacuum" => {
                need(0)?;
                StateKind::Number { n: 0 }
            }
            "coherent" => {
                need(2)?;
                StateKind::Coherent { nu1: v[0], nu2: v[1] }
            }
            "squeezed" => {
                need(1)?;
                StateKind::Squeezed { u: v[0] }
            }
            "number" => {
                need(1)?;
                StateKind::Number { n: count(v[0], "number-state index")? }
            }
            "compass" => {
                need(1)?;
                StateKind::Compass { a: v[0] }
            }
            "random" => {
                if v.is_empty() || v.len() > 2 {
                    return Err(Invalid("random takes N or N,seed".into()));
                }
                let dim = count(v[0], "random dimension")?;
                let seed = v.get(1).map(|&x| count(x, "seed")).transpose()?.unwrap_or(0) as u64;
                StateKind::Random { dim, seed }
            }
            "thermal" => {
                need(1)?;
                StateKind::Thermal { nbar: v[0] }
            }
            "chaotic" => match v.len() {
                0 => StateKind::Chaotic { x0: -8.0, p0: 4.0, t_final: 5.0 },
                2 => StateKind::Chaotic { x0: v[0], p0: v[1], t_final: 5.0 },
                3 => StateKind::Chaotic { x0: v[0], p0: v[1], t_final: v[2] },
                _ => return Err(Invalid("chaotic takes nothing, x0,p0 or x0,p0,t_final".into())),
            },
            other => return Err(Invalid(format!("unknown state kind {other:?}"))),
        };
        let spec = StateSpec { kind, trunc };
        spec.check()?;
        Ok(spec)
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            StateKind::Coherent { nu1, nu2 } => write!(f, "coherent:{nu1},{nu2}")?,
            StateKind::Squeezed { u } => write!(f, "squeezed:{u}")?,
            StateKind::Number { n } => write!(f, "number:{n}")?,
            StateKind::Compass { a } => write!(f, "compass:{a}")?,
            StateKind::Random { dim, seed } => write!(f, "random:{dim},{seed}")?,
            StateKind::Thermal { nbar } => write!(f, "thermal:{nbar}")?,
            StateKind::Chaotic { x0, p0, t_final } => write!(f, "chaotic:{x0},{p0},{t_final}")?,
        }
        if let Some(t) = self.trunc {
            write!(f, "@{t}")?;
        }
        Ok(())
    }
}

impl TryFrom<String> for StateSpec {
    type Error = Invalid;
    fn try_from(s: String) -> Result<Self, Invalid> {
        s.parse()
    }
}

impl From<StateSpec> for String {
    fn from(s: StateSpec) -> String {
        s.to_string()
    }
}

impl StateSpec {
    fn check(&self) -> Result<(), Invalid> {
        let bad = |m: &str| Err(Invalid(m.to_string()));
        match self.kind {
            StateKind::Coherent { nu1, nu2 } if !(nu1.is_finite() && nu2.is_finite()) => bad("coherent amplitude must be finite"),
            StateKind::Squeezed { u } if !u.is_finite() => bad("squeezing must be finite"),
            StateKind::Compass { a } if !(a.is_finite() && a > 0.0) => bad("compass amplitude must be positive"),
            StateKind::Random { dim: 0, .. } => bad("random dimension must be positive"),
            StateKind::Thermal { nbar } if !(nbar >= 0.0 && nbar.is_finite()) => bad("thermal occupation must be non-negative"),
            StateKind::Chaotic { t_final, .. } if !(t_final >= 0.0) => bad("evolution time must be non-negative"),
            _ => Ok(()),
        }
    }

    pub fn with_trunc(mut self, trunc: Option<usize>) -> Self {
        if trunc.is_some() {
            self.trunc = trunc;
        }
        self
    }

    pub fn is_mixed(&self) -> bool {
        matches!(self.kind, StateKind::Thermal { .. })
    }

    pub fn build(&self) -> anyhow::Result<Built> {
        let dim = self.trunc.unwrap_or(DEFAULT_TRUNC);
        Ok(match self.kind {
            StateKind::Coherent { nu1, nu2 } => Built::Pure(make_coherent(ComplexAmplitude::new(nu1, nu2), dim)?),
            StateKind::Squeezed { u } => Built::Pure(make_squeezed(u, dim)?),
            StateKind::Number { n } => Built::Pure(make_number(n, dim)?),
            StateKind::Compass { a } => Built::Pure(make_compass(a, dim)?),
            StateKind::Random { dim: n, seed } => Built::Pure(make_random(n, seed)?),
            StateKind::Thermal { nbar } => Built::Mixed(make_thermal(ThermalParams::from_nbar(nbar)?, dim)?),
            StateKind::Chaotic { x0, p0, t_final } => {
                let base = EvolutionConfig::default();
                let cfg = EvolutionConfig::new(base.dt, t_final, base.grid, base.model)?;
                let psi = coherent_wavefunction(x0, p0, cfg.grid)?;
                let run = evolve(&psi, &cfg, 0)?;
                let proj = fock_projection(&run.state, self.trunc.unwrap_or(CHAOTIC_MAX_DIM))?;
                log::info!("chaotic state projected onto {} levels, leakage {:e}", proj.state.dim(), proj.leakage);
                Built::Pure(proj.state)
            }
        })
    }

    pub fn build_pure(&self) -> anyhow::Result<PureState<f64>> {
        match self.build()? {
            Built::Pure(p) => Ok(p),
            Built::Mixed(_) => Err(Invalid(format!("{self} is mixed; this command needs a pure state")).into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print_roundtrip() {
        for s in ["coherent:1,-0.5", "number:3@80", "random:100,7", "compass:2", "thermal:0.5", "chaotic:-8,4,5"] {
            let spec: StateSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert_eq!("vacuum".parse::<StateSpec>().unwrap().kind, StateKind::Number { n: 0 });
    }

    #[test]
    fn rejects_bad_input() {
        for s in ["number:-1", "number:1.5", "coherent:1", "compass:0", "thermal:-1", "dragon:1", "random:0"] {
            assert!(s.parse::<StateSpec>().is_err(), "{s}");
        }
    }
}
