//! Built-in scalar example systems, with closed-form oracles where the
//! dynamics are linear.

use crate::error::{Error, Result};
use crate::system::{EnvelopeConfig, EnvelopesConfig, ImpulsiveSystem, SystemConfig};

/// `ẋ = a x + u`, `x(τ) = jump_factor · x(τ⁻)`; see
/// [`crate::simulate::closed_form_linear_impulsive`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearOracle {
    pub a: f64,
    pub jump_factor: f64,
    /// The system ignores `u`, so the oracle only applies to `u ≡ 0`.
    pub zero_input_only: bool,
}

#[derive(Debug, Clone)]
pub struct Example {
    pub name: &'static str,
    pub summary: &'static str,
    pub config: SystemConfig,
    pub oracle: Option<LinearOracle>,
}

impl Example {
    pub fn system(&self) -> Result<ImpulsiveSystem> {
        self.config.build()
    }
}

fn env(n: &str, nu: &str) -> Option<EnvelopeConfig> {
    Some(EnvelopeConfig {
        n: n.into(),
        nu: nu.into(),
    })
}

fn scalar(name: &str, flow: &str, jump: &str, flow_env: (&str, &str), jump_env: (&str, &str)) -> SystemConfig {
    SystemConfig {
        name: name.into(),
        dim_x: 1,
        dim_u: 1,
        flow: vec![flow.into()],
        jump: vec![jump.into()],
        envelopes: EnvelopesConfig {
            flow: env(flow_env.0, flow_env.1),
            jump: env(jump_env.0, jump_env.1),
        },
    }
}

pub fn builtin_examples() -> Vec<Example> {
    vec![
        Example {
            name: "LIN-CONTRACT",
            summary: "x' = -x + u, jump x -> x/2; strongly iISS",
            config: scalar("LIN-CONTRACT", "-x1 + u1", "-x1 / 2", ("r + 1", "r"), ("r", "r")),
            oracle: Some(LinearOracle {
                a: -1.0,
                jump_factor: 0.5,
                zero_input_only: false,
            }),
        },
        Example {
            name: "PURE-JUMP",
            summary: "x' = 0, jump x -> x/2; decays only through jumps",
            config: scalar("PURE-JUMP", "0", "-x1 / 2", ("r", "r"), ("r", "r")),
            oracle: Some(LinearOracle {
                a: 0.0,
                jump_factor: 0.5,
                zero_input_only: true,
            }),
        },
        Example {
            name: "BILINEAR",
            summary: "x' = -x + x u, jump x -> x/2; iISS but not ISS",
            config: scalar("BILINEAR", "-x1 + x1 * u1", "-x1 / 2", ("r", "r"), ("r", "r")),
            oracle: None,
        },
        Example {
            name: "DOUBLE-JUMP",
            summary: "x' = -x, jump x -> 2x; unstable under frequent jumps",
            config: scalar("DOUBLE-JUMP", "-x1", "x1", ("r", "r"), ("r", "r")),
            oracle: Some(LinearOracle {
                a: -1.0,
                jump_factor: 2.0,
                zero_input_only: true,
            }),
        },
        Example {
            name: "ZERO",
            summary: "x' = 0, no jump effect",
            config: scalar("ZERO", "0", "0", ("0", "r"), ("0", "r")),
            oracle: Some(LinearOracle {
                a: 0.0,
                jump_factor: 1.0,
                zero_input_only: true,
            }),
        },
    ]
}

/// Looks up a built-in example by name (case-insensitive).
pub fn example(name: &str) -> Result<Example> {
    builtin_examples()
        .into_iter()
        .find(|e| e.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| {
            let names: Vec<_> = builtin_examples().iter().map(|e| e.name).collect();
            Error::Invalid(format!("unknown example '{name}' (known: {})", names.join(", ")))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::impulses::ImpulseSequence;
    use crate::inputs::{HybridInput, InputSignal};
    use crate::simulate::{closed_form_linear_impulsive, max_abs_error, simulate};
    use crate::system::{check_al_bound, AlRanges, Which};

    #[test]
    fn all_examples_build_and_satisfy_envelopes() {
        for ex in builtin_examples() {
            let sys = ex.system().unwrap();
            assert_eq!(sys.name(), ex.name);
            for which in [Which::Flow, Which::Jump] {
                let r = check_al_bound(&sys, which, 2000, AlRanges::default(), 1).unwrap();
                assert!(r.pass, "{} {:?}: {:?}", ex.name, which, r.worst);
            }
        }
    }

    #[test]
    fn oracles_agree_with_simulator() {
        let sigma = ImpulseSequence::periodic(0.7, 0.3).unwrap();
        for ex in builtin_examples() {
            let Some(o) = ex.oracle else { continue };
            let u = if o.zero_input_only {
                InputSignal::zero(1)
            } else {
                InputSignal::from_pieces(1, vec![0.5, 2.0], vec![vec![1.5], vec![0.0]]).unwrap()
            };
            let w = HybridInput::new(u, sigma.clone());
            let sys = ex.system().unwrap();
            let sim = simulate(&sys, 0.0, &[1.0], &w, 5.0, 1e-3).unwrap();
            let exact = closed_form_linear_impulsive(o.a, o.jump_factor, 0.0, 1.0, &w, 5.0, 1e-3).unwrap();
            assert!(max_abs_error(&sim, &exact).unwrap() < 1e-6, "{}", ex.name);
        }
    }

    #[test]
    fn pure_jump_depends_on_family() {
        let sys = example("pure-jump").unwrap().system().unwrap();
        let periodic = HybridInput::zero(1, ImpulseSequence::periodic(1.0, 1.0).unwrap());
        let tr = simulate(&sys, 0.0, &[4.0], &periodic, 3.5, 0.1).unwrap();
        assert_eq!(tr.last_state(), &[0.5]);
        let none = HybridInput::zero(1, ImpulseSequence::empty());
        let tr = simulate(&sys, 0.0, &[4.0], &none, 3.5, 0.1).unwrap();
        assert_eq!(tr.last_state(), &[4.0]);
    }

    #[test]
    fn unknown_name() {
        assert!(example("nope").is_err());
    }
}
