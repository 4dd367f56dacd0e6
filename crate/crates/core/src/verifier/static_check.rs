//! Detectable-deviation checks for fixed sharing and the entry game.

use crate::entry::{u_f_of_n, EntryGame};
use crate::error::{Error, Result};
use crate::static_sharing::{StaticParams, punishment_terms};
use crate::traffic::{expectation, TrafficSpec};
use crate::utility::UtilityModel;

use super::lying::punishment_loss;
use super::{DeviationFinding, DeviationKindTag};

/// One finding per operator and reachable traffic level: deviating to the
/// full band earns at most `Ū(λ)` this slot and forfeits `u_o − u_f` for the
/// punishment window.
pub fn verify_static(
    model: &UtilityModel,
    traffic: &TrafficSpec,
    params: &StaticParams,
    discount: f64,
) -> Result<Vec<DeviationFinding>> {
    if !(0.0..1.0).contains(&discount) {
        return Err(Error::Domain(format!("discount must lie in [0, 1), got {discount}")));
    }
    let terms = punishment_terms(model, traffic, params)?;
    let widths = params.widths(model.bandwidth);
    let mut findings = Vec::new();
    for (i, dist) in traffic.operators.iter().enumerate() {
        let w = widths[i].mhz();
        let u_o = expectation(dist, |l| model.pi(w, l));
        let u_f = u_o - terms[i].cooperation_margin;
        for lambda in dist.reachable_levels() {
            let gain = (1.0 - discount) * (model.upper_utility(lambda) - model.pi(w, lambda));
            let loss = punishment_loss(discount, params.punishment, u_o, u_f);
            findings.push(DeviationFinding::exact(
                format!("op{};coop;lambda={}", i + 1, lambda),
                DeviationKindTag::Detectable,
                gain,
                loss,
            ));
        }
    }
    Ok(findings)
}

/// The static check with `n*` investors, plus the prospective operator
/// `n*+1` entering anyway: it would earn `u_f(n*+1)` against cost `c`.
pub fn verify_entry(model: &UtilityModel, game: &EntryGame, discount: f64) -> Result<Vec<DeviationFinding>> {
    let n = game.n_star();
    let dist = &game.params().traffic;
    let mut findings = Vec::new();
    if n >= 1 {
        let params = StaticParams::uniform(n, game.punishment(n))?;
        let traffic = TrafficSpec::uniform(n, dist.clone())?;
        findings.extend(verify_static(model, &traffic, &params, discount)?);
    }
    findings.push(DeviationFinding::exact(
        format!("entrant{};n={}", n + 1, n),
        DeviationKindTag::Detectable,
        u_f_of_n(n + 1, model, dist)?,
        game.params().cost,
    ));
    Ok(findings)
}
