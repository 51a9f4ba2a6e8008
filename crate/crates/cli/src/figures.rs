//! Bundled parameter sets for each reproducible figure.

use crate::config::RunConfig;
use crate::CliError;

pub const FIGURES: [&str; 7] = ["fig1a", "fig1c", "fig1e", "fig2a", "fig2b", "fig2e", "fig2f"];

/// Subcommand and configuration behind `figure`.
pub fn bundled(figure: &str) -> Result<(&'static str, RunConfig), CliError> {
    let (command, text) = match figure {
        "fig1a" => ("crystal", include_str!("../figures/fig1a.toml")),
        "fig1c" => ("modes", include_str!("../figures/fig1c.toml")),
        "fig1e" => ("couplings", include_str!("../figures/fig1e.toml")),
        "fig2a" => ("dynamics", include_str!("../figures/fig2a.toml")),
        "fig2b" => ("dynamics", include_str!("../figures/fig2b.toml")),
        "fig2e" => ("sweep", include_str!("../figures/fig2e.toml")),
        "fig2f" => ("sweep", include_str!("../figures/fig2f.toml")),
        other => return Err(CliError::Config(format!("unknown figure `{other}`"))),
    };
    Ok((command, RunConfig::from_toml(text, &[])?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_bundle_validates() {
        for figure in FIGURES {
            let (command, config) = bundled(figure).unwrap();
            config.validate_for(command).unwrap();
        }
        assert!(bundled("fig9z").is_err());
    }
}
