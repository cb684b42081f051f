//! Command-line front end and HTTP service for hearthcast models.

pub mod server;

use hearthcast::metrics::PriceConfig;

pub const UNIT_PRICE_ENV: &str = "HEARTHCAST_UNIT_PRICE";

/// `base`, with the unit price replaced by `HEARTHCAST_UNIT_PRICE` when set.
pub fn price_with_env(base: PriceConfig) -> anyhow::Result<PriceConfig> {
    match std::env::var(UNIT_PRICE_ENV) {
        Ok(raw) => {
            let value: f64 = raw
                .trim()
                .parse()
                .map_err(|_| anyhow::anyhow!("{UNIT_PRICE_ENV}={raw:?} is not a number"))?;
            Ok(PriceConfig::new(value)?)
        }
        Err(std::env::VarError::NotPresent) => Ok(base),
        Err(e) => anyhow::bail!("{UNIT_PRICE_ENV}: {e}"),
    }
}
