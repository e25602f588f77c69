use std::fmt;

pub const CONFIG: u8 = 2;
pub const INVARIANT: u8 = 3;
pub const NUMERICAL: u8 = 4;

/// Bad input: config file, flags, or dataset.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// A check reported failure without any error being raised.
#[derive(Debug)]
pub struct CheckFailed(pub String);

impl fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CheckFailed {}

pub fn code_for(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return CONFIG;
    }
    if err.downcast_ref::<CheckFailed>().is_some() {
        return INVARIANT;
    }
    match err.downcast_ref::<sdna::Error>() {
        Some(e) => core_code(e),
        None => 1,
    }
}

pub fn core_code(e: &sdna::Error) -> u8 {
    use sdna::Error::*;
    match e {
        Invariant(_) => INVARIANT,
        NonFinite(_) | Factorization { .. } | InnerSolver { .. } | Divergence { .. } => NUMERICAL,
        Io(_) => 1,
        _ => CONFIG,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classifies_errors() {
        assert_eq!(code_for(&ConfigError("x".into()).into()), CONFIG);
        assert_eq!(
            code_for(&sdna::Error::Invariant("x".into()).into()),
            INVARIANT
        );
        assert_eq!(code_for(&sdna::Error::NonFinite("x").into()), NUMERICAL);
        assert_eq!(code_for(&sdna::Error::TooLarge("x".into()).into()), CONFIG);
        assert_eq!(code_for(&anyhow::anyhow!("other")), 1);
    }
}
