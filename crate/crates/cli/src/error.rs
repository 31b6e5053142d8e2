use ludict_core::archive::ArchiveError;
use ludict_core::dictionary::DictionaryError;
use ludict_core::features::FeatureError;
use ludict_core::sizing::SizingError;
use thiserror::Error;

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Bad input from the user: flags, manifests, corpus specs.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct ValidationError(pub String);

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    ValidationError(msg.into()).into()
}

/// Exit code for an error chain: 2 when any cause is a validation problem,
/// 3 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<ValidationError>() || cause.is::<FeatureError>() {
            return EXIT_VALIDATION;
        }
        if let Some(e) = cause.downcast_ref::<DictionaryError>() {
            if is_validation_dictionary_error(e) {
                return EXIT_VALIDATION;
            }
        }
        if let Some(e) = cause.downcast_ref::<SizingError>() {
            match e {
                SizingError::Dictionary(d) if is_validation_dictionary_error(d) => return EXIT_VALIDATION,
                SizingError::InvalidGrid(_)
                | SizingError::TooFewClasses(_)
                | SizingError::TooFewSignals { .. }
                | SizingError::DuplicateLabel(_)
                | SizingError::MissingPair(..)
                | SizingError::DuplicatePair(..)
                | SizingError::MissingSize(_) => return EXIT_VALIDATION,
                _ => {}
            }
        }
        if let Some(ArchiveError::Dictionary(e)) = cause.downcast_ref::<ArchiveError>() {
            if is_validation_dictionary_error(e) {
                return EXIT_VALIDATION;
            }
        }
    }
    EXIT_RUNTIME
}

fn is_validation_dictionary_error(e: &DictionaryError) -> bool {
    matches!(
        e,
        DictionaryError::DimensionMismatch { .. }
            | DictionaryError::InsufficientSignals { .. }
            | DictionaryError::MissingSize(_)
            | DictionaryError::TooFewDictionaries { .. }
            | DictionaryError::NoSignals
            | DictionaryError::UnknownLabel(_)
            | DictionaryError::SchemeMismatch { .. }
            | DictionaryError::DuplicateLabel(_)
    )
}
