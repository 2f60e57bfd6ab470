use super::{ParseError, SourceParser};

/// McCabe complexity of a single function: one plus the number of decision
/// points (`if`/`elif`, loop headers, `and`/`or`, conditional expressions,
/// exception handlers, comprehension conditions).
pub fn cyclomatic_complexity(function_code: &str, parser: &dyn SourceParser) -> Result<usize, ParseError> {
    Ok(1 + parser.decision_points(function_code)?)
}
