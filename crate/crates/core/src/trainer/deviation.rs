use crate::error::{Error, Result};
use crate::stats::{mean, std_population};

fn check_grid(scores: &[Vec<f64>], min_models: usize, min_seeds: usize) -> Result<()> {
    if scores.len() < min_models {
        return Err(Error::invalid(format!("need at least {min_models} models, got {}", scores.len())));
    }
    let r = scores[0].len();
    if r < min_seeds || scores.iter().any(|row| row.len() != r) {
        return Err(Error::invalid(format!(
            "score grid must be rectangular with at least {min_seeds} eval seeds"
        )));
    }
    if scores.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("score grid contains non-finite values"));
    }
    Ok(())
}

/// Internal model deviation: mean over models of the standard deviation of
/// each model's scores across evaluation seeds. Rows are models.
pub fn imd(scores: &[Vec<f64>]) -> Result<f64> {
    check_grid(scores, 1, 2)?;
    Ok(mean(&scores.iter().map(|row| std_population(row)).collect::<Vec<_>>()))
}

/// Cross model deviation: standard deviation across models of each model's
/// mean score.
pub fn cmd(scores: &[Vec<f64>]) -> Result<f64> {
    check_grid(scores, 2, 1)?;
    Ok(std_population(&scores.iter().map(|row| mean(row)).collect::<Vec<_>>()))
}
