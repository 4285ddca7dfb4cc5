use super::RankError;

fn gain(grade: u8) -> f64 {
    2f64.powi(i32::from(grade)) - 1.0
}

/// DCG@n = Σ_{i=1..n} (2^grade_i − 1) / log2(1 + i), summed over at most
/// `grades.len()` positions.
pub fn dcg_at_n(grades: &[u8], n: usize) -> Result<f64, RankError> {
    if n < 1 {
        return Err(RankError::InvalidCutoff(n));
    }
    Ok(grades
        .iter()
        .take(n)
        .enumerate()
        .map(|(i, &g)| gain(g) / ((i + 2) as f64).log2())
        .sum())
}

/// DCG of the grade-descending permutation.
pub fn ideal_dcg_at_n(grades: &[u8], n: usize) -> Result<f64, RankError> {
    let mut ideal = grades.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    dcg_at_n(&ideal, n)
}

/// DCG@n over ideal DCG@n; 1 when the ideal DCG is 0.
pub fn ndcg_at_n(grades: &[u8], n: usize) -> Result<f64, RankError> {
    let ideal = ideal_dcg_at_n(grades, n)?;
    if ideal == 0.0 {
        return Ok(1.0);
    }
    Ok(dcg_at_n(grades, n)? / ideal)
}
