//! Fixtures shared by the benchmarks.

use eqsa_core::{
    generate_scenario, generate_suite, parse_question, GeneratorParams, PoolConfig, QuestionPool,
    Scenario,
};

pub fn scenario(seed: u64) -> Scenario {
    generate_scenario(seed, &GeneratorParams::default()).expect("default parameters are valid")
}

pub fn suite(seed: u64, count: usize) -> Vec<Scenario> {
    generate_suite(seed, count, &GeneratorParams::default()).expect("default parameters are valid")
}

/// A pool holding every question of `count` generated scenarios, renamed
/// apart so ids stay unique.
pub fn loaded_pool(count: usize) -> QuestionPool {
    let mut pool = QuestionPool::new(PoolConfig::default());
    for (i, s) in suite(17, count).iter().enumerate() {
        for q in s.questions() {
            let mut q = q.clone();
            q.question_id = format!("s{i}-{}", q.question_id).as_str().into();
            q.declared_deps.clear();
            let parsed = parse_question(&q, &Default::default());
            pool.add_question(parsed, &[], 0.0).expect("ids are unique");
        }
    }
    pool
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_holds_every_question() {
        assert_eq!(loaded_pool(4).entries().count(), 20);
    }
}
