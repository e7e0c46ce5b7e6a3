//! Exhaustive monotonicity and submodularity check of the coverage value on
//! a small instance, and a deliberately broken value table it rejects.

use crowdsense::model::{check_set_function, check_submodular_and_monotone, CoverageInstance, TaskUniverse, UserId};

fn main() -> crowdsense::Result<()> {
    let universe = TaskUniverse::new(vec![1, 2, 1, 2, 1])?;
    let users = [vec![0, 1], vec![1, 2, 3], vec![3, 4], vec![0, 4], vec![1, 3]];
    let instance = CoverageInstance::new(universe, users.iter().enumerate().map(|(k, t)| (UserId(k as u32 + 1), t.clone())))?;
    println!("V(all) = {}", instance.coverage_value(&instance.user_ids())?);
    println!("coverage check: {:?}", check_submodular_and_monotone(&instance, 8)?);

    // Value squared is monotone but supermodular.
    let squared = check_set_function(4, 8, |mask| (mask.count_ones() as i64).pow(2))?;
    println!("squared-cardinality check: {squared:?}");
    Ok(())
}
