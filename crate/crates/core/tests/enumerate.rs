//! Cross-checks of the enumeration backends against an independent map
//! counter and against the effective-weight (gasket) description.

use loopmaps::enumerate::{
    enumerate_maps, gasket_law_check, EnumerationOptions, EnumerationProvider, PartitionTable,
};
use loopmaps::weights::{effective_weights, WeightTriplet};

/// Counts rooted planar maps with `e` edges from first principles: a map is
/// a permutation pair (σ, α) on 2e darts with α a fixed-point-free
/// involution, counted transitive and genus-0 via the Euler relation, with
/// one dart marked.  Fixing α to the standard involution and dividing the
/// number of admissible σ by 2^(e-1)(e-1)! removes the relabeling freedom.
/// No peeling, no generating functions — a completely separate route.
fn rooted_maps_permutation_count(e: usize) -> u64 {
    let n = 2 * e;
    let alpha = |d: usize| d ^ 1; // (0 1)(2 3)...
    let mut sigma: Vec<usize> = (0..n).collect();
    let mut admissible: u64 = 0;

    fn cycles(perm: &[usize]) -> usize {
        let mut seen = vec![false; perm.len()];
        let mut count = 0;
        for start in 0..perm.len() {
            if !seen[start] {
                count += 1;
                let mut d = start;
                while !seen[d] {
                    seen[d] = true;
                    d = perm[d];
                }
            }
        }
        count
    }

    // Heap's algorithm over all n! vertex rotations
    let mut stack = vec![0usize; n];
    let mut i = 0;
    loop {
        // test current sigma
        let vertices = cycles(&sigma);
        let sig_alpha: Vec<usize> = (0..n).map(|d| sigma[alpha(d)]).collect();
        let faces = cycles(&sig_alpha);
        if vertices + faces == e + 2 {
            // genus 0; check transitivity of ⟨σ, α⟩
            let mut seen = vec![false; n];
            let mut todo = vec![0usize];
            seen[0] = true;
            let mut reached = 1;
            while let Some(d) = todo.pop() {
                for next in [sigma[d], alpha(d)] {
                    if !seen[next] {
                        seen[next] = true;
                        reached += 1;
                        todo.push(next);
                    }
                }
            }
            if reached == n {
                admissible += 1;
            }
        }
        // advance Heap's algorithm
        loop {
            if i >= n {
                let denom: u64 = (1..e as u64).product::<u64>() << (e - 1);
                return admissible / denom;
            }
            if stack[i] < i {
                if i % 2 == 0 {
                    sigma.swap(0, i);
                } else {
                    sigma.swap(stack[i], i);
                }
                stack[i] += 1;
                i = 0;
                break;
            }
            stack[i] = 0;
            i += 1;
        }
    }
}

#[test]
fn census_reproduces_classical_rooted_map_counts() {
    // all faces weighted 1, no decorations: the truncated coefficients are
    // plain counts of rooted maps by edge number and root-face degree
    let t = WeightTriplet::new(vec![1.0; 8], 0.0, 0.0).unwrap();
    let table = PartitionTable::new(&t, 4);
    for e in 1..=4usize {
        let from_peeling: f64 = (1..=2 * e)
            .map(|p| {
                let c = table.coeff(p, e);
                assert!(c.is_integer());
                c.to_integer().to_string().parse::<f64>().unwrap()
            })
            .sum();
        let oracle = rooted_maps_permutation_count(e) as f64;
        assert_eq!(from_peeling, oracle, "e = {e}");
    }
    // the classical sequence itself, as a guard on the guard
    assert_eq!(rooted_maps_permutation_count(1), 2);
    assert_eq!(rooted_maps_permutation_count(2), 9);
    assert_eq!(rooted_maps_permutation_count(3), 54);
    assert_eq!(rooted_maps_permutation_count(4), 378);
}

#[test]
fn exhaustive_search_agrees_with_the_count_recursion() {
    // spot-check that the explicit map constructions count the same way
    let t = WeightTriplet::new(vec![1.0; 6], 0.0, 0.0).unwrap();
    let table = PartitionTable::new(&t, 3);
    for p in 1..=4usize {
        let census = enumerate_maps(p, &t, &EnumerationOptions::new(3)).unwrap();
        for e in 1..=3usize {
            let count = census.completed.iter().filter(|m| m.events.len() == e).count();
            assert_eq!(
                table.coeff(p, e).to_integer().to_string(),
                count.to_string(),
                "p={p} e={e}"
            );
        }
    }
}

#[test]
fn subcritical_partition_stabilizes_quickly() {
    let t = WeightTriplet::builtin_subcritical();
    let table = PartitionTable::new(&t, 16);
    let at_12 = table.lower_bound_f64(1, 12);
    let at_16 = table.lower_bound_f64(1, 16);
    assert!(at_12 > 1e-3);
    assert!(
        ((at_16 - at_12) / at_16).abs() < 1e-6,
        "p=1 partition not settled to 6 digits by budget 12: {at_12} vs {at_16}"
    );
    // frontier mass dies off geometrically
    let open_8 = table.open_mass_f64(1, 8);
    let open_16 = table.open_mass_f64(1, 16);
    assert!(open_16 < 1e-2 * open_8);
}

#[test]
fn gasket_marginal_matches_effective_weights() {
    let t = WeightTriplet::builtin_subcritical();
    // well-converged partition functions feeding the fixed-point sums
    let provider = EnumerationProvider::new(&t, 32, 16).unwrap();
    let ew = effective_weights(&t, &provider, 8).unwrap();
    let report = gasket_law_check(1, 6, &t, &ew.qhat).unwrap();
    assert!(!report.rows.is_empty());
    // every gasket signature's enumerated mass reproduces the product of
    // effective weights; enumeration only loses interior mass, so it sits
    // just below the product, within a truncation scale that grows with
    // the number of gasket faces (each face's interiors share the budget)
    let mut total_mass = 0.0;
    let mut total_hat = 0.0;
    for (key, mass, hat) in &report.rows {
        assert!(*mass <= hat * (1.0 + 1e-9), "gasket {key}: {mass} > {hat}");
        // signatures near the budget leave their interiors no room, and
        // faces beyond the bare-weight support are pure ring corrections
        // with slowly converging interiors, so the sharp per-row check is
        // for the shallow, small-face signatures
        let events: Vec<&str> = key.split(' ').collect();
        let shallow = events.len() <= 3
            && events.iter().all(|s| !s.starts_with('C') || s.len() == 2 && *s <= "C3");
        if shallow {
            assert!(
                hat - mass <= 1e-8 + 2e-3 * events.len() as f64 * hat,
                "gasket {key}: {mass} vs {hat}"
            );
        }
        total_mass += mass;
        total_hat += hat;
    }
    assert!(total_mass >= 0.995 * total_hat);
}
