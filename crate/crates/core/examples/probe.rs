use adaptdice_core::crossdomain::*;
use adaptdice_core::mdp::Policy;
use adaptdice_core::rng::derive_rng;

fn main() {
    for (n_states, n_actions) in [(3usize, 2usize), (4, 2), (5, 2), (3, 3)] {
        let mut gt_match = 0;
        let mut full = 0;
        let n = 10;
        for seed in 0..n {
            let setup = recovery_instance(100 + seed, n_states, n_actions, 500 + seed).unwrap();
            let gt = &setup.ground_truth;
            let pi = Policy::uniform(n_states, n_actions);
            let mut rng = derive_rng(seed, "probe", "init", 0);
            let init = MappingPair::random(n_states, n_actions, n_states, n_actions, &mut rng);
            let cap = 20_000_000;
            let oracle = exhaustive_mappings(&init, &setup.reward_tar, &setup.q_src, &pi, &setup.dataset, setup.gamma, cap).unwrap();
            let fit = optimize_mappings_restarts(&init, &setup.reward_tar, &setup.q_src, &pi, &setup.dataset, setup.gamma, 50, None, 5, &mut rng).unwrap();
            let visited = setup.dataset.touched_states();
            let o_gt = visited.iter().all(|&s| oracle.mapping.map_state(s) == gt.map_state(s))
                && setup.dataset.distinct_pairs().iter().all(|&(s,a)| oracle.mapping.map_action(s,a) == gt.map_action(s,a));
            let d_o = (fit.loss - oracle.loss).abs() < 1e-12;
            if o_gt { gt_match += 1; }
            if o_gt && d_o && visited.iter().all(|&s| fit.mapping.map_state(s) == gt.map_state(s)) { full += 1; }
        }
        println!("states={n_states} actions={n_actions}: oracle==gt {gt_match}/{n}, full {full}/{n}");
    }
}
