// probe: focused sweeps - "ddpg" mode sweeps ups/warmup; "cem" mode sweeps cem knobs
use leverage::agents::*;
use leverage::emulator::Emulator;
use leverage::market::{Env, EnvConfig, STATE_DIM};

fn train_pair(cfg: &EnvConfig, seed: u64, ups: usize, warm: f64) -> (f64, f64, f64) {
    let mut convs = (0.0, 0.0);
    let mut learned_biz = 0.0;
    for (i, m) in [(0usize, 10usize), (1, 0)] {
        let mut env = Env::new(cfg.clone()).unwrap();
        let em = Emulator::from_env(&env);
        let mut opts = TrainOpts::new(300, seed);
        opts.expand_m = m;
        opts.updates_per_step = ups;
        opts.actor_warmup_frac = warm;
        let mut agent =
            DdpgAgent::new(DdpgConfig::new(STATE_DIM, env.range(), cfg.gamma), seed).unwrap();
        let out = train_htlb_ddpg(&mut agent, &mut env, &em, &opts).unwrap();
        let c = out.curve.converged_return();
        if i == 0 {
            convs.0 = c;
            // learned policy business increment on eval seeds
            let mut ev = env.clone();
            let mut pol = ActorPolicy::from(&agent);
            let mut biz = 0.0;
            for j in 0..3u64 {
                biz += rollout_policy(&mut ev, eval_seed(j), &mut pol).unwrap().business_increment;
            }
            learned_biz = biz / 3.0;
        } else {
            convs.1 = c;
        }
    }
    (convs.0, convs.1, learned_biz)
}

fn main() {
    let mode = std::env::args().nth(1).unwrap_or_else(|| "ddpg".into());
    let cfg = EnvConfig::reference();
    if mode == "ddpg" {
        rayon::ThreadPoolBuilder::new().num_threads(2).build_global().ok();
        for (ups, warm) in [(3usize, 0.2f64)] {
            let (mut sh, mut sd) = (0.0, 0.0);
            let mut wins = 0;
            print!("ups {ups} warm {warm}: ");
            use rayon::prelude::*;
            let results: Vec<(f64, f64, f64)> =
                (1..=5u64).into_par_iter().map(|seed| train_pair(&cfg, seed, ups, warm)).collect();
            for (h, d, biz) in results {
                if h > d {
                    wins += 1;
                }
                sh += h / 5.0;
                sd += d / 5.0;
                print!("[{h:.0}/{d:.0} biz {biz:.0}] ");
            }
            println!("| means {sh:.0}/{sd:.0} margin {:+.1}% wins {wins}/5", 100.0 * (sh - sd) / sd.abs().max(1.0));
        }
    } else {
        for (pop, std, elite) in [(50usize, 0.08f64, 0.2f64), (50, 0.06, 0.2), (75, 0.08, 0.2), (50, 0.08, 0.4)] {
            let mut convs = Vec::new();
            for seed in 1..=5u64 {
                let mut env = Env::new(cfg.clone()).unwrap();
                let cem_cfg = CemTrainCfg { population: pop, elite_frac: elite, init_std: std, hidden: vec![100, 50] };
                let (_, out) = train_cem(&mut env, &cem_cfg, &TrainOpts::new(300, seed)).unwrap();
                convs.push(out.curve.converged_return().round());
            }
            println!("pop {pop} std {std} elite {elite}: {convs:?}");
        }
    }
}
